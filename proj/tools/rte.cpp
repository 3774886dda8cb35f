#include <chrono>
#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rte/experiment.hpp"
#include "rte/repertoire.hpp"

namespace {

int cmd_evolve(const std::string& config_path, const std::string& out_path,
               std::optional<long> evals, std::optional<std::uint64_t> seed) {
    rte::ExperimentConfig cfg = rte::parse_config(config_path);
    if (evals)
        cfg.map_elites.evaluations = *evals;
    if (seed)
        cfg.seed = *seed;
    const auto begin = std::chrono::steady_clock::now();
    const rte::Repertoire grid = rte::map_elites(cfg.map_elites, cfg.seed);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    rte::save_repertoire(grid, out_path);
    std::cout << "evolved " << grid.size() << " actions on a " << grid.resolution() << "x"
              << grid.resolution() << " grid in " << elapsed << " s -> " << out_path << '\n';
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& agent, const std::string& repertoire,
            const std::string& out_dir, std::optional<int> replicates, std::optional<std::uint64_t> seed,
            std::optional<int> iters, std::optional<int> trees) {
    rte::ExperimentConfig cfg = rte::parse_config(config_path);
    cfg.agent = rte::parse_agent(agent);
    if (!repertoire.empty())
        cfg.repertoire_path = repertoire;
    if (replicates)
        cfg.replicates = *replicates;
    if (seed)
        cfg.seed = *seed;
    if (iters)
        cfg.params.mcts.iterations_per_tree = *iters;
    if (trees)
        cfg.params.mcts.trees = *trees;
    const rte::RunStats stats = rte::run_experiment(cfg, out_dir);
    std::cout << rte::agent_name(cfg.agent) << ": median episodes/target = "
              << rte::format_double(stats.median_episodes) << "  [" << rte::format_double(stats.p25)
              << ", " << rte::format_double(stats.p75) << "], failed targets = "
              << stats.failure_count << '\n';
    std::cout << "outputs in " << out_dir << '\n';
    return 0;
}

std::string episodes_path(const std::string& arg) {
    namespace fs = std::filesystem;
    if (fs::is_directory(arg))
        return (fs::path(arg) / "episodes.csv").string();
    return arg;
}

int cmd_stats(const std::string& a, const std::string& b) {
    const rte::RunStats stats_a = rte::read_episodes_csv(episodes_path(a));
    const rte::RunStats stats_b = rte::read_episodes_csv(episodes_path(b));
    std::cout << rte::render_compare(rte::compare(stats_a, stats_b));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Damage-recovery experiments for a differential-drive robot: repertoire "
                 "evolution, episodic planning agents and run statistics"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::optional<long> evals;
    std::optional<std::uint64_t> seed;

    CLI::App* evolve = app.add_subcommand("evolve", "Evolve an action repertoire and save it as CSV");
    evolve->add_option("--config", config_path, "configuration file")->required();
    evolve->add_option("--out", out_path, "output repertoire CSV")->required();
    evolve->add_option("--evals", evals, "evaluation budget override");
    evolve->add_option("--seed", seed, "seed override");

    std::string agent;
    std::string repertoire;
    std::string out_dir;
    std::optional<int> replicates;
    std::optional<int> iters;
    std::optional<int> trees;

    CLI::App* run = app.add_subcommand("run", "Run a target-chasing scenario with one agent");
    run->add_option("--config", config_path, "configuration file")->required();
    run->add_option("--agent", agent, "rte|gp-texplore|mcts|intact")->required();
    run->add_option("--repertoire", repertoire, "repertoire CSV (repertoire-based agents)");
    run->add_option("--out-dir", out_dir, "output directory")->required();
    run->add_option("--replicates", replicates, "replicate count override");
    run->add_option("--seed", seed, "seed override");
    run->add_option("--iters-per-tree", iters, "search iterations per tree override");
    run->add_option("--trees", trees, "parallel tree count override");

    std::string stats_a;
    std::string stats_b;
    CLI::App* stats = app.add_subcommand("stats", "Compare two runs (episodes.csv files or run directories)");
    stats->add_option("--a", stats_a, "first run")->required();
    stats->add_option("--b", stats_b, "second run")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (evolve->parsed())
            return cmd_evolve(config_path, out_path, evals, seed);
        if (run->parsed())
            return cmd_run(config_path, agent, repertoire, out_dir, replicates, seed, iters, trees);
        if (stats->parsed())
            return cmd_stats(stats_a, stats_b);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
