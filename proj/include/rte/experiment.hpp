#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rte/agents.hpp"
#include "rte/io.hpp"
#include "rte/repertoire.hpp"
#include "rte/stats.hpp"

namespace rte {

/// Margins used when placing targets: keep clear of walls and leave room
/// around obstacle centers.
inline constexpr double kTargetWallMargin = 40.0;
inline constexpr double kTargetObstacleMargin = 60.0;

/// Random equidistant target chain: each target sits at exactly `spacing`
/// from the previous one (the first from the start position), at a uniform
/// bearing, rejecting placements outside the margins.
inline std::vector<Vec2> sample_targets(const Arena& arena, const Vec2& start, int count,
                                        double spacing, std::mt19937_64& rng) {
    if (spacing >= arena.width)
        throw std::invalid_argument("sample_targets: spacing must be smaller than the arena width");
    std::uniform_real_distribution<double> bearing(-kPi, kPi);
    std::vector<Vec2> targets;
    targets.reserve(static_cast<std::size_t>(count));
    Vec2 prev = start;
    int consecutive_rejects = 0;
    while (static_cast<int>(targets.size()) < count) {
        const double phi = bearing(rng);
        const Vec2 cand{prev.x + spacing * std::cos(phi), prev.y + spacing * std::sin(phi)};
        bool ok = cand.x >= kTargetWallMargin && cand.x <= arena.width - kTargetWallMargin &&
                  cand.y >= kTargetWallMargin && cand.y <= arena.height - kTargetWallMargin;
        for (const Obstacle& o : arena.obstacles) {
            if (!ok)
                break;
            ok = distance(cand, {o.x, o.y}) >= kTargetObstacleMargin;
        }
        if (ok) {
            targets.push_back(cand);
            prev = cand;
            consecutive_rejects = 0;
        } else if (++consecutive_rejects >= 1000) {
            throw std::runtime_error("sample_targets: 1000 consecutive rejections; "
                                     "arena too constrained for the requested spacing");
        }
    }
    return targets;
}

struct ExperimentConfig {
    AgentKind agent{AgentKind::rte};
    std::string repertoire_path;
    DamageModel damage{1.0, 0.5};
    Arena arena = default_arena();
    int targets{30};
    double target_spacing{200.0};
    int replicates{50};
    std::uint64_t seed{1};
    AgentParams params;
    MapElitesParams map_elites;

    void validate() const {
        if (targets < 1 || replicates < 1)
            throw std::invalid_argument("config: targets and replicates must be >= 1");
        if (params.per_target_cap < 1)
            throw std::invalid_argument("config: per_target_cap must be >= 1");
        for (const Obstacle& o : arena.obstacles)
            if (o.x < 0.0 || o.x > arena.width || o.y < 0.0 || o.y > arena.height)
                throw std::invalid_argument("config: obstacle center outside the arena");
        params.mcts.validate();
    }
};

inline const char* agent_name(AgentKind kind) {
    switch (kind) {
    case AgentKind::rte: return "rte";
    case AgentKind::gp_texplore: return "gp-texplore";
    case AgentKind::mcts_only: return "mcts";
    case AgentKind::intact_reference: return "intact";
    }
    return "?";
}

inline AgentKind parse_agent(std::string_view name) {
    if (name == "rte") return AgentKind::rte;
    if (name == "gp-texplore") return AgentKind::gp_texplore;
    if (name == "mcts") return AgentKind::mcts_only;
    if (name == "intact") return AgentKind::intact_reference;
    throw ParseError("unknown agent '" + std::string(name) + "' (expected rte|gp-texplore|mcts|intact)");
}

namespace detail {

inline bool parse_bool(std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ParseError("expected a boolean, got '" + std::string(v) + "'");
}

} // namespace detail

/// Flat `key = value` configuration with `#` comments. Unknown keys are
/// rejected. Every key has a default, so an empty file is a valid config.
inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw FileError("cannot open config file: " + path);
    ExperimentConfig cfg;
    bool obstacles_cleared = false;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view row = trim(line);
        if (const auto hash = row.find('#'); hash != std::string_view::npos)
            row = trim(row.substr(0, hash));
        if (row.empty())
            continue;
        const auto eq = row.find('=');
        if (eq == std::string_view::npos)
            throw ParseError(path + ": line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key{trim(row.substr(0, eq))};
        const std::string value{trim(row.substr(eq + 1))};
        try {
            if (key == "agent") cfg.agent = parse_agent(value);
            else if (key == "repertoire") cfg.repertoire_path = value;
            else if (key == "arena_width") cfg.arena.width = parse_double(value);
            else if (key == "arena_height") cfg.arena.height = parse_double(value);
            else if (key == "robot_radius") cfg.arena.robot_radius = parse_double(value);
            else if (key == "obstacle") {
                if (!obstacles_cleared) {
                    cfg.arena.obstacles.clear();
                    obstacles_cleared = true;
                }
                if (value != "none") {
                    const auto parts = split(value, ',');
                    if (parts.size() != 3)
                        throw ParseError("expected 'x,y,radius' or 'none'");
                    cfg.arena.obstacles.push_back({parse_double(trim(parts[0])),
                                                   parse_double(trim(parts[1])),
                                                   parse_double(trim(parts[2]))});
                }
            }
            else if (key == "start_x") cfg.params.start.x = parse_double(value);
            else if (key == "start_y") cfg.params.start.y = parse_double(value);
            else if (key == "start_theta") cfg.params.start.theta = normalize_angle(parse_double(value));
            else if (key == "damage_left") cfg.damage.scale_left = parse_double(value);
            else if (key == "damage_right") cfg.damage.scale_right = parse_double(value);
            else if (key == "targets") cfg.targets = static_cast<int>(parse_long(value));
            else if (key == "target_spacing") cfg.target_spacing = parse_double(value);
            else if (key == "replicates") cfg.replicates = static_cast<int>(parse_long(value));
            else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_long(value));
            else if (key == "per_target_cap") cfg.params.per_target_cap = static_cast<int>(parse_long(value));
            else if (key == "mcts_alpha") cfg.params.mcts.alpha = parse_double(value);
            else if (key == "mcts_beta") cfg.params.mcts.beta = parse_double(value);
            else if (key == "uct_c") cfg.params.mcts.uct_c = parse_double(value);
            else if (key == "discount") cfg.params.mcts.discount = parse_double(value);
            else if (key == "iterations_per_tree") cfg.params.mcts.iterations_per_tree = static_cast<int>(parse_long(value));
            else if (key == "trees") cfg.params.mcts.trees = static_cast<int>(parse_long(value));
            else if (key == "rollout_horizon") cfg.params.mcts.rollout_horizon = static_cast<int>(parse_long(value));
            else if (key == "astar_samples") cfg.params.mcts.astar_samples = static_cast<int>(parse_long(value));
            else if (key == "astar_cell") cfg.params.mcts.astar_cell = parse_double(value);
            else if (key == "parallel_trees") cfg.params.mcts.parallel_trees = detail::parse_bool(value);
            else if (key == "goal_reward") cfg.params.goal_reward = parse_double(value);
            else if (key == "collision_penalty") cfg.params.collision_penalty = parse_double(value);
            else if (key == "gp_sigma_se_sq") cfg.params.kernel.sigma_se_sq = parse_double(value);
            else if (key == "gp_length_scale") cfg.params.kernel.length_scale = parse_double(value);
            else if (key == "gp_noise_sq") cfg.params.gp_noise_sq = parse_double(value);
            else if (key == "outcome_scale_xy") cfg.params.outcome_scale_xy = parse_double(value);
            else if (key == "command_pool") cfg.params.command_pool = static_cast<int>(parse_long(value));
            else if (key == "evaluations") cfg.map_elites.evaluations = parse_long(value);
            else if (key == "initial_batch") cfg.map_elites.initial_batch = parse_long(value);
            else if (key == "mutation_std") cfg.map_elites.mutation_std = parse_double(value);
            else if (key == "grid_resolution") cfg.map_elites.resolution = static_cast<int>(parse_long(value));
            else
                throw ParseError(path + ": line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        } catch (const ParseError& e) {
            if (std::string(e.what()).starts_with(path))
                throw;
            throw ParseError(path + ": line " + std::to_string(line_no) + ": key '" + key + "': " + e.what());
        }
    }
    return cfg;
}

/// All effective settings in a fixed order, echoed into summaries so a run
/// is reproducible from its outputs.
inline std::string render_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "agent = " << agent_name(cfg.agent) << '\n';
    out << "repertoire = " << cfg.repertoire_path << '\n';
    out << "arena_width = " << format_double(cfg.arena.width) << '\n';
    out << "arena_height = " << format_double(cfg.arena.height) << '\n';
    out << "robot_radius = " << format_double(cfg.arena.robot_radius) << '\n';
    if (cfg.arena.obstacles.empty())
        out << "obstacle = none\n";
    for (const Obstacle& o : cfg.arena.obstacles)
        out << "obstacle = " << format_double(o.x) << ',' << format_double(o.y) << ','
            << format_double(o.radius) << '\n';
    out << "start_x = " << format_double(cfg.params.start.x) << '\n';
    out << "start_y = " << format_double(cfg.params.start.y) << '\n';
    out << "start_theta = " << format_double(cfg.params.start.theta) << '\n';
    out << "damage_left = " << format_double(cfg.damage.scale_left) << '\n';
    out << "damage_right = " << format_double(cfg.damage.scale_right) << '\n';
    out << "targets = " << cfg.targets << '\n';
    out << "target_spacing = " << format_double(cfg.target_spacing) << '\n';
    out << "replicates = " << cfg.replicates << '\n';
    out << "seed = " << cfg.seed << '\n';
    out << "per_target_cap = " << cfg.params.per_target_cap << '\n';
    out << "mcts_alpha = " << format_double(cfg.params.mcts.alpha) << '\n';
    out << "mcts_beta = " << format_double(cfg.params.mcts.beta) << '\n';
    out << "uct_c = " << format_double(cfg.params.mcts.uct_c) << '\n';
    out << "discount = " << format_double(cfg.params.mcts.discount) << '\n';
    out << "iterations_per_tree = " << cfg.params.mcts.iterations_per_tree << '\n';
    out << "trees = " << cfg.params.mcts.trees << '\n';
    out << "rollout_horizon = " << cfg.params.mcts.rollout_horizon << '\n';
    out << "astar_samples = " << cfg.params.mcts.astar_samples << '\n';
    out << "astar_cell = " << format_double(cfg.params.mcts.astar_cell) << '\n';
    out << "parallel_trees = " << (cfg.params.mcts.parallel_trees ? "true" : "false") << '\n';
    out << "goal_reward = " << format_double(cfg.params.goal_reward) << '\n';
    out << "collision_penalty = " << format_double(cfg.params.collision_penalty) << '\n';
    out << "gp_sigma_se_sq = " << format_double(cfg.params.kernel.sigma_se_sq) << '\n';
    out << "gp_length_scale = " << format_double(cfg.params.kernel.length_scale) << '\n';
    out << "gp_noise_sq = " << format_double(cfg.params.gp_noise_sq) << '\n';
    out << "outcome_scale_xy = " << format_double(cfg.params.outcome_scale_xy) << '\n';
    out << "command_pool = " << cfg.params.command_pool << '\n';
    out << "evaluations = " << cfg.map_elites.evaluations << '\n';
    out << "initial_batch = " << cfg.map_elites.initial_batch << '\n';
    out << "mutation_std = " << format_double(cfg.map_elites.mutation_std) << '\n';
    out << "grid_resolution = " << cfg.map_elites.resolution << '\n';
    return out.str();
}

struct RunStats {
    std::vector<std::vector<int>> episodes;  // [replicate][target]
    std::vector<std::vector<bool>> failed;
    double median_episodes{0.0};
    double p25{0.0};
    double p75{0.0};
    int failure_count{0};

    [[nodiscard]] std::vector<double> pooled() const {
        std::vector<double> all;
        for (const auto& rep : episodes)
            for (int e : rep)
                all.push_back(static_cast<double>(e));
        return all;
    }

    void finalize() {
        const std::vector<double> all = pooled();
        median_episodes = median(all);
        p25 = percentile(all, 0.25);
        p75 = percentile(all, 0.75);
        failure_count = 0;
        for (const auto& rep : failed)
            for (bool f : rep)
                failure_count += f ? 1 : 0;
    }
};

/// Runs one replicate: regenerate the target chain from the replicate seed
/// and run the configured agent on it.
inline RunResult run_replicate(const ExperimentConfig& cfg, const Repertoire* repertoire,
                               int replicate) {
    const std::uint64_t replicate_seed = cfg.seed + static_cast<std::uint64_t>(replicate);
    std::mt19937_64 target_rng(replicate_seed);
    const std::vector<Vec2> targets = sample_targets(
        cfg.arena, cfg.params.start.position(), cfg.targets, cfg.target_spacing, target_rng);
    switch (cfg.agent) {
    case AgentKind::rte:
        return rte_run(*repertoire, cfg.damage, cfg.arena, targets, cfg.params, replicate_seed);
    case AgentKind::gp_texplore:
        return gp_texplore_run(cfg.damage, cfg.arena, targets, cfg.params, replicate_seed);
    case AgentKind::mcts_only:
        return mcts_only_run(*repertoire, cfg.damage, cfg.arena, targets, cfg.params, replicate_seed);
    case AgentKind::intact_reference:
        return intact_reference_run(*repertoire, cfg.arena, targets, cfg.params, replicate_seed);
    }
    throw std::logic_error("run_replicate: unreachable agent kind");
}

inline constexpr const char* kEpisodesHeader = "replicate,target,episodes,failed";
inline constexpr const char* kLogHeader =
    "episode,target,action_cell,v_left,v_right,x_before,y_before,theta_before,"
    "x_after,y_after,theta_after,dx,dy,cos_dt,sin_dt,collided";

inline void write_episode_log(const std::string& path, const RunResult& run) {
    std::ofstream out(path);
    if (!out)
        throw FileError("cannot open for writing: " + path);
    out << kLogHeader << '\n';
    for (const EpisodeLog& e : run.episodes) {
        out << e.episode << ',' << e.target_index << ',' << e.action_cell << ','
            << format_double(e.command.v_left) << ',' << format_double(e.command.v_right) << ','
            << format_double(e.before.x) << ',' << format_double(e.before.y) << ','
            << format_double(e.before.theta) << ',' << format_double(e.after.x) << ','
            << format_double(e.after.y) << ',' << format_double(e.after.theta) << ','
            << format_double(e.observed.dx) << ',' << format_double(e.observed.dy) << ','
            << format_double(e.observed.cos_dt) << ',' << format_double(e.observed.sin_dt) << ','
            << (e.collided ? 1 : 0) << '\n';
    }
}

/// Per-target episode counts from an emitted episodes.csv.
inline RunStats read_episodes_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw FileError("cannot open episodes file: " + path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != kEpisodesHeader)
        throw ParseError(path + ": line 1: expected header '" + std::string(kEpisodesHeader) + "'");
    RunStats stats;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = trim(line);
        if (row.empty())
            continue;
        const auto cols = split(row, ',');
        if (cols.size() != 4)
            throw ParseError(path + ": line " + std::to_string(line_no) + ": expected 4 fields");
        const auto replicate = static_cast<std::size_t>(parse_long(trim(cols[0])));
        const int episodes = static_cast<int>(parse_long(trim(cols[2])));
        const bool failed = parse_long(trim(cols[3])) != 0;
        if (stats.episodes.size() <= replicate) {
            stats.episodes.resize(replicate + 1);
            stats.failed.resize(replicate + 1);
        }
        stats.episodes[replicate].push_back(episodes);
        stats.failed[replicate].push_back(failed);
    }
    if (stats.episodes.empty())
        throw ParseError(path + ": no data rows");
    stats.finalize();
    return stats;
}

/// Runs all replicates of the configured scenario and writes the episode
/// CSVs, per-replicate logs and a human-readable summary into out_dir.
/// Byte-deterministic outputs for a fixed config (timing appears only in
/// the summary).
inline RunStats run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    std::optional<Repertoire> repertoire;
    if (cfg.agent != AgentKind::gp_texplore) {
        if (cfg.repertoire_path.empty())
            throw FileError("this agent needs a repertoire file (none configured)");
        repertoire = load_repertoire(cfg.repertoire_path, cfg.map_elites.resolution);
        if (repertoire->empty())
            throw ParseError("repertoire file has no actions: " + cfg.repertoire_path);
    }
    std::filesystem::create_directories(out_dir);

    std::vector<RunResult> runs(static_cast<std::size_t>(cfg.replicates));
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(cfg.replicates));
    if (workers <= 1) {
        for (int r = 0; r < cfg.replicates; ++r)
            runs[static_cast<std::size_t>(r)] = run_replicate(cfg, repertoire ? &*repertoire : nullptr, r);
    } else {
        // Replicates are independent; trees stay sequential inside each.
        ExperimentConfig worker_cfg = cfg;
        worker_cfg.params.mcts.parallel_trees = false;
        std::atomic<int> next{0};
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                for (int r = next.fetch_add(1); r < cfg.replicates; r = next.fetch_add(1))
                    runs[static_cast<std::size_t>(r)] =
                        run_replicate(worker_cfg, repertoire ? &*repertoire : nullptr, r);
            });
        }
        for (std::thread& t : threads)
            t.join();
    }

    RunStats stats;
    stats.episodes.reserve(runs.size());
    for (const RunResult& run : runs) {
        stats.episodes.push_back(run.episodes_per_target);
        std::vector<bool> failed(run.target_failed.begin(), run.target_failed.end());
        stats.failed.push_back(std::move(failed));
    }
    stats.finalize();

    const std::filesystem::path dir(out_dir);
    {
        std::ofstream out(dir / "episodes.csv");
        if (!out)
            throw FileError("cannot open for writing: " + (dir / "episodes.csv").string());
        out << kEpisodesHeader << '\n';
        for (std::size_t r = 0; r < runs.size(); ++r)
            for (std::size_t t = 0; t < stats.episodes[r].size(); ++t)
                out << r << ',' << t << ',' << stats.episodes[r][t] << ','
                    << (stats.failed[r][t] ? 1 : 0) << '\n';
    }
    for (std::size_t r = 0; r < runs.size(); ++r)
        write_episode_log((dir / ("log_" + std::to_string(r) + ".csv")).string(), runs[r]);

    std::vector<double> plan_times;
    for (const RunResult& run : runs)
        for (const EpisodeLog& e : run.episodes)
            plan_times.push_back(e.plan_seconds);
    {
        std::ofstream out(dir / "summary.txt");
        out << "median_episodes_per_target = " << format_double(stats.median_episodes) << '\n';
        out << "percentile25 = " << format_double(stats.p25) << '\n';
        out << "percentile75 = " << format_double(stats.p75) << '\n';
        out << "failed_targets = " << stats.failure_count << '\n';
        out << "percentile_method = linear interpolation between order statistics\n";
        out << "median_plan_seconds = "
            << format_double(plan_times.empty() ? 0.0 : median(plan_times)) << '\n';
        out << '\n' << "# effective configuration\n" << render_config(cfg);
    }
    return stats;
}

struct CompareReport {
    double median_a{0.0}, p25_a{0.0}, p75_a{0.0};
    double median_b{0.0}, p25_b{0.0}, p75_b{0.0};
    MannWhitneyResult test;
    int stars{0};
};

/// Compares two runs on their pooled per-target episode counts.
inline CompareReport compare(const RunStats& a, const RunStats& b) {
    if (a.episodes.empty() || b.episodes.empty())
        throw std::invalid_argument("compare: empty stats");
    if (a.episodes.front().size() != b.episodes.front().size())
        throw std::invalid_argument("compare: target counts differ");
    CompareReport report;
    report.median_a = a.median_episodes;
    report.p25_a = a.p25;
    report.p75_a = a.p75;
    report.median_b = b.median_episodes;
    report.p25_b = b.p25;
    report.p75_b = b.p75;
    report.test = mann_whitney_u(a.pooled(), b.pooled());
    report.stars = significance_stars(report.test.p_two_sided);
    return report;
}

inline std::string render_compare(const CompareReport& r) {
    std::ostringstream out;
    out << "a: median = " << format_double(r.median_a) << "  [" << format_double(r.p25_a) << ", "
        << format_double(r.p75_a) << "]\n";
    out << "b: median = " << format_double(r.median_b) << "  [" << format_double(r.p25_b) << ", "
        << format_double(r.p75_b) << "]\n";
    out << "mann_whitney_u = " << format_double(r.test.u_a) << " ("
        << (r.test.exact ? "exact" : "normal approximation") << ")\n";
    out << "p_two_sided = " << format_double(r.test.p_two_sided) << '\n';
    out << "stars = " << std::string(static_cast<std::size_t>(r.stars), '*')
        << (r.stars == 0 ? "(none)" : "") << '\n';
    return out.str();
}

} // namespace rte
