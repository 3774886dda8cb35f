#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rte/gp.hpp"
#include "rte/mcts.hpp"
#include "rte/repertoire.hpp"
#include "rte/sim.hpp"

namespace rte {

enum class AgentKind {
    rte,               // plan on the repertoire, learn outcome corrections
    gp_texplore,       // plan in raw controller space, learn from scratch
    mcts_only,         // plan on the repertoire, never learn
    intact_reference,  // mcts_only on the undamaged robot, deterministic model
};

/// One executed episode of a run. Poses chain: each episode starts exactly
/// where the previous one ended (the runs are reset-free).
struct EpisodeLog {
    int episode{0};            // index within the whole run
    int target_index{0};
    int action_cell{-1};       // repertoire cell of the chosen action, -1 for raw commands
    WheelCommand command;
    Pose before;
    Pose after;
    Outcome observed;
    bool collided{false};
    double plan_seconds{0.0};
};

struct AgentParams {
    MctsConfig mcts;
    KernelConfig kernel;
    double gp_noise_sq{0.01};
    double outcome_scale_xy{kReachableHalfWidth};
    double goal_reward{100.0};
    double collision_penalty{1000.0};
    int per_target_cap{100};
    int command_pool{2048};
    Pose start{100.0, 100.0, 0.0};
};

struct RunResult {
    std::vector<EpisodeLog> episodes;
    std::vector<int> episodes_per_target;   // capped targets count the cap value
    std::vector<bool> target_failed;
    std::size_t model_data_points{0};       // GP dataset size at the end of the run
};

namespace detail {

template <class ChooseAndExecute>
RunResult run_episode_loop(const Arena& arena, std::span<const Vec2> targets, const AgentParams& params,
                           ChooseAndExecute&& step) {
    RunResult result;
    Pose pose = params.start;
    int episode = 0;
    for (std::size_t target_i = 0; target_i < targets.size(); ++target_i) {
        const Vec2& target = targets[target_i];
        int used = 0;
        bool reached = target_reached(pose, target);
        while (!reached && used < params.per_target_cap) {
            EpisodeLog log = step(pose, target, episode);
            log.episode = episode;
            log.target_index = static_cast<int>(target_i);
            pose = log.after;
            result.episodes.push_back(log);
            ++episode;
            ++used;
            reached = target_reached(pose, target);
        }
        result.episodes_per_target.push_back(reached ? used : params.per_target_cap);
        result.target_failed.push_back(!reached);
    }
    return result;
}

struct PlanTimer {
    std::chrono::steady_clock::time_point begin{std::chrono::steady_clock::now()};
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    }
};

} // namespace detail

/// Repertoire-based agents: plan with the (possibly learning) outcome model
/// over the repertoire actions, execute the chosen action's controller on
/// the real (damaged) robot, and optionally feed the observed outcome back
/// into the model.
inline RunResult run_repertoire_agent(const Repertoire& repertoire, const DamageModel& damage,
                                      const Arena& arena, std::span<const Vec2> targets,
                                      const AgentParams& params, std::uint64_t seed, bool learn,
                                      bool stochastic) {
    OutcomeModel model = OutcomeModel::with_repertoire_prior(repertoire, params.kernel,
                                                             params.gp_noise_sq,
                                                             params.outcome_scale_xy);
    std::optional<RepertoireModel> planner_model;
    planner_model.emplace(repertoire, model, stochastic);

    RunResult result = detail::run_episode_loop(
        arena, targets, params, [&](const Pose& pose, const Vec2& target, int episode) {
            detail::PlanTimer timer;
            const Task task{target, params.goal_reward, params.collision_penalty, arena};
            const SearchResult search =
                mcts_search(pose, *planner_model, task, params.mcts, mix_seed(seed, static_cast<std::uint64_t>(episode)));
            const Action& chosen = planner_model->action(search.action);
            const double plan_seconds = timer.seconds();

            const EpisodeResult outcome = run_episode(pose, chosen.controller, damage, arena);
            if (learn) {
                outcome_update(model, chosen, outcome.outcome);
                planner_model.emplace(repertoire, model, stochastic);  // refresh cached predictions
            }
            EpisodeLog log;
            log.action_cell = planner_model->action_cell(search.action);
            log.command = chosen.controller;
            log.before = pose;
            log.after = outcome.final_pose;
            log.observed = outcome.outcome;
            log.collided = outcome.collided;
            log.plan_seconds = plan_seconds;
            return log;
        });
    result.model_data_points = model.size();
    return result;
}

/// Reset-free trial-and-error: repertoire planning with GP-corrected,
/// uncertainty-aware predictions, learning after every episode.
inline RunResult rte_run(const Repertoire& repertoire, const DamageModel& damage, const Arena& arena,
                         std::span<const Vec2> targets, const AgentParams& params, std::uint64_t seed) {
    return run_repertoire_agent(repertoire, damage, arena, targets, params, seed,
                                /*learn=*/true, /*stochastic=*/true);
}

/// Re-planning baseline: the repertoire priors are trusted as-is (constant
/// prior variance, no learning).
inline RunResult mcts_only_run(const Repertoire& repertoire, const DamageModel& damage,
                               const Arena& arena, std::span<const Vec2> targets,
                               const AgentParams& params, std::uint64_t seed) {
    return run_repertoire_agent(repertoire, damage, arena, targets, params, seed,
                                /*learn=*/false, /*stochastic=*/true);
}

/// Undamaged reference for the recovered-capabilities ratio: repertoire
/// planning with deterministic predictions and no learning.
inline RunResult intact_reference_run(const Repertoire& repertoire, const Arena& arena,
                                      std::span<const Vec2> targets, const AgentParams& params,
                                      std::uint64_t seed) {
    return run_repertoire_agent(repertoire, DamageModel::intact(), arena, targets, params, seed,
                                /*learn=*/false, /*stochastic=*/false);
}

/// Learning-from-scratch baseline: zero-prior GPs over raw wheel commands,
/// deterministic (mean) transitions, planning over a fresh uniform command
/// pool each episode.
inline RunResult gp_texplore_run(const DamageModel& damage, const Arena& arena,
                                 std::span<const Vec2> targets, const AgentParams& params,
                                 std::uint64_t seed) {
    OutcomeModel model =
        OutcomeModel::zero_prior(params.kernel, params.gp_noise_sq, params.outcome_scale_xy);

    RunResult result = detail::run_episode_loop(
        arena, targets, params, [&](const Pose& pose, const Vec2& target, int episode) {
            detail::PlanTimer timer;
            std::mt19937_64 pool_rng(mix_seed(seed, 0x706f6f6cull + static_cast<std::uint64_t>(episode)));
            const CommandPoolModel planner_model(
                CommandPoolModel::uniform_pool(params.command_pool, pool_rng), model);
            const Task task{target, params.goal_reward, params.collision_penalty, arena};
            const SearchResult search =
                mcts_search(pose, planner_model, task, params.mcts, mix_seed(seed, static_cast<std::uint64_t>(episode)));
            const WheelCommand command = planner_model.command(search.action);
            const double plan_seconds = timer.seconds();

            const EpisodeResult outcome = run_episode(pose, command, damage, arena);
            model.update(to_vec(command), outcome.outcome);

            EpisodeLog log;
            log.action_cell = -1;
            log.command = command;
            log.before = pose;
            log.after = outcome.final_pose;
            log.observed = outcome.outcome;
            log.collided = outcome.collided;
            log.plan_seconds = plan_seconds;
            return log;
        });
    result.model_data_points = model.size();
    return result;
}

} // namespace rte
