#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <vector>

#include "rte/astar.hpp"
#include "rte/gp.hpp"
#include "rte/io.hpp"
#include "rte/repertoire.hpp"
#include "rte/sim.hpp"

namespace rte {

struct MctsConfig {
    double alpha{0.5};          // action progressive-widening exponent
    double beta{0.6};           // state progressive-widening exponent
    double uct_c{150.0};        // UCT exploration constant
    double discount{0.9};
    int iterations_per_tree{5000};
    int trees{4};
    int rollout_horizon{15};    // also caps the tree depth
    int astar_samples{100};     // candidate actions per guided sample
    double astar_cell{20.0};
    bool parallel_trees{true};

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("MctsConfig: alpha must be in (0, 1)");
        if (!(beta > 0.0 && beta < 1.0))
            throw std::invalid_argument("MctsConfig: beta must be in (0, 1)");
        if (!(discount >= 0.0 && discount < 1.0))
            throw std::invalid_argument("MctsConfig: discount must be in [0, 1)");
        if (iterations_per_tree < 1 || trees < 1 || rollout_horizon < 1 || astar_samples < 1)
            throw std::invalid_argument("MctsConfig: counts must be >= 1");
        if (astar_cell <= 0.0)
            throw std::invalid_argument("MctsConfig: astar_cell must be positive");
    }
};

/// One shortest-path task: reach the goal, don't collide.
struct Task {
    Vec2 goal;
    double goal_reward{100.0};
    double collision_penalty{1000.0};
    Arena arena;
};

struct StepReward {
    double value{0.0};
    bool terminal{false};
};

inline StepReward reward(const Pose& state, const Task& task, bool collided) {
    if (collided)
        return {-task.collision_penalty, true};
    if (target_reached(state, task.goal))
        return {task.goal_reward, true};
    return {0.0, false};
}

/// Draws an outcome from the model's predictive distribution (independent
/// Gaussian per dimension).
inline Outcome sample_outcome(const PredictedOutcome& p, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss;
    auto draw = [&](double mean, double var) { return mean + std::sqrt(var) * gauss(rng); };
    return {draw(p.mean.dx, p.variance[0]), draw(p.mean.dy, p.variance[1]),
            draw(p.mean.cos_dt, p.variance[2]), draw(p.mean.sin_dt, p.variance[3])};
}

/// Predicts where an action takes the robot from a state; stochastic mode
/// samples the model's uncertainty, deterministic mode applies the mean.
inline Pose generative_sample(const OutcomeModel& model, const Pose& state, const Action& action,
                              std::mt19937_64& rng, bool stochastic) {
    const PredictedOutcome p = outcome_predict(model, action);
    const Outcome o = stochastic ? sample_outcome(p, rng) : p.mean;
    return apply_displacement(state, o.dx, o.dy, o.dtheta());
}

/// Grid-path guidance toward a fixed goal, memoized per start cell. The
/// waypoint only depends on the start cell, so repeated queries from nearby
/// states reuse one search; unreachable goals fall back to the straight
/// bearing.
class DirectionGuide {
public:
    DirectionGuide(const Arena& arena, const Vec2& goal, double cell)
        : goal_(goal), grid_(make_grid(arena, cell)) {}

    [[nodiscard]] double desired_direction(const Pose& state) const {
        const auto [cx, cy] = grid_.cell_of(state.position());
        const int key = grid_.index(cx, cy);
        auto it = waypoints_.find(key);
        if (it == waypoints_.end())
            it = waypoints_.emplace(key, astar_waypoint(grid_, grid_.center_of(cx, cy), goal_)).first;
        const Vec2 target = it->second.value_or(goal_);
        return std::atan2(target.y - state.y, target.x - state.x);
    }

private:
    Vec2 goal_;
    GridMap grid_;
    mutable std::unordered_map<int, std::optional<Vec2>> waypoints_;
};

/// Planner view of the action repertoire: predictions for every filled cell
/// are computed once up front, so tree search reads them in O(1).
class RepertoireModel {
public:
    RepertoireModel(const Repertoire& repertoire, const OutcomeModel& model, bool stochastic)
        : stochastic_(stochastic), cells_(repertoire.filled()) {
        if (cells_.empty())
            throw std::invalid_argument("RepertoireModel: repertoire is empty");
        actions_.reserve(cells_.size());
        std::vector<Eigen::Vector2d> queries;
        queries.reserve(cells_.size());
        for (int idx : cells_) {
            const Action& a = *repertoire.cell(idx);
            actions_.push_back(&a);
            queries.push_back(to_vec(a.descriptor));
        }
        predictions_ = model.predict_many(queries);
    }

    [[nodiscard]] int action_count() const { return static_cast<int>(actions_.size()); }
    [[nodiscard]] const Action& action(int i) const { return *actions_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] int action_cell(int i) const { return cells_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] const PredictedOutcome& predicted(int i) const {
        return predictions_[static_cast<std::size_t>(i)];
    }
    [[nodiscard]] bool stochastic() const { return stochastic_; }

    [[nodiscard]] int sample_rollout(std::mt19937_64& rng) const {
        std::uniform_int_distribution<int> pick(0, action_count() - 1);
        return pick(rng);
    }

    /// Draws n actions uniformly and keeps the one whose predicted world
    /// displacement bearing best matches the desired direction.
    [[nodiscard]] int sample_guided(const Pose& state, double desired_direction, int n,
                                    std::mt19937_64& rng) const {
        std::uniform_int_distribution<int> pick(0, action_count() - 1);
        int best = -1;
        double best_err = std::numeric_limits<double>::infinity();
        for (int k = 0; k < n; ++k) {
            const int i = pick(rng);
            const Outcome& mean = predictions_[static_cast<std::size_t>(i)].mean;
            const double bearing = normalize_angle(state.theta + std::atan2(mean.dy, mean.dx));
            const double err = std::abs(normalize_angle(bearing - desired_direction));
            if (err < best_err) {
                best_err = err;
                best = i;
            }
        }
        return best;
    }

private:
    bool stochastic_;
    std::vector<int> cells_;
    std::vector<const Action*> actions_;
    std::vector<PredictedOutcome> predictions_;
};

/// Planner view for searching directly in controller space: a fresh pool of
/// uniform wheel commands with mean-only model predictions (deterministic
/// transitions). Until the model has data the guided sampler degenerates to
/// a single uniform draw.
class CommandPoolModel {
public:
    CommandPoolModel(std::vector<WheelCommand> pool, const OutcomeModel& model)
        : pool_(std::move(pool)), guided_(model.size() > 0) {
        if (pool_.empty())
            throw std::invalid_argument("CommandPoolModel: empty command pool");
        std::vector<Eigen::Vector2d> queries;
        queries.reserve(pool_.size());
        for (const WheelCommand& c : pool_)
            queries.push_back(to_vec(c));
        const std::vector<Outcome> means = model.predict_means(queries);
        predictions_.resize(means.size());
        for (std::size_t i = 0; i < means.size(); ++i)
            predictions_[i].mean = means[i];
    }

    static std::vector<WheelCommand> uniform_pool(int size, std::mt19937_64& rng) {
        std::uniform_real_distribution<double> uniform(-1.0, 1.0);
        std::vector<WheelCommand> pool(static_cast<std::size_t>(size));
        for (WheelCommand& c : pool)
            c = {uniform(rng), uniform(rng)};
        return pool;
    }

    [[nodiscard]] int action_count() const { return static_cast<int>(pool_.size()); }
    [[nodiscard]] const WheelCommand& command(int i) const { return pool_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] const PredictedOutcome& predicted(int i) const {
        return predictions_[static_cast<std::size_t>(i)];
    }
    [[nodiscard]] bool stochastic() const { return false; }

    [[nodiscard]] int sample_rollout(std::mt19937_64& rng) const {
        std::uniform_int_distribution<int> pick(0, action_count() - 1);
        return pick(rng);
    }

    [[nodiscard]] int sample_guided(const Pose& state, double desired_direction, int n,
                                    std::mt19937_64& rng) const {
        std::uniform_int_distribution<int> pick(0, action_count() - 1);
        if (!guided_)
            return pick(rng);
        int best = -1;
        double best_err = std::numeric_limits<double>::infinity();
        for (int k = 0; k < n; ++k) {
            const int i = pick(rng);
            const Outcome& mean = predictions_[static_cast<std::size_t>(i)].mean;
            const double bearing = normalize_angle(state.theta + std::atan2(mean.dy, mean.dx));
            const double err = std::abs(normalize_angle(bearing - desired_direction));
            if (err < best_err) {
                best_err = err;
                best = i;
            }
        }
        return best;
    }

private:
    std::vector<WheelCommand> pool_;
    std::vector<PredictedOutcome> predictions_;
    bool guided_;
};

struct Transition {
    Pose next;
    double reward_value{0.0};
    bool terminal{false};
};

/// One simulated transition through the model. A transition collides when
/// its endpoint is in collision or the straight segment to it crosses an
/// inflated obstacle (endpoint-only checks could tunnel through).
template <class Model>
Transition sample_transition(const Model& model, const Pose& state, int action, const Task& task,
                             std::mt19937_64& rng) {
    const PredictedOutcome& p = model.predicted(action);
    const Outcome o = model.stochastic() ? sample_outcome(p, rng) : p.mean;
    const Pose next = apply_displacement(state, o.dx, o.dy, o.dtheta());
    const bool collided = check_collision(next.x, next.y, task.arena) ||
                          segment_hits_obstacle(task.arena, state.position(), next.position());
    const StepReward r = reward(next, task, collided);
    return {next, r.value, r.terminal};
}

struct DecisionNode;

/// A sampled next state under a random node, with the reward it scored at
/// creation and how often it has been revisited.
struct StateChild {
    Pose state;
    double reward_value{0.0};
    bool terminal{false};
    int count{0};
    std::unique_ptr<DecisionNode> node;
};

/// State-action pair: visit count, accumulated backed-up returns and the
/// progressive-widening set of sampled next states.
struct RandomNode {
    int action{-1};
    int count{0};
    double reward_sum{0.0};
    std::vector<StateChild> states;
};

struct DecisionNode {
    Pose state;
    int count{0};
    std::vector<RandomNode> children;
};

/// Progressive-widening action selection: grow the action set while
/// n(s)^alpha exceeds it, otherwise pick the best UCT child. A sampled
/// action that already exists is revisited rather than duplicated. Returns
/// the index of the selected child. Expects node.count to already include
/// the current visit.
template <class Sampler>
int spw_select(DecisionNode& node, const MctsConfig& cfg, Sampler&& sample_new_action) {
    if (std::pow(static_cast<double>(node.count), cfg.alpha) >
        static_cast<double>(node.children.size())) {
        const int action = sample_new_action(node.state);
        for (std::size_t i = 0; i < node.children.size(); ++i)
            if (node.children[i].action == action)
                return static_cast<int>(i);
        node.children.push_back(RandomNode{action});
        return static_cast<int>(node.children.size()) - 1;
    }
    const double log_n = std::log(static_cast<double>(node.count));
    int best = 0;
    double best_q = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < node.children.size(); ++i) {
        const RandomNode& child = node.children[i];
        const double q = child.reward_sum / child.count +
                         cfg.uct_c * std::sqrt(log_n / static_cast<double>(child.count));
        if (q > best_q) {
            best_q = q;
            best = static_cast<int>(i);
        }
    }
    return best;
}

/// Progressive-widening state expansion: draw a fresh next state while
/// n(s,a)^beta exceeds the sampled set, otherwise revisit an existing state
/// with probability proportional to its count. Returns the index of the
/// selected state child. Expects node.count to already include the current
/// visit.
template <class Model>
int dpw_expand(RandomNode& node, const Pose& parent_state, const Model& model, const Task& task,
               const MctsConfig& cfg, std::mt19937_64& rng) {
    if (std::pow(static_cast<double>(node.count), cfg.beta) >
        static_cast<double>(node.states.size())) {
        const Transition t = sample_transition(model, parent_state, node.action, task, rng);
        for (std::size_t i = 0; i < node.states.size(); ++i)
            if (node.states[i].state == t.next)
                return static_cast<int>(i);
        node.states.push_back(StateChild{t.next, t.reward_value, t.terminal, 0, nullptr});
        return static_cast<int>(node.states.size()) - 1;
    }
    int total = 0;
    for (const StateChild& s : node.states)
        total += s.count;
    std::uniform_int_distribution<int> pick(0, total - 1);
    int r = pick(rng);
    for (std::size_t i = 0; i < node.states.size(); ++i) {
        r -= node.states[i].count;
        if (r < 0)
            return static_cast<int>(i);
    }
    return static_cast<int>(node.states.size()) - 1;
}

/// Discounted return of a random-action playout from a state, stopping at
/// terminal transitions or the horizon.
template <class Model>
double rollout(Pose state, const Model& model, const Task& task, const MctsConfig& cfg,
               std::mt19937_64& rng) {
    double total = 0.0;
    double weight = 1.0;
    for (int step = 0; step < cfg.rollout_horizon; ++step) {
        const int action = model.sample_rollout(rng);
        const Transition t = sample_transition(model, state, action, task, rng);
        total += weight * t.reward_value;
        if (t.terminal)
            break;
        weight *= cfg.discount;
        state = t.next;
    }
    return total;
}

/// One search iteration: descend with SPW/DPW until a terminal transition,
/// a first-visit state or the depth cap; estimate the leaf by a rollout;
/// back the discounted returns up through every traversed random node.
template <class Model>
void run_iteration(DecisionNode& root, const Model& model, const Task& task,
                   const DirectionGuide& guide, const MctsConfig& cfg, std::mt19937_64& rng) {
    struct PathStep {
        RandomNode* node;
        double rho;
    };
    std::vector<PathStep> path;
    path.reserve(static_cast<std::size_t>(cfg.rollout_horizon));

    const auto sampler = [&](const Pose& s) {
        return model.sample_guided(s, guide.desired_direction(s), cfg.astar_samples, rng);
    };

    DecisionNode* cur = &root;
    double tail = 0.0;
    int depth = 0;
    while (true) {
        cur->count += 1;
        const int ci = spw_select(*cur, cfg, sampler);
        RandomNode& rn = cur->children[static_cast<std::size_t>(ci)];
        rn.count += 1;
        const int si = dpw_expand(rn, cur->state, model, task, cfg, rng);
        StateChild& sc = rn.states[static_cast<std::size_t>(si)];
        sc.count += 1;
        path.push_back({&rn, sc.reward_value});
        ++depth;
        if (sc.terminal)
            break;
        if (!sc.node) {
            sc.node = std::make_unique<DecisionNode>();
            sc.node->state = sc.state;
            tail = rollout(sc.state, model, task, cfg, rng);
            break;
        }
        if (depth >= cfg.rollout_horizon) {
            tail = rollout(sc.state, model, task, cfg, rng);
            break;
        }
        cur = sc.node.get();
    }

    double g = tail;
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        g = it->rho + cfg.discount * g;
        it->node->reward_sum += g;
    }
}

template <class Model>
std::unique_ptr<DecisionNode> build_tree(const Pose& root_state, const Model& model, const Task& task,
                                         const MctsConfig& cfg, std::uint64_t seed) {
    auto root = std::make_unique<DecisionNode>();
    root->state = root_state;
    std::mt19937_64 rng(seed);
    DirectionGuide guide(task.arena, task.goal, cfg.astar_cell);
    for (int i = 0; i < cfg.iterations_per_tree; ++i)
        run_iteration(*root, model, task, guide, cfg, rng);
    return root;
}

struct ActionStat {
    double reward_sum{0.0};
    int count{0};
};

/// Per-action root statistics, keyed by the model's action index (ordered
/// so ties break deterministically toward the smaller index).
using RootStats = std::map<int, ActionStat>;

inline RootStats merge_root_stats(std::span<const std::unique_ptr<DecisionNode>> trees) {
    RootStats merged;
    for (const auto& tree : trees) {
        for (const RandomNode& rn : tree->children) {
            ActionStat& s = merged[rn.action];
            s.reward_sum += rn.reward_sum;
            s.count += rn.count;
        }
    }
    return merged;
}

/// Greedy best child: maximum average backed-up return.
inline int best_action(const RootStats& stats) {
    int best = -1;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (const auto& [action, s] : stats) {
        if (s.count == 0)
            continue;
        const double mean = s.reward_sum / s.count;
        if (mean > best_mean) {
            best_mean = mean;
            best = action;
        }
    }
    return best;
}

struct SearchResult {
    int action{-1};
    RootStats merged;
    std::vector<std::unique_ptr<DecisionNode>> trees;
};

/// Root-parallel search: independent trees with per-tree RNG streams, root
/// statistics summed per action, greedy choice on the merged averages.
template <class Model>
SearchResult mcts_search(const Pose& root, const Model& model, const Task& task,
                         const MctsConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    SearchResult result;
    result.trees.resize(static_cast<std::size_t>(cfg.trees));
    const bool parallel = cfg.parallel_trees && cfg.trees > 1 && std::thread::hardware_concurrency() > 1;
    if (parallel) {
        std::vector<std::future<std::unique_ptr<DecisionNode>>> futures;
        futures.reserve(static_cast<std::size_t>(cfg.trees));
        for (int t = 0; t < cfg.trees; ++t)
            futures.push_back(std::async(std::launch::async, [&, t] {
                return build_tree(root, model, task, cfg, mix_seed(seed, static_cast<std::uint64_t>(t)));
            }));
        for (int t = 0; t < cfg.trees; ++t)
            result.trees[static_cast<std::size_t>(t)] = futures[static_cast<std::size_t>(t)].get();
    } else {
        for (int t = 0; t < cfg.trees; ++t)
            result.trees[static_cast<std::size_t>(t)] =
                build_tree(root, model, task, cfg, mix_seed(seed, static_cast<std::uint64_t>(t)));
    }
    result.merged = merge_root_stats(result.trees);
    result.action = best_action(result.merged);
    return result;
}

} // namespace rte
