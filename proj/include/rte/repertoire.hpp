#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rte/io.hpp"
#include "rte/sim.hpp"

namespace rte {

/// Half-width of the reachable space covered by the repertoire descriptor.
inline constexpr double kReachableHalfWidth = 100.0;

/// Normalized 2-D coordinates of an action in task space, both in [0, 1].
struct Descriptor {
    double d1{0.0};
    double d2{0.0};

    friend bool operator==(const Descriptor&, const Descriptor&) = default;
};

/// A repertoire entry: the wheel command, where it lands the intact robot,
/// and how well the final heading matches the arc tangent (lower is better).
struct Action {
    Descriptor descriptor;
    WheelCommand controller;
    Outcome prior_outcome;
    double performance{0.0};

    friend bool operator==(const Action&, const Action&) = default;
};

/// Maps the final position of a free-space episode from the origin into the
/// unit square, clamped at the reachable bounds.
inline Descriptor action_descriptor(const Pose& final_pose) {
    const double w = 2.0 * kReachableHalfWidth;
    return {std::clamp((final_pose.x + kReachableHalfWidth) / w, 0.0, 1.0),
            std::clamp((final_pose.y + kReachableHalfWidth) / w, 0.0, 1.0)};
}

/// Final tangent heading of the constant-curvature arc that starts at the
/// origin with heading zero and ends at (x, y). By the inscribed-angle
/// identity this is twice the chord bearing. Zero at the origin by
/// convention.
inline double desired_orientation(double x, double y) {
    if (x == 0.0 && y == 0.0)
        return 0.0;
    return normalize_angle(2.0 * std::atan2(y, x));
}

/// Absolute circular distance between the final heading and the desired arc
/// tangent at the final position.
inline double performance(const Pose& final_pose) {
    return std::abs(normalize_angle(final_pose.theta - desired_orientation(final_pose.x, final_pose.y)));
}

/// Evaluates a command on the intact robot from the origin pose and builds
/// the corresponding repertoire candidate.
inline Action evaluate_command(const WheelCommand& cmd) {
    const EpisodeResult result = run_episode_free(Pose{}, cmd, DamageModel::intact());
    return {action_descriptor(result.final_pose), cmd, result.outcome, performance(result.final_pose)};
}

/// Perturbs a command with independent Gaussian noise per wheel, clamped
/// back into bounds.
inline WheelCommand random_variation(const WheelCommand& cmd, std::mt19937_64& rng, double stddev = 0.1) {
    std::normal_distribution<double> noise(0.0, stddev);
    return WheelCommand::clamped(cmd.v_left + noise(rng), cmd.v_right + noise(rng));
}

/// Fixed-resolution elite grid over descriptor space. Each cell keeps the
/// best (lowest-performance) action seen for it.
class Repertoire {
public:
    explicit Repertoire(int resolution = 20)
        : resolution_(resolution), cells_(static_cast<std::size_t>(resolution) * resolution) {}

    [[nodiscard]] int resolution() const { return resolution_; }
    [[nodiscard]] std::size_t cell_count() const { return cells_.size(); }
    [[nodiscard]] std::size_t size() const { return filled_.size(); }
    [[nodiscard]] bool empty() const { return filled_.empty(); }

    [[nodiscard]] int cell_index(const Descriptor& d) const {
        const int ix = std::min(static_cast<int>(d.d1 * resolution_), resolution_ - 1);
        const int iy = std::min(static_cast<int>(d.d2 * resolution_), resolution_ - 1);
        return iy * resolution_ + ix;
    }

    [[nodiscard]] const std::optional<Action>& cell(int index) const {
        return cells_[static_cast<std::size_t>(index)];
    }

    /// Filled cell indices in ascending order.
    [[nodiscard]] const std::vector<int>& filled() const { return filled_; }

    /// Inserts the candidate if its cell is empty or it strictly beats the
    /// incumbent; ties keep the incumbent. Returns whether it was stored.
    bool insert(const Action& candidate) {
        const int idx = cell_index(candidate.descriptor);
        std::optional<Action>& slot = cells_[static_cast<std::size_t>(idx)];
        if (!slot) {
            slot = candidate;
            filled_.insert(std::lower_bound(filled_.begin(), filled_.end(), idx), idx);
            return true;
        }
        if (candidate.performance < slot->performance) {
            slot = candidate;
            return true;
        }
        return false;
    }

    friend bool operator==(const Repertoire& a, const Repertoire& b) {
        return a.resolution_ == b.resolution_ && a.cells_ == b.cells_;
    }

private:
    int resolution_;
    std::vector<std::optional<Action>> cells_;
    std::vector<int> filled_;
};

struct MapElitesParams {
    long evaluations{100000};
    long initial_batch{2000};
    double mutation_std{0.1};
    int resolution{20};
};

/// Illumination search over the command space: seed the grid with random
/// commands, then repeatedly mutate a uniformly chosen elite and re-insert.
/// Fully reproducible from the seed.
inline Repertoire map_elites(const MapElitesParams& params, std::uint64_t seed) {
    Repertoire grid(params.resolution);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);

    const long batch = std::min(std::max(params.initial_batch, 1L), params.evaluations);
    for (long i = 0; i < batch; ++i)
        grid.insert(evaluate_command({uniform(rng), uniform(rng)}));

    for (long i = batch; i < params.evaluations; ++i) {
        const std::vector<int>& filled = grid.filled();
        std::uniform_int_distribution<std::size_t> pick(0, filled.size() - 1);
        const Action& parent = *grid.cell(filled[pick(rng)]);
        grid.insert(evaluate_command(random_variation(parent.controller, rng, params.mutation_std)));
    }
    return grid;
}

inline constexpr const char* kRepertoireHeader = "d1,d2,v_left,v_right,dx,dy,cos_dt,sin_dt,perf";

/// Writes one action per line in cell order, full round-trip precision.
inline void save_repertoire(const Repertoire& grid, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw FileError("cannot open for writing: " + path);
    out << kRepertoireHeader << '\n';
    for (int idx : grid.filled()) {
        const Action& a = *grid.cell(idx);
        out << format_double(a.descriptor.d1) << ',' << format_double(a.descriptor.d2) << ','
            << format_double(a.controller.v_left) << ',' << format_double(a.controller.v_right) << ','
            << format_double(a.prior_outcome.dx) << ',' << format_double(a.prior_outcome.dy) << ','
            << format_double(a.prior_outcome.cos_dt) << ',' << format_double(a.prior_outcome.sin_dt) << ','
            << format_double(a.performance) << '\n';
    }
    if (!out)
        throw FileError("write failed: " + path);
}

inline Repertoire load_repertoire(const std::string& path, int resolution = 20) {
    std::ifstream in(path);
    if (!in)
        throw FileError("cannot open repertoire file: " + path);

    static constexpr const char* kFields[9] = {"d1",      "d2",     "v_left", "v_right", "dx",
                                               "dy",      "cos_dt", "sin_dt", "perf"};
    std::string line;
    if (!std::getline(in, line) || trim(line) != kRepertoireHeader)
        throw ParseError(path + ": line 1: expected header '" + std::string(kRepertoireHeader) + "'");

    Repertoire grid(resolution);
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = trim(line);
        if (row.empty())
            continue;
        const std::vector<std::string_view> cols = split(row, ',');
        if (cols.size() != 9)
            throw ParseError(path + ": line " + std::to_string(line_no) + ": expected 9 fields, got " +
                             std::to_string(cols.size()));
        double v[9];
        for (int i = 0; i < 9; ++i) {
            try {
                v[i] = parse_double(trim(cols[static_cast<std::size_t>(i)]));
            } catch (const ParseError&) {
                throw ParseError(path + ": line " + std::to_string(line_no) + ": field " + kFields[i] +
                                 ": invalid number");
            }
        }
        grid.insert(Action{{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5], v[6], v[7]}, v[8]});
    }
    return grid;
}

} // namespace rte
