#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <utility>
#include <vector>

#include "rte/sim.hpp"

namespace rte {

/// Occupancy grid over the arena. A cell is blocked when its rectangle
/// touches the wall margin or an obstacle inflated by the robot radius.
struct GridMap {
    int cols{0};
    int rows{0};
    double cell{0.0};
    std::vector<std::uint8_t> blocked;

    [[nodiscard]] int index(int cx, int cy) const { return cy * cols + cx; }
    [[nodiscard]] bool in_bounds(int cx, int cy) const {
        return cx >= 0 && cx < cols && cy >= 0 && cy < rows;
    }
    [[nodiscard]] bool is_blocked(int cx, int cy) const {
        return blocked[static_cast<std::size_t>(index(cx, cy))] != 0;
    }
    [[nodiscard]] std::pair<int, int> cell_of(const Vec2& p) const {
        const int cx = std::clamp(static_cast<int>(p.x / cell), 0, cols - 1);
        const int cy = std::clamp(static_cast<int>(p.y / cell), 0, rows - 1);
        return {cx, cy};
    }
    [[nodiscard]] Vec2 center_of(int cx, int cy) const {
        return {(cx + 0.5) * cell, (cy + 0.5) * cell};
    }
};

inline GridMap make_grid(const Arena& arena, double cell) {
    GridMap grid;
    grid.cell = cell;
    grid.cols = std::max(1, static_cast<int>(std::ceil(arena.width / cell)));
    grid.rows = std::max(1, static_cast<int>(std::ceil(arena.height / cell)));
    grid.blocked.assign(static_cast<std::size_t>(grid.cols) * grid.rows, 0);
    const double r = arena.robot_radius;
    for (int cy = 0; cy < grid.rows; ++cy) {
        for (int cx = 0; cx < grid.cols; ++cx) {
            const double x0 = cx * cell;
            const double y0 = cy * cell;
            const double x1 = x0 + cell;
            const double y1 = y0 + cell;
            bool hit = x0 < r || y0 < r || x1 > arena.width - r || y1 > arena.height - r;
            for (const Obstacle& o : arena.obstacles) {
                if (hit)
                    break;
                const double nx = std::clamp(o.x, x0, x1);
                const double ny = std::clamp(o.y, y0, y1);
                const double rr = o.radius + r;
                hit = (nx - o.x) * (nx - o.x) + (ny - o.y) * (ny - o.y) < rr * rr;
            }
            grid.blocked[static_cast<std::size_t>(grid.index(cx, cy))] = hit ? 1 : 0;
        }
    }
    return grid;
}

inline double octile_heuristic(int dx, int dy) {
    const double adx = std::abs(dx);
    const double ady = std::abs(dy);
    return std::max(adx, ady) + (std::numbers::sqrt2 - 1.0) * std::min(adx, ady);
}

struct GridPath {
    bool found{false};
    double cost{std::numeric_limits<double>::infinity()};
    std::vector<std::pair<int, int>> cells;
};

/// 8-connected A* with unit straight cost, sqrt(2) diagonal cost and the
/// octile heuristic. The start cell is expanded regardless of its blocked
/// flag (the robot may legally occupy a conservatively blocked cell) and
/// the goal cell stays enterable for the same reason.
inline GridPath astar_search(const GridMap& grid, std::pair<int, int> start, std::pair<int, int> goal) {
    const int n = grid.cols * grid.rows;
    const int start_idx = grid.index(start.first, start.second);
    const int goal_idx = grid.index(goal.first, goal.second);

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> g(static_cast<std::size_t>(n), kInf);
    std::vector<int> parent(static_cast<std::size_t>(n), -1);
    std::vector<std::uint8_t> closed(static_cast<std::size_t>(n), 0);

    struct Entry {
        double f;
        int idx;
        bool operator>(const Entry& other) const {
            return f > other.f || (f == other.f && idx > other.idx);
        }
    };
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> open;

    g[static_cast<std::size_t>(start_idx)] = 0.0;
    open.push({octile_heuristic(goal.first - start.first, goal.second - start.second), start_idx});

    static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

    while (!open.empty()) {
        const Entry top = open.top();
        open.pop();
        if (closed[static_cast<std::size_t>(top.idx)])
            continue;
        closed[static_cast<std::size_t>(top.idx)] = 1;
        if (top.idx == goal_idx)
            break;
        const int cx = top.idx % grid.cols;
        const int cy = top.idx / grid.cols;
        for (int k = 0; k < 8; ++k) {
            const int nx = cx + kDx[k];
            const int ny = cy + kDy[k];
            if (!grid.in_bounds(nx, ny))
                continue;
            const int ni = grid.index(nx, ny);
            if (grid.is_blocked(nx, ny) && ni != goal_idx)
                continue;
            const double step = k < 4 ? 1.0 : std::numbers::sqrt2;
            const double cand = g[static_cast<std::size_t>(top.idx)] + step;
            if (cand < g[static_cast<std::size_t>(ni)]) {
                g[static_cast<std::size_t>(ni)] = cand;
                parent[static_cast<std::size_t>(ni)] = top.idx;
                open.push({cand + octile_heuristic(goal.first - nx, goal.second - ny), ni});
            }
        }
    }

    if (g[static_cast<std::size_t>(goal_idx)] == kInf)
        return {};

    GridPath path;
    path.found = true;
    path.cost = g[static_cast<std::size_t>(goal_idx)];
    for (int idx = goal_idx; idx != -1; idx = parent[static_cast<std::size_t>(idx)])
        path.cells.emplace_back(idx % grid.cols, idx / grid.cols);
    std::reverse(path.cells.begin(), path.cells.end());
    return path;
}

/// How far ahead along the guide path the bearing is taken: one action
/// length, matching the reachable radius of a single episode.
inline constexpr double kLookaheadDistance = 100.0;

/// Picks the waypoint the robot should head for: the first path cell at
/// least the lookahead distance along the path, or the goal itself when the
/// path is shorter. Returns nothing when the goal is unreachable on the
/// grid.
inline std::optional<Vec2> astar_waypoint(const GridMap& grid, const Vec2& start, const Vec2& goal) {
    const auto start_cell = grid.cell_of(start);
    const auto goal_cell = grid.cell_of(goal);
    if (start_cell == goal_cell)
        return goal;
    const GridPath path = astar_search(grid, start_cell, goal_cell);
    if (!path.found)
        return std::nullopt;
    double travelled = 0.0;
    for (std::size_t i = 1; i < path.cells.size(); ++i) {
        const auto& [px, py] = path.cells[i];
        const auto& [qx, qy] = path.cells[i - 1];
        travelled += (px != qx && py != qy ? std::numbers::sqrt2 : 1.0) * grid.cell;
        if (travelled >= kLookaheadDistance)
            return grid.center_of(px, py);
    }
    return goal;
}

/// Direction the robot should head to approach the goal around obstacles:
/// discretize the arena, solve the grid shortest-path problem, and take the
/// bearing toward the lookahead waypoint. Errors (no grid path) are
/// reported as nullopt so the caller can fall back to a straight-line
/// bearing.
inline std::optional<double> astar_plan(const Arena& arena, const Vec2& start, const Vec2& goal,
                                        double cell) {
    const GridMap grid = make_grid(arena, cell);
    const std::optional<Vec2> waypoint = astar_waypoint(grid, start, goal);
    if (!waypoint)
        return std::nullopt;
    return std::atan2(waypoint->y - start.y, waypoint->x - start.x);
}

} // namespace rte
