#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace rte {

inline constexpr double kPi = std::numbers::pi;

/// Robot body radius in arena units; the axle length of the differential
/// drive equals the body diameter.
inline constexpr double kRobotRadius = 20.0;
inline constexpr double kAxleLength = 2.0 * kRobotRadius;

/// Steps of simulation per episode; one action is held for a whole episode.
inline constexpr int kEpisodeSteps = 100;

/// A target counts as reached within this distance.
inline constexpr double kTargetRadius = 20.0;

/// Wraps an angle to (-pi, pi].
inline double normalize_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a <= -kPi)
        a += 2.0 * kPi;
    else if (a > kPi)
        a -= 2.0 * kPi;
    return a;
}

struct Vec2 {
    double x{0.0};
    double y{0.0};

    friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double distance(const Vec2& a, const Vec2& b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    return std::sqrt(dx * dx + dy * dy);
}

/// Planar robot state; theta stays normalized to (-pi, pi].
struct Pose {
    double x{0.0};
    double y{0.0};
    double theta{0.0};

    [[nodiscard]] Vec2 position() const { return {x, y}; }

    friend bool operator==(const Pose&, const Pose&) = default;
};

/// Per-wheel velocity in units per step, clamped to [-1, 1].
struct WheelCommand {
    double v_left{0.0};
    double v_right{0.0};

    static WheelCommand clamped(double l, double r) {
        return {std::clamp(l, -1.0, 1.0), std::clamp(r, -1.0, 1.0)};
    }

    friend bool operator==(const WheelCommand&, const WheelCommand&) = default;
};

/// Multiplicative wheel fault; (1, 1) is the intact robot.
struct DamageModel {
    double scale_left{1.0};
    double scale_right{1.0};

    static DamageModel intact() { return {1.0, 1.0}; }

    friend bool operator==(const DamageModel&, const DamageModel&) = default;
};

struct Obstacle {
    double x{0.0};
    double y{0.0};
    double radius{0.0};
};

/// Bounded rectangular arena with circular obstacles. Walls and obstacles
/// are inflated by the robot radius for collision queries.
struct Arena {
    double width{800.0};
    double height{800.0};
    std::vector<Obstacle> obstacles;
    double robot_radius{kRobotRadius};
};

/// The 800x800 arena with a single central obstacle used throughout the
/// mobile-robot experiments.
inline Arena default_arena() {
    return Arena{800.0, 800.0, {{400.0, 400.0, 20.0}}, kRobotRadius};
}

/// Relative displacement of one episode, expressed in the body frame of the
/// starting pose. The heading change is stored as (cos, sin) to avoid angle
/// discontinuities.
struct Outcome {
    double dx{0.0};
    double dy{0.0};
    double cos_dt{1.0};
    double sin_dt{0.0};

    [[nodiscard]] double dtheta() const { return std::atan2(sin_dt, cos_dt); }

    friend bool operator==(const Outcome&, const Outcome&) = default;
};

struct EpisodeResult {
    Pose final_pose;
    Outcome outcome;
    bool collided{false};
};

/// One explicit-Euler step of the differential-drive kinematics. The
/// translation uses the heading before the step; collisions are the
/// caller's responsibility.
inline Pose step_kinematics(const Pose& pose, const WheelCommand& cmd, const DamageModel& damage) {
    const double vl = cmd.v_left * damage.scale_left;
    const double vr = cmd.v_right * damage.scale_right;
    const double v = 0.5 * (vl + vr);
    const double omega = (vr - vl) / kAxleLength;
    return {pose.x + v * std::cos(pose.theta),
            pose.y + v * std::sin(pose.theta),
            normalize_angle(pose.theta + omega)};
}

/// True iff a robot centered at (x, y) overlaps an obstacle or sits within
/// the robot radius of a wall.
inline bool check_collision(double x, double y, const Arena& arena) {
    const double r = arena.robot_radius;
    if (x < r || y < r || x > arena.width - r || y > arena.height - r)
        return true;
    for (const Obstacle& o : arena.obstacles) {
        const double dx = x - o.x;
        const double dy = y - o.y;
        const double rr = o.radius + r;
        if (dx * dx + dy * dy < rr * rr)
            return true;
    }
    return false;
}

/// True iff the segment a-b passes through any obstacle inflated by the
/// robot radius. Walls need no segment test: the collision-free region
/// between them is convex.
inline bool segment_hits_obstacle(const Arena& arena, const Vec2& a, const Vec2& b) {
    const double ux = b.x - a.x;
    const double uy = b.y - a.y;
    const double len_sq = ux * ux + uy * uy;
    for (const Obstacle& o : arena.obstacles) {
        double t = 0.0;
        if (len_sq > 0.0)
            t = std::clamp(((o.x - a.x) * ux + (o.y - a.y) * uy) / len_sq, 0.0, 1.0);
        const double dx = a.x + t * ux - o.x;
        const double dy = a.y + t * uy - o.y;
        const double rr = o.radius + arena.robot_radius;
        if (dx * dx + dy * dy < rr * rr)
            return true;
    }
    return false;
}

/// Relative displacement from `before` to `after` in the body frame of
/// `before`.
inline Outcome observe_outcome(const Pose& before, const Pose& after) {
    const double dx = after.x - before.x;
    const double dy = after.y - before.y;
    const double c = std::cos(before.theta);
    const double s = std::sin(before.theta);
    const double dtheta = normalize_angle(after.theta - before.theta);
    return {c * dx + s * dy, -s * dx + c * dy, std::cos(dtheta), std::sin(dtheta)};
}

/// Composes a body-frame displacement onto a pose (the inverse of
/// observe_outcome).
inline Pose apply_displacement(const Pose& pose, double dx, double dy, double dtheta) {
    const double c = std::cos(pose.theta);
    const double s = std::sin(pose.theta);
    return {pose.x + c * dx - s * dy,
            pose.y + s * dx + c * dy,
            normalize_angle(pose.theta + dtheta)};
}

inline bool target_reached(const Pose& pose, const Vec2& target) {
    return distance(pose.position(), target) <= kTargetRadius;
}

/// Runs one fixed-length episode with a constant command. A step whose new
/// position collides keeps the heading update but cancels the translation,
/// so the robot can pivot against a wall but never penetrates it.
inline EpisodeResult run_episode(const Pose& start, const WheelCommand& cmd,
                                 const DamageModel& damage, const Arena& arena) {
    if (check_collision(start.x, start.y, arena))
        throw std::invalid_argument("run_episode: start pose is in collision");
    Pose pose = start;
    bool collided = false;
    for (int i = 0; i < kEpisodeSteps; ++i) {
        const Pose next = step_kinematics(pose, cmd, damage);
        if (check_collision(next.x, next.y, arena)) {
            collided = true;
            pose.theta = next.theta;
        } else {
            pose = next;
        }
    }
    return {pose, observe_outcome(start, pose), collided};
}

/// Episode variant without an arena: integrates the kinematics for the full
/// episode with nothing to collide with. Used when generating the action
/// repertoire, whose reachable space is defined by free motion.
inline EpisodeResult run_episode_free(const Pose& start, const WheelCommand& cmd,
                                      const DamageModel& damage) {
    Pose pose = start;
    for (int i = 0; i < kEpisodeSteps; ++i)
        pose = step_kinematics(pose, cmd, damage);
    return {pose, observe_outcome(start, pose), false};
}

} // namespace rte
