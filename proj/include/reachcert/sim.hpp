#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reachcert/control.hpp"
#include "reachcert/crs.hpp"
#include "reachcert/expectation.hpp"
#include "reachcert/safeset.hpp"

namespace reachcert {

struct Obstacle {
    enum class Shape { Rect, Disc };
    Shape shape = Shape::Rect;
    // Rect: (x, y) lower-left corner, extent (w, h). Disc: (x, y) center,
    // radius r.
    double x = 0, y = 0, w = 0, h = 0, r = 0;

    static Obstacle rect(double x, double y, double w, double h);
    static Obstacle disc(double cx, double cy, double r);

    bool contains(double px, double py) const;
    // Smallest positive ray parameter hitting the boundary, +inf if none.
    double ray_hit(double ox, double oy, double dx, double dy) const;
};

struct Environment {
    double width = 0, height = 0;
    std::vector<Obstacle> obstacles;

    bool inside_box(double px, double py) const {
        return px >= 0 && px <= width && py >= 0 && py <= height;
    }
    bool in_obstacle(double px, double py) const;
    // Exact distance to the first obstacle or bounding wall along the ray.
    double ray_distance(double ox, double oy, double angle) const;
};

// Rays evenly spaced over [0, 2pi); distances capped at max_range (+inf
// marker past it).
SensorScan lidar_scan(const Environment& env, std::span<const double> origin, int n_rays,
                      double max_range);

struct MissionConfig {
    double scan_radius = 60.0;  // D
    int n_rays = 64;
    double delta = 0.0;         // 0 -> D/10
    unsigned svm_degree = 6;
    double c_plus = 1.0;
    double c_minus = 1e12;
    double chat_margin = 0.3;
    unsigned cert_degree = 8;
};

struct Scenario {
    std::string name;
    DynamicsSpec dynamics;
    ControlDistribution dist = ControlDistribution::uniform_box({{-1.0, 1.0}});
    std::optional<SemiAlgebraicSet> safe_set;  // explicit C; missions learn theirs
    std::vector<SemiAlgebraicSet> targets;
    std::vector<double> x0;
    double lambda = 1.01;
    double epsilon = 1e-6;
    unsigned degree = 6;
    std::string encoding = "theorem1";
    bool paper_exact = false;
    std::optional<SemiAlgebraicSet> chat;
    double chat_margin = 0.1;
    std::map<std::string, unsigned> multiplier_degrees;
    ControllerParams controller;
    std::vector<std::array<double, 2>> waypoints;
    double accept_radius = 2.0;
    int max_steps = 0;  // 0 -> 2 * ceil(T_max)
    std::optional<Environment> environment;
    MissionConfig mission;
    std::vector<std::pair<double, double>> domain_box;

    CertificateOptions certificate_options() const;
};

struct Trajectory {
    enum class Outcome { Hit, MaxSteps, ViabilityLost, SafetyViolation };

    std::vector<std::vector<double>> states;
    std::vector<std::vector<double>> controls;  // one shorter than states
    std::vector<double> v_values;               // one per state
    std::optional<int> hit_time;
    Outcome outcome = Outcome::MaxSteps;
    std::string note;
};

const char* to_string(Trajectory::Outcome o);

// Plain dynamics update; u is a raw control, mapped to atoms by dist.
std::vector<double> step(const DynamicsSpec& f, std::span<const double> x,
                         std::span<const double> u, const ControlDistribution& dist);

// Closed-loop episode: sample a control, assert viability, advance; runs
// until the target is hit, max_steps elapse, or viability is lost. Every
// pre-hit state is checked against v > 0 and membership in C.
Trajectory run_episode(const Scenario& sc, const Certificate& cert,
                       const SemiAlgebraicSet& safe_set, const SemiAlgebraicSet& target,
                       std::span<const double> x0, std::uint64_t seed);

struct MissionLeg {
    int target_index = 0;
    SvmModel svm;
    SemiAlgebraicSet safe_set;  // leg frame
    Certificate certificate;    // leg frame
    Trajectory trajectory;      // scene frame
    std::array<double, 2> frame_center{0, 0};
    double frame_scale = 1.0;
};

struct MissionResult {
    std::vector<MissionLeg> legs;
    bool completed = false;
};

struct MissionError : std::runtime_error {
    MissionError(const std::string& stage, int target_index, const std::string& what)
        : std::runtime_error("mission stage '" + stage + "' failed on target " +
                             std::to_string(target_index) + ": " + what),
          stage_name(stage),
          target(target_index) {}
    std::string stage_name;
    int target;
};

// Full sense-learn-certify-drive loop over the scenario's target list. The
// final state of each episode seeds the next leg.
MissionResult run_mission(const Scenario& sc, bool verbose = false);

// Pure line-of-sight reference rollout (no certificate), for baseline
// comparison runs.
Trajectory run_reference_only(const Scenario& sc, std::span<const double> x0,
                              const SemiAlgebraicSet& target, int max_steps);

std::string trajectory_csv(const Trajectory& t);
void write_trajectory_csv(const Trajectory& t, const std::string& path);

// Scaled-frame decision polynomial (the SVM's own training coordinates).
Polynomial decision_polynomial_scaled(const SvmModel& model);

}  // namespace reachcert
