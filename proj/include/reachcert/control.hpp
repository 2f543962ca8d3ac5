#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "reachcert/crs.hpp"
#include "reachcert/expectation.hpp"
#include "reachcert/rng.hpp"

namespace reachcert {

struct ControllerParams {
    int n_samples = 100;        // N
    double p_omega = 0.0;       // reference-tracking weight
    std::uint64_t seed = 1;
    int fallback_growth = 10;   // resample multiplier when no sample is viable
    int fallback_rounds = 3;
};

struct ViabilityLostError : std::runtime_error {
    double v_at_state;
    double best_v_seen;
    ViabilityLostError(double vx, double best)
        : std::runtime_error("viability lost: v(x0) = " + std::to_string(vx) +
                             ", best v(f(x0,u)) over samples = " + std::to_string(best)),
          v_at_state(vx),
          best_v_seen(best) {}
};

// Distance from x to the target set: exact ||x-c|| - r for ball targets,
// clamped max constraint value otherwise. Zero iff x is a member.
double distance_to_target(std::span<const double> x, const SemiAlgebraicSet& target);

// One controller decision: draw N controls from the endowed distribution,
// keep those with v(f(x,u)) > 0, return the feasible sample minimizing
// dist(f(x,u), X_r) + p_omega * ||u - u_ref||. Ties break on the lowest
// sample index. Throws ViabilityLostError when resampling rounds exhaust.
std::vector<double> synthesize_step(std::span<const double> x, const Certificate& cert,
                                    const DynamicsSpec& f, const ControlDistribution& dist,
                                    const SemiAlgebraicSet& target,
                                    std::span<const double> u_ref,
                                    const ControllerParams& params, Rng& rng);

// Line-of-sight waypoint tracker used as the reference controller for the
// vehicle missions. Emits (speed, heading) pairs.
class LosGuidance {
public:
    LosGuidance(std::vector<std::array<double, 2>> waypoints, double accept_radius,
                double speed)
        : waypoints_(std::move(waypoints)), accept_radius_(accept_radius), speed_(speed) {
        if (waypoints_.empty()) throw std::invalid_argument("empty waypoint path");
    }

    // Heading toward the active waypoint; advances it inside the acceptance
    // radius.
    std::vector<double> reference(std::span<const double> x);

    std::size_t active_waypoint() const { return active_; }
    bool finished() const { return active_ >= waypoints_.size(); }

private:
    std::vector<std::array<double, 2>> waypoints_;
    double accept_radius_;
    double speed_;
    std::size_t active_ = 0;
};

}  // namespace reachcert
