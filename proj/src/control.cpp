#include "reachcert/control.hpp"

#include <cmath>
#include <limits>

namespace reachcert {

double distance_to_target(std::span<const double> x, const SemiAlgebraicSet& target) {
    if (target.constraints.size() == 1) {
        if (auto ball = as_ball(target.constraints[0])) {
            double d2 = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                double diff = x[i] - ball->center[i];
                d2 += diff * diff;
            }
            return std::max(0.0, std::sqrt(d2) - ball->radius);
        }
    }
    return std::max(0.0, target.max_constraint(x));
}

std::vector<double> synthesize_step(std::span<const double> x, const Certificate& cert,
                                    const DynamicsSpec& f, const ControlDistribution& dist,
                                    const SemiAlgebraicSet& target,
                                    std::span<const double> u_ref,
                                    const ControllerParams& params, Rng& rng) {
    if (params.n_samples < 1) throw std::invalid_argument("controller needs N >= 1");
    std::vector<double> arg(f.n_state + f.n_control_atoms);
    std::vector<double> next(f.n_state);
    FlatPoly v_flat(cert.v);
    std::vector<FlatPoly> f_flat;
    f_flat.reserve(f.n_state);
    for (const auto& c : f.components) f_flat.emplace_back(c);

    double vx = cert.v.evaluate(x);
    double best_v_seen = -std::numeric_limits<double>::infinity();

    int n_draw = params.n_samples;
    for (int round = 0; round <= params.fallback_rounds; ++round) {
        std::vector<double> best_u;
        double best_cost = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n_draw; ++i) {
            std::vector<double> u = dist.sample(rng);
            std::vector<double> atoms = dist.atoms(u);
            for (std::size_t d = 0; d < f.n_state; ++d) arg[d] = x[d];
            for (std::size_t d = 0; d < atoms.size(); ++d) arg[f.n_state + d] = atoms[d];
            for (std::size_t d = 0; d < f.n_state; ++d) next[d] = f_flat[d].evaluate(arg);
            double v_next = v_flat.evaluate(next);
            best_v_seen = std::max(best_v_seen, v_next);
            if (v_next <= 0.0) continue;
            double cost = distance_to_target(next, target);
            if (params.p_omega > 0.0 && !u_ref.empty()) {
                double d2 = 0.0;
                for (std::size_t d = 0; d < u.size(); ++d) {
                    double diff = u[d] - u_ref[d];
                    d2 += diff * diff;
                }
                cost += params.p_omega * std::sqrt(d2);
            }
            if (cost < best_cost) {
                best_cost = cost;
                best_u = std::move(u);
            }
        }
        if (!best_u.empty()) return best_u;
        n_draw *= params.fallback_growth;
    }
    throw ViabilityLostError(vx, best_v_seen);
}

std::vector<double> LosGuidance::reference(std::span<const double> x) {
    while (active_ < waypoints_.size()) {
        double dx = waypoints_[active_][0] - x[0];
        double dy = waypoints_[active_][1] - x[1];
        if (std::sqrt(dx * dx + dy * dy) > accept_radius_) break;
        ++active_;
    }
    std::size_t wp = active_ < waypoints_.size() ? active_ : waypoints_.size() - 1;
    double heading = std::atan2(waypoints_[wp][1] - x[1], waypoints_[wp][0] - x[0]);
    return {speed_, heading};
}

}  // namespace reachcert
