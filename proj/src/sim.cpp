#include "reachcert/sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

namespace reachcert {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Positive roots of the ray/axis-slab intersection, or +inf.
double slab_hit(double o, double d, double lo, double hi, double& t_in, double& t_out) {
    if (d == 0.0) {
        if (o < lo || o > hi) return -1.0;
        t_in = -kInf;
        t_out = kInf;
        return 0.0;
    }
    double t1 = (lo - o) / d, t2 = (hi - o) / d;
    t_in = std::min(t1, t2);
    t_out = std::max(t1, t2);
    return 0.0;
}

}  // namespace

Obstacle Obstacle::rect(double x, double y, double w, double h) {
    Obstacle o;
    o.shape = Shape::Rect;
    o.x = x;
    o.y = y;
    o.w = w;
    o.h = h;
    return o;
}

Obstacle Obstacle::disc(double cx, double cy, double r) {
    Obstacle o;
    o.shape = Shape::Disc;
    o.x = cx;
    o.y = cy;
    o.r = r;
    return o;
}

bool Obstacle::contains(double px, double py) const {
    if (shape == Shape::Rect)
        return px >= x && px <= x + w && py >= y && py <= y + h;
    double dx = px - x, dy = py - y;
    return dx * dx + dy * dy <= r * r;
}

double Obstacle::ray_hit(double ox, double oy, double dx, double dy) const {
    if (shape == Shape::Rect) {
        double tx_in, tx_out, ty_in, ty_out;
        if (slab_hit(ox, dx, x, x + w, tx_in, tx_out) < 0.0) return kInf;
        if (slab_hit(oy, dy, y, y + h, ty_in, ty_out) < 0.0) return kInf;
        double t_in = std::max(tx_in, ty_in);
        double t_out = std::min(tx_out, ty_out);
        if (t_in > t_out || t_out < 0.0) return kInf;
        return t_in >= 0.0 ? t_in : 0.0;
    }
    // Ray-circle: ||o + t d - c||^2 = r^2.
    double fx = ox - x, fy = oy - y;
    double a = dx * dx + dy * dy;
    double b = 2.0 * (fx * dx + fy * dy);
    double c = fx * fx + fy * fy - r * r;
    double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return kInf;
    double sq = std::sqrt(disc);
    double t1 = (-b - sq) / (2.0 * a);
    double t2 = (-b + sq) / (2.0 * a);
    if (t1 >= 0.0) return t1;
    if (t2 >= 0.0) return 0.0;  // origin inside
    return kInf;
}

bool Environment::in_obstacle(double px, double py) const {
    for (const auto& o : obstacles)
        if (o.contains(px, py)) return true;
    return false;
}

double Environment::ray_distance(double ox, double oy, double angle) const {
    double dx = std::cos(angle), dy = std::sin(angle);
    double best = kInf;
    for (const auto& o : obstacles) best = std::min(best, o.ray_hit(ox, oy, dx, dy));
    // Bounding walls.
    if (dx > 0.0) best = std::min(best, (width - ox) / dx);
    if (dx < 0.0) best = std::min(best, -ox / dx);
    if (dy > 0.0) best = std::min(best, (height - oy) / dy);
    if (dy < 0.0) best = std::min(best, -oy / dy);
    return best;
}

SensorScan lidar_scan(const Environment& env, std::span<const double> origin, int n_rays,
                      double max_range) {
    if (origin.size() != 2) throw std::invalid_argument("lidar origin must be planar");
    if (!env.inside_box(origin[0], origin[1]))
        throw std::invalid_argument("lidar origin outside the scene");
    if (env.in_obstacle(origin[0], origin[1]))
        throw std::invalid_argument("lidar origin inside an obstacle");
    if (n_rays < 8) throw std::invalid_argument("need at least 8 rays");

    SensorScan scan;
    scan.origin = {origin[0], origin[1]};
    scan.max_range = max_range;
    for (int i = 0; i < n_rays; ++i) {
        double angle = 2.0 * std::numbers::pi * i / n_rays;
        double d = env.ray_distance(origin[0], origin[1], angle);
        scan.ray_angles.push_back(angle);
        scan.hit_distance.push_back(d <= max_range ? d : kInf);
    }
    return scan;
}

CertificateOptions Scenario::certificate_options() const {
    CertificateOptions opts;
    opts.degree = degree;
    opts.lambda = lambda;
    opts.epsilon = epsilon;
    opts.encoding = encoding;
    opts.paper_exact = paper_exact;
    opts.multiplier_degrees = multiplier_degrees;
    opts.domain_box = domain_box;
    return opts;
}

const char* to_string(Trajectory::Outcome o) {
    switch (o) {
        case Trajectory::Outcome::Hit: return "hit";
        case Trajectory::Outcome::MaxSteps: return "max_steps";
        case Trajectory::Outcome::ViabilityLost: return "viability_lost";
        case Trajectory::Outcome::SafetyViolation: return "safety_violation";
    }
    return "?";
}

std::vector<double> step(const DynamicsSpec& f, std::span<const double> x,
                         std::span<const double> u, const ControlDistribution& dist) {
    if (x.size() != f.n_state) throw std::invalid_argument("step: state arity mismatch");
    std::vector<double> atoms = dist.atoms(u);
    std::vector<double> arg(x.begin(), x.end());
    arg.insert(arg.end(), atoms.begin(), atoms.end());
    std::vector<double> next(f.n_state);
    for (std::size_t i = 0; i < f.n_state; ++i) next[i] = f.components[i].evaluate(arg);
    return next;
}

Trajectory run_episode(const Scenario& sc, const Certificate& cert,
                       const SemiAlgebraicSet& safe_set, const SemiAlgebraicSet& target,
                       std::span<const double> x0, std::uint64_t seed) {
    Trajectory traj;
    std::vector<double> x(x0.begin(), x0.end());

    int max_steps = sc.max_steps;
    if (max_steps <= 0) {
        if (target.contains(x)) {
            max_steps = 1;
        } else {
            auto hb = hitting_bounds(cert, x);
            max_steps = 2 * static_cast<int>(std::ceil(hb.t_max));
            max_steps = std::max(max_steps, 16);
        }
    }

    Rng rng(seed);
    std::optional<LosGuidance> los;
    if (!sc.waypoints.empty() && sc.controller.p_omega > 0.0) {
        double speed = sc.dist.bounds()[0].second;  // max admissible speed
        los.emplace(sc.waypoints, sc.accept_radius, speed);
    }

    traj.states.push_back(x);
    traj.v_values.push_back(cert.v.evaluate(x));
    for (int t = 0; t <= max_steps; ++t) {
        if (target.contains(x)) {
            traj.hit_time = t;
            traj.outcome = Trajectory::Outcome::Hit;
            return traj;
        }
        if (t == max_steps) break;
        if (!safe_set.contains(x) || traj.v_values.back() <= 0.0) {
            traj.outcome = Trajectory::Outcome::SafetyViolation;
            traj.note = "pre-hit state left the certified region";
            return traj;
        }
        std::vector<double> u_ref;
        if (los) u_ref = los->reference(x);
        std::vector<double> u;
        try {
            u = synthesize_step(x, cert, sc.dynamics, sc.dist, target, u_ref,
                                sc.controller, rng);
        } catch (const ViabilityLostError& e) {
            traj.outcome = Trajectory::Outcome::ViabilityLost;
            traj.note = e.what();
            return traj;
        }
        x = step(sc.dynamics, x, u, sc.dist);
        traj.controls.push_back(std::move(u));
        traj.states.push_back(x);
        traj.v_values.push_back(cert.v.evaluate(x));
    }
    traj.outcome = Trajectory::Outcome::MaxSteps;
    return traj;
}

Trajectory run_reference_only(const Scenario& sc, std::span<const double> x0,
                              const SemiAlgebraicSet& target, int max_steps) {
    Trajectory traj;
    std::vector<double> x(x0.begin(), x0.end());
    double speed = sc.dist.bounds()[0].second;
    LosGuidance los(sc.waypoints, sc.accept_radius, speed);
    traj.states.push_back(x);
    traj.v_values.push_back(0.0);
    for (int t = 0; t <= max_steps; ++t) {
        if (target.contains(x)) {
            traj.hit_time = t;
            traj.outcome = Trajectory::Outcome::Hit;
            return traj;
        }
        if (t == max_steps) break;
        std::vector<double> u = los.reference(x);
        x = step(sc.dynamics, x, u, sc.dist);
        traj.controls.push_back(std::move(u));
        traj.states.push_back(x);
        traj.v_values.push_back(0.0);
    }
    traj.outcome = Trajectory::Outcome::MaxSteps;
    return traj;
}

Polynomial decision_polynomial_scaled(const SvmModel& model) {
    const std::size_t n = model.n_dims();
    Polynomial dec(n);
    dec.add_term(Monomial(n), model.bias);
    const double s2 = model.kernel.scale * model.kernel.scale;
    for (std::size_t i = 0; i < model.support_x.size(); ++i) {
        Polynomial lin = Polynomial::constant(n, 1.0);
        for (std::size_t d = 0; d < n; ++d)
            lin = lin + Polynomial::variable(n, d) * (model.support_x[i][d] / s2);
        dec = dec + lin.pow(model.kernel.degree) * model.alpha_y[i];
    }
    return dec;
}

namespace {

// Constraint rescaled so its largest coefficient has magnitude 1; membership
// is unchanged and the SOS blocks stay well conditioned.
Polynomial normalize_constraint(const Polynomial& p) {
    double m = 0.0;
    for (const auto& [mono, c] : p.terms()) m = std::max(m, std::abs(c));
    return m > 0.0 ? p * (1.0 / m) : p;
}

}  // namespace

MissionResult run_mission(const Scenario& sc, bool verbose) {
    if (!sc.environment) throw std::invalid_argument("mission needs an environment");
    const Environment& env = *sc.environment;
    const MissionConfig& mc = sc.mission;
    const std::size_t n = sc.dynamics.n_state;
    if (n != 2) throw std::invalid_argument("missions are planar");

    MissionResult result;
    std::vector<double> pos = sc.x0;
    double delta = mc.delta > 0.0 ? mc.delta : mc.scan_radius / 10.0;

    for (std::size_t ti = 0; ti < sc.targets.size(); ++ti) {
        const int tidx = static_cast<int>(ti);
        MissionLeg leg;
        leg.target_index = tidx;

        SensorScan scan;
        std::vector<LabeledSample> labels;
        try {
            scan = lidar_scan(env, pos, mc.n_rays, mc.scan_radius);
            labels = generate_labels(scan, delta);
        } catch (const std::exception& e) {
            throw MissionError("lidar_scan", tidx, e.what());
        }

        try {
            SvmKernel kernel{1.0, mc.svm_degree};
            leg.svm = train_svm(labels, mc.c_plus, mc.c_minus, kernel);
        } catch (const std::exception& e) {
            throw MissionError("train_svm", tidx, e.what());
        }

        // Everything downstream runs in the SVM's training frame, which is a
        // well-conditioned isotropic rescaling of the scanned neighborhood.
        const auto& center = leg.svm.center;
        const double scale = leg.svm.input_scale;
        leg.frame_center = {center[0], center[1]};
        leg.frame_scale = scale;

        auto to_local = [&](std::span<const double> p) {
            std::vector<double> q(n);
            for (std::size_t i = 0; i < n; ++i) q[i] = (p[i] - center[i]) / scale;
            return q;
        };
        auto to_scene = [&](std::span<const double> p) {
            std::vector<double> q(n);
            for (std::size_t i = 0; i < n; ++i) q[i] = center[i] + scale * p[i];
            return q;
        };

        std::vector<double> x0_local = to_local(pos);

        try {
            Polynomial dec = decision_polynomial_scaled(leg.svm);
            Polynomial h_svm = Polynomial::constant(n, 1.0) - dec;
            // Cap the learned set by the scanned disc so it stays bounded.
            Polynomial cap(n);
            for (std::size_t i = 0; i < n; ++i) {
                Monomial sq(n);
                sq.exps[i] = 2;
                cap.add_term(sq, 1.0);
                Monomial li(n);
                li.exps[i] = 1;
                cap.add_term(li, -2.0 * x0_local[i]);
            }
            double rho = (mc.scan_radius + delta) / scale;
            double c0 = -rho * rho;
            for (std::size_t i = 0; i < n; ++i) c0 += x0_local[i] * x0_local[i];
            cap.add_term(Monomial(n), c0);
            leg.safe_set = SemiAlgebraicSet(
                n, {normalize_constraint(h_svm), normalize_constraint(cap)});
        } catch (const std::exception& e) {
            throw MissionError("decision_polynomial", tidx, e.what());
        }

        // Dynamics and target mapped into the leg frame.
        DynamicsSpec f_local;
        SemiAlgebraicSet target_local;
        try {
            std::size_t na = sc.dynamics.n_control_atoms;
            std::vector<Polynomial> subs;
            for (std::size_t i = 0; i < n; ++i)
                subs.push_back(Polynomial::constant(n + na, center[i]) +
                               Polynomial::variable(n + na, i) * scale);
            for (std::size_t i = 0; i < na; ++i)
                subs.push_back(Polynomial::variable(n + na, n + i));
            std::vector<Polynomial> comps;
            for (std::size_t i = 0; i < n; ++i)
                comps.push_back((sc.dynamics.components[i].compose(subs) -
                                 Polynomial::constant(n + na, center[i])) *
                                (1.0 / scale));
            f_local = DynamicsSpec(n, na, comps);

            // Target constraints are polynomials in state vars only.
            std::vector<Polynomial> tcs;
            std::vector<Polynomial> tsubs;
            for (std::size_t i = 0; i < n; ++i)
                tsubs.push_back(Polynomial::constant(n, center[i]) +
                                Polynomial::variable(n, i) * scale);
            for (const auto& g : sc.targets[ti].constraints)
                tcs.push_back(normalize_constraint(g.compose(tsubs)));
            target_local = SemiAlgebraicSet(n, tcs);
        } catch (const std::exception& e) {
            throw MissionError("frame_transform", tidx, e.what());
        }

        SemiAlgebraicSet chat_local;
        try {
            std::vector<std::pair<double, double>> box(n, {-1.6, 1.6});
            chat_local = compute_chat(leg.safe_set, f_local, sc.dist, mc.chat_margin, box);
        } catch (const std::exception& e) {
            throw MissionError("compute_chat", tidx, e.what());
        }

        try {
            CertificateOptions opts = sc.certificate_options();
            opts.degree = mc.cert_degree;
            opts.domain_box.assign(n, {-1.6, 1.6});
            opts.verbose = verbose;
            leg.certificate = compute_certificate(leg.safe_set, target_local, chat_local,
                                                  f_local, sc.dist, x0_local, opts);
        } catch (const std::exception& e) {
            throw MissionError("compute_certificate", tidx, e.what());
        }

        try {
            Scenario local = sc;
            local.dynamics = f_local;
            local.max_steps = sc.max_steps;
            local.accept_radius = sc.accept_radius / scale;
            local.waypoints.clear();
            // Straight-line reference toward the target center in leg frame.
            if (auto ball = as_ball(sc.targets[ti].constraints[0])) {
                auto c_local = to_local(ball->center);
                local.waypoints.push_back({c_local[0], c_local[1]});
            } else {
                local.waypoints.push_back({x0_local[0], x0_local[1]});
            }
            Trajectory local_traj =
                run_episode(local, leg.certificate, leg.safe_set, target_local, x0_local,
                            sc.controller.seed + ti);
            // Record in scene coordinates.
            leg.trajectory = local_traj;
            for (auto& st : leg.trajectory.states) st = to_scene(st);
            if (local_traj.outcome != Trajectory::Outcome::Hit)
                throw std::runtime_error(std::string("episode ended with ") +
                                         to_string(local_traj.outcome));
        } catch (const MissionError&) {
            throw;
        } catch (const std::exception& e) {
            throw MissionError("run_episode", tidx, e.what());
        }

        pos = leg.trajectory.states.back();
        result.legs.push_back(std::move(leg));
    }
    result.completed = true;
    return result;
}

std::string trajectory_csv(const Trajectory& t) {
    std::string out = "step";
    std::size_t n = t.states.empty() ? 0 : t.states[0].size();
    std::size_t m = t.controls.empty() ? 0 : t.controls[0].size();
    char buf[40];
    for (std::size_t i = 0; i < n; ++i) out += ",x" + std::to_string(i);
    for (std::size_t i = 0; i < m; ++i) out += ",u" + std::to_string(i);
    out += ",v\n";
    for (std::size_t s = 0; s < t.states.size(); ++s) {
        out += std::to_string(s);
        for (std::size_t i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof buf, ",%.17g", t.states[s][i]);
            out += buf;
        }
        for (std::size_t i = 0; i < m; ++i) {
            if (s < t.controls.size()) {
                std::snprintf(buf, sizeof buf, ",%.17g", t.controls[s][i]);
                out += buf;
            } else {
                out += ",";
            }
        }
        std::snprintf(buf, sizeof buf, ",%.17g", t.v_values[s]);
        out += buf;
        out += "\n";
    }
    return out;
}

void write_trajectory_csv(const Trajectory& t, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << trajectory_csv(t);
}

}  // namespace reachcert
