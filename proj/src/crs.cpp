#include "reachcert/crs.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "reachcert/halton.hpp"

namespace reachcert {

namespace {

constexpr double kResidualTol = 1e-6;
constexpr double kBoundaryTol = 1e-6;
constexpr double kGramTol = 1e-7;

std::vector<double> plain_step(const DynamicsSpec& f, std::span<const double> x,
                               std::span<const double> atoms) {
    std::vector<double> arg(x.begin(), x.end());
    arg.insert(arg.end(), atoms.begin(), atoms.end());
    std::vector<double> next(f.n_state);
    for (std::size_t i = 0; i < f.n_state; ++i) next[i] = f.components[i].evaluate(arg);
    return next;
}

}  // namespace

std::optional<Ball> as_ball(const Polynomial& p) {
    if (p.degree() != 2) return std::nullopt;
    const std::size_t n = p.n_vars();
    double quad = 0.0;
    std::vector<double> lin(n, 0.0);
    double constant = 0.0;
    for (const auto& [m, c] : p.terms()) {
        unsigned deg = m.degree();
        if (deg == 0) {
            constant = c;
        } else if (deg == 1) {
            for (std::size_t i = 0; i < n; ++i)
                if (m.exps[i] == 1) lin[i] = c;
        } else {
            // Quadratic part must be a*I: equal diagonal, no cross terms.
            std::size_t nz = 0, idx = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (m.exps[i]) {
                    ++nz;
                    idx = i;
                }
            if (nz != 1 || m.exps[idx] != 2) return std::nullopt;
            if (quad == 0.0) quad = c;
            else if (std::abs(quad - c) > 1e-9 * std::abs(quad)) return std::nullopt;
        }
    }
    if (quad <= 0.0) return std::nullopt;
    // Every square must be present with the shared coefficient.
    for (std::size_t i = 0; i < n; ++i) {
        Monomial sq(n);
        sq.exps[i] = 2;
        if (std::abs(p.coefficient(sq) - quad) > 1e-9 * std::abs(quad)) return std::nullopt;
    }
    Ball ball;
    ball.center.resize(n);
    double r2 = -constant / quad;
    for (std::size_t i = 0; i < n; ++i) {
        ball.center[i] = -lin[i] / (2.0 * quad);
        r2 += ball.center[i] * ball.center[i];
    }
    if (r2 < 0.0) return std::nullopt;
    ball.radius = std::sqrt(r2);
    return ball;
}

std::vector<std::pair<double, double>> box_for_chat(const SemiAlgebraicSet& chat) {
    if (chat.constraints.size() != 1)
        throw std::invalid_argument("chat must have a single constraint");
    auto ball = as_ball(chat.constraints[0]);
    if (!ball)
        throw std::invalid_argument(
            "cannot derive a sampling box: chat is not a ball, provide domain_box");
    std::vector<std::pair<double, double>> box(chat.n_vars);
    for (std::size_t i = 0; i < chat.n_vars; ++i)
        box[i] = {ball->center[i] - ball->radius, ball->center[i] + ball->radius};
    return box;
}

SemiAlgebraicSet compute_chat(const SemiAlgebraicSet& C, const DynamicsSpec& f,
                              const ControlDistribution& dist, double margin,
                              std::span<const std::pair<double, double>> sample_box) {
    if (margin <= 0.0) throw std::invalid_argument("margin must be positive");
    const std::size_t n = C.n_vars;
    if (sample_box.size() != n) throw std::invalid_argument("sample box arity mismatch");

    auto control_box = [&]() {
        std::vector<std::pair<double, double>> ub;
        if (dist.kind() == ControlDistribution::Kind::DubinsPolar) {
            ub.push_back(dist.bounds()[0]);
            ub.emplace_back(-3.14159265358979323846, 3.14159265358979323846);
        } else {
            ub = dist.bounds();
        }
        return ub;
    }();

    HaltonSequence seq(n + control_box.size());
    auto scan = [&](std::size_t want, double& out_max) {
        std::size_t accepted = 0, guard = 0;
        out_max = 0.0;
        while (accepted < want && ++guard < want * 400) {
            auto pt = seq.next();
            std::vector<double> x(n);
            for (std::size_t i = 0; i < n; ++i)
                x[i] = sample_box[i].first +
                       (sample_box[i].second - sample_box[i].first) * pt[i];
            if (!C.contains(x)) continue;
            std::vector<double> u(control_box.size());
            for (std::size_t i = 0; i < u.size(); ++i)
                u[i] = control_box[i].first +
                       (control_box[i].second - control_box[i].first) * pt[n + i];
            auto next = plain_step(f, x, dist.atoms(u));
            double nx = 0.0, nn = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                nx += x[i] * x[i];
                nn += next[i] * next[i];
            }
            out_max = std::max({out_max, nx, nn});
            ++accepted;
        }
        return accepted;
    };

    double max_sq = 0.0;
    if (scan(10000, max_sq) == 0)
        throw std::runtime_error("compute_chat: no samples landed inside C");
    double r2 = (1.0 + margin) * max_sq;

    // Independent verification pass on a larger sample.
    double verify_max = 0.0;
    scan(100000, verify_max);
    if (verify_max > r2)
        throw std::runtime_error(
            "compute_chat: verification found a one-step image outside the candidate "
            "ball; increase the margin");

    Polynomial h0(n);
    for (std::size_t i = 0; i < n; ++i) {
        Monomial sq(n);
        sq.exps[i] = 2;
        h0.add_term(sq, 1.0);
    }
    h0.add_term(Monomial(n), -r2);
    return SemiAlgebraicSet(n, {h0});
}

std::vector<double> modified_step(std::span<const double> x, std::span<const double> u,
                                  const SemiAlgebraicSet& C, const SemiAlgebraicSet& Xr,
                                  const SemiAlgebraicSet& chat, const DynamicsSpec& f,
                                  const ControlDistribution& dist) {
    if (!chat.contains(x)) throw std::invalid_argument("modified_step: x outside chat");
    if (Xr.contains(x) || !C.contains(x)) return {x.begin(), x.end()};
    return plain_step(f, x, dist.atoms(u));
}

double one_step_margin(std::span<const double> x, const Polynomial& v,
                       const Polynomial& expected_v, double lambda,
                       const SemiAlgebraicSet& C, const SemiAlgebraicSet& Xr) {
    if (Xr.contains(x))
        throw std::invalid_argument("one_step_margin is undefined on the target set");
    double vx = v.evaluate(x);
    if (!C.contains(x)) return (1.0 - lambda) * vx;  // absorbing region
    return expected_v.evaluate(x) - lambda * vx;
}

ValidationReport validate_certificate(const Certificate& cert, const SemiAlgebraicSet& C,
                                      const SemiAlgebraicSet& Xr, const DynamicsSpec& f,
                                      const ControlDistribution& dist,
                                      const std::vector<double>& x0,
                                      std::size_t n_samples,
                                      std::span<const std::pair<double, double>> box) {
    ValidationReport rep;
    rep.n_samples = n_samples;
    Polynomial ev = expected_step(cert.v, f, dist);

    HaltonSequence seq(C.n_vars, 1);
    std::size_t got_one_step = 0, got_boundary = 0, guard = 0;
    rep.worst_one_step = std::numeric_limits<double>::infinity();
    rep.worst_boundary_v = -std::numeric_limits<double>::infinity();
    const std::size_t guard_cap = n_samples * 2000;
    while ((got_one_step < n_samples || got_boundary < n_samples) && ++guard < guard_cap) {
        auto x = seq.next_in_box(box);
        if (!cert.chat.contains(x)) continue;
        bool in_C = C.contains(x);
        if (got_one_step < n_samples && !Xr.contains(x)) {
            double margin = in_C ? ev.evaluate(x) - cert.lambda * cert.v.evaluate(x)
                                 : (1.0 - cert.lambda) * cert.v.evaluate(x);
            rep.worst_one_step = std::min(rep.worst_one_step, margin);
            ++got_one_step;
        }
        if (got_boundary < n_samples && !in_C) {
            rep.worst_boundary_v = std::max(rep.worst_boundary_v, cert.v.evaluate(x));
            ++got_boundary;
        }
    }
    // A Chat that barely exceeds C can make the boundary shell extremely
    // thin; accept a reduced sample count rather than spinning forever.
    if (got_boundary == 0) rep.worst_boundary_v = 0.0;

    rep.v_at_x0 = cert.v.evaluate(x0);
    rep.one_step_ok = rep.worst_one_step >= -kResidualTol;
    rep.boundary_ok = rep.worst_boundary_v <= kBoundaryTol;
    rep.x0_ok = rep.v_at_x0 >= cert.epsilon * (1.0 - 1e-9);
    return rep;
}

Certificate compute_certificate(const SemiAlgebraicSet& C, const SemiAlgebraicSet& Xr,
                                const SemiAlgebraicSet& chat, const DynamicsSpec& f,
                                const ControlDistribution& dist,
                                const std::vector<double>& x0,
                                const CertificateOptions& opts) {
    Certificate cert;
    cert.lambda = opts.lambda;
    cert.epsilon = opts.epsilon;
    cert.chat = chat;
    cert.encoding = opts.paper_exact ? opts.encoding + "/paper-exact" : opts.encoding;

    if (Xr.contains(x0)) {
        cert.v = Polynomial::constant(C.n_vars, 1.0);
        cert.M = 1.0;
        cert.report.degenerate = true;
        cert.report.v_at_x0 = 1.0;
        return cert;
    }

    SosProgram prog;
    prog.v_degree = opts.degree;
    prog.multiplier_degrees = opts.multiplier_degrees;
    prog.lambda = opts.lambda;
    prog.epsilon = opts.epsilon;
    prog.safe_set = C;
    prog.target_set = Xr;
    prog.chat = chat;
    prog.x0 = x0;
    prog.dynamics = f;
    prog.dist = dist;
    prog.paper_exact = opts.paper_exact;

    SosEncoding enc = opts.encoding == "prop1" ? encode_prop1(prog) : encode_theorem1(prog);
    SdpOptions sopts;
    sopts.tol = opts.sdp_tol;
    sopts.verbose = opts.verbose;
    SdpSolution sol = solve_sdp(enc.sdp, sopts);
    if (sol.status == SdpStatus::Infeasible)
        throw InfeasibleError("certificate SDP infeasible at degree " +
                              std::to_string(opts.degree) + "; try a higher degree");
    if (sol.status != SdpStatus::Optimal)
        throw InfeasibleError(std::string("certificate SDP did not converge: ") +
                              to_string(sol.status));

    cert.v = enc.extract_v(sol);
    cert.report.max_identity_residual = enc.max_identity_residual(sol);
    cert.report.min_gram_eigenvalue = enc.min_gram_eigenvalue(sol);
    cert.report.identity_ok = cert.report.max_identity_residual <= kResidualTol;
    cert.report.gram_ok = cert.report.min_gram_eigenvalue >= -kGramTol;

    auto box = opts.domain_box.empty() ? box_for_chat(chat) : opts.domain_box;

    // Sampled maximum of v over Chat, used both as the SOS-bound sanity
    // check and as the flagged-empirical fallback.
    double sampled_max = -std::numeric_limits<double>::infinity();
    {
        HaltonSequence seq(C.n_vars, 7);
        std::size_t got = 0, guard = 0;
        while (got < 10000 && ++guard < 4000000) {
            auto x = seq.next_in_box(box);
            if (!chat.contains(x)) continue;
            sampled_max = std::max(sampled_max, cert.v.evaluate(x));
            ++got;
        }
    }

    cert.M = sampled_max * (sampled_max >= 0 ? 1.05 : 0.95);
    cert.report.m_certified = false;
    try {
        SosEncoding menc = encode_upper_bound(cert.v, chat, opts.degree);
        SdpSolution msol = solve_sdp(menc.sdp, sopts);
        if (msol.status == SdpStatus::Optimal) {
            double m_sdp = msol.free_values(menc.scalar_index);
            double resid = menc.max_identity_residual(msol);
            if (resid <= kResidualTol && m_sdp >= sampled_max - kResidualTol) {
                cert.M = std::max(m_sdp, sampled_max);
                cert.report.m_certified = true;
            }
        }
    } catch (const std::exception&) {
        // fall through to the sampled bound
    }

    ValidationReport rep = validate_certificate(cert, C, Xr, f, dist, x0,
                                                opts.validation_samples, box);
    rep.max_identity_residual = cert.report.max_identity_residual;
    rep.min_gram_eigenvalue = cert.report.min_gram_eigenvalue;
    rep.identity_ok = cert.report.identity_ok;
    rep.gram_ok = cert.report.gram_ok;
    rep.m_certified = cert.report.m_certified;
    cert.report = rep;

    if (!cert.report.passed()) {
        std::string msg = "certificate failed validation:";
        if (!rep.one_step_ok)
            msg += " one-step margin " + std::to_string(rep.worst_one_step);
        if (!rep.boundary_ok)
            msg += " boundary v " + std::to_string(rep.worst_boundary_v);
        if (!rep.x0_ok) msg += " v(x0) " + std::to_string(rep.v_at_x0);
        if (!rep.identity_ok)
            msg += " identity residual " + std::to_string(rep.max_identity_residual);
        if (!rep.gram_ok)
            msg += " gram eigenvalue " + std::to_string(rep.min_gram_eigenvalue);
        throw ValidationError(msg);
    }
    return cert;
}

HittingBounds hitting_bounds(const Certificate& cert, std::span<const double> x0) {
    double v0 = cert.report.degenerate ? 1.0 : cert.v.evaluate(x0);
    if (v0 <= 0.0)
        throw std::invalid_argument("hitting bounds need v(x0) > 0, got " +
                                    std::to_string(v0));
    HittingBounds hb;
    double ratio = std::max(cert.M / v0, 1.0);
    hb.t_max = std::log(ratio) / std::log(cert.lambda);
    hb.e_t_max = (std::max(cert.M, v0) - v0) / ((cert.lambda - 1.0) * v0);
    return hb;
}

void save_certificate_json(const Certificate& cert, const std::string& path) {
    nlohmann::json j;
    j["n_vars"] = cert.v.n_vars();
    auto& terms = j["v"] = nlohmann::json::array();
    for (const auto& [m, c] : cert.v.terms())
        terms.push_back({{"exps", m.exps}, {"coef", c}});
    j["lambda"] = cert.lambda;
    j["epsilon"] = cert.epsilon;
    j["M"] = cert.M;
    j["encoding"] = cert.encoding;
    auto& cs = j["chat"] = nlohmann::json::array();
    for (const auto& p : cert.chat.constraints) cs.push_back(p.str());
    const auto& r = cert.report;
    j["validation"] = {{"n_samples", r.n_samples},
                       {"worst_one_step", r.worst_one_step},
                       {"worst_boundary_v", r.worst_boundary_v},
                       {"v_at_x0", r.v_at_x0},
                       {"max_identity_residual", r.max_identity_residual},
                       {"min_gram_eigenvalue", r.min_gram_eigenvalue},
                       {"one_step_ok", r.one_step_ok},
                       {"boundary_ok", r.boundary_ok},
                       {"x0_ok", r.x0_ok},
                       {"identity_ok", r.identity_ok},
                       {"gram_ok", r.gram_ok},
                       {"m_certified", r.m_certified},
                       {"degenerate", r.degenerate}};
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

Certificate load_certificate_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j;
    f >> j;
    Certificate cert;
    std::size_t n = j.at("n_vars").get<std::size_t>();
    Polynomial v(n);
    for (const auto& t : j.at("v")) {
        Monomial m(t.at("exps").get<std::vector<unsigned>>());
        v.add_term(m, t.at("coef").get<double>());
    }
    cert.v = v;
    cert.lambda = j.at("lambda").get<double>();
    cert.epsilon = j.at("epsilon").get<double>();
    cert.M = j.at("M").get<double>();
    cert.encoding = j.at("encoding").get<std::string>();
    std::vector<Polynomial> cs;
    for (const auto& s : j.at("chat")) cs.push_back(parse_polynomial(s.get<std::string>(), n));
    cert.chat = SemiAlgebraicSet(n, std::move(cs));
    const auto& r = j.at("validation");
    cert.report.n_samples = r.at("n_samples").get<std::size_t>();
    cert.report.worst_one_step = r.at("worst_one_step").get<double>();
    cert.report.worst_boundary_v = r.at("worst_boundary_v").get<double>();
    cert.report.v_at_x0 = r.at("v_at_x0").get<double>();
    cert.report.max_identity_residual = r.at("max_identity_residual").get<double>();
    cert.report.min_gram_eigenvalue = r.at("min_gram_eigenvalue").get<double>();
    cert.report.one_step_ok = r.at("one_step_ok").get<bool>();
    cert.report.boundary_ok = r.at("boundary_ok").get<bool>();
    cert.report.x0_ok = r.at("x0_ok").get<bool>();
    cert.report.identity_ok = r.at("identity_ok").get<bool>();
    cert.report.gram_ok = r.at("gram_ok").get<bool>();
    cert.report.m_certified = r.at("m_certified").get<bool>();
    cert.report.degenerate = r.at("degenerate").get<bool>();
    return cert;
}

}  // namespace reachcert
