#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reachcert/expectation.hpp"
#include "reachcert/poly.hpp"
#include "reachcert/sos.hpp"

namespace reachcert {

// Euclidean ball {x : ||x - center||^2 <= radius^2}.
struct Ball {
    std::vector<double> center;
    double radius = 0.0;
};

// Recognizes constraints of the form a*||x - c||^2 - b <= 0 with a > 0.
std::optional<Ball> as_ball(const Polynomial& constraint);

struct ValidationReport {
    std::size_t n_samples = 0;
    // min over Chat\X_r samples of E[v(fhat(x,u))] - lambda*v(x).
    double worst_one_step = 0.0;
    // max of v over Chat\C samples.
    double worst_boundary_v = 0.0;
    double v_at_x0 = 0.0;
    double max_identity_residual = 0.0;
    double min_gram_eigenvalue = 0.0;
    bool one_step_ok = false;
    bool boundary_ok = false;
    bool x0_ok = false;
    bool identity_ok = false;
    bool gram_ok = false;
    bool m_certified = false;  // false when M fell back to the sampled max
    bool degenerate = false;   // x0 was already inside the target set

    bool passed() const {
        return degenerate || (one_step_ok && boundary_ok && x0_ok && identity_ok && gram_ok);
    }
};

struct Certificate {
    Polynomial v;
    double lambda = 1.01;
    double epsilon = 1e-6;
    double M = 0.0;  // upper bound on sup over Chat of v
    SemiAlgebraicSet chat;
    std::string encoding = "theorem1";
    ValidationReport report;

    bool in_omega(std::span<const double> x, const SemiAlgebraicSet& safe_set) const {
        return safe_set.contains(x) && v.evaluate(x) > 0.0;
    }
};

struct CertificateOptions {
    unsigned degree = 6;
    double lambda = 1.01;
    double epsilon = 1e-6;
    std::string encoding = "theorem1";  // "theorem1" or "prop1"
    bool paper_exact = false;
    std::map<std::string, unsigned> multiplier_degrees;
    std::size_t validation_samples = 10000;
    // Sampling box covering Chat; derived from a ball-shaped Chat when empty.
    std::vector<std::pair<double, double>> domain_box;
    double sdp_tol = 1e-8;
    bool verbose = false;
};

struct InfeasibleError : std::runtime_error {
    explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Ball enlargement of C covering its one-step image: radius^2 is
// (1+margin) times the sampled max of max(||f(x,u)||^2, ||x||^2) over C x U,
// re-verified on an independent larger sample.
SemiAlgebraicSet compute_chat(const SemiAlgebraicSet& C, const DynamicsSpec& f,
                              const ControlDistribution& dist, double margin,
                              std::span<const std::pair<double, double>> sample_box);

// One step of the absorbing dynamics: f(x,u) inside C \ X_r, frozen on X_r
// and on Chat \ C.
std::vector<double> modified_step(std::span<const double> x, std::span<const double> u,
                                  const SemiAlgebraicSet& C, const SemiAlgebraicSet& Xr,
                                  const SemiAlgebraicSet& chat, const DynamicsSpec& f,
                                  const ControlDistribution& dist);

// E[v(fhat(x,u))] - lambda*v(x) evaluated exactly via the moment oracle;
// expected_v must be expected_step(v, f, dist).
double one_step_margin(std::span<const double> x, const Polynomial& v,
                       const Polynomial& expected_v, double lambda,
                       const SemiAlgebraicSet& C, const SemiAlgebraicSet& Xr);

// Full pipeline: encode, solve, extract v, bound M, validate. Throws
// InfeasibleError / ValidationError on the corresponding failures.
Certificate compute_certificate(const SemiAlgebraicSet& C, const SemiAlgebraicSet& Xr,
                                const SemiAlgebraicSet& chat, const DynamicsSpec& f,
                                const ControlDistribution& dist,
                                const std::vector<double>& x0,
                                const CertificateOptions& opts);

ValidationReport validate_certificate(const Certificate& cert, const SemiAlgebraicSet& C,
                                      const SemiAlgebraicSet& Xr, const DynamicsSpec& f,
                                      const ControlDistribution& dist,
                                      const std::vector<double>& x0,
                                      std::size_t n_samples,
                                      std::span<const std::pair<double, double>> box);

struct HittingBounds {
    double t_max = 0.0;    // log_lambda(M / v(x0))
    double e_t_max = 0.0;  // (M - v(x0)) / ((lambda-1) v(x0))
};

HittingBounds hitting_bounds(const Certificate& cert, std::span<const double> x0);

void save_certificate_json(const Certificate& cert, const std::string& path);
Certificate load_certificate_json(const std::string& path);

// Sampling box covering a ball-shaped single-constraint set.
std::vector<std::pair<double, double>> box_for_chat(const SemiAlgebraicSet& chat);

}  // namespace reachcert
