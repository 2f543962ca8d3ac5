#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "reachcert/poly.hpp"
#include "reachcert/rng.hpp"

namespace reachcert {

// Probability measure endowed on the control set U, with an exact moment
// oracle over the control atoms seen by the dynamics polynomials.
//
// UniformBox: atoms are the raw control coordinates, each uniform on
// [lo, hi] independently.
//
// DubinsPolar: U = {(v, theta) | v in v_range, theta in [-pi, pi]}, both
// uniform and independent. The atoms exposed to the dynamics are
// c = v*cos(theta) and s = v*sin(theta), which keeps v(f(x,u)) polynomial.
class ControlDistribution {
public:
    enum class Kind { UniformBox, DubinsPolar };

    static ControlDistribution uniform_box(std::vector<std::pair<double, double>> bounds);
    static ControlDistribution dubins_polar(double v_lo, double v_hi);

    Kind kind() const { return kind_; }
    // Number of atoms the dynamics polynomials see.
    std::size_t n_atoms() const;
    // Dimension of the raw control vector u (2 for DubinsPolar).
    std::size_t n_controls() const;
    const std::vector<std::pair<double, double>>& bounds() const { return bounds_; }

    // Exact E[prod_i atom_i^{e_i}]. Memoized; safe for concurrent callers.
    double moment(std::span<const unsigned> exponents) const;

    // Draws a raw control u ~ P.
    std::vector<double> sample(Rng& rng) const;
    // Maps a raw control to the atom vector the dynamics consume.
    std::vector<double> atoms(std::span<const double> u) const;

private:
    ControlDistribution(Kind k, std::vector<std::pair<double, double>> b)
        : kind_(k), bounds_(std::move(b)), memo_(std::make_shared<Memo>()) {}

    double moment_uncached(std::span<const unsigned> exponents) const;

    Kind kind_;
    // UniformBox: one [lo,hi] per atom. DubinsPolar: bounds_[0] = v range.
    std::vector<std::pair<double, double>> bounds_;

    // Copies of a distribution share one moment cache; the parameters are
    // immutable so the cached values stay valid.
    struct Memo {
        std::mutex mutex;
        std::map<std::vector<unsigned>, double> values;
    };
    std::shared_ptr<Memo> memo_;
};

// Discrete-time polynomial system x(k+1) = f(x(k), u(k)). Each component is
// a polynomial in the state variables x0..x{n_state-1} followed by the
// control atoms x{n_state}..x{n_state+n_atoms-1}.
struct DynamicsSpec {
    std::size_t n_state = 0;
    std::size_t n_control_atoms = 0;
    std::vector<Polynomial> components;

    DynamicsSpec() = default;
    DynamicsSpec(std::size_t ns, std::size_t na, std::vector<Polynomial> comps);

    // Max total degree in the state variables alone, over all components.
    unsigned state_degree() const;
};

// E[v(f(x,u))] as a polynomial in the state variables alone: composes v with
// the dynamics, then replaces every control-atom monomial by its exact
// moment under dist.
Polynomial expected_step(const Polynomial& v, const DynamicsSpec& f,
                         const ControlDistribution& dist);

// Replaces control-atom monomials of a polynomial in (state, atoms) by their
// moments, producing a polynomial in state variables only.
Polynomial integrate_atoms(const Polynomial& p, std::size_t n_state,
                           const ControlDistribution& dist);

}  // namespace reachcert
