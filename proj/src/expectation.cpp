#include "reachcert/expectation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace reachcert {

namespace {

// E[t^k] for t uniform on [a, b].
double uniform_power_moment(double a, double b, unsigned k) {
    if (b < a) throw std::invalid_argument("uniform bound lo > hi");
    if (b == a) {
        double r = 1.0;
        for (unsigned i = 0; i < k; ++i) r *= a;
        return r;
    }
    // (b^{k+1} - a^{k+1}) / ((k+1)(b-a)), evaluated via the stable sum
    // sum_{i=0..k} a^i b^{k-i} / (k+1) to avoid cancellation for a ~ b.
    double sum = 0.0, ap = 1.0;
    for (unsigned i = 0; i <= k; ++i) {
        double bp = 1.0;
        for (unsigned j = 0; j < k - i; ++j) bp *= b;
        sum += ap * bp;
        ap *= a;
    }
    return sum / static_cast<double>(k + 1);
}

// (1/2pi) * integral over [-pi,pi] of cos^a(t) sin^b(t) dt. Zero for odd a
// or b; otherwise (2p)!(2q)! / (4^{p+q} p! q! (p+q)!) with a=2p, b=2q.
double angular_moment(unsigned a, unsigned b) {
    if ((a | b) == 0) return 1.0;
    if ((a & 1u) || (b & 1u)) return 0.0;
    unsigned p = a / 2, q = b / 2;
    // Build the ratio incrementally to stay in range for large exponents.
    // (2p)!/(4^p p!) = prod_{i=1..p} (2i-1)/2, same for q; divide by (p+q)!/(p! q! ... )
    // Simplest exact route at these sizes: direct factorials in double.
    auto fact = [](unsigned n) {
        double r = 1.0;
        for (unsigned i = 2; i <= n; ++i) r *= i;
        return r;
    };
    double num = fact(2 * p) * fact(2 * q);
    double den = std::pow(4.0, p + q) * fact(p) * fact(q) * fact(p + q);
    return num / den;
}

}  // namespace

ControlDistribution ControlDistribution::uniform_box(
    std::vector<std::pair<double, double>> bounds) {
    if (bounds.empty()) throw std::invalid_argument("uniform_box needs >= 1 dimension");
    for (auto& [lo, hi] : bounds)
        if (hi < lo) throw std::invalid_argument("uniform_box bound lo > hi");
    return ControlDistribution(Kind::UniformBox, std::move(bounds));
}

ControlDistribution ControlDistribution::dubins_polar(double v_lo, double v_hi) {
    if (v_hi < v_lo) throw std::invalid_argument("dubins_polar speed range inverted");
    return ControlDistribution(Kind::DubinsPolar, {{v_lo, v_hi}});
}

std::size_t ControlDistribution::n_atoms() const {
    return kind_ == Kind::DubinsPolar ? 2 : bounds_.size();
}

std::size_t ControlDistribution::n_controls() const {
    return kind_ == Kind::DubinsPolar ? 2 : bounds_.size();
}

double ControlDistribution::moment(std::span<const unsigned> exponents) const {
    if (exponents.size() != n_atoms())
        throw std::invalid_argument("moment exponent arity mismatch");
    std::vector<unsigned> key(exponents.begin(), exponents.end());
    {
        std::lock_guard lock(memo_->mutex);
        auto it = memo_->values.find(key);
        if (it != memo_->values.end()) return it->second;
    }
    double value = moment_uncached(exponents);
    std::lock_guard lock(memo_->mutex);
    memo_->values.emplace(std::move(key), value);
    return value;
}

double ControlDistribution::moment_uncached(std::span<const unsigned> e) const {
    if (kind_ == Kind::UniformBox) {
        double m = 1.0;
        for (std::size_t i = 0; i < e.size(); ++i)
            m *= uniform_power_moment(bounds_[i].first, bounds_[i].second, e[i]);
        return m;
    }
    // E[(v cos)^a (v sin)^b] = E[v^{a+b}] * angular part, by independence.
    unsigned a = e[0], b = e[1];
    return uniform_power_moment(bounds_[0].first, bounds_[0].second, a + b) *
           angular_moment(a, b);
}

std::vector<double> ControlDistribution::sample(Rng& rng) const {
    if (kind_ == Kind::UniformBox) {
        std::vector<double> u(bounds_.size());
        for (std::size_t i = 0; i < u.size(); ++i)
            u[i] = rng.uniform(bounds_[i].first, bounds_[i].second);
        return u;
    }
    double v = rng.uniform(bounds_[0].first, bounds_[0].second);
    double theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
    return {v, theta};
}

std::vector<double> ControlDistribution::atoms(std::span<const double> u) const {
    if (u.size() != n_controls()) throw std::invalid_argument("control arity mismatch");
    if (kind_ == Kind::UniformBox) return {u.begin(), u.end()};
    return {u[0] * std::cos(u[1]), u[0] * std::sin(u[1])};
}

DynamicsSpec::DynamicsSpec(std::size_t ns, std::size_t na, std::vector<Polynomial> comps)
    : n_state(ns), n_control_atoms(na), components(std::move(comps)) {
    if (components.size() != n_state)
        throw std::invalid_argument("dynamics needs one component per state variable");
    for (const auto& c : components)
        if (c.n_vars() != n_state + n_control_atoms)
            throw std::invalid_argument("dynamics component arity mismatch");
}

unsigned DynamicsSpec::state_degree() const {
    unsigned d = 0;
    for (const auto& c : components)
        for (const auto& [m, coef] : c.terms()) {
            unsigned sd = 0;
            for (std::size_t i = 0; i < n_state; ++i) sd += m.exps[i];
            d = std::max(d, sd);
        }
    return d;
}

Polynomial integrate_atoms(const Polynomial& p, std::size_t n_state,
                           const ControlDistribution& dist) {
    if (p.n_vars() < n_state) throw std::invalid_argument("integrate_atoms arity mismatch");
    std::size_t n_atoms = p.n_vars() - n_state;
    if (n_atoms != dist.n_atoms())
        throw std::invalid_argument("integrate_atoms: atom count mismatch");
    Polynomial out(n_state);
    std::vector<unsigned> atom_exps(n_atoms);
    for (const auto& [m, c] : p.terms()) {
        Monomial head(n_state);
        for (std::size_t i = 0; i < n_state; ++i) head.exps[i] = m.exps[i];
        for (std::size_t i = 0; i < n_atoms; ++i) atom_exps[i] = m.exps[n_state + i];
        out.add_term(head, c * dist.moment(atom_exps));
    }
    return out;
}

Polynomial expected_step(const Polynomial& v, const DynamicsSpec& f,
                         const ControlDistribution& dist) {
    if (v.n_vars() != f.n_state)
        throw std::invalid_argument("expected_step: v arity must match state count");
    if (f.n_control_atoms != dist.n_atoms())
        throw std::invalid_argument("expected_step: distribution/dynamics atom mismatch");
    Polynomial composed = v.compose(f.components);
    return integrate_atoms(composed, f.n_state, dist);
}

}  // namespace reachcert
