#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reachcert {

// Coefficients with |c| below this are dropped after every ring operation,
// so coefficient-matching rows built from polynomials stay sparse.
inline constexpr double kCoeffPrune = 1e-12;

// Exponent vector of a single monomial. Length equals the ambient variable
// count of the owning polynomial.
struct Monomial {
    std::vector<unsigned> exps;

    Monomial() = default;
    explicit Monomial(std::size_t n_vars) : exps(n_vars, 0u) {}
    explicit Monomial(std::vector<unsigned> e) : exps(std::move(e)) {}

    unsigned degree() const {
        unsigned d = 0;
        for (unsigned e : exps) d += e;
        return d;
    }
    std::size_t n_vars() const { return exps.size(); }
    bool operator==(const Monomial& o) const { return exps == o.exps; }
};

// Graded lexicographic order: lower total degree first; within a degree
// block, higher power of an earlier variable comes first (1, x0, x1, x0^2,
// x0*x1, x1^2, ...). Fixed globally so constraint row order is reproducible.
bool graded_lex_less(const Monomial& a, const Monomial& b);

struct GradedLexLess {
    bool operator()(const Monomial& a, const Monomial& b) const {
        return graded_lex_less(a, b);
    }
};

// Sparse multivariate polynomial over double coefficients. Values are
// immutable in practice: every operation returns a fresh polynomial, so
// instances can be shared read-only across threads.
class Polynomial {
public:
    using TermMap = std::map<Monomial, double, GradedLexLess>;

    Polynomial() : n_vars_(0) {}
    explicit Polynomial(std::size_t n_vars) : n_vars_(n_vars) {}

    static Polynomial constant(std::size_t n_vars, double c);
    static Polynomial variable(std::size_t n_vars, std::size_t index);

    std::size_t n_vars() const { return n_vars_; }
    const TermMap& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    std::size_t term_count() const { return terms_.size(); }

    // Max total degree over stored terms; the zero polynomial has degree 0.
    unsigned degree() const;

    double coefficient(const Monomial& m) const;

    // Accumulates c onto the monomial's coefficient, pruning near-zero results.
    void add_term(const Monomial& m, double c);

    Polynomial operator+(const Polynomial& rhs) const;
    Polynomial operator-(const Polynomial& rhs) const;
    Polynomial operator*(const Polynomial& rhs) const;
    Polynomial operator*(double s) const;
    Polynomial operator-() const;

    Polynomial pow(unsigned k) const;

    double evaluate(std::span<const double> x) const;

    // result(x) = this(subs[0](x), ..., subs[n_vars-1](x)); all subs must
    // share one ambient variable set.
    Polynomial compose(const std::vector<Polynomial>& subs) const;

    // Fixes the first `prefix.size()` variables to the given values and
    // returns a polynomial in the remaining trailing variables.
    Polynomial partial_evaluate_prefix(std::span<const double> prefix) const;

    // Extends the ambient space to `new_n_vars` variables, mapping variable i
    // to variable i + shift.
    Polynomial embed(std::size_t new_n_vars, std::size_t shift) const;

    std::string str() const;

    bool operator==(const Polynomial& o) const {
        return n_vars_ == o.n_vars_ && terms_ == o.terms_;
    }

private:
    std::size_t n_vars_;
    TermMap terms_;
};

inline Polynomial operator*(double s, const Polynomial& p) { return p * s; }

// All monomials in n_vars variables of total degree <= max_degree, in graded
// lexicographic order. Size is C(n_vars + max_degree, max_degree).
std::vector<Monomial> monomial_basis(std::size_t n_vars, unsigned max_degree);

// Parses `3.5*x0^2*x1 - 1.0` style text; variables are x0..x{n_vars-1},
// whitespace is ignored. Throws std::invalid_argument on malformed input.
Polynomial parse_polynomial(std::string_view text, std::size_t n_vars);

// Conjunction of polynomial inequalities {x | p_i(x) <= 0 for all i}.
struct SemiAlgebraicSet {
    std::size_t n_vars = 0;
    std::vector<Polynomial> constraints;

    SemiAlgebraicSet() = default;
    SemiAlgebraicSet(std::size_t n, std::vector<Polynomial> cs);

    bool contains(std::span<const double> x) const;
    // Largest constraint value at x; <= 0 iff x is a member.
    double max_constraint(std::span<const double> x) const;
};

// Fast flat-layout evaluator for hot loops (controller sampling, Monte
// Carlo oracles). Built once from a Polynomial, then read-only.
struct FlatPoly {
    std::size_t n_vars = 0;
    std::vector<unsigned> exps;   // term-major, n_vars entries per term
    std::vector<double> coefs;

    FlatPoly() = default;
    explicit FlatPoly(const Polynomial& p);
    double evaluate(std::span<const double> x) const;
    std::size_t term_count() const { return coefs.size(); }
};

}  // namespace reachcert
