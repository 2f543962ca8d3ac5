#include "reachcert/poly.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace reachcert {

namespace {

double ipow(double base, unsigned e) {
    double r = 1.0;
    while (e) {
        if (e & 1u) r *= base;
        base *= base;
        e >>= 1u;
    }
    return r;
}

void check_same_vars(const Polynomial& a, const Polynomial& b) {
    if (a.n_vars() != b.n_vars())
        throw std::invalid_argument("polynomial variable counts differ: " +
                                    std::to_string(a.n_vars()) + " vs " +
                                    std::to_string(b.n_vars()));
}

Monomial mul_monomials(const Monomial& a, const Monomial& b) {
    Monomial r = a;
    for (std::size_t i = 0; i < r.exps.size(); ++i) r.exps[i] += b.exps[i];
    return r;
}

}  // namespace

bool graded_lex_less(const Monomial& a, const Monomial& b) {
    unsigned da = a.degree(), db = b.degree();
    if (da != db) return da < db;
    // Within a degree block the monomial with more weight on earlier
    // variables comes first, so compare exponent vectors reversed.
    for (std::size_t i = 0; i < a.exps.size() && i < b.exps.size(); ++i) {
        if (a.exps[i] != b.exps[i]) return a.exps[i] > b.exps[i];
    }
    return a.exps.size() < b.exps.size();
}

Polynomial Polynomial::constant(std::size_t n_vars, double c) {
    Polynomial p(n_vars);
    p.add_term(Monomial(n_vars), c);
    return p;
}

Polynomial Polynomial::variable(std::size_t n_vars, std::size_t index) {
    if (index >= n_vars) throw std::invalid_argument("variable index out of range");
    Monomial m(n_vars);
    m.exps[index] = 1;
    Polynomial p(n_vars);
    p.add_term(m, 1.0);
    return p;
}

unsigned Polynomial::degree() const {
    unsigned d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
    return d;
}

double Polynomial::coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Monomial& m, double c) {
    if (m.n_vars() != n_vars_)
        throw std::invalid_argument("monomial arity does not match polynomial");
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) it->second += c;
    if (std::abs(it->second) < kCoeffPrune) terms_.erase(it);
}

Polynomial Polynomial::operator+(const Polynomial& rhs) const {
    check_same_vars(*this, rhs);
    Polynomial r = *this;
    for (const auto& [m, c] : rhs.terms_) r.add_term(m, c);
    return r;
}

Polynomial Polynomial::operator-(const Polynomial& rhs) const {
    check_same_vars(*this, rhs);
    Polynomial r = *this;
    for (const auto& [m, c] : rhs.terms_) r.add_term(m, -c);
    return r;
}

Polynomial Polynomial::operator*(const Polynomial& rhs) const {
    check_same_vars(*this, rhs);
    Polynomial r(n_vars_);
    for (const auto& [ma, ca] : terms_)
        for (const auto& [mb, cb] : rhs.terms_)
            r.add_term(mul_monomials(ma, mb), ca * cb);
    return r;
}

Polynomial Polynomial::operator*(double s) const {
    Polynomial r(n_vars_);
    for (const auto& [m, c] : terms_) r.add_term(m, c * s);
    return r;
}

Polynomial Polynomial::operator-() const { return *this * -1.0; }

Polynomial Polynomial::pow(unsigned k) const {
    Polynomial r = Polynomial::constant(n_vars_, 1.0);
    Polynomial base = *this;
    while (k) {
        if (k & 1u) r = r * base;
        if (k >>= 1u) base = base * base;
    }
    return r;
}

double Polynomial::evaluate(std::span<const double> x) const {
    if (x.size() != n_vars_)
        throw std::invalid_argument("evaluation point arity mismatch");
    double sum = 0.0;
    for (const auto& [m, c] : terms_) {
        double t = c;
        for (std::size_t i = 0; i < n_vars_; ++i)
            if (m.exps[i]) t *= ipow(x[i], m.exps[i]);
        sum += t;
    }
    return sum;
}

Polynomial Polynomial::compose(const std::vector<Polynomial>& subs) const {
    if (subs.size() != n_vars_)
        throw std::invalid_argument("compose: substitution count mismatch");
    std::size_t ambient = subs.empty() ? 0 : subs[0].n_vars();
    for (const auto& s : subs)
        if (s.n_vars() != ambient)
            throw std::invalid_argument("compose: substitutions differ in arity");

    // Memoize powers of each substitution up to its max needed exponent.
    std::vector<std::vector<Polynomial>> powers(n_vars_);
    for (std::size_t i = 0; i < n_vars_; ++i)
        powers[i].push_back(Polynomial::constant(ambient, 1.0));

    Polynomial r(ambient);
    for (const auto& [m, c] : terms_) {
        Polynomial t = Polynomial::constant(ambient, c);
        for (std::size_t i = 0; i < n_vars_; ++i) {
            unsigned e = m.exps[i];
            while (powers[i].size() <= e)
                powers[i].push_back(powers[i].back() * subs[i]);
            if (e) t = t * powers[i][e];
        }
        for (const auto& [tm, tc] : t.terms()) r.add_term(tm, tc);
    }
    return r;
}

Polynomial Polynomial::partial_evaluate_prefix(std::span<const double> prefix) const {
    if (prefix.size() > n_vars_)
        throw std::invalid_argument("partial evaluation prefix too long");
    std::size_t rest = n_vars_ - prefix.size();
    Polynomial r(rest);
    for (const auto& [m, c] : terms_) {
        double scale = c;
        for (std::size_t i = 0; i < prefix.size(); ++i)
            if (m.exps[i]) scale *= ipow(prefix[i], m.exps[i]);
        Monomial tail(rest);
        for (std::size_t i = 0; i < rest; ++i) tail.exps[i] = m.exps[prefix.size() + i];
        r.add_term(tail, scale);
    }
    return r;
}

Polynomial Polynomial::embed(std::size_t new_n_vars, std::size_t shift) const {
    if (shift + n_vars_ > new_n_vars)
        throw std::invalid_argument("embed target too small");
    Polynomial r(new_n_vars);
    for (const auto& [m, c] : terms_) {
        Monomial big(new_n_vars);
        for (std::size_t i = 0; i < n_vars_; ++i) big.exps[shift + i] = m.exps[i];
        r.add_term(big, c);
    }
    return r;
}

std::string Polynomial::str() const {
    if (terms_.empty()) return "0";
    std::string out;
    bool first = true;
    char buf[64];
    for (const auto& [m, c] : terms_) {
        double mag = std::abs(c);
        if (first) {
            if (c < 0) out += "-";
            first = false;
        } else {
            out += c < 0 ? " - " : " + ";
        }
        bool has_vars = m.degree() > 0;
        if (!has_vars || mag != 1.0) {
            std::snprintf(buf, sizeof buf, "%.17g", mag);
            out += buf;
            if (has_vars) out += "*";
        }
        bool first_var = true;
        for (std::size_t i = 0; i < m.exps.size(); ++i) {
            if (!m.exps[i]) continue;
            if (!first_var) out += "*";
            first_var = false;
            out += "x" + std::to_string(i);
            if (m.exps[i] > 1) out += "^" + std::to_string(m.exps[i]);
        }
    }
    return out;
}

std::vector<Monomial> monomial_basis(std::size_t n_vars, unsigned max_degree) {
    std::vector<Monomial> out;
    Monomial cur(n_vars);
    // Enumerate by degree, recursively distributing it over variables.
    auto rec = [&](auto&& self, std::size_t var, unsigned remaining) -> void {
        if (var + 1 == n_vars) {
            cur.exps[var] = remaining;
            out.push_back(cur);
            cur.exps[var] = 0;
            return;
        }
        for (unsigned e = remaining; e + 1 > 0; --e) {
            cur.exps[var] = e;
            self(self, var + 1, remaining - e);
        }
        cur.exps[var] = 0;
    };
    if (n_vars == 0) {
        out.emplace_back(std::size_t{0});
        return out;
    }
    for (unsigned d = 0; d <= max_degree; ++d) rec(rec, 0, d);
    return out;
}

namespace {

struct Parser {
    std::string_view s;
    std::size_t pos = 0;
    std::size_t n_vars;

    void skip_ws() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eof() {
        skip_ws();
        return pos >= s.size();
    }
    char peek() {
        skip_ws();
        return pos < s.size() ? s[pos] : '\0';
    }
    [[noreturn]] void fail(const std::string& what) {
        throw std::invalid_argument("polynomial parse error at offset " +
                                    std::to_string(pos) + ": " + what);
    }

    double parse_number() {
        skip_ws();
        const char* begin = s.data() + pos;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) fail("expected a number");
        pos += static_cast<std::size_t>(end - begin);
        return v;
    }

    unsigned parse_uint() {
        skip_ws();
        if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos])))
            fail("expected an integer");
        unsigned v = 0;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])))
            v = v * 10 + unsigned(s[pos++] - '0');
        return v;
    }

    // factor := number | x<idx>['^' exp]
    void parse_factor(double& coef, Monomial& m) {
        skip_ws();
        if (peek() == 'x') {
            ++pos;
            unsigned idx = parse_uint();
            if (idx >= n_vars)
                fail("variable x" + std::to_string(idx) + " out of range (n_vars=" +
                     std::to_string(n_vars) + ")");
            unsigned e = 1;
            if (peek() == '^') {
                ++pos;
                e = parse_uint();
            }
            m.exps[idx] += e;
        } else {
            coef *= parse_number();
        }
    }

    // term := factor ('*' factor)*
    void parse_term(Polynomial& p, double sign) {
        double coef = sign;
        Monomial m(n_vars);
        parse_factor(coef, m);
        while (peek() == '*') {
            ++pos;
            parse_factor(coef, m);
        }
        p.add_term(m, coef);
    }

    Polynomial run() {
        Polynomial p(n_vars);
        double sign = 1.0;
        if (peek() == '+') ++pos;
        else if (peek() == '-') { sign = -1.0; ++pos; }
        parse_term(p, sign);
        while (!eof()) {
            char c = peek();
            if (c == '+') sign = 1.0;
            else if (c == '-') sign = -1.0;
            else fail(std::string("unexpected character '") + c + "'");
            ++pos;
            parse_term(p, sign);
        }
        return p;
    }
};

}  // namespace

Polynomial parse_polynomial(std::string_view text, std::size_t n_vars) {
    Parser parser{text, 0, n_vars};
    if (parser.eof()) throw std::invalid_argument("empty polynomial text");
    return parser.run();
}

SemiAlgebraicSet::SemiAlgebraicSet(std::size_t n, std::vector<Polynomial> cs)
    : n_vars(n), constraints(std::move(cs)) {
    if (constraints.empty())
        throw std::invalid_argument("semi-algebraic set needs at least one constraint");
    for (const auto& p : constraints)
        if (p.n_vars() != n_vars)
            throw std::invalid_argument("set constraint arity mismatch");
}

bool SemiAlgebraicSet::contains(std::span<const double> x) const {
    for (const auto& p : constraints)
        if (p.evaluate(x) > 0.0) return false;
    return true;
}

double SemiAlgebraicSet::max_constraint(std::span<const double> x) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& p : constraints) worst = std::max(worst, p.evaluate(x));
    return worst;
}

FlatPoly::FlatPoly(const Polynomial& p) : n_vars(p.n_vars()) {
    exps.reserve(p.term_count() * n_vars);
    coefs.reserve(p.term_count());
    for (const auto& [m, c] : p.terms()) {
        exps.insert(exps.end(), m.exps.begin(), m.exps.end());
        coefs.push_back(c);
    }
}

double FlatPoly::evaluate(std::span<const double> x) const {
    double sum = 0.0;
    const unsigned* e = exps.data();
    for (double c : coefs) {
        double t = c;
        for (std::size_t i = 0; i < n_vars; ++i, ++e) {
            unsigned k = *e;
            double b = x[i];
            while (k) {
                if (k & 1u) t *= b;
                b *= b;
                k >>= 1u;
            }
        }
        sum += t;
    }
    return sum;
}

}  // namespace reachcert
