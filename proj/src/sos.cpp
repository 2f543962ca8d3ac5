#include "reachcert/sos.hpp"

#include <array>
#include <limits>
#include <stdexcept>

namespace reachcert {

namespace {

unsigned even_floor(unsigned d) { return d - (d % 2); }
unsigned even_ceil(unsigned d) { return d + (d % 2); }

// Incrementally lowers symbolic identities into coefficient-matching rows.
class Builder {
public:
    explicit Builder(std::size_t n_vars) { enc_.n_vars = n_vars; }

    int add_free_vars(std::size_t count) {
        int offset = enc_.sdp.n_free;
        enc_.sdp.n_free += static_cast<int>(count);
        return offset;
    }

    int add_gram(const std::string& name, unsigned poly_degree) {
        GramInfo g;
        g.name = name;
        g.basis = monomial_basis(enc_.n_vars, poly_degree / 2);
        g.block = static_cast<int>(enc_.sdp.block_dims.size());
        enc_.sdp.block_dims.push_back(static_cast<int>(g.basis.size()));
        enc_.sdp.block_labels.push_back(name);
        enc_.grams.push_back(std::move(g));
        return static_cast<int>(enc_.grams.size()) - 1;
    }

    SosIdentity& new_identity(std::string label) {
        enc_.identities.emplace_back();
        enc_.identities.back().label = std::move(label);
        enc_.identities.back().const_part = Polynomial(enc_.n_vars);
        return enc_.identities.back();
    }

    unsigned gram_degree(int g) const {
        const auto& basis = enc_.grams[g].basis;
        return basis.empty() ? 0 : 2 * basis.back().degree();
    }

    // Degree the dominating SOS term of an identity must reach: max over the
    // linear parts and the multiplier products already attached.
    unsigned span_degree(const SosIdentity& ident, unsigned base) const {
        unsigned d = std::max(base, ident.const_part.degree());
        for (const auto& [idx, p] : ident.linear) d = std::max(d, p.degree());
        for (const auto& gt : ident.grams)
            d = std::max(d, gram_degree(gt.gram) + gt.factor.degree());
        return d;
    }

    // sum_i terms[i].second * t[terms[i].first] - slack = rhs, slack >= 0 as
    // a fresh 1x1 block.
    void add_linear_ge(const std::vector<std::pair<int, double>>& terms, double rhs,
                       const std::string& label) {
        SdpConstraint row;
        row.free_terms = terms;
        int blk = static_cast<int>(enc_.sdp.block_dims.size());
        enc_.sdp.block_dims.push_back(1);
        enc_.sdp.block_labels.push_back(label);
        row.entries.push_back({blk, 0, 0, -1.0});
        row.rhs = rhs;
        extra_rows_.push_back(std::move(row));
    }

    SosEncoding finalize() {
        for (auto& ident : enc_.identities) lower(ident);
        for (auto& row : extra_rows_) enc_.sdp.constraints.push_back(std::move(row));
        extra_rows_.clear();
        return std::move(enc_);
    }

private:
    struct RowAccum {
        std::map<std::array<int, 3>, double> psd;  // (block, p, q) -> coeff
        std::map<int, double> free;
        double rhs = 0.0;
    };

    void lower(SosIdentity& ident) {
        unsigned deg = ident.const_part.degree();
        for (const auto& [idx, p] : ident.linear) deg = std::max(deg, p.degree());
        for (const auto& gt : ident.grams) {
            const GramInfo& g = enc_.grams[gt.gram];
            unsigned basis_deg = g.basis.empty() ? 0 : g.basis.back().degree();
            deg = std::max(deg, 2 * basis_deg + gt.factor.degree());
        }
        ident.degree = deg;

        std::map<Monomial, RowAccum, GradedLexLess> rows;
        for (const auto& [m, c] : ident.const_part.terms()) rows[m].rhs -= c;
        for (const auto& [idx, p] : ident.linear)
            for (const auto& [m, c] : p.terms()) rows[m].free[idx] += c;
        for (const auto& gt : ident.grams) {
            const GramInfo& g = enc_.grams[gt.gram];
            const int nb = static_cast<int>(g.basis.size());
            for (int p = 0; p < nb; ++p)
                for (int q = p; q < nb; ++q) {
                    Monomial zz(enc_.n_vars);
                    for (std::size_t i = 0; i < enc_.n_vars; ++i)
                        zz.exps[i] = g.basis[p].exps[i] + g.basis[q].exps[i];
                    for (const auto& [fm, fc] : gt.factor.terms()) {
                        Monomial m(enc_.n_vars);
                        for (std::size_t i = 0; i < enc_.n_vars; ++i)
                            m.exps[i] = zz.exps[i] + fm.exps[i];
                        rows[m].psd[{g.block, p, q}] += gt.sign * fc;
                    }
                }
        }

        for (auto& [mono, acc] : rows) {
            SdpConstraint row;
            row.rhs = acc.rhs;
            for (const auto& [key, v] : acc.psd) {
                if (v == 0.0) continue;
                row.entries.push_back({key[0], key[1], key[2], v});
            }
            for (const auto& [idx, v] : acc.free)
                if (v != 0.0) row.free_terms.emplace_back(idx, v);
            if (row.entries.empty() && row.free_terms.empty()) {
                if (std::abs(row.rhs) > 1e-12)
                    throw std::invalid_argument("identity '" + ident.label +
                                                "' has an unmatchable monomial");
                continue;
            }
            enc_.sdp.constraints.push_back(std::move(row));
        }
    }

    SosEncoding enc_;
    std::vector<SdpConstraint> extra_rows_;
};

void validate_common(const SosProgram& prog) {
    if (prog.v_degree < 2 || prog.v_degree % 2 != 0)
        throw std::invalid_argument("v_degree must be even and >= 2");
    if (prog.safe_set.constraints.empty() || prog.target_set.constraints.empty())
        throw std::invalid_argument("safe and target sets must be non-empty");
    if (prog.chat.constraints.size() != 1)
        throw std::invalid_argument("chat must be a single-constraint set");
    std::size_t n = prog.dynamics.n_state;
    if (prog.safe_set.n_vars != n || prog.target_set.n_vars != n || prog.chat.n_vars != n)
        throw std::invalid_argument("set arity does not match state dimension");
    if (prog.x0.size() != n) throw std::invalid_argument("x0 arity mismatch");
    if (prog.dist.n_atoms() != prog.dynamics.n_control_atoms)
        throw std::invalid_argument("distribution atoms do not match dynamics");
}

// E[m_beta(f(x,u))] for every monomial of the template basis, computed once;
// encode-time cost is dominated by these compositions.
std::vector<Polynomial> expected_basis_steps(const std::vector<Monomial>& basis,
                                             const DynamicsSpec& f,
                                             const ControlDistribution& dist) {
    std::size_t nv = f.n_state + f.n_control_atoms;
    std::vector<std::vector<Polynomial>> powers(f.n_state);
    for (std::size_t i = 0; i < f.n_state; ++i)
        powers[i].push_back(Polynomial::constant(nv, 1.0));

    std::vector<Polynomial> out;
    out.reserve(basis.size());
    for (const auto& m : basis) {
        Polynomial prod = Polynomial::constant(nv, 1.0);
        for (std::size_t i = 0; i < f.n_state; ++i) {
            while (powers[i].size() <= m.exps[i])
                powers[i].push_back(powers[i].back() * f.components[i]);
            if (m.exps[i]) prod = prod * powers[i][m.exps[i]];
        }
        out.push_back(integrate_atoms(prod, f.n_state, dist));
    }
    return out;
}

Polynomial monomial_poly(std::size_t n, const Monomial& m) {
    Polynomial p(n);
    p.add_term(m, 1.0);
    return p;
}

}  // namespace

unsigned SosProgram::multiplier_degree(const std::string& family,
                                       unsigned constraint_degree) const {
    auto it = multiplier_degrees.find(family);
    if (it != multiplier_degrees.end()) return even_floor(it->second);
    if (constraint_degree >= v_degree) return 0;
    return even_floor(v_degree - constraint_degree);
}

SosEncoding encode_theorem1(const SosProgram& prog) {
    validate_common(prog);
    if (prog.lambda <= 1.0) throw std::invalid_argument("lambda must exceed 1");

    const std::size_t n = prog.dynamics.n_state;
    const auto& hs = prog.safe_set.constraints;
    const auto& gs = prog.target_set.constraints;
    const Polynomial& h0 = prog.chat.constraints[0];

    Builder bld(n);
    std::vector<Monomial> v_basis = monomial_basis(n, prog.v_degree);
    int v_off = bld.add_free_vars(v_basis.size());
    std::vector<Polynomial> ev = expected_basis_steps(v_basis, prog.dynamics, prog.dist);

    // Family 1, per target constraint g_j:
    //   E[v(f)] - lambda*v + sum_i s0_{j,i} h_i - s1_j g_j  (- sigma) = 0
    for (std::size_t j = 0; j < gs.size(); ++j) {
        auto& ident = bld.new_identity("reach[g" + std::to_string(j) + "]");
        for (std::size_t b = 0; b < v_basis.size(); ++b)
            ident.linear.emplace_back(
                v_off + static_cast<int>(b),
                ev[b] - monomial_poly(n, v_basis[b]) * prog.lambda);
        for (std::size_t i = 0; i < hs.size(); ++i) {
            int g = bld.add_gram("s0[" + std::to_string(j) + "," + std::to_string(i) + "]",
                                 prog.multiplier_degree("s0", hs[i].degree()));
            ident.grams.push_back({g, hs[i], +1.0});
        }
        {
            int g = bld.add_gram("s1[" + std::to_string(j) + "]",
                                 prog.multiplier_degree("s1", gs[j].degree()));
            ident.grams.push_back({g, gs[j], -1.0});
        }
        if (prog.paper_exact) {
            for (std::size_t i = 0; i < gs.size(); ++i) {
                if (i == j) continue;
                int g = bld.add_gram(
                    "s1x[" + std::to_string(j) + "," + std::to_string(i) + "]",
                    prog.multiplier_degree("s1", gs[i].degree()));
                ident.grams.push_back({g, gs[i], +1.0});
            }
        }
        int sig = bld.add_gram("sigma_reach[" + std::to_string(j) + "]",
                               even_ceil(bld.span_degree(ident, prog.v_degree)));
        ident.grams.push_back({sig, Polynomial::constant(n, 1.0), -1.0});
    }

    // Family 2, per safe constraint h_j:  -v + s2_j h0 - s3_j h_j (- sigma) = 0
    for (std::size_t j = 0; j < hs.size(); ++j) {
        auto& ident = bld.new_identity("boundary[h" + std::to_string(j) + "]");
        for (std::size_t b = 0; b < v_basis.size(); ++b)
            ident.linear.emplace_back(v_off + static_cast<int>(b),
                                      -monomial_poly(n, v_basis[b]));
        {
            int g = bld.add_gram("s2[" + std::to_string(j) + "]",
                                 prog.multiplier_degree("s2", h0.degree()));
            ident.grams.push_back({g, h0, +1.0});
        }
        {
            int g = bld.add_gram("s3[" + std::to_string(j) + "]",
                                 prog.multiplier_degree("s3", hs[j].degree()));
            ident.grams.push_back({g, hs[j], -1.0});
        }
        if (prog.paper_exact) {
            for (std::size_t i = 0; i < hs.size(); ++i) {
                if (i == j) continue;
                int g = bld.add_gram(
                    "s4[" + std::to_string(j) + "," + std::to_string(i) + "]",
                    prog.multiplier_degree("s4", hs[i].degree()));
                ident.grams.push_back({g, hs[i], +1.0});
            }
        }
        int sig = bld.add_gram("sigma_boundary[" + std::to_string(j) + "]",
                               even_ceil(bld.span_degree(ident, prog.v_degree)));
        ident.grams.push_back({sig, Polynomial::constant(n, 1.0), -1.0});
    }

    // v(x0) >= epsilon.
    std::vector<std::pair<int, double>> x0_row;
    for (std::size_t b = 0; b < v_basis.size(); ++b) {
        double val = monomial_poly(n, v_basis[b]).evaluate(prog.x0);
        if (val != 0.0) x0_row.emplace_back(v_off + static_cast<int>(b), val);
    }
    bld.add_linear_ge(x0_row, prog.epsilon, "slack_x0");

    SosEncoding enc = bld.finalize();
    enc.v_offset = v_off;
    enc.v_basis = std::move(v_basis);
    return enc;
}

SosEncoding encode_prop1(const SosProgram& prog) {
    validate_common(prog);

    const std::size_t n = prog.dynamics.n_state;
    const auto& hs = prog.safe_set.constraints;
    const auto& gs = prog.target_set.constraints;
    const Polynomial& h0 = prog.chat.constraints[0];

    Builder bld(n);
    std::vector<Monomial> basis = monomial_basis(n, prog.v_degree);
    int v_off = bld.add_free_vars(basis.size());
    int w_off = bld.add_free_vars(basis.size());
    std::vector<Polynomial> ebasis = expected_basis_steps(basis, prog.dynamics, prog.dist);

    unsigned dmax = prog.v_degree;
    for (const auto& p : ebasis) dmax = std::max(dmax, p.degree());

    // (a) E[v(f)] - v >= 0 on C \ X_r (the inequality is trivial on the
    // absorbing regions where the modified dynamics are the identity map).
    for (std::size_t j = 0; j < gs.size(); ++j) {
        auto& ident = bld.new_identity("mart_v[g" + std::to_string(j) + "]");
        for (std::size_t b = 0; b < basis.size(); ++b)
            ident.linear.emplace_back(v_off + static_cast<int>(b),
                                      ebasis[b] - monomial_poly(n, basis[b]));
        for (std::size_t i = 0; i < hs.size(); ++i) {
            int g = bld.add_gram("a_s[" + std::to_string(j) + "," + std::to_string(i) + "]",
                                 prog.multiplier_degree("a_s", hs[i].degree()));
            ident.grams.push_back({g, hs[i], +1.0});
        }
        int gt = bld.add_gram("a_t[" + std::to_string(j) + "]",
                              prog.multiplier_degree("a_s", gs[j].degree()));
        ident.grams.push_back({gt, gs[j], -1.0});
        int sig = bld.add_gram("sigma_a[" + std::to_string(j) + "]",
                               even_ceil(bld.span_degree(ident, dmax)));
        ident.grams.push_back({sig, Polynomial::constant(n, 1.0), -1.0});
    }

    // (b) on C \ X_r: the indicator vanishes, so E[w(f)] - w - v >= 0.
    for (std::size_t j = 0; j < gs.size(); ++j) {
        auto& ident = bld.new_identity("mart_w[g" + std::to_string(j) + "]");
        for (std::size_t b = 0; b < basis.size(); ++b) {
            ident.linear.emplace_back(v_off + static_cast<int>(b),
                                      -monomial_poly(n, basis[b]));
            ident.linear.emplace_back(w_off + static_cast<int>(b),
                                      ebasis[b] - monomial_poly(n, basis[b]));
        }
        for (std::size_t i = 0; i < hs.size(); ++i) {
            int g = bld.add_gram("b_s[" + std::to_string(j) + "," + std::to_string(i) + "]",
                                 prog.multiplier_degree("b_s", hs[i].degree()));
            ident.grams.push_back({g, hs[i], +1.0});
        }
        int gt = bld.add_gram("b_t[" + std::to_string(j) + "]",
                              prog.multiplier_degree("b_s", gs[j].degree()));
        ident.grams.push_back({gt, gs[j], -1.0});
        int sig = bld.add_gram("sigma_b[" + std::to_string(j) + "]",
                               even_ceil(bld.span_degree(ident, dmax)));
        ident.grams.push_back({sig, Polynomial::constant(n, 1.0), -1.0});
    }

    // (b) on X_r: the dynamics absorb and the indicator is 1, so 1 - v >= 0.
    {
        auto& ident = bld.new_identity("target_cap");
        ident.const_part = Polynomial::constant(n, 1.0);
        for (std::size_t b = 0; b < basis.size(); ++b)
            ident.linear.emplace_back(v_off + static_cast<int>(b),
                                      -monomial_poly(n, basis[b]));
        for (std::size_t i = 0; i < gs.size(); ++i) {
            int g = bld.add_gram("c_s[" + std::to_string(i) + "]",
                                 prog.multiplier_degree("c_s", gs[i].degree()));
            ident.grams.push_back({g, gs[i], +1.0});
        }
        int sig = bld.add_gram("sigma_c", even_ceil(bld.span_degree(ident, prog.v_degree)));
        ident.grams.push_back({sig, Polynomial::constant(n, 1.0), -1.0});
    }

    // (b) on Chat \ C: absorbing again, so v <= 0.
    for (std::size_t j = 0; j < hs.size(); ++j) {
        auto& ident = bld.new_identity("outside[h" + std::to_string(j) + "]");
        for (std::size_t b = 0; b < basis.size(); ++b)
            ident.linear.emplace_back(v_off + static_cast<int>(b),
                                      -monomial_poly(n, basis[b]));
        int g0 = bld.add_gram("d_s0[" + std::to_string(j) + "]",
                              prog.multiplier_degree("d_s", h0.degree()));
        ident.grams.push_back({g0, h0, +1.0});
        int g1 = bld.add_gram("d_s1[" + std::to_string(j) + "]",
                              prog.multiplier_degree("d_s", hs[j].degree()));
        ident.grams.push_back({g1, hs[j], -1.0});
        int sig = bld.add_gram("sigma_d[" + std::to_string(j) + "]",
                               even_ceil(bld.span_degree(ident, prog.v_degree)));
        ident.grams.push_back({sig, Polynomial::constant(n, 1.0), -1.0});
    }

    std::vector<std::pair<int, double>> x0_row;
    for (std::size_t b = 0; b < basis.size(); ++b) {
        double val = monomial_poly(n, basis[b]).evaluate(prog.x0);
        if (val != 0.0) x0_row.emplace_back(v_off + static_cast<int>(b), val);
    }
    bld.add_linear_ge(x0_row, prog.epsilon, "slack_x0");

    SosEncoding enc = bld.finalize();
    enc.v_offset = v_off;
    enc.v_basis = basis;
    enc.w_offset = w_off;
    enc.w_basis = std::move(basis);
    return enc;
}

SosEncoding encode_sos_membership(const Polynomial& q) {
    Builder bld(q.n_vars());
    auto& ident = bld.new_identity("sos_membership");
    ident.const_part = q;
    int sig = bld.add_gram("sigma", even_ceil(q.degree()));
    ident.grams.push_back({sig, Polynomial::constant(q.n_vars(), 1.0), -1.0});
    return bld.finalize();
}

SosEncoding encode_upper_bound(const Polynomial& v, const SemiAlgebraicSet& chat,
                               unsigned multiplier_degree) {
    if (chat.constraints.size() != 1)
        throw std::invalid_argument("upper bound program expects a single-constraint set");
    const std::size_t n = v.n_vars();
    const Polynomial& h0 = chat.constraints[0];

    Builder bld(n);
    int m_idx = bld.add_free_vars(1);
    auto& ident = bld.new_identity("upper_bound");
    ident.const_part = -v;
    ident.linear.emplace_back(m_idx, Polynomial::constant(n, 1.0));
    int gs = bld.add_gram("s", even_floor(multiplier_degree));
    ident.grams.push_back({gs, h0, +1.0});
    unsigned d = std::max({v.degree(), even_floor(multiplier_degree) + h0.degree(), 2u});
    int sig = bld.add_gram("sigma", even_ceil(d));
    ident.grams.push_back({sig, Polynomial::constant(n, 1.0), -1.0});

    SosEncoding enc = bld.finalize();
    enc.scalar_index = m_idx;
    enc.sdp.free_objective.assign(enc.sdp.n_free, 0.0);
    enc.sdp.free_objective[m_idx] = 1.0;
    return enc;
}

Polynomial SosEncoding::extract_v(const SdpSolution& sol) const {
    Polynomial v(n_vars);
    for (std::size_t b = 0; b < v_basis.size(); ++b)
        v.add_term(v_basis[b], sol.free_values(v_offset + static_cast<int>(b)));
    return v;
}

Polynomial SosEncoding::extract_w(const SdpSolution& sol) const {
    if (w_offset < 0) throw std::logic_error("encoding has no w polynomial");
    Polynomial w(n_vars);
    for (std::size_t b = 0; b < w_basis.size(); ++b)
        w.add_term(w_basis[b], sol.free_values(w_offset + static_cast<int>(b)));
    return w;
}

Polynomial SosEncoding::gram_poly(const SdpSolution& sol, const GramInfo& g) const {
    Polynomial p(n_vars);
    const Eigen::MatrixXd& G = sol.X[g.block];
    const int nb = static_cast<int>(g.basis.size());
    for (int a = 0; a < nb; ++a)
        for (int b = a; b < nb; ++b) {
            Monomial m(n_vars);
            for (std::size_t i = 0; i < n_vars; ++i)
                m.exps[i] = g.basis[a].exps[i] + g.basis[b].exps[i];
            p.add_term(m, (a == b ? 1.0 : 2.0) * G(a, b));
        }
    return p;
}

double SosEncoding::max_identity_residual(const SdpSolution& sol) const {
    double worst = 0.0;
    for (const auto& ident : identities) {
        Polynomial r = ident.const_part;
        for (const auto& [idx, p] : ident.linear) r = r + p * sol.free_values(idx);
        for (const auto& gt : ident.grams)
            r = r + gram_poly(sol, grams[gt.gram]) * gt.factor * gt.sign;
        for (const auto& [m, c] : r.terms()) worst = std::max(worst, std::abs(c));
    }
    return worst;
}

double SosEncoding::min_gram_eigenvalue(const SdpSolution& sol) const {
    if (grams.empty()) return 0.0;
    double lmin = std::numeric_limits<double>::infinity();
    for (const auto& g : grams) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sol.X[g.block],
                                                          Eigen::EigenvaluesOnly);
        lmin = std::min(lmin, es.eigenvalues().minCoeff());
    }
    return lmin;
}

}  // namespace reachcert
