#pragma once

#include <map>
#include <string>
#include <vector>

#include "reachcert/expectation.hpp"
#include "reachcert/poly.hpp"
#include "reachcert/sdp.hpp"

namespace reachcert {

// Data of the certificate-search program: sets, dynamics, measure and the
// template degrees of the polynomial unknowns.
struct SosProgram {
    unsigned v_degree = 6;
    // Per-family multiplier degree overrides, keyed by family name ("s0",
    // "s1", ... for the one-inequality encoding; "a_s", "b_s", "c_s", "d_s"
    // for the two-inequality one). Defaults to v_degree minus the multiplied
    // constraint's degree, rounded down to even.
    std::map<std::string, unsigned> multiplier_degrees;
    double lambda = 1.01;
    double epsilon = 1e-6;
    SemiAlgebraicSet safe_set;    // C = {h_i <= 0}
    SemiAlgebraicSet target_set;  // X_r = {g_i <= 0}
    SemiAlgebraicSet chat;        // single-constraint enlargement {h_0 <= 0}
    std::vector<double> x0;
    DynamicsSpec dynamics;
    ControlDistribution dist = ControlDistribution::uniform_box({{-1.0, 1.0}});
    // Reproduce the published program verbatim, including the cross terms
    // over the other target/safe constraints (identical when k = l = 1).
    bool paper_exact = false;

    unsigned multiplier_degree(const std::string& family, unsigned constraint_degree) const;
};

struct GramInfo {
    std::string name;
    int block = -1;
    std::vector<Monomial> basis;
};

// const_part + sum_i linear[i].second * t[linear[i].first]
//            + sum_g grams[g].sign * grams[g].factor * (z' G z)  ==  0
struct SosIdentity {
    std::string label;
    Polynomial const_part;
    std::vector<std::pair<int, Polynomial>> linear;
    struct GramTerm {
        int gram = -1;
        Polynomial factor;
        double sign = 1.0;
    };
    std::vector<GramTerm> grams;
    unsigned degree = 0;
};

// Encoded SDP plus the bookkeeping needed to extract polynomials and to
// re-verify every polynomial identity against a solver solution.
struct SosEncoding {
    SdpStandardForm sdp;
    std::size_t n_vars = 0;
    int v_offset = -1;
    std::vector<Monomial> v_basis;
    int w_offset = -1;
    std::vector<Monomial> w_basis;
    int scalar_index = -1;  // the M variable of the upper-bound program
    std::vector<GramInfo> grams;
    std::vector<SosIdentity> identities;

    Polynomial extract_v(const SdpSolution& sol) const;
    Polynomial extract_w(const SdpSolution& sol) const;
    Polynomial gram_poly(const SdpSolution& sol, const GramInfo& g) const;
    // Max absolute coefficient of any reconstructed identity residual.
    double max_identity_residual(const SdpSolution& sol) const;
    // Smallest eigenvalue over all solution Gram blocks.
    double min_gram_eigenvalue(const SdpSolution& sol) const;
};

// One-inequality encoding: E[v(f(x,u))] - lambda*v >= 0 on C \ X_r and
// v <= 0 on Chat \ C, each family certified with SOS multipliers, plus the
// linear row v(x0) >= epsilon.
SosEncoding encode_theorem1(const SosProgram& prog);

// Two-inequality encoding with the auxiliary bounded polynomial w,
// piecewise over the regions where the absorbing dynamics equal f or the
// identity map.
SosEncoding encode_prop1(const SosProgram& prog);

// Degenerate program: is q a sum of squares?
SosEncoding encode_sos_membership(const Polynomial& q);

// min M such that M - v is SOS-certified nonnegative on chat (single
// constraint set). multiplier_degree is the degree of the multiplier paired
// with chat's constraint.
SosEncoding encode_upper_bound(const Polynomial& v, const SemiAlgebraicSet& chat,
                               unsigned multiplier_degree);

}  // namespace reachcert
