#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace reachcert {

// One symmetric coefficient entry A[row,col] = A[col,row] = value within a
// block; stored with row <= col.
struct SdpTerm {
    int block = 0;
    int row = 0;
    int col = 0;
    double value = 0.0;
};

// <A_k, X> + sum_j free_terms[j] * t[j] = rhs
struct SdpConstraint {
    std::vector<SdpTerm> entries;
    std::vector<std::pair<int, double>> free_terms;
    double rhs = 0.0;
};

// min <C, X> + c_f' t   s.t.   <A_k, X> + B_k' t = b_k,  X block-diag PSD,
// t free. Block dims follow the SDPA sign convention: a negative dim marks a
// diagonal-only block.
struct SdpStandardForm {
    std::vector<int> block_dims;
    int n_free = 0;
    std::vector<SdpConstraint> constraints;
    std::vector<SdpTerm> objective;       // C, upper triangle
    std::vector<double> free_objective;   // c_f; empty means zero
    std::vector<std::string> block_labels;

    std::size_t n_blocks() const { return block_dims.size(); }
    // Scalar decision variables: free vars plus one per upper-triangle Gram
    // entry (diagonal blocks count their diagonal only).
    std::size_t scalar_variable_count() const;
    bool has_objective() const;
};

enum class SdpStatus { Optimal, Infeasible, MaxIter, NumericalFailure };

const char* to_string(SdpStatus s);

struct SdpOptions {
    double tol = 1e-8;
    int max_iter = 200;
    // Seed for the random objective perturbation applied to pure feasibility
    // problems; keeps the central path nondegenerate and runs reproducible.
    std::uint64_t perturb_seed = 0x5eed5eedULL;
    double perturb_scale = 1e-6;
    bool verbose = false;
};

struct SdpSolution {
    SdpStatus status = SdpStatus::NumericalFailure;
    std::vector<Eigen::MatrixXd> X;   // primal blocks
    std::vector<Eigen::MatrixXd> S;   // dual slack blocks
    Eigen::VectorXd y;                // dual vector
    Eigen::VectorXd free_values;      // t
    double primal_residual = 0.0;     // relative norms, see solver notes
    double dual_residual = 0.0;
    double duality_gap = 0.0;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    int iterations = 0;
    std::string message;
};

// Primal-dual interior point solver (Mehrotra predictor-corrector on the
// Nesterov-Todd direction, dense per-block linear algebra).
SdpSolution solve_sdp(const SdpStandardForm& problem, const SdpOptions& opts = {});

// Sparse SDPA ".dat-s" serialization. Free variables are exported as a
// trailing diagonal block via the standard t = t+ - t- split; the importer
// consequently reports n_free = 0.
std::string to_sdpa(const SdpStandardForm& problem);
void write_sdpa(const SdpStandardForm& problem, const std::string& path);
SdpStandardForm parse_sdpa(const std::string& text);
SdpStandardForm read_sdpa(const std::string& path);
// Number of coefficient lines the writer emits (entry count of the file).
std::size_t sdpa_entry_count(const SdpStandardForm& problem);

}  // namespace reachcert
