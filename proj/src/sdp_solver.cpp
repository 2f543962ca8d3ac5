#include <cmath>
#include <limits>
#include <cstdio>
#include <stdexcept>

#include "reachcert/rng.hpp"
#include "reachcert/sdp.hpp"

namespace reachcert {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct BlockData {
    int dim = 0;
    // Per constraint: the entries touching this block.
    std::vector<std::vector<SdpTerm>> rows;
    MatrixXd C;
};

// <A, T> for symmetric A given by upper-triangle entries and symmetric T.
double inner(const std::vector<SdpTerm>& entries, const MatrixXd& T) {
    double s = 0.0;
    for (const auto& e : entries)
        s += e.row == e.col ? e.value * T(e.row, e.col) : 2.0 * e.value * T(e.row, e.col);
    return s;
}

void accumulate(MatrixXd& M, const std::vector<SdpTerm>& entries, double scale) {
    for (const auto& e : entries) {
        M(e.row, e.col) += scale * e.value;
        if (e.row != e.col) M(e.col, e.row) += scale * e.value;
    }
}

// Largest alpha with X + alpha*dX >= 0, given the Cholesky factor of X.
double max_step(const Eigen::LLT<MatrixXd>& lltX, const MatrixXd& dX) {
    MatrixXd R = lltX.matrixL().solve(dX);
    R = lltX.matrixL().solve(R.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (R + R.transpose()),
                                               Eigen::EigenvaluesOnly);
    double lmin = es.eigenvalues().minCoeff();
    if (lmin >= -1e-13) return 1e30;
    return -1.0 / lmin;
}

struct ScalingPoint {
    MatrixXd W, Winv, Xinv;
};

ScalingPoint nt_scaling(const MatrixXd& X, const MatrixXd& S) {
    Eigen::LLT<MatrixXd> lltX(X), lltS(S);
    if (lltX.info() != Eigen::Success || lltS.info() != Eigen::Success)
        throw std::runtime_error("iterate lost positive definiteness");
    MatrixXd Lx = lltX.matrixL();
    MatrixXd Ls = lltS.matrixL();
    Eigen::BDCSVD<MatrixXd> svd(Ls.transpose() * Lx,
                                Eigen::ComputeFullU | Eigen::ComputeFullV);
    VectorXd sv = svd.singularValues();
    for (int i = 0; i < sv.size(); ++i) sv(i) = std::max(sv(i), 1e-150);
    VectorXd isqrt = sv.array().sqrt().inverse();
    MatrixXd G = Lx * svd.matrixV() * isqrt.asDiagonal();
    MatrixXd H = Ls * svd.matrixU() * isqrt.asDiagonal();
    ScalingPoint sp;
    sp.W = G * G.transpose();
    sp.Winv = H * H.transpose();
    int n = static_cast<int>(X.rows());
    sp.Xinv = lltX.solve(MatrixXd::Identity(n, n));
    sp.W = 0.5 * (sp.W + sp.W.transpose()).eval();
    sp.Winv = 0.5 * (sp.Winv + sp.Winv.transpose()).eval();
    sp.Xinv = 0.5 * (sp.Xinv + sp.Xinv.transpose()).eval();
    return sp;
}

}  // namespace

std::size_t SdpStandardForm::scalar_variable_count() const {
    std::size_t n = static_cast<std::size_t>(n_free);
    for (int d : block_dims) {
        if (d < 0)
            n += static_cast<std::size_t>(-d);
        else
            n += static_cast<std::size_t>(d) * (d + 1) / 2;
    }
    return n;
}

bool SdpStandardForm::has_objective() const {
    for (const auto& e : objective)
        if (e.value != 0.0) return true;
    for (double c : free_objective)
        if (c != 0.0) return true;
    return false;
}

const char* to_string(SdpStatus s) {
    switch (s) {
        case SdpStatus::Optimal: return "optimal";
        case SdpStatus::Infeasible: return "infeasible";
        case SdpStatus::MaxIter: return "max_iter";
        case SdpStatus::NumericalFailure: return "numerical_failure";
    }
    return "?";
}

SdpSolution solve_sdp(const SdpStandardForm& problem, const SdpOptions& opts) {
    const int m = static_cast<int>(problem.constraints.size());
    const int nb = static_cast<int>(problem.block_dims.size());
    const int nf = problem.n_free;
    const double reg0 = 1e-10;

    SdpSolution sol;
    sol.y = VectorXd::Zero(m);
    sol.free_values = VectorXd::Zero(nf);

    std::vector<BlockData> blocks(nb);
    int total_dim = 0;
    for (int b = 0; b < nb; ++b) {
        blocks[b].dim = std::abs(problem.block_dims[b]);
        blocks[b].rows.assign(m, {});
        blocks[b].C = MatrixXd::Zero(blocks[b].dim, blocks[b].dim);
        total_dim += blocks[b].dim;
    }
    for (int k = 0; k < m; ++k)
        for (const auto& e : problem.constraints[k].entries) {
            if (e.block < 0 || e.block >= nb) throw std::invalid_argument("bad block index");
            blocks[e.block].rows[k].push_back(e);
        }
    for (const auto& e : problem.objective) accumulate(blocks[e.block].C, {e}, 1.0);

    VectorXd b(m);
    for (int k = 0; k < m; ++k) b(k) = problem.constraints[k].rhs;
    VectorXd cf = VectorXd::Zero(nf);
    for (int j = 0; j < static_cast<int>(problem.free_objective.size()) && j < nf; ++j)
        cf(j) = problem.free_objective[j];

    // Pure feasibility problems get a tiny seeded random positive-diagonal
    // objective. The feasible sets of SOS feasibility programs have
    // recession directions (certificates scale), so the perturbation must be
    // bounded below on the PSD cone or the central path runs off to
    // infinity; a jittered min-trace term anchors it.
    if (!problem.has_objective()) {
        Rng rng(opts.perturb_seed);
        for (auto& blk : blocks)
            for (int i = 0; i < blk.dim; ++i)
                blk.C(i, i) += opts.perturb_scale * (1.0 + rng.next_double());
    }

    if (m == 0) {
        sol.status = SdpStatus::Optimal;
        for (auto& blk : blocks) {
            sol.X.emplace_back(MatrixXd::Zero(blk.dim, blk.dim));
            sol.S.emplace_back(blk.C);
        }
        return sol;
    }

    const double bnorm = 1.0 + b.lpNorm<Eigen::Infinity>();
    double cnorm = 1.0 + cf.lpNorm<Eigen::Infinity>();
    for (const auto& blk : blocks) cnorm = std::max(cnorm, 1.0 + blk.C.lpNorm<Eigen::Infinity>());

    double init_scale = 10.0 * std::max(1.0, b.lpNorm<Eigen::Infinity>());
    for (int bidx = 0; bidx < nb; ++bidx) {
        sol.X.emplace_back(MatrixXd::Identity(blocks[bidx].dim, blocks[bidx].dim) * init_scale);
        sol.S.emplace_back(MatrixXd::Identity(blocks[bidx].dim, blocks[bidx].dim) *
                           std::max(10.0, cnorm));
    }

    VectorXd& y = sol.y;
    VectorXd& t = sol.free_values;

    auto primal_obj = [&]() {
        double v = cf.dot(t);
        for (int bidx = 0; bidx < nb; ++bidx) v += (blocks[bidx].C.array() * sol.X[bidx].array()).sum();
        return v;
    };

    MatrixXd M(m, m);
    MatrixXd Bf = MatrixXd::Zero(m, nf);
    for (int k = 0; k < m; ++k)
        for (const auto& [j, v] : problem.constraints[k].free_terms) Bf(k, j) = v;

    std::vector<MatrixXd> Rd(nb), Rc(nb), dX(nb), dS(nb), WAW(nb);
    std::vector<ScalingPoint> sp(nb);
    double last_dobj = -std::numeric_limits<double>::infinity();
    int ray_streak = 0;

    for (int iter = 0; iter < opts.max_iter; ++iter) {
        sol.iterations = iter;

        // Residuals.
        VectorXd rp = b - Bf * t;
        for (int k = 0; k < m; ++k)
            for (int bidx = 0; bidx < nb; ++bidx)
                rp(k) -= inner(blocks[bidx].rows[k], sol.X[bidx]);
        VectorXd rg = cf - Bf.transpose() * y;
        double dres2 = rg.squaredNorm();
        double mu = 0.0;
        for (int bidx = 0; bidx < nb; ++bidx) {
            Rd[bidx] = blocks[bidx].C - sol.S[bidx];
            for (int k = 0; k < m; ++k)
                if (!blocks[bidx].rows[k].empty()) accumulate(Rd[bidx], blocks[bidx].rows[k], -y(k));
            dres2 += Rd[bidx].squaredNorm();
            mu += (sol.X[bidx].array() * sol.S[bidx].array()).sum();
        }
        mu /= total_dim;

        double pobj = primal_obj();
        double dobj = b.dot(y);
        sol.primal_objective = pobj;
        sol.dual_objective = dobj;
        sol.primal_residual = rp.norm() / bnorm;
        sol.dual_residual = std::sqrt(dres2) / cnorm;
        sol.duality_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));

        if (opts.verbose)
            std::fprintf(stderr,
                         "  sdp iter %3d  mu %.2e  pres %.2e  dres %.2e  gap %.2e  "
                         "pobj %+.3e  dobj %+.3e  |y| %.2e\n",
                         iter, mu, sol.primal_residual, sol.dual_residual, sol.duality_gap,
                         pobj, dobj, y.lpNorm<Eigen::Infinity>());

        if (sol.primal_residual <= opts.tol && sol.dual_residual <= opts.tol &&
            sol.duality_gap <= opts.tol) {
            sol.status = SdpStatus::Optimal;
            return sol;
        }

        // Dual improving ray => primal infeasible. Two signatures: y blows
        // up outright, or the dual objective climbs steadily along a ray
        // while complementarity is already exhausted.
        double ynorm = y.lpNorm<Eigen::Infinity>();
        bool ray_candidate = ynorm > 1e8 * bnorm;
        bool slow_ray = mu < 1e-11 * (1.0 + std::abs(pobj)) && ynorm > 10.0 * bnorm &&
                        dobj > 1.001 * last_dobj && dobj > 0.0;
        ray_streak = slow_ray ? ray_streak + 1 : 0;
        last_dobj = dobj;
        if (ray_candidate || ray_streak >= 10) {
            double scale = y.norm();
            double ray_feas = 0.0;
            for (int bidx = 0; bidx < nb; ++bidx) {
                MatrixXd R = -sol.S[bidx];
                for (int k = 0; k < m; ++k)
                    if (!blocks[bidx].rows[k].empty())
                        accumulate(R, blocks[bidx].rows[k], -y(k));
                ray_feas += R.squaredNorm();
            }
            ray_feas = std::sqrt(ray_feas + (Bf.transpose() * y).squaredNorm()) / scale;
            if (ray_feas < 1e-6 && b.dot(y) > 0.0) {
                sol.status = SdpStatus::Infeasible;
                sol.message = "dual improving ray detected";
                return sol;
            }
        }

        // NT scaling and Schur complement.
        try {
            for (int bidx = 0; bidx < nb; ++bidx) sp[bidx] = nt_scaling(sol.X[bidx], sol.S[bidx]);
        } catch (const std::runtime_error& e) {
            sol.status = SdpStatus::NumericalFailure;
            sol.message = e.what();
            return sol;
        }

        M.setZero();
        for (int bidx = 0; bidx < nb; ++bidx) {
            const auto& blk = blocks[bidx];
            const MatrixXd& W = sp[bidx].W;
            MatrixXd T(blk.dim, blk.dim);
            for (int k = 0; k < m; ++k) {
                if (blk.rows[k].empty()) continue;
                T.setZero();
                for (const auto& e : blk.rows[k]) {
                    T.noalias() += e.value * W.col(e.row) * W.row(e.col);
                    if (e.row != e.col) T.noalias() += e.value * W.col(e.col) * W.row(e.row);
                }
                for (int j = k; j < m; ++j) {
                    if (blk.rows[j].empty()) continue;
                    double v = inner(blk.rows[j], T);
                    M(k, j) += v;
                    if (j != k) M(j, k) += v;
                }
            }
        }

        Eigen::LLT<MatrixXd> lltM;
        double reg = reg0;
        bool factored = false;
        for (int attempt = 0; attempt < 4; ++attempt) {
            MatrixXd Mreg = M;
            Mreg.diagonal().array() += reg;
            lltM.compute(Mreg);
            if (lltM.info() == Eigen::Success) {
                factored = true;
                break;
            }
            reg *= 100.0;
        }
        if (!factored) {
            sol.status = SdpStatus::NumericalFailure;
            sol.message = "Schur complement lost positive definiteness";
            return sol;
        }

        Eigen::LLT<MatrixXd> lltF;
        MatrixXd MinvB;
        if (nf > 0) {
            MinvB = lltM.solve(Bf);
            MatrixXd F = Bf.transpose() * MinvB;
            F.diagonal().array() += reg0;
            lltF.compute(F);
            if (lltF.info() != Eigen::Success) {
                sol.status = SdpStatus::NumericalFailure;
                sol.message = "free-variable Schur block not positive definite";
                return sol;
            }
        }

        // Shared direction solve: given the complementarity target Rc, fill
        // dX, dS, dy, dt.
        VectorXd dy(m), dt(nf);
        auto solve_direction = [&](const std::vector<MatrixXd>& RcIn) {
            VectorXd h = rp;
            for (int bidx = 0; bidx < nb; ++bidx) {
                const MatrixXd& W = sp[bidx].W;
                WAW[bidx] = W * (RcIn[bidx] - Rd[bidx]) * W;
                for (int k = 0; k < m; ++k)
                    if (!blocks[bidx].rows[k].empty())
                        h(k) -= inner(blocks[bidx].rows[k], WAW[bidx]);
            }
            if (nf > 0) {
                VectorXd tmp = MinvB.transpose() * h - rg;
                dt = lltF.solve(tmp);
                dy = lltM.solve(h - Bf * dt);
            } else {
                dy = lltM.solve(h);
            }
            for (int bidx = 0; bidx < nb; ++bidx) {
                dS[bidx] = Rd[bidx];
                for (int k = 0; k < m; ++k)
                    if (!blocks[bidx].rows[k].empty())
                        accumulate(dS[bidx], blocks[bidx].rows[k], -dy(k));
                const MatrixXd& W = sp[bidx].W;
                dX[bidx] = W * (RcIn[bidx] - dS[bidx]) * W;
                dX[bidx] = 0.5 * (dX[bidx] + dX[bidx].transpose()).eval();
            }
        };

        std::vector<Eigen::LLT<MatrixXd>> lltX(nb), lltS(nb);
        for (int bidx = 0; bidx < nb; ++bidx) {
            lltX[bidx].compute(sol.X[bidx]);
            lltS[bidx].compute(sol.S[bidx]);
        }
        auto step_lengths = [&](double& ap, double& ad) {
            ap = 1.0;
            ad = 1.0;
            for (int bidx = 0; bidx < nb; ++bidx) {
                ap = std::min(ap, 0.98 * max_step(lltX[bidx], dX[bidx]));
                ad = std::min(ad, 0.98 * max_step(lltS[bidx], dS[bidx]));
            }
        };

        // Predictor (affine scaling).
        for (int bidx = 0; bidx < nb; ++bidx) Rc[bidx] = -sol.S[bidx];
        solve_direction(Rc);
        double ap, ad;
        step_lengths(ap, ad);

        double mu_aff = 0.0;
        for (int bidx = 0; bidx < nb; ++bidx)
            mu_aff += ((sol.X[bidx] + ap * dX[bidx]).array() *
                       (sol.S[bidx] + ad * dS[bidx]).array())
                          .sum();
        mu_aff = std::max(mu_aff / total_dim, 0.0);
        double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3.0);
        sigma = std::min(1.0, std::max(sigma, 1e-12));

        // Corrector with Mehrotra second-order term.
        const bool second_order = std::getenv("REACHCERT_NO_CORR") == nullptr;
        for (int bidx = 0; bidx < nb; ++bidx) {
            Rc[bidx] = sigma * mu * sp[bidx].Xinv - sol.S[bidx];
            if (second_order) {
                MatrixXd cross = sp[bidx].Winv * dX[bidx] * dS[bidx];
                Rc[bidx] -= 0.5 * (cross + cross.transpose());
            }
        }
        solve_direction(Rc);
        step_lengths(ap, ad);

        for (int bidx = 0; bidx < nb; ++bidx) {
            sol.X[bidx] += ap * dX[bidx];
            sol.S[bidx] += ad * dS[bidx];
            sol.X[bidx] = 0.5 * (sol.X[bidx] + sol.X[bidx].transpose()).eval();
            sol.S[bidx] = 0.5 * (sol.S[bidx] + sol.S[bidx].transpose()).eval();
        }
        y += ad * dy;
        t += ap * dt;
    }

    sol.status = SdpStatus::MaxIter;
    return sol;
}

}  // namespace reachcert
