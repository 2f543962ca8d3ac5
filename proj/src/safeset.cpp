#include "reachcert/safeset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace reachcert {

namespace {

std::vector<double> ray_point(const SensorScan& scan, std::size_t ray, double r) {
    return {scan.origin[0] + r * std::cos(scan.ray_angles[ray]),
            scan.origin[1] + r * std::sin(scan.ray_angles[ray])};
}

}  // namespace

std::vector<LabeledSample> generate_labels(const SensorScan& scan, double delta) {
    if (scan.ray_angles.empty()) throw std::invalid_argument("empty scan");
    if (scan.ray_angles.size() != scan.hit_distance.size())
        throw std::invalid_argument("scan ray/distance count mismatch");
    if (scan.origin.size() != 2) throw std::invalid_argument("scan origin must be planar");
    if (delta <= 0.0) throw std::invalid_argument("delta must be positive");

    std::vector<LabeledSample> out;
    out.push_back({scan.origin, +1});
    for (std::size_t i = 0; i < scan.ray_angles.size(); ++i) {
        double r = scan.hit_distance[i];
        if (r <= 0.0) throw std::invalid_argument("nonpositive hit distance");
        if (r < scan.max_range) {
            out.push_back({ray_point(scan, i, r), -1});
            out.push_back({ray_point(scan, i, 0.5 * r), +1});
            out.push_back({ray_point(scan, i, 0.9 * r), +1});
        } else {
            out.push_back({ray_point(scan, i, scan.max_range), +1});
            out.push_back({ray_point(scan, i, scan.max_range + delta), -1});
        }
    }
    return out;
}

double SvmKernel::operator()(std::span<const double> a, std::span<const double> b) const {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    double base = dot / (scale * scale) + 1.0;
    double r = 1.0;
    for (unsigned i = 0; i < degree; ++i) r *= base;
    return r;
}

double SvmModel::decision(std::span<const double> scene_x) const {
    std::vector<double> xs(scene_x.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        xs[i] = (scene_x[i] - center[i]) / input_scale;
    double f = bias;
    for (std::size_t i = 0; i < support_x.size(); ++i)
        f += alpha_y[i] * kernel(support_x[i], xs);
    return f;
}

namespace {

// Platt-style SMO over the biased dual.
class SmoSolver {
public:
    SmoSolver(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
              double c_plus, double c_minus, const SvmKernel& kernel, double tol)
        : x_(x), y_(y), kernel_(kernel), tol_(tol) {
        n_ = x.size();
        alpha_.assign(n_, 0.0);
        errors_.assign(n_, 0.0);
        cbox_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) cbox_[i] = y[i] > 0 ? c_plus : c_minus;
        K_.assign(n_ * n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i; j < n_; ++j)
                K_[i * n_ + j] = K_[j * n_ + i] = kernel(x[i], x[j]);
        for (std::size_t i = 0; i < n_; ++i) errors_[i] = -double(y[i]);
        b_ = 0.0;
    }

    double decision_raw(std::size_t i) const {
        double f = b_;
        for (std::size_t j = 0; j < n_; ++j)
            if (alpha_[j] != 0.0) f += alpha_[j] * y_[j] * K_[j * n_ + i];
        return f;
    }

    bool take_step(std::size_t i1, std::size_t i2) {
        if (i1 == i2) return false;
        double a1 = alpha_[i1], a2 = alpha_[i2];
        double y1 = y_[i1], y2 = y_[i2];
        double E1 = errors_[i1], E2 = errors_[i2];
        double s = y1 * y2;
        double L, H;
        if (y1 != y2) {
            L = std::max(0.0, a2 - a1);
            H = std::min(cbox_[i2], cbox_[i1] + a2 - a1);
        } else {
            L = std::max(0.0, a1 + a2 - cbox_[i1]);
            H = std::min(cbox_[i2], a1 + a2);
        }
        if (L >= H) return false;
        double k11 = K_[i1 * n_ + i1], k22 = K_[i2 * n_ + i2], k12 = K_[i1 * n_ + i2];
        double eta = k11 + k22 - 2.0 * k12;
        double a2new;
        if (eta > 0.0) {
            a2new = a2 + y2 * (E1 - E2) / eta;
            a2new = std::clamp(a2new, L, H);
        } else {
            // Objective at the clip bounds (degenerate curvature).
            double f1 = y1 * (E1 + b_) - a1 * k11 - s * a2 * k12;
            double f2 = y2 * (E2 + b_) - s * a1 * k12 - a2 * k22;
            double L1 = a1 + s * (a2 - L), H1 = a1 + s * (a2 - H);
            double objL = L1 * f1 + L * f2 + 0.5 * L1 * L1 * k11 + 0.5 * L * L * k22 +
                          s * L * L1 * k12;
            double objH = H1 * f1 + H * f2 + 0.5 * H1 * H1 * k11 + 0.5 * H * H * k22 +
                          s * H * H1 * k12;
            if (objL < objH - 1e-12) a2new = L;
            else if (objL > objH + 1e-12) a2new = H;
            else return false;
        }
        double span = std::min(cbox_[i1], cbox_[i2]);
        if (std::abs(a2new - a2) < 1e-12 * (a2new + a2 + std::min(span, 1.0))) return false;
        double a1new = a1 + s * (a2 - a2new);

        double b1 = E1 + y1 * (a1new - a1) * k11 + y2 * (a2new - a2) * k12 + b_;
        double b2 = E2 + y1 * (a1new - a1) * k12 + y2 * (a2new - a2) * k22 + b_;
        double bnew;
        if (a1new > 0.0 && a1new < cbox_[i1]) bnew = b1;
        else if (a2new > 0.0 && a2new < cbox_[i2]) bnew = b2;
        else bnew = 0.5 * (b1 + b2);

        double db = bnew - b_;
        for (std::size_t j = 0; j < n_; ++j)
            errors_[j] += y1 * (a1new - a1) * K_[i1 * n_ + j] +
                          y2 * (a2new - a2) * K_[i2 * n_ + j] - db;
        alpha_[i1] = a1new;
        alpha_[i2] = a2new;
        b_ = bnew;
        return true;
    }

    bool examine(std::size_t i2) {
        double y2 = y_[i2], a2 = alpha_[i2], E2 = errors_[i2];
        double r2 = E2 * y2;
        if ((r2 < -tol_ && a2 < cbox_[i2]) || (r2 > tol_ && a2 > 0.0)) {
            // Second-choice heuristic: maximize |E1 - E2| over non-bound alphas.
            std::size_t best = n_;
            double best_gap = 0.0;
            for (std::size_t j = 0; j < n_; ++j) {
                if (alpha_[j] <= 0.0 || alpha_[j] >= cbox_[j]) continue;
                double gap = std::abs(errors_[j] - E2);
                if (gap > best_gap) {
                    best_gap = gap;
                    best = j;
                }
            }
            if (best < n_ && take_step(best, i2)) return true;
            for (std::size_t off = 0; off < n_; ++off) {
                std::size_t j = (i2 + 1 + off) % n_;
                if (alpha_[j] > 0.0 && alpha_[j] < cbox_[j] && take_step(j, i2)) return true;
            }
            for (std::size_t off = 0; off < n_; ++off) {
                std::size_t j = (i2 + 1 + off) % n_;
                if (take_step(j, i2)) return true;
            }
        }
        return false;
    }

    double max_kkt_violation() const {
        double worst = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            double r = errors_[i] * y_[i];
            if (alpha_[i] < cbox_[i]) worst = std::max(worst, -r);
            if (alpha_[i] > 0.0) worst = std::max(worst, r);
        }
        return worst;
    }

    double dual_objective() const {
        double obj = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (alpha_[i] == 0.0) continue;
            obj += alpha_[i];
            for (std::size_t j = 0; j < n_; ++j)
                obj -= 0.5 * alpha_[i] * alpha_[j] * y_[i] * y_[j] * K_[i * n_ + j];
        }
        return obj;
    }

    const std::vector<double>& alpha() const { return alpha_; }
    double bias() const { return -b_; }  // decision uses f(x) = sum + b

    std::size_t size() const { return n_; }

private:
    const std::vector<std::vector<double>>& x_;
    const std::vector<int>& y_;
    SvmKernel kernel_;
    double tol_;
    std::size_t n_ = 0;
    std::vector<double> alpha_, errors_, cbox_;
    std::vector<double> K_;
    double b_ = 0.0;
};

}  // namespace

SvmModel train_svm(const std::vector<LabeledSample>& samples, double c_plus,
                   double c_minus, const SvmKernel& kernel, const SvmTrainOptions& opts) {
    if (c_plus <= 0.0 || c_minus <= 0.0)
        throw std::invalid_argument("penalty constants must be positive");
    bool has_pos = false, has_neg = false;
    for (const auto& s : samples) (s.label > 0 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw std::invalid_argument("training set must contain both classes");

    const std::size_t n = samples.size();
    const std::size_t dims = samples[0].x.size();

    // Rescale isotropically into roughly [-1,1]^dims.
    std::vector<double> lo(dims, std::numeric_limits<double>::infinity());
    std::vector<double> hi(dims, -std::numeric_limits<double>::infinity());
    for (const auto& s : samples)
        for (std::size_t d = 0; d < dims; ++d) {
            lo[d] = std::min(lo[d], s.x[d]);
            hi[d] = std::max(hi[d], s.x[d]);
        }
    std::vector<double> center(dims);
    double half = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
        center[d] = 0.5 * (lo[d] + hi[d]);
        half = std::max(half, 0.5 * (hi[d] - lo[d]));
    }
    if (half <= 0.0) half = 1.0;

    std::vector<std::vector<double>> xs(n, std::vector<double>(dims));
    std::vector<int> ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < dims; ++d) xs[i][d] = (samples[i].x[d] - center[d]) / half;
        ys[i] = samples[i].label;
    }

    SmoSolver smo(xs, ys, c_plus, c_minus, kernel, opts.tol);
    bool examine_all = true;
    int changed = 0;
    int pass = 0;
    while ((changed > 0 || examine_all)) {
        if (++pass > opts.max_passes)
            throw std::runtime_error("SMO failed to converge; final KKT violation " +
                                     std::to_string(smo.max_kkt_violation()));
        changed = 0;
        for (std::size_t i = 0; i < n; ++i) {
            bool bound = smo.alpha()[i] <= 0.0 ||
                         smo.alpha()[i] >= (ys[i] > 0 ? c_plus : c_minus);
            if (examine_all || !bound) changed += smo.examine(i) ? 1 : 0;
        }
        if (opts.objective_log) opts.objective_log->push_back(smo.dual_objective());
        if (examine_all) examine_all = false;
        else if (changed == 0) examine_all = true;
    }

    SvmModel model;
    model.kernel = kernel;
    model.c_plus = c_plus;
    model.c_minus = c_minus;
    model.center = std::move(center);
    model.input_scale = half;
    for (std::size_t i = 0; i < n; ++i) {
        if (smo.alpha()[i] <= 0.0) continue;
        model.support_x.push_back(xs[i]);
        model.alpha_y.push_back(smo.alpha()[i] * ys[i]);
    }
    model.bias = smo.bias();
    return model;
}

std::pair<Polynomial, SemiAlgebraicSet> decision_polynomial(const SvmModel& model) {
    const std::size_t n = model.n_dims();
    // Decision in scaled coordinates: sum_i a_i (1 + <sv_i, x>/scale^2)^d + b.
    Polynomial dec(n);
    dec.add_term(Monomial(n), model.bias);
    const double s2 = model.kernel.scale * model.kernel.scale;
    for (std::size_t i = 0; i < model.support_x.size(); ++i) {
        Polynomial lin = Polynomial::constant(n, 1.0);
        for (std::size_t d = 0; d < n; ++d)
            lin = lin + Polynomial::variable(n, d) * (model.support_x[i][d] / s2);
        dec = dec + lin.pow(model.kernel.degree) * model.alpha_y[i];
    }
    // Back to scene coordinates via x_hat_d = (x_d - c_d)/input_scale.
    std::vector<Polynomial> subs;
    for (std::size_t d = 0; d < n; ++d)
        subs.push_back((Polynomial::variable(n, d) -
                        Polynomial::constant(n, model.center[d])) *
                       (1.0 / model.input_scale));
    Polynomial scene = dec.compose(subs);
    Polynomial h = Polynomial::constant(n, 1.0) - scene;
    return {scene, SemiAlgebraicSet(n, {h})};
}

void save_svm_json(const SvmModel& model, const std::string& path) {
    nlohmann::json j;
    j["kernel"] = {{"scale", model.kernel.scale}, {"degree", model.kernel.degree}};
    j["support_x"] = model.support_x;
    j["alpha_y"] = model.alpha_y;
    j["bias"] = model.bias;
    j["c_plus"] = model.c_plus;
    j["c_minus"] = model.c_minus;
    j["center"] = model.center;
    j["input_scale"] = model.input_scale;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

SvmModel load_svm_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j;
    f >> j;
    SvmModel m;
    m.kernel.scale = j.at("kernel").at("scale").get<double>();
    m.kernel.degree = j.at("kernel").at("degree").get<unsigned>();
    m.support_x = j.at("support_x").get<std::vector<std::vector<double>>>();
    m.alpha_y = j.at("alpha_y").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.c_plus = j.at("c_plus").get<double>();
    m.c_minus = j.at("c_minus").get<double>();
    m.center = j.at("center").get<std::vector<double>>();
    m.input_scale = j.at("input_scale").get<double>();
    return m;
}

}  // namespace reachcert
