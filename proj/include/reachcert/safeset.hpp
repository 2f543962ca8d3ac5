#pragma once

#include <utility>
#include <vector>

#include "reachcert/poly.hpp"

namespace reachcert {

// One range scan: per-ray distance to the first obstacle, +inf when nothing
// was hit within the valid scanning radius D.
struct SensorScan {
    std::vector<double> origin;
    std::vector<double> ray_angles;
    std::vector<double> hit_distance;
    double max_range = 0.0;  // D
};

struct LabeledSample {
    std::vector<double> x;
    int label = 1;  // +1 safe, -1 unsafe
};

// Labeling rule: the origin is safe; a ray hitting at r < D yields an unsafe
// sample at the hit point and safe samples at 0.5r and 0.9r; a clear ray
// yields a safe sample at D and an unsafe counterpart at D + delta.
std::vector<LabeledSample> generate_labels(const SensorScan& scan, double delta);

// Inhomogeneous polynomial kernel (<x,x'>/scale^2 + 1)^degree.
struct SvmKernel {
    double scale = 1.0;
    unsigned degree = 6;
    double operator()(std::span<const double> a, std::span<const double> b) const;
};

struct SvmModel {
    SvmKernel kernel;
    std::vector<std::vector<double>> support_x;  // stored in scaled coordinates
    std::vector<double> alpha_y;                 // alpha_i * y_i
    double bias = 0.0;
    double c_plus = 0.0, c_minus = 0.0;
    // Affine map into training coordinates: x_hat = (x - center) / input_scale.
    std::vector<double> center;
    double input_scale = 1.0;

    std::size_t n_dims() const { return center.size(); }
    // Kernel-form decision value at a point in scene coordinates.
    double decision(std::span<const double> scene_x) const;
};

struct SvmTrainOptions {
    double tol = 1e-3;
    int max_passes = 20000;
    // When set, receives the dual objective after every optimization pass.
    std::vector<double>* objective_log = nullptr;
};

// Solves the dual of the biased-penalty soft-margin problem by sequential
// minimal optimization with per-class box constraints 0 <= alpha_i <= C_{y_i}.
SvmModel train_svm(const std::vector<LabeledSample>& samples, double c_plus,
                   double c_minus, const SvmKernel& kernel,
                   const SvmTrainOptions& opts = {});

// Expands the kernel decision function into explicit monomials (in scene
// coordinates) and returns h(x) = 1 - decision(x) together with the learned
// safe set {h <= 0}.
std::pair<Polynomial, SemiAlgebraicSet> decision_polynomial(const SvmModel& model);

void save_svm_json(const SvmModel& model, const std::string& path);
SvmModel load_svm_json(const std::string& path);

}  // namespace reachcert
