#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace reachcert {

// Deterministic low-discrepancy point source for set sampling and
// certificate validation.
class HaltonSequence {
public:
    explicit HaltonSequence(std::size_t dim, std::size_t start_index = 1)
        : dim_(dim), index_(start_index) {
        static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
        if (dim == 0 || dim > sizeof(primes) / sizeof(primes[0]))
            throw std::invalid_argument("halton dimension unsupported");
        bases_.assign(primes, primes + dim);
    }

    // Next point in the unit cube [0,1)^dim.
    std::vector<double> next() {
        std::vector<double> pt(dim_);
        for (std::size_t d = 0; d < dim_; ++d) pt[d] = radical_inverse(index_, bases_[d]);
        ++index_;
        return pt;
    }

    // Next point scaled into the axis-aligned box given by per-dimension
    // [lo, hi] pairs.
    std::vector<double> next_in_box(std::span<const std::pair<double, double>> box) {
        std::vector<double> pt = next();
        for (std::size_t d = 0; d < dim_; ++d)
            pt[d] = box[d].first + (box[d].second - box[d].first) * pt[d];
        return pt;
    }

private:
    static double radical_inverse(std::size_t i, int base) {
        double f = 1.0, r = 0.0;
        while (i) {
            f /= base;
            r += f * static_cast<double>(i % static_cast<std::size_t>(base));
            i /= static_cast<std::size_t>(base);
        }
        return r;
    }

    std::size_t dim_;
    std::size_t index_;
    std::vector<int> bases_;
};

}  // namespace reachcert
