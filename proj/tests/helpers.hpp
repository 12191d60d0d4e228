#pragma once

#include <cmath>

#include "hwf/hwformer.hpp"

namespace hwt {

inline hwf::Tensor<double> random_tensor(hwf::Shape shape, hwf::RngStream& rng, double lo = -1.0,
                                         double hi = 1.0) {
    hwf::Tensor<double> t(std::move(shape));
    for (auto& v : t.mutable_data()) v = lo + (hi - lo) * rng.next_double();
    return t;
}

// Uniform values that stay away from zero, for checks near ReLU kinks.
inline hwf::Tensor<double> random_tensor_no_kink(hwf::Shape shape, hwf::RngStream& rng,
                                                 double margin = 0.05) {
    hwf::Tensor<double> t(std::move(shape));
    for (auto& v : t.mutable_data()) {
        const double mag = margin + rng.next_double();
        v = rng.next_double() < 0.5 ? -mag : mag;
    }
    return t;
}

inline bool bitwise_equal(const hwf::Tensor<double>& a, const hwf::Tensor<double>& b) {
    return a.shape() == b.shape() && a.data() == b.data();
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace hwt
