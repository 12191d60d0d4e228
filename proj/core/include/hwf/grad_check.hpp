#pragma once

#include <functional>

#include "hwf/ops.hpp"

namespace hwf {

// Compares the taped gradient of a scalar-valued map against central finite
// differences, coordinate by coordinate. Returns
//   max_i |analytic_i - fd_i| / max(1, |analytic_i|).
// The map must be pure: it may capture weights, but the checked tensor is
// the one passed in.
template <typename T>
double finite_diff_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, const Tensor<T>& x,
                         double h) {
    Tensor<T> probe(x.shape(), x.data());
    probe.set_requires_grad(true);
    Tape<T> tape;
    {
        TapeScope<T> scope(tape);
        Tensor<T> loss = f(probe);
        if (loss.numel() != 1) throw UsageError("finite_diff_check: f must be scalar-valued");
        if (!std::isfinite(static_cast<double>(loss.item())))
            throw NumericError("finite_diff_check: f(x) is not finite");
        tape.backward(loss);
    }
    const std::vector<T>& analytic = *probe.grad();

    auto eval_at = [&](const std::vector<T>& values) -> double {
        Tensor<T> xt(x.shape(), values);
        const T v = f(xt).item();
        if (!std::isfinite(static_cast<double>(v)))
            throw NumericError("finite_diff_check: f(x +/- h) is not finite");
        return static_cast<double>(v);
    };

    std::vector<T> values = x.data();
    double max_rel = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
        const T saved = values[i];
        values[i] = saved + static_cast<T>(h);
        const double fp = eval_at(values);
        values[i] = saved - static_cast<T>(h);
        const double fm = eval_at(values);
        values[i] = saved;
        const double fd = (fp - fm) / (2.0 * h);
        const double a = static_cast<double>(analytic[i]);
        const double rel = std::abs(a - fd) / std::max(1.0, std::abs(a));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace hwf
