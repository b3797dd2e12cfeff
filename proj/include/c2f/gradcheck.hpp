#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "c2f/ops.hpp"
#include "c2f/tape.hpp"
#include "c2f/tensor.hpp"

namespace c2f {

/// Reduces an op output to a scalar through a fixed random projection so a
/// single backward exercises the whole Jacobian.
template <typename T>
Tensor<T> projected_loss(Tape<T>* tape, const Tensor<T>& out, const Tensor<T>& proj) {
    return sum_all(tape, hadamard(tape, out, proj));
}

/// Central-difference gradient check. loss_fn must rebuild the scalar loss
/// from the current values of the wrt tensors (tape == nullptr means
/// value-only evaluation). Returns the max over all checked coordinates of
///   |analytic - central_difference| / max(|analytic|, |cd|, 1e-8).
/// Perturbation per coordinate is eps_base * max(1, |x_i|).
///
/// If coord_limit > 0, at most that many evenly spaced coordinates are
/// checked per tensor (used for end-to-end spot checks on whole models).
template <typename T>
double gradcheck(const std::function<Tensor<T>(Tape<T>*)>& loss_fn, std::vector<Tensor<T>> wrt,
                 double eps_base = -1.0, std::int64_t coord_limit = 0) {
    if (eps_base <= 0.0) eps_base = sizeof(T) == 8 ? 1e-5 : 1e-3;

    for (auto& t : wrt) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    Tape<T> tape;
    Tensor<T> loss = loss_fn(&tape);
    if (!loss.all_finite()) throw NumericError("gradcheck: non-finite loss");
    tape.backward(loss);

    std::vector<std::vector<T>> analytic;
    analytic.reserve(wrt.size());
    for (auto& t : wrt) {
        const T* g = t.grad_ptr();
        if (g) {
            analytic.emplace_back(g, g + t.numel());
        } else {
            analytic.emplace_back(static_cast<std::size_t>(t.numel()), T(0));
        }
    }

    const auto eval = [&]() -> double {
        Tensor<T> l = loss_fn(nullptr);
        if (!l.all_finite()) throw NumericError("gradcheck: non-finite intermediate");
        return static_cast<double>(l.item());
    };

    double max_rel = 0.0;
    for (std::size_t ti = 0; ti < wrt.size(); ++ti) {
        Tensor<T>& t = wrt[ti];
        const std::int64_t n = t.numel();
        std::int64_t step = 1;
        if (coord_limit > 0 && n > coord_limit) step = n / coord_limit;
        for (std::int64_t i = 0; i < n; i += step) {
            T* v = t.data() + i;
            const T saved = *v;
            const double eps =
                eps_base * std::max(1.0, std::abs(static_cast<double>(saved)));
            *v = saved + static_cast<T>(eps);
            const double lp = eval();
            *v = saved - static_cast<T>(eps);
            const double lm = eval();
            *v = saved;
            const double cd = (lp - lm) / (2.0 * eps);
            const double an = static_cast<double>(analytic[ti][static_cast<std::size_t>(i)]);
            const double rel =
                std::abs(an - cd) / std::max({std::abs(an), std::abs(cd), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace c2f
