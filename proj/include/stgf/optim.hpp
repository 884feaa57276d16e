#pragma once

#include "stgf/autodiff.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace stgf {

/// Per-parameter Adam moments with the usual default constants.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;

    /// Zero moments shaped like `params`.
    static AdamState like(std::span<const Matrix* const> params);
};

/// Bias-corrected Adam update applied in place. Leaves every parameter untouched
/// and throws NumericalError if any gradient entry is non-finite.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state, double lr);

}  // namespace stgf
