#pragma once

#include <cstddef>

namespace cape {

/// Elementwise activation kernels, compiled separately with vector-math
/// flags so the libm calls use SIMD variants. Hot path of Mlp::forward.
void tanh_inplace(double* x, std::size_t n);
void sigmoid_inplace(double* x, std::size_t n);

} // namespace cape
