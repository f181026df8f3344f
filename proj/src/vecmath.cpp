// Compiled with -ffast-math (see CMakeLists) so the loops below map onto
// libmvec's SIMD tanh/exp. Keep this file free of NaN/Inf handling: fast-math
// assumes finite values.

#include "cape/vecmath.hpp"

#include <cmath>

namespace cape {

void tanh_inplace(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::tanh(x[i]);
}

void sigmoid_inplace(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

} // namespace cape
