#ifndef MTXPLAIN_LINALG_H_
#define MTXPLAIN_LINALG_H_

#include "mtxplain/tensor.h"

namespace mtx {

struct Svd {
  Tensor u;   // a x r, orthonormal columns
  Tensor s;   // r, nonincreasing and nonnegative
  Tensor vt;  // r x b, orthonormal rows
};

inline constexpr size_t kSvdMaxExtent = 2048;

// Thin SVD (r = min(a, b)) by two-sided Jacobi rotations (Eigen).
// Not differentiable. Throws NumericError on non-finite input.
Svd svd_small(const Tensor& m);

Tensor identity(size_t n);

// Frobenius norm of the values (no graph).
double frobenius_norm(const Tensor& m);

}  // namespace mtx

#endif  // MTXPLAIN_LINALG_H_
