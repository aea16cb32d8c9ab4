#ifndef MTXPLAIN_OPS_H_
#define MTXPLAIN_OPS_H_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mtxplain/tensor.h"

namespace mtx {

// 1 marks a real token / unit, 0 marks padding.
using Mask = std::vector<uint8_t>;

enum class Activation { kRelu, kTanh, kSigmoid };

// Accepts "relu", "tanh", "sigmoid"; throws ConfigError otherwise.
Activation parse_activation(std::string_view name);

// Differentiable operations. Unless noted, operands are 2-D (a 1-D tensor
// counts as one row) and shape mismatches throw DimensionError.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Adds a 1 x n (or length-n) row to every row of an m x n tensor.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor scale(const Tensor& a, double factor);
Tensor one_minus(const Tensor& a);
// Elementwise product with a constant (non-differentiable) factor buffer.
Tensor mul_constant(const Tensor& a, std::vector<double> factors);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor activation(const Tensor& x, Activation kind);

// Row-wise softmax, max-shifted so every finite input is safe.
Tensor softmax_rows(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, size_t begin, size_t end);
Tensor slice_cols(const Tensor& x, size_t begin, size_t end);

// Zero-padded "same" 1-D convolution over the rows of x (N x d).
// filters: F x k x d, bias: length F. Output: N x F, pre-activation.
// Window j covers rows [j - (k-1)/2, j - (k-1)/2 + k); for even k the extra
// padding row sits on the right.
Tensor conv1d(const Tensor& x, const Tensor& filters, const Tensor& bias);

// Splits the N rows of x into N/l consecutive segments and returns the mean
// of the unmasked rows of each. Fully padded segments yield a zero row.
Tensor segment_mean(const Tensor& x, const Mask& mask, size_t l);

// As segment_mean, but the column-wise maximum. Padded rows never win.
Tensor segment_max(const Tensor& x, const Mask& mask, size_t l);

// Per-segment mask: a segment is real if any of its rows is.
Mask segment_mask(const Mask& mask, size_t l);

// -log p[gold] for a probability row, with p clamped to [1e-12, 1-1e-12].
Tensor nll_loss(const Tensor& probs, size_t gold);

// Mean binary cross-entropy of probabilities against 0/1 targets over the
// unmasked positions. Returns 0 when nothing is unmasked.
Tensor bce_loss(const Tensor& probs, std::span<const double> targets,
                const Mask& mask);

inline constexpr double kProbClamp = 1e-12;

}  // namespace mtx

#endif  // MTXPLAIN_OPS_H_
