#include "mtxplain/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtxplain/error.h"

namespace mtx {

using detail::Node;

namespace {

struct Dims {
  size_t rows;
  size_t cols;
};

Dims dims2(const Tensor& t, const char* op) {
  if (t.dim() > 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_string(t.shape()));
  }
  return {t.rows(), t.cols()};
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

bool wants_grad(const Node& self, size_t i) {
  return self.parents.size() > i && self.parents[i]->requires_grad;
}

// c (m x n) += a (m x k) * b (k x n)
void gemm_nn(const double* a, const double* b, double* c, size_t m, size_t k,
             size_t n) {
  for (size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (size_t p = 0; p < k; ++p) {
      double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* bp = b + p * n;
      for (size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c (m x k) += a (m x n) * b^T, b is k x n
void gemm_nt(const double* a, const double* b, double* c, size_t m, size_t n,
             size_t k) {
  for (size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    for (size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (size_t j = 0; j < n; ++j) acc += ai[j] * bp[j];
      c[i * k + p] += acc;
    }
  }
}

// c (k x n) += a^T * b, a is m x k, b is m x n
void gemm_tn(const double* a, const double* b, double* c, size_t m, size_t k,
             size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* bi = b + i * n;
    for (size_t p = 0; p < k; ++p) {
      double aip = a[i * k + p];
      if (aip == 0.0) continue;
      double* cp = c + p * n;
      for (size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, const char* op, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return Tensor::make_result(x.shape(), std::move(out), op, {x},
                             [deriv](Node& self) {
                               Node& p = *self.parents[0];
                               auto& g = p.ensure_grad();
                               for (size_t i = 0; i < g.size(); ++i) {
                                 g[i] += self.grad[i] *
                                         deriv(p.data[i], self.data[i]);
                               }
                             });
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  auto [m, k] = dims2(a, "matmul");
  auto [k2, n] = dims2(b, "matmul");
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions differ " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return Tensor::make_result(
      {m, n}, std::move(out), "matmul", {a, b}, [m, k, n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
          gemm_nt(self.grad.data(), pb.data.data(), pa.ensure_grad().data(),
                  m, n, k);
        }
        if (pb.requires_grad) {
          gemm_tn(pa.data.data(), self.grad.data(), pb.ensure_grad().data(),
                  m, k, n);
        }
      });
}

Tensor transpose(const Tensor& a) {
  auto [m, n] = dims2(a, "transpose");
  std::vector<double> out(m * n);
  auto in = a.data();
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[j * m + i] = in[i * n + j];
  return Tensor::make_result({n, m}, std::move(out), "transpose", {a},
                             [m, n](Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (size_t i = 0; i < m; ++i)
                                 for (size_t j = 0; j < n; ++j)
                                   g[i * n + j] += self.grad[j * m + i];
                             });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  return Tensor::make_result(a.shape(), std::move(out), "add", {a, b},
                             [](Node& self) {
                               for (auto& p : self.parents) {
                                 if (!p->requires_grad) continue;
                                 auto& g = p->ensure_grad();
                                 for (size_t i = 0; i < g.size(); ++i)
                                   g[i] += self.grad[i];
                               }
                             });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  return Tensor::make_result(a.shape(), std::move(out), "sub", {a, b},
                             [](Node& self) {
                               if (wants_grad(self, 0)) {
                                 auto& g = self.parents[0]->ensure_grad();
                                 for (size_t i = 0; i < g.size(); ++i)
                                   g[i] += self.grad[i];
                               }
                               if (wants_grad(self, 1)) {
                                 auto& g = self.parents[1]->ensure_grad();
                                 for (size_t i = 0; i < g.size(); ++i)
                                   g[i] -= self.grad[i];
                               }
                             });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  return Tensor::make_result(a.shape(), std::move(out), "mul", {a, b},
                             [](Node& self) {
                               Node& pa = *self.parents[0];
                               Node& pb = *self.parents[1];
                               if (pa.requires_grad) {
                                 auto& g = pa.ensure_grad();
                                 for (size_t i = 0; i < g.size(); ++i)
                                   g[i] += self.grad[i] * pb.data[i];
                               }
                               if (pb.requires_grad) {
                                 auto& g = pb.ensure_grad();
                                 for (size_t i = 0; i < g.size(); ++i)
                                   g[i] += self.grad[i] * pa.data[i];
                               }
                             });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  auto [m, n] = dims2(a, "add_row");
  if (row.numel() != n || row.rows() != 1) {
    throw DimensionError("add_row: row " + shape_string(row.shape()) +
                         " does not broadcast over " +
                         shape_string(a.shape()));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  auto r = row.data();
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[i * n + j] += r[j];
  return Tensor::make_result(a.shape(), std::move(out), "add_row", {a, row},
                             [m, n](Node& self) {
                               if (wants_grad(self, 0)) {
                                 auto& g = self.parents[0]->ensure_grad();
                                 for (size_t i = 0; i < g.size(); ++i)
                                   g[i] += self.grad[i];
                               }
                               if (wants_grad(self, 1)) {
                                 auto& g = self.parents[1]->ensure_grad();
                                 for (size_t i = 0; i < m; ++i)
                                   for (size_t j = 0; j < n; ++j)
                                     g[j] += self.grad[i * n + j];
                               }
                             });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, "scale", [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor one_minus(const Tensor& a) {
  return unary(
      a, "one_minus", [](double v) { return 1.0 - v; },
      [](double, double) { return -1.0; });
}

Tensor mul_constant(const Tensor& a, std::vector<double> factors) {
  if (factors.size() != a.numel()) {
    throw DimensionError("mul_constant: factor count does not match " +
                         shape_string(a.shape()));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  for (size_t i = 0; i < out.size(); ++i) out[i] *= factors[i];
  return Tensor::make_result(
      a.shape(), std::move(out), "mul_constant", {a},
      [factors = std::move(factors)](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factors[i];
      });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double out) { return 1.0 - out * out; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double out) { return out * (1.0 - out); });
}

Tensor activation(const Tensor& x, Activation kind) {
  switch (kind) {
    case Activation::kRelu:
      return relu(x);
    case Activation::kTanh:
      return tanh(x);
    case Activation::kSigmoid:
      return sigmoid(x);
  }
  throw ConfigError("unknown activation");
}

Tensor softmax_rows(const Tensor& x) {
  auto [m, n] = dims2(x, "softmax_rows");
  std::vector<double> out(m * n);
  auto in = x.data();
  for (size_t i = 0; i < m; ++i) {
    const double* row = in.data() + i * n;
    double hi = *std::max_element(row, row + n);
    double total = 0.0;
    for (size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(row[j] - hi);
      total += out[i * n + j];
    }
    for (size_t j = 0; j < n; ++j) out[i * n + j] /= total;
  }
  return Tensor::make_result(
      x.shape(), std::move(out), "softmax_rows", {x}, [m, n](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (size_t i = 0; i < m; ++i) {
          const double* y = self.data.data() + i * n;
          const double* dy = self.grad.data() + i * n;
          double dot = 0.0;
          for (size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
          for (size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (dy[j] - dot);
        }
      });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return Tensor::make_result({1}, {total}, "sum", {x}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  size_t m = parts[0].rows();
  size_t total = 0;
  std::vector<size_t> widths;
  for (const Tensor& p : parts) {
    dims2(p, "concat_cols");
    if (p.rows() != m) throw DimensionError("concat_cols: row counts differ");
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(m * total);
  size_t offset = 0;
  for (const Tensor& p : parts) {
    size_t w = p.cols();
    auto d = p.data();
    for (size_t i = 0; i < m; ++i)
      std::copy_n(d.data() + i * w, w, out.data() + i * total + offset);
    offset += w;
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return Tensor::make_result(
      {m, total}, std::move(out), "concat_cols", std::move(parents),
      [m, total, widths](Node& self) {
        size_t offset = 0;
        for (size_t k = 0; k < widths.size(); ++k) {
          size_t w = widths[k];
          if (self.parents[k]->requires_grad) {
            auto& g = self.parents[k]->ensure_grad();
            for (size_t i = 0; i < m; ++i)
              for (size_t j = 0; j < w; ++j)
                g[i * w + j] += self.grad[i * total + offset + j];
          }
          offset += w;
        }
      });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  size_t n = parts[0].cols();
  size_t total = 0;
  std::vector<size_t> heights;
  for (const Tensor& p : parts) {
    dims2(p, "concat_rows");
    if (p.cols() != n) throw DimensionError("concat_rows: column counts differ");
    heights.push_back(p.rows());
    total += p.rows();
  }
  std::vector<double> out;
  out.reserve(total * n);
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return Tensor::make_result(
      {total, n}, std::move(out), "concat_rows", std::move(parents),
      [n, heights](Node& self) {
        size_t offset = 0;
        for (size_t k = 0; k < heights.size(); ++k) {
          size_t len = heights[k] * n;
          if (self.parents[k]->requires_grad) {
            auto& g = self.parents[k]->ensure_grad();
            for (size_t i = 0; i < len; ++i) g[i] += self.grad[offset + i];
          }
          offset += len;
        }
      });
}

Tensor slice_rows(const Tensor& x, size_t begin, size_t end) {
  auto [m, n] = dims2(x, "slice_rows");
  if (begin >= end || end > m) {
    throw DimensionError("slice_rows: bad range [" + std::to_string(begin) +
                         "," + std::to_string(end) + ") of " +
                         std::to_string(m));
  }
  auto d = x.data();
  std::vector<double> out(d.begin() + begin * n, d.begin() + end * n);
  return Tensor::make_result({end - begin, n}, std::move(out), "slice_rows",
                             {x}, [begin, n](Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (size_t i = 0; i < self.grad.size(); ++i)
                                 g[begin * n + i] += self.grad[i];
                             });
}

Tensor slice_cols(const Tensor& x, size_t begin, size_t end) {
  auto [m, n] = dims2(x, "slice_cols");
  if (begin >= end || end > n) {
    throw DimensionError("slice_cols: bad range [" + std::to_string(begin) +
                         "," + std::to_string(end) + ") of " +
                         std::to_string(n));
  }
  size_t w = end - begin;
  std::vector<double> out(m * w);
  auto d = x.data();
  for (size_t i = 0; i < m; ++i)
    std::copy_n(d.data() + i * n + begin, w, out.data() + i * w);
  return Tensor::make_result({m, w}, std::move(out), "slice_cols", {x},
                             [m, n, w, begin](Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (size_t i = 0; i < m; ++i)
                                 for (size_t j = 0; j < w; ++j)
                                   g[i * n + begin + j] += self.grad[i * w + j];
                             });
}

Tensor conv1d(const Tensor& x, const Tensor& filters, const Tensor& bias) {
  auto [len, d] = dims2(x, "conv1d");
  if (filters.dim() != 3 || filters.shape()[2] != d) {
    throw DimensionError("conv1d: filters " + shape_string(filters.shape()) +
                         " incompatible with input " +
                         shape_string(x.shape()));
  }
  size_t nf = filters.shape()[0];
  size_t k = filters.shape()[1];
  if (bias.numel() != nf) {
    throw DimensionError("conv1d: bias has " + std::to_string(bias.numel()) +
                         " entries for " + std::to_string(nf) + " filters");
  }
  const long left = static_cast<long>((k - 1) / 2);
  auto xd = x.data();
  auto wd = filters.data();
  auto bd = bias.data();
  std::vector<double> out(len * nf);
  for (size_t j = 0; j < len; ++j) {
    for (size_t f = 0; f < nf; ++f) {
      double acc = bd[f];
      for (size_t t = 0; t < k; ++t) {
        long row = static_cast<long>(j + t) - left;
        if (row < 0 || row >= static_cast<long>(len)) continue;
        const double* xr = xd.data() + row * d;
        const double* wr = wd.data() + (f * k + t) * d;
        for (size_t c = 0; c < d; ++c) acc += xr[c] * wr[c];
      }
      out[j * nf + f] = acc;
    }
  }
  return Tensor::make_result(
      {len, nf}, std::move(out), "conv1d", {x, filters, bias},
      [len, d, nf, k, left](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        Node& pb = *self.parents[2];
        double* gx = px.requires_grad ? px.ensure_grad().data() : nullptr;
        double* gw = pw.requires_grad ? pw.ensure_grad().data() : nullptr;
        double* gb = pb.requires_grad ? pb.ensure_grad().data() : nullptr;
        for (size_t j = 0; j < len; ++j) {
          for (size_t f = 0; f < nf; ++f) {
            double go = self.grad[j * nf + f];
            if (go == 0.0) continue;
            if (gb) gb[f] += go;
            for (size_t t = 0; t < k; ++t) {
              long row = static_cast<long>(j + t) - left;
              if (row < 0 || row >= static_cast<long>(len)) continue;
              const size_t woff = (f * k + t) * d;
              const size_t xoff = static_cast<size_t>(row) * d;
              if (gw) {
                for (size_t c = 0; c < d; ++c) gw[woff + c] += go * px.data[xoff + c];
              }
              if (gx) {
                for (size_t c = 0; c < d; ++c) gx[xoff + c] += go * pw.data[woff + c];
              }
            }
          }
        }
      });
}

namespace {

void check_segments(const Tensor& x, const Mask& mask, size_t l,
                    const char* op) {
  if (l == 0 || x.rows() % l != 0) {
    throw ConfigError(std::string(op) + ": " + std::to_string(x.rows()) +
                      " rows are not divisible by segment width " +
                      std::to_string(l));
  }
  if (mask.size() != x.rows()) {
    throw DimensionError(std::string(op) + ": mask length " +
                         std::to_string(mask.size()) + " != rows " +
                         std::to_string(x.rows()));
  }
}

}  // namespace

Mask segment_mask(const Mask& mask, size_t l) {
  if (l == 0 || mask.size() % l != 0) {
    throw ConfigError("segment_mask: length not divisible by segment width");
  }
  Mask out(mask.size() / l, 0);
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out[i / l] = 1;
  return out;
}

Tensor segment_mean(const Tensor& x, const Mask& mask, size_t l) {
  auto [len, d] = dims2(x, "segment_mean");
  check_segments(x, mask, l, "segment_mean");
  size_t segments = len / l;
  std::vector<double> weights(len, 0.0);
  for (size_t p = 0; p < segments; ++p) {
    size_t count = 0;
    for (size_t i = p * l; i < (p + 1) * l; ++i) count += mask[i] ? 1 : 0;
    for (size_t i = p * l; i < (p + 1) * l; ++i)
      weights[i] = mask[i] ? 1.0 / static_cast<double>(count) : 0.0;
  }
  auto xd = x.data();
  std::vector<double> out(segments * d, 0.0);
  for (size_t i = 0; i < len; ++i) {
    if (weights[i] == 0.0) continue;
    for (size_t c = 0; c < d; ++c) out[(i / l) * d + c] += weights[i] * xd[i * d + c];
  }
  return Tensor::make_result(
      {segments, d}, std::move(out), "segment_mean", {x},
      [len, d, l, weights = std::move(weights)](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (size_t i = 0; i < len; ++i) {
          if (weights[i] == 0.0) continue;
          for (size_t c = 0; c < d; ++c)
            g[i * d + c] += weights[i] * self.grad[(i / l) * d + c];
        }
      });
}

Tensor segment_max(const Tensor& x, const Mask& mask, size_t l) {
  auto [len, d] = dims2(x, "segment_max");
  check_segments(x, mask, l, "segment_max");
  size_t segments = len / l;
  auto xd = x.data();
  std::vector<double> out(segments * d, 0.0);
  // Source row of each output element; len marks "no real row".
  std::vector<size_t> argmax(segments * d, len);
  for (size_t p = 0; p < segments; ++p) {
    for (size_t c = 0; c < d; ++c) {
      double best = -std::numeric_limits<double>::infinity();
      size_t where = len;
      for (size_t i = p * l; i < (p + 1) * l; ++i) {
        if (mask[i] && xd[i * d + c] > best) {
          best = xd[i * d + c];
          where = i;
        }
      }
      if (where != len) {
        out[p * d + c] = best;
        argmax[p * d + c] = where;
      }
    }
  }
  return Tensor::make_result(
      {segments, d}, std::move(out), "segment_max", {x},
      [len, d, argmax = std::move(argmax)](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (size_t o = 0; o < argmax.size(); ++o) {
          if (argmax[o] == len) continue;
          g[argmax[o] * d + o % d] += self.grad[o];
        }
      });
}

Tensor nll_loss(const Tensor& probs, size_t gold) {
  if (probs.rows() != 1) {
    throw DimensionError("nll_loss: expected one probability row, got " +
                         shape_string(probs.shape()));
  }
  if (gold >= probs.numel()) {
    throw DataError("nll_loss: gold class " + std::to_string(gold) +
                    " out of range for " + std::to_string(probs.numel()) +
                    " classes");
  }
  double p = probs[gold];
  double clamped = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return Tensor::make_result(
      {1}, {-std::log(clamped)}, "nll_loss", {probs},
      [gold, clamped, active = clamped == p](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        if (active) g[gold] += -self.grad[0] / clamped;
      });
}

Tensor bce_loss(const Tensor& probs, std::span<const double> targets,
                const Mask& mask) {
  size_t n = probs.numel();
  if (targets.size() != n || mask.size() != n) {
    throw DimensionError("bce_loss: probs, targets and mask lengths differ");
  }
  size_t count = 0;
  for (uint8_t m : mask) count += m ? 1 : 0;
  auto pd = probs.data();
  double total = 0.0;
  std::vector<double> dloss(n, 0.0);
  if (count > 0) {
    const double inv = 1.0 / static_cast<double>(count);
    for (size_t i = 0; i < n; ++i) {
      if (!mask[i]) continue;
      double y = targets[i];
      double p = std::clamp(pd[i], kProbClamp, 1.0 - kProbClamp);
      total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
      if (p == pd[i]) dloss[i] = (-y / p + (1.0 - y) / (1.0 - p)) * inv;
    }
    total *= inv;
  }
  return Tensor::make_result({1}, {total}, "bce_loss", {probs},
                             [dloss = std::move(dloss)](Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (size_t i = 0; i < g.size(); ++i)
                                 g[i] += self.grad[0] * dloss[i];
                             });
}

}  // namespace mtx
