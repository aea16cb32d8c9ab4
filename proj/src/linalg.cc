#include "mtxplain/linalg.h"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "mtxplain/error.h"

namespace mtx {

Svd svd_small(const Tensor& m) {
  if (m.dim() > 2) throw DimensionError("svd_small: expected a matrix");
  const size_t rows = m.rows();
  const size_t cols = m.cols();
  if (rows > kSvdMaxExtent || cols > kSvdMaxExtent) {
    throw DimensionError("svd_small: matrix " + shape_string(m.shape()) +
                         " exceeds the supported extent");
  }
  for (double v : m.data()) {
    if (!std::isfinite(v)) throw NumericError("svd_small: non-finite entry");
  }
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMatrix> a(m.data().data(), static_cast<Eigen::Index>(rows),
                                static_cast<Eigen::Index>(cols));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const size_t r = std::min(rows, cols);
  RowMatrix u = svd.matrixU();
  RowMatrix vt = svd.matrixV().transpose();
  const auto& s = svd.singularValues();
  return {Tensor::from({rows, r}, std::vector<double>(u.data(), u.data() + u.size())),
          Tensor::from({r}, std::vector<double>(s.data(), s.data() + s.size())),
          Tensor::from({r, cols}, std::vector<double>(vt.data(), vt.data() + vt.size()))};
}

Tensor identity(size_t n) {
  Tensor eye = Tensor::zeros({n, n});
  auto d = eye.mutable_data();
  for (size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
  return eye;
}

double frobenius_norm(const Tensor& m) {
  double acc = 0.0;
  for (double v : m.data()) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace mtx
