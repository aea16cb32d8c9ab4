#include "mtxplain/gradcheck.h"

#include <algorithm>
#include <cmath>

namespace mtx {

GradCheckReport gradcheck(const std::function<Tensor()>& f,
                          const std::vector<std::pair<std::string, Tensor>>& params,
                          double h) {
  GradCheckReport report;
  if (params.empty()) return report;

  std::vector<Tensor> leaves;
  for (const auto& [name, t] : params) leaves.push_back(t);
  zero_grad(leaves);
  f().backward();

  std::vector<std::vector<double>> analytic;
  for (const Tensor& t : leaves) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
  }
  zero_grad(leaves);

  for (size_t p = 0; p < leaves.size(); ++p) {
    Tensor& t = leaves[p];
    auto values = t.mutable_data();
    double worst = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      double up = f().item();
      values[i] = saved - h;
      double down = f().item();
      values[i] = saved;
      double fd = (up - down) / (2.0 * h);
      double ad = analytic[p][i];
      double rel = std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
      worst = std::max(worst, rel);
    }
    report.per_parameter[params[p].first] = worst;
    report.max_rel_error = std::max(report.max_rel_error, worst);
  }
  return report;
}

}  // namespace mtx
