#ifndef MTXPLAIN_TESTS_OP_CASES_H_
#define MTXPLAIN_TESTS_OP_CASES_H_

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mtxplain/ops.h"
#include "mtxplain/rng.h"
#include "mtxplain/tensor.h"

namespace mtx::testing {

struct OpCase {
  const char* name;
  std::function<Tensor()> f;
  std::vector<std::pair<std::string, Tensor>> params;
};

inline Tensor random_param(Shape shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.mutable_data()) v = rng.uniform(-1.0, 1.0);
  return t.set_requires_grad(true);
}

// One scalar-valued case per differentiable op, for gradcheck.
inline std::vector<OpCase> differentiable_op_cases(Rng& rng) {
  Tensor a = random_param({4, 3}, rng);
  Tensor b = random_param({3, 5}, rng);
  Tensor c = random_param({4, 3}, rng);
  Tensor row = random_param({1, 3}, rng);
  // Entries kept away from the relu kink and distinct for max pooling.
  Tensor pos = Tensor::from({4, 3}, {0.9, -0.7, 0.3, -0.4, 0.8, -0.2,
                                     0.5, 0.35, -0.6, -0.25, 0.65, 0.45})
                   .set_requires_grad(true);
  Tensor filters = random_param({2, 3, 3}, rng);
  Tensor bias = random_param({2}, rng);
  Tensor probs_in = random_param({1, 4}, rng);
  Tensor logits = random_param({1, 4}, rng);
  const Mask mask{1, 1, 0, 1};

  auto weighted = [=](const Tensor& t) {
    Tensor w = Tensor::zeros(t.shape());
    auto d = w.mutable_data();
    for (size_t i = 0; i < d.size(); ++i) d[i] = std::sin(1.0 + 0.7 * static_cast<double>(i));
    return sum(mul(t, w));
  };

  return {
      {"matmul", [=] { return weighted(matmul(a, b)); }, {{"a", a}, {"b", b}}},
      {"transpose", [=] { return weighted(transpose(a)); }, {{"a", a}}},
      {"add", [=] { return weighted(add(a, c)); }, {{"a", a}, {"c", c}}},
      {"sub", [=] { return weighted(sub(a, c)); }, {{"a", a}, {"c", c}}},
      {"mul", [=] { return weighted(mul(a, c)); }, {{"a", a}, {"c", c}}},
      {"add_row", [=] { return weighted(add_row(a, row)); }, {{"a", a}, {"row", row}}},
      {"scale", [=] { return weighted(scale(a, -1.7)); }, {{"a", a}}},
      {"one_minus", [=] { return weighted(one_minus(a)); }, {{"a", a}}},
      {"mul_constant",
       [=] { return weighted(mul_constant(a, std::vector<double>(12, 1.25))); },
       {{"a", a}}},
      {"relu", [=] { return weighted(relu(pos)); }, {{"pos", pos}}},
      {"tanh", [=] { return weighted(mtx::tanh(a)); }, {{"a", a}}},
      {"sigmoid", [=] { return weighted(sigmoid(a)); }, {{"a", a}}},
      {"softmax_rows", [=] { return weighted(softmax_rows(a)); }, {{"a", a}}},
      {"mean", [=] { return mean(mul(a, a)); }, {{"a", a}}},
      {"concat_cols",
       [=] {
         std::vector<Tensor> parts{a, c};
         return weighted(concat_cols(parts));
       },
       {{"a", a}, {"c", c}}},
      {"concat_rows",
       [=] {
         std::vector<Tensor> parts{a, c};
         return weighted(concat_rows(parts));
       },
       {{"a", a}, {"c", c}}},
      {"slice_rows", [=] { return weighted(slice_rows(a, 1, 3)); }, {{"a", a}}},
      {"slice_cols", [=] { return weighted(slice_cols(a, 1, 3)); }, {{"a", a}}},
      {"conv1d", [=] { return weighted(conv1d(a, filters, bias)); },
       {{"a", a}, {"filters", filters}, {"bias", bias}}},
      {"segment_mean", [=] { return weighted(segment_mean(a, mask, 2)); }, {{"a", a}}},
      {"segment_max", [=] { return weighted(segment_max(pos, mask, 2)); }, {{"pos", pos}}},
      {"nll_loss", [=] { return nll_loss(softmax_rows(logits), 2); }, {{"logits", logits}}},
      {"bce_loss",
       [=] {
         std::vector<double> gold{1, 0, 1, 1};
         return bce_loss(sigmoid(probs_in), gold, mask);
       },
       {{"probs_in", probs_in}}},
  };
}

}  // namespace mtx::testing

#endif  // MTXPLAIN_TESTS_OP_CASES_H_
