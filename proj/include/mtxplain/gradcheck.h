#ifndef MTXPLAIN_GRADCHECK_H_
#define MTXPLAIN_GRADCHECK_H_

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mtxplain/tensor.h"

namespace mtx {

struct GradCheckReport {
  double max_rel_error = 0.0;
  // Worst element error per parameter.
  std::map<std::string, double> per_parameter;
};

// Compares backward() gradients of a scalar function against central finite
// differences, element by element:
//   rel = |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|)
// `f` must be deterministic (disable dropout) and rebuild its graph on every
// call. Parameter values are restored afterwards.
GradCheckReport gradcheck(const std::function<Tensor()>& f,
                          const std::vector<std::pair<std::string, Tensor>>& params,
                          double h = 1e-4);

}  // namespace mtx

#endif  // MTXPLAIN_GRADCHECK_H_
