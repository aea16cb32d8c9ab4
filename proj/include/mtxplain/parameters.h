#ifndef MTXPLAIN_PARAMETERS_H_
#define MTXPLAIN_PARAMETERS_H_

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mtxplain/rng.h"
#include "mtxplain/tensor.h"

namespace mtx {

// Named trainable tensors in registration order. Registration order fixes
// both initialization order and checkpoint layout.
class ParameterStore {
 public:
  using Entry = std::pair<std::string, Tensor>;

  // Registers `value` as a trainable leaf. Names must be unique.
  Tensor add(const std::string& name, Tensor value);
  // Uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)).
  Tensor add_xavier(const std::string& name, Shape shape, size_t fan_in,
                    size_t fan_out, Rng& rng);
  Tensor add_zeros(const std::string& name, Shape shape);

  bool contains(const std::string& name) const;
  Tensor get(const std::string& name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  size_t total_values() const;

  void zero_grad();
  // Sets every value to zero (keeps the graph leaves).
  void fill_zero();
  // Copies values for every name present in both stores with equal shapes.
  // Returns the number of tensors copied.
  size_t copy_matching_from(const ParameterStore& other);

 private:
  std::vector<Entry> entries_;
  std::map<std::string, size_t> index_;
};

}  // namespace mtx

#endif  // MTXPLAIN_PARAMETERS_H_
