#include "mtxplain/parameters.h"

#include <algorithm>
#include <cmath>

#include "mtxplain/error.h"

namespace mtx {

Tensor ParameterStore::add(const std::string& name, Tensor value) {
  if (index_.count(name)) throw UsageError("duplicate parameter '" + name + "'");
  value.set_requires_grad(true);
  index_[name] = entries_.size();
  entries_.emplace_back(name, value);
  return value;
}

Tensor ParameterStore::add_xavier(const std::string& name, Shape shape,
                                  size_t fan_in, size_t fan_out, Rng& rng) {
  double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.mutable_data()) v = rng.uniform(-a, a);
  return add(name, t);
}

Tensor ParameterStore::add_zeros(const std::string& name, Shape shape) {
  return add(name, Tensor::zeros(std::move(shape)));
}

bool ParameterStore::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

Tensor ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

size_t ParameterStore::total_values() const {
  size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

void ParameterStore::fill_zero() {
  for (auto& [name, t] : entries_) {
    auto d = t.mutable_data();
    std::fill(d.begin(), d.end(), 0.0);
  }
}

size_t ParameterStore::copy_matching_from(const ParameterStore& other) {
  size_t copied = 0;
  for (auto& [name, t] : entries_) {
    if (!other.contains(name)) continue;
    Tensor src = other.get(name);
    if (src.shape() != t.shape()) continue;
    std::copy(src.data().begin(), src.data().end(), t.mutable_data().begin());
    ++copied;
  }
  return copied;
}

}  // namespace mtx
