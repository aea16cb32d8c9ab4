#ifndef MTXPLAIN_TENSOR_H_
#define MTXPLAIN_TENSOR_H_

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mtx {

using Shape = std::vector<size_t>;

size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

// One node of the backward graph. Leaves have no parents and no backward_fn.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first touched by backward()
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Dense row-major float64 tensor with reverse-mode autodiff.
//
// A Tensor is a cheap handle; copies share storage. Values are treated as
// immutable once an op has consumed them; only parameter updates and grad
// buffers are written in place.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  size_t dim() const { return shape().size(); }
  size_t numel() const;
  // 2-D accessors; a 1-D tensor is viewed as a single row.
  size_t rows() const;
  size_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(size_t r, size_t c) const;
  double operator[](size_t i) const { return data()[i]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on = true);

  // Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  bool has_grad() const;
  void zero_grad();

  // Reverse pass from a scalar. Leaf gradients accumulate across calls;
  // interior gradients are recomputed from scratch on every call.
  void backward() const;

  // A copy of the values with no graph attached.
  Tensor detach() const;

  const char* op() const;

  // Internal: used by op implementations.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            const char* op, std::vector<Tensor> parents,
                            std::function<void(detail::Node&)> backward_fn);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Clears the gradient buffers of every tensor in the list.
void zero_grad(std::span<Tensor> params);

}  // namespace mtx

#endif  // MTXPLAIN_TENSOR_H_
