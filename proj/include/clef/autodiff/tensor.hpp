#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace clef::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Storage behind a Tensor handle. Values are row-major 64-bit floats.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first touched by backward
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

/// Shared handle to a dense tensor. Copies alias the same storage; ops always
/// allocate fresh outputs, so a tensor is never rewritten after creation except
/// through mutable_data() on a parameter.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor ones(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// A 1×n row.
  static Tensor row(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
  static Tensor randn(Shape shape, std::mt19937_64& rng, double stddev,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rank() const { return shape().size(); }
  /// Rank-1 tensors are treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t r, std::size_t c) const;
  std::vector<double> to_vector() const;
  std::vector<double> row_vector(std::size_t r) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Value copy that is not connected to any tape.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  std::shared_ptr<Node> node_;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedTensor>;

void zero_grads(const ParameterList& params);
std::size_t parameter_count(const ParameterList& params);

}  // namespace clef::ad
