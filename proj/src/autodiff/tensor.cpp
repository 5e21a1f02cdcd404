#include "clef/autodiff/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "clef/errors.hpp"

namespace clef::ad {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_size(shape) != data.size()) {
    throw ShapeMismatch("tensor shape " + shape_string(shape) + " does not hold " +
                        std::to_string(data.size()) + " values");
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw NonFiniteValue("tensor constructed with a non-finite value");
  }
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::ones(Shape shape, bool requires_grad) { return full(std::move(shape), 1.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, double stddev, bool requires_grad) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = dist(rng);
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

static const Node& require(const std::shared_ptr<Node>& node) {
  if (!node) throw InvalidArgument("use of an undefined tensor");
  return *node;
}

const Shape& Tensor::shape() const { return require(node_).shape; }

std::size_t Tensor::size() const { return require(node_).value.size(); }

std::size_t Tensor::rows() const {
  const Shape& s = shape();
  return s.size() >= 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  return s.empty() ? 1 : s.back();
}

std::span<const double> Tensor::data() const { return require(node_).value; }

std::span<double> Tensor::mutable_data() {
  require(node_);
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeMismatch("item() on a tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

std::vector<double> Tensor::to_vector() const {
  auto d = data();
  return {d.begin(), d.end()};
}

std::vector<double> Tensor::row_vector(std::size_t r) const {
  auto d = data();
  const std::size_t c = cols();
  return {d.begin() + static_cast<std::ptrdiff_t>(r * c),
          d.begin() + static_cast<std::ptrdiff_t>((r + 1) * c)};
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  require(node_);
  node_->requires_grad = value;
}

std::span<const double> Tensor::grad() const { return require(node_).grad; }

std::span<double> Tensor::mutable_grad() {
  require(node_);
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  require(node_);
  node_->grad.assign(node_->value.size(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(shape(), to_vector(), false); }

void zero_grads(const ParameterList& params) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.size();
  return n;
}

}  // namespace clef::ad
