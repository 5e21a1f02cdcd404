#include "clef/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "clef/autodiff/tape.hpp"
#include "clef/errors.hpp"

namespace clef::ad {

namespace {

using NodePtr = std::shared_ptr<Node>;

Tape* grad_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = active_tape();
  if (!tape) return nullptr;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return tape;
  }
  return nullptr;
}

Tensor finish(std::string_view op, Shape shape, std::vector<double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteValue(std::string(op) + " produced a non-finite value");
  }
  return Tensor(std::move(shape), std::move(values));
}

void record(Tape* tape, std::string_view op, Tensor& out, std::vector<NodePtr> inputs,
            Tape::BackwardFn fn) {
  out.set_requires_grad(true);
  tape->record(op, std::move(inputs), out.node(), std::move(fn));
}


enum class Broadcast { same, row, scalar };

Broadcast broadcast_mode(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (b.size() == 1) return Broadcast::scalar;
  if (b.size() == a.cols() && b.rows() == 1 && a.size() % b.size() == 0) return Broadcast::row;
  if (a.size() == b.size() && a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::same;
  throw ShapeMismatch(std::string(op) + ": cannot combine " + shape_string(a.shape()) + " with " +
                      shape_string(b.shape()));
}

inline std::size_t bindex(Broadcast mode, std::size_t k, std::size_t cols) {
  switch (mode) {
    case Broadcast::same: return k;
    case Broadcast::row: return k % cols;
    case Broadcast::scalar: return 0;
  }
  return k;
}

template <class Forward, class Derivative>
Tensor unary(std::string_view op, const Tensor& x, Forward f, Derivative df) {
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t k = 0; k < in.size(); ++k) out[k] = f(in[k]);
  Tensor result = finish(op, x.shape(), std::move(out));
  if (Tape* tape = grad_tape({&x})) {
    Node* xn = x.node().get();
    Node* on = result.node().get();
    record(tape, op, result, {x.node()}, [xn, on, df]() {
      for (std::size_t k = 0; k < on->grad.size(); ++k) {
        xn->grad[k] += on->grad[k] * df(xn->value[k], on->value[k]);
      }
    });
  }
  return result;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

}  // namespace

double gelu_value(double x) { return x * normal_cdf(x); }

double huber_value(double residual, double delta) {
  const double a = std::abs(residual);
  return a <= delta ? 0.5 * a * a : delta * (a - 0.5 * delta);
}

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b) {
  static constexpr std::string_view names[] = {"add", "subtract", "multiply", "divide"};
  const std::string_view op = names[static_cast<int>(kind)];
  const Broadcast mode = broadcast_mode(a, b, op);
  auto av = a.data();
  auto bv = b.data();
  const std::size_t cols = a.cols();
  if (kind == Elementwise::divide) {
    for (double v : bv) {
      if (std::abs(v) < 1e-12) throw NonInvertibleValue("divide: denominator magnitude below 1e-12");
    }
  }
  std::vector<double> out(av.size());
  for (std::size_t k = 0; k < av.size(); ++k) {
    const double x = av[k];
    const double y = bv[bindex(mode, k, cols)];
    switch (kind) {
      case Elementwise::add: out[k] = x + y; break;
      case Elementwise::subtract: out[k] = x - y; break;
      case Elementwise::multiply: out[k] = x * y; break;
      case Elementwise::divide: out[k] = x / y; break;
    }
  }
  Tensor result = finish(op, a.shape(), std::move(out));
  if (Tape* tape = grad_tape({&a, &b})) {
    Node* an = a.node().get();
    Node* bn = b.node().get();
    Node* on = result.node().get();
    record(tape, op, result, {a.node(), b.node()}, [an, bn, on, kind, mode, cols]() {
      const auto& g = on->grad;
      for (std::size_t k = 0; k < g.size(); ++k) {
        const std::size_t j = bindex(mode, k, cols);
        const double x = an->value[k];
        const double y = bn->value[j];
        double ga = 0.0;
        double gb = 0.0;
        switch (kind) {
          case Elementwise::add: ga = g[k]; gb = g[k]; break;
          case Elementwise::subtract: ga = g[k]; gb = -g[k]; break;
          case Elementwise::multiply: ga = g[k] * y; gb = g[k] * x; break;
          case Elementwise::divide: ga = g[k] / y; gb = -g[k] * x / (y * y); break;
        }
        if (an->requires_grad) an->grad[k] += ga;
        if (bn->requires_grad) bn->grad[j] += gb;
      }
    });
  }
  return result;
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::subtract, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::multiply, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::divide, a, b); }

Tensor scale(const Tensor& a, double factor) {
  return unary("scale", a, [factor](double x) { return x * factor; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary("add_scalar", a, [value](double x) { return x + value; },
               [](double, double) { return 1.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows();
  const std::size_t k = a.cols();
  const std::size_t n = b.cols();
  if (b.rows() != k || (b.rank() != 2 && n != 1)) {
    throw ShapeMismatch("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      if (x == 0.0) continue;
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += x * brow[j];
    }
  }
  Tensor result = finish("matmul", {m, n}, std::move(out));
  if (Tape* tape = grad_tape({&a, &b})) {
    Node* an = a.node().get();
    Node* bn = b.node().get();
    Node* on = result.node().get();
    record(tape, "matmul", result, {a.node(), b.node()}, [an, bn, on, m, k, n]() {
      const double* g = on->grad.data();
      if (an->requires_grad) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double* brow = bn->value.data() + p * n;
            const double* grow = g + i * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            an->grad[i * k + p] += acc;
          }
        }
      }
      if (bn->requires_grad) {
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = g + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double x = an->value[i * k + p];
            if (x == 0.0) continue;
            double* bg = bn->grad.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) bg[j] += x * grow[j];
          }
        }
      }
    });
  }
  return result;
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  auto av = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  Tensor result = finish("transpose", {n, m}, std::move(out));
  if (Tape* tape = grad_tape({&a})) {
    Node* an = a.node().get();
    Node* on = result.node().get();
    record(tape, "transpose", result, {a.node()}, [an, on, m, n]() {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += on->grad[j * m + i];
    });
  }
  return result;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw ShapeMismatch("reshape: " + shape_string(a.shape()) + " to " + shape_string(shape));
  }
  Tensor result = finish("reshape", std::move(shape), a.to_vector());
  if (Tape* tape = grad_tape({&a})) {
    Node* an = a.node().get();
    Node* on = result.node().get();
    record(tape, "reshape", result, {a.node()}, [an, on]() {
      for (std::size_t k = 0; k < on->grad.size(); ++k) an->grad[k] += on->grad[k];
    });
  }
  return result;
}

Tensor gelu(const Tensor& x) {
  return unary("gelu", x, [](double v) { return gelu_value(v); },
               [](double v, double) {
                 return normal_cdf(v) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
               });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x,
               [](double v) {
                 if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
                 const double e = std::exp(v);
                 return e / (1.0 + e);
               },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0 ? v : 0.0; },
               [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  Tensor result = finish("sum", {1}, {total});
  if (Tape* tape = grad_tape({&a})) {
    Node* an = a.node().get();
    Node* on = result.node().get();
    record(tape, "sum", result, {a.node()}, [an, on]() {
      for (double& g : an->grad) g += on->grad[0];
    });
  }
  return result;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  const std::size_t n = a.cols();
  const std::size_t m = a.rows();
  auto av = a.data();
  std::vector<double> out(rows.size() * n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m) throw ShapeMismatch("gather_rows: row index out of range");
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(rows[r] * n), n,
                out.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  Tensor result = finish("gather_rows", {rows.size(), n}, std::move(out));
  if (Tape* tape = grad_tape({&a})) {
    Node* an = a.node().get();
    Node* on = result.node().get();
    std::vector<std::size_t> index(rows.begin(), rows.end());
    record(tape, "gather_rows", result, {a.node()}, [an, on, n, index = std::move(index)]() {
      for (std::size_t r = 0; r < index.size(); ++r) {
        double* dst = an->grad.data() + index[r] * n;
        const double* src = on->grad.data() + r * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
      }
    });
  }
  return result;
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.rows()) throw ShapeMismatch("slice_rows: range out of bounds");
  const std::size_t n = a.cols();
  auto av = a.data();
  std::vector<double> out(av.begin() + static_cast<std::ptrdiff_t>(begin * n),
                          av.begin() + static_cast<std::ptrdiff_t>((begin + count) * n));
  Tensor result = finish("slice_rows", {count, n}, std::move(out));
  if (Tape* tape = grad_tape({&a})) {
    Node* an = a.node().get();
    Node* on = result.node().get();
    record(tape, "slice_rows", result, {a.node()}, [an, on, begin, n]() {
      double* dst = an->grad.data() + begin * n;
      for (std::size_t k = 0; k < on->grad.size(); ++k) dst[k] += on->grad[k];
    });
  }
  return result;
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  const std::size_t n = a.cols();
  const std::size_t m = a.rows();
  if (begin + count > n) throw ShapeMismatch("slice_cols: range out of bounds");
  auto av = a.data();
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = av[i * n + begin + j];
  Tensor result = finish("slice_cols", {m, count}, std::move(out));
  if (Tape* tape = grad_tape({&a})) {
    Node* an = a.node().get();
    Node* on = result.node().get();
    record(tape, "slice_cols", result, {a.node()}, [an, on, begin, count, n, m]() {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j) an->grad[i * n + begin + j] += on->grad[i * count + j];
    });
  }
  return result;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) throw ShapeMismatch("concat_rows: column counts differ");
    total += p.rows();
  }
  std::vector<double> out;
  out.reserve(total * n);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  Tensor result = finish("concat_rows", {total, n}, std::move(out));
  Tape* tape = active_tape();
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (tape && any) {
    std::vector<NodePtr> inputs;
    std::vector<Node*> raw;
    for (const auto& p : parts) {
      inputs.push_back(p.node());
      raw.push_back(p.node().get());
    }
    Node* on = result.node().get();
    record(tape, "concat_rows", result, std::move(inputs), [raw = std::move(raw), on]() {
      std::size_t offset = 0;
      for (Node* in : raw) {
        const std::size_t len = in->value.size();
        if (in->requires_grad) {
          for (std::size_t k = 0; k < len; ++k) in->grad[k] += on->grad[offset + k];
        }
        offset += len;
      }
    });
  }
  return result;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) throw ShapeMismatch("concat_cols: row counts differ");
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.cols();
    auto pv = p.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < c; ++j) out[i * total + offset + j] = pv[i * c + j];
    offset += c;
  }
  Tensor result = finish("concat_cols", {m, total}, std::move(out));
  Tape* tape = active_tape();
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (tape && any) {
    std::vector<NodePtr> inputs;
    std::vector<Node*> raw;
    for (const auto& p : parts) {
      inputs.push_back(p.node());
      raw.push_back(p.node().get());
    }
    Node* on = result.node().get();
    record(tape, "concat_cols", result, std::move(inputs), [raw = std::move(raw), on, m, total]() {
      std::size_t off = 0;
      for (Node* in : raw) {
        const std::size_t c = in->value.size() / m;
        if (in->requires_grad) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j) in->grad[i * c + j] += on->grad[i * total + off + j];
        }
        off += c;
      }
    });
  }
  return result;
}

Tensor softmax_rows(const Tensor& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  auto av = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = av.data() + i * n;
    const double hi = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (out[i * n + j] = std::exp(row[j] - hi));
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  Tensor result = finish("softmax_rows", a.shape(), std::move(out));
  if (Tape* tape = grad_tape({&a})) {
    Node* an = a.node().get();
    Node* on = result.node().get();
    record(tape, "softmax_rows", result, {a.node()}, [an, on, m, n]() {
      for (std::size_t i = 0; i < m; ++i) {
        const double* y = on->value.data() + i * n;
        const double* g = on->grad.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += y[j] * g[j];
        for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += y[j] * (g[j] - dot);
      }
    });
  }
  return result;
}

Tensor gradient_reversal(const Tensor& a, double lambda) {
  Tensor result = finish("gradient_reversal", a.shape(), a.to_vector());
  if (Tape* tape = grad_tape({&a})) {
    Node* an = a.node().get();
    Node* on = result.node().get();
    record(tape, "gradient_reversal", result, {a.node()}, [an, on, lambda]() {
      for (std::size_t k = 0; k < on->grad.size(); ++k) an->grad[k] += -lambda * on->grad[k];
    });
  }
  return result;
}

Tensor huber_loss(const Tensor& pred, const Tensor& target, double delta) {
  if (pred.size() != target.size()) throw ShapeMismatch("huber_loss: shape mismatch");
  if (!(delta > 0)) throw InvalidArgument("huber_loss: delta must be positive");
  auto p = pred.data();
  auto t = target.data();
  const double n = static_cast<double>(p.size());
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) total += huber_value(t[k] - p[k], delta);
  Tensor result = finish("huber_loss", {1}, {total / n});
  if (Tape* tape = grad_tape({&pred, &target})) {
    Node* pn = pred.node().get();
    Node* tn = target.node().get();
    Node* on = result.node().get();
    record(tape, "huber_loss", result, {pred.node(), target.node()}, [pn, tn, on, delta, n]() {
      const double g = on->grad[0] / n;
      for (std::size_t k = 0; k < pn->value.size(); ++k) {
        const double a = std::clamp(tn->value[k] - pn->value[k], -delta, delta);
        if (pn->requires_grad) pn->grad[k] -= g * a;
        if (tn->requires_grad) tn->grad[k] += g * a;
      }
    });
  }
  return result;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  std::vector<double> w(pred.size(), 1.0);
  return weighted_mse_loss(pred, target, w);
}

Tensor weighted_mse_loss(const Tensor& pred, const Tensor& target, std::span<const double> weights) {
  if (pred.size() != target.size() || weights.size() != pred.size()) {
    throw ShapeMismatch("mse_loss: shape mismatch");
  }
  auto p = pred.data();
  auto t = target.data();
  double wsum = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double r = p[k] - t[k];
    total += weights[k] * r * r;
    wsum += weights[k];
  }
  if (!(wsum > 0)) throw InvalidArgument("mse_loss: weights sum to zero");
  Tensor result = finish("mse_loss", {1}, {total / wsum});
  if (Tape* tape = grad_tape({&pred, &target})) {
    Node* pn = pred.node().get();
    Node* tn = target.node().get();
    Node* on = result.node().get();
    std::vector<double> w(weights.begin(), weights.end());
    record(tape, "mse_loss", result, {pred.node(), target.node()},
           [pn, tn, on, wsum, w = std::move(w)]() {
             const double g = on->grad[0] / wsum;
             for (std::size_t k = 0; k < pn->value.size(); ++k) {
               const double r = 2.0 * w[k] * (pn->value[k] - tn->value[k]);
               if (pn->requires_grad) pn->grad[k] += g * r;
               if (tn->requires_grad) tn->grad[k] -= g * r;
             }
           });
  }
  return result;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const std::size_t m = logits.rows();
  const std::size_t k = logits.cols();
  if (labels.size() != m) throw ShapeMismatch("softmax_cross_entropy: label count mismatch");
  auto lv = logits.data();
  std::vector<double> probs(m * k);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw InvalidArgument("softmax_cross_entropy: label out of range");
    }
    const double* row = lv.data() + i * k;
    const double hi = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - hi);
    const double log_z = hi + std::log(z);
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] = std::exp(row[j] - log_z);
    total += log_z - row[labels[i]];
  }
  Tensor result = finish("softmax_cross_entropy", {1}, {total / static_cast<double>(m)});
  if (Tape* tape = grad_tape({&logits})) {
    Node* ln = logits.node().get();
    Node* on = result.node().get();
    std::vector<int> y(labels.begin(), labels.end());
    record(tape, "softmax_cross_entropy", result, {logits.node()},
           [ln, on, m, k, y = std::move(y), probs = std::move(probs)]() {
             const double g = on->grad[0] / static_cast<double>(m);
             for (std::size_t i = 0; i < m; ++i) {
               for (std::size_t j = 0; j < k; ++j) {
                 const double target = static_cast<int>(j) == y[i] ? 1.0 : 0.0;
                 ln->grad[i * k + j] += g * (probs[i * k + j] - target);
               }
             }
           });
  }
  return result;
}

}  // namespace clef::ad
