#pragma once

#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "clef/autodiff/tensor.hpp"

namespace clef::ad {

/// Ordered record of differentiable operations. Ops record themselves on the
/// tape installed by the innermost TapeScope of the calling thread, and only
/// when one of their inputs requires a gradient. Without a scope every op runs
/// in inference mode.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  struct Op {
    std::string_view name;
    std::vector<std::shared_ptr<Node>> inputs;
    std::shared_ptr<Node> output;
    BackwardFn backward;
  };

  void record(std::string_view name, std::vector<std::shared_ptr<Node>> inputs,
              std::shared_ptr<Node> output, BackwardFn backward);

  std::size_t size() const { return ops_.size(); }
  bool empty() const { return ops_.empty(); }
  const std::vector<Op>& ops() const { return ops_; }
  bool produced(const Node* node) const;
  void clear() { ops_.clear(); }

 private:
  std::vector<Op> ops_;
};

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

/// Seeds d(loss)/d(loss) = 1 and walks the tape once in reverse. Gradients
/// accumulate into every requires_grad input touched by the tape; inputs that
/// the loss does not depend on end up with a zero gradient.
void backward(const Tensor& loss, Tape& tape);

}  // namespace clef::ad
