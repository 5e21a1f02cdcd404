#include "clef/autodiff/tape.hpp"

#include "clef/errors.hpp"

namespace clef::ad {

namespace {
thread_local Tape* current_tape = nullptr;
}

void Tape::record(std::string_view name, std::vector<std::shared_ptr<Node>> inputs,
                  std::shared_ptr<Node> output, BackwardFn backward) {
  ops_.push_back(Op{name, std::move(inputs), std::move(output), std::move(backward)});
}

bool Tape::produced(const Node* node) const {
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    if (it->output.get() == node) return true;
  }
  return false;
}

TapeScope::TapeScope(Tape& tape) : previous_(current_tape) { current_tape = &tape; }

TapeScope::~TapeScope() { current_tape = previous_; }

Tape* active_tape() { return current_tape; }

void backward(const Tensor& loss, Tape& tape) {
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeMismatch("backward needs a scalar loss");
  }
  Node* root = loss.node().get();
  if (!tape.produced(root) && !root->requires_grad) {
    throw InvalidArgument("loss is not on the tape");
  }
  // Intermediate grads start from zero so a tape can be replayed.
  for (const auto& op : tape.ops()) op.output->grad.assign(op.output->value.size(), 0.0);
  for (const auto& op : tape.ops()) {
    for (const auto& in : op.inputs) {
      if (in->requires_grad) in->ensure_grad();
    }
  }
  root->ensure_grad();
  root->grad[0] += 1.0;
  const auto& ops = tape.ops();
  for (auto it = ops.rbegin(); it != ops.rend(); ++it) it->backward();
}

}  // namespace clef::ad
