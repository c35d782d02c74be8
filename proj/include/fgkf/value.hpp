#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fgkf {

struct Node;

// Dense 64-bit real matrix participating in reverse-mode differentiation.
// A Value is a cheap handle onto a shared node; nodes are immutable after
// creation except for leaf data (optimizer updates) and gradient buffers.
// Vectors are 1xN rows, scalars are 1x1.
class Value {
 public:
  Value() = default;

  static Value constant(int rows, int cols, std::vector<double> data);
  static Value full(int rows, int cols, double fill);
  static Value zeros(int rows, int cols);
  static Value scalar(double v);
  // Trainable leaf; receives a gradient on backward.
  static Value param(int rows, int cols, std::vector<double> data);

  bool defined() const { return node_ != nullptr; }
  int rows() const;
  int cols() const;
  int size() const;
  std::vector<int> shape() const;

  double item() const;  // 1x1 only
  double at(int r, int c) const;
  std::span<const double> data() const;
  // Mutable access to leaf storage (optimizer updates). Throws on non-leaf.
  std::span<double> leaf_data();

  bool requires_grad() const;
  // Gradient written by the most recent backward(); zeros-sized if this
  // node was unreachable from that loss.
  std::span<const double> grad() const;
  bool grad_current() const;

  const char* op_name() const;

  explicit Value(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// --- primitives -----------------------------------------------------------
// Shape errors name the offending shapes. Broadcasting in add/mul: equal
// shapes, scalar on either side, or a 1xC row / Rx1 column against RxC.

Value matmul(const Value& a, const Value& b);
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value div(const Value& a, const Value& b);
Value scale(const Value& a, double k);
Value add_scalar(const Value& a, double k);

Value sigmoid(const Value& a);
Value tanh(const Value& a);
Value exp(const Value& a);
Value log(const Value& a);
Value sqrt(const Value& a);

// axis=1 reduces/normalizes each row, axis=0 each column.
Value softmax(const Value& a, int axis);
Value log_softmax(const Value& a, int axis);
Value logsumexp(const Value& a, int axis);  // Rx1 for axis=1, 1xC for axis=0
Value sum(const Value& a);                  // 1x1
Value sum(const Value& a, int axis);

Value concat(const std::vector<Value>& parts, int axis);
Value slice(const Value& a, int axis, int start, int len);
Value pick(const Value& a, int r, int c);  // 1x1 element
Value transpose(const Value& a);
Value reshape(const Value& a, int rows, int cols);

// Inverted-dropout with a caller-supplied mask of 0 / (1/keep) entries;
// deterministic given the mask and differentiable through it.
Value dropout(const Value& a, std::vector<double> mask);

// Row lookup (embedding); gradient scatter-adds into the table.
Value gather_rows(const Value& table, std::span<const int> ids);

// Reverse-mode sweep from a finite scalar loss. Populates gradients on every
// reachable node with requires_grad; parameters not reachable keep no
// gradient for this epoch (readers substitute zeros). Reports NaN gradients
// with the producing primitive's name.
void backward(const Value& loss);

// Epoch id of the most recent backward(); used to tell fresh gradients from
// stale buffers of earlier steps.
uint64_t current_grad_epoch();

bool all_finite(const Value& v);

}  // namespace fgkf
