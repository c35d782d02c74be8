#include "fgkf/value.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "fgkf/common.hpp"

namespace fgkf {

enum class Op : uint8_t {
  leaf,
  matmul,
  add,
  mul,
  div_,
  sigmoid,
  tanh_,
  exp_,
  log_,
  sqrt_,
  softmax,
  log_softmax,
  logsumexp,
  sum_all,
  sum_axis,
  concat,
  slice,
  transpose,
  reshape,
  dropout,
  gather,
};

namespace {

const char* op_names[] = {
    "leaf",    "matmul",      "add",       "elementwise-mul",
    "div",     "sigmoid",     "tanh",      "exp",
    "log",     "sqrt",        "softmax-over-axis", "log-softmax",
    "logsumexp", "sum",       "sum-over-axis", "concat",
    "slice",   "transpose",   "reshape",   "dropout-with-mask",
    "gather-rows",
};

uint64_t g_grad_epoch = 0;

}  // namespace

struct Node {
  int rows = 0, cols = 0;
  Op op = Op::leaf;
  bool requires_grad = false;
  bool is_leaf = false;
  std::vector<double> data;
  std::vector<double> grad;
  uint64_t grad_epoch = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  // op attributes
  int axis = -1;
  int start = 0, len = 0;
  std::vector<int> ids;
  std::vector<double> aux;

  int size() const { return rows * cols; }
};

namespace {

std::string shape_str(const Node& n) {
  std::ostringstream os;
  os << "[" << n.rows << "x" << n.cols << "]";
  return os.str();
}

std::shared_ptr<Node> make_node(int rows, int cols, Op op) {
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->op = op;
  n->data.assign(static_cast<size_t>(rows) * cols, 0.0);
  return n;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

Node* need(const Value& v, const char* ctx) {
  require(v.defined(), std::string(ctx) + ": undefined Value");
  return v.node();
}

void link(const std::shared_ptr<Node>& out, std::initializer_list<const Value*> ins) {
  for (const Value* v : ins) {
    out->inputs.push_back(v->node_ptr());
    if (v->node()->requires_grad) out->requires_grad = true;
  }
}

// Broadcast classes for add/mul/div with equal, scalar, row or column shapes.
enum class Bcast { same, scalar, row, col };

Bcast classify(const Node& a, const Node& b, const char* opname) {
  if (a.rows == b.rows && a.cols == b.cols) return Bcast::same;
  if (b.rows == 1 && b.cols == 1) return Bcast::scalar;
  if (b.rows == 1 && b.cols == a.cols) return Bcast::row;
  if (b.cols == 1 && b.rows == a.rows) return Bcast::col;
  throw ShapeError(std::string(opname) + ": shapes " + shape_str(a) + " and " +
                   shape_str(b) + " do not conform");
}

double bval(const Node& b, Bcast bc, int r, int c) {
  switch (bc) {
    case Bcast::same: return b.data[static_cast<size_t>(r) * b.cols + c];
    case Bcast::scalar: return b.data[0];
    case Bcast::row: return b.data[c];
    case Bcast::col: return b.data[r];
  }
  return 0.0;
}

// Accumulate an RxC contribution into b's grad, reducing over broadcast dims.
void bacc(Node& b, Bcast bc, int r, int c, double g) {
  switch (bc) {
    case Bcast::same: b.grad[static_cast<size_t>(r) * b.cols + c] += g; break;
    case Bcast::scalar: b.grad[0] += g; break;
    case Bcast::row: b.grad[c] += g; break;
    case Bcast::col: b.grad[r] += g; break;
  }
}

}  // namespace

// --- Value handle ---------------------------------------------------------

Value Value::constant(int rows, int cols, std::vector<double> data) {
  require(rows >= 1 && cols >= 1, "constant: non-positive shape");
  require(static_cast<size_t>(rows) * cols == data.size(),
          "constant: data length does not match shape");
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->data = std::move(data);
  n->is_leaf = true;
  return Value(std::move(n));
}

Value Value::full(int rows, int cols, double fill) {
  return constant(rows, cols, std::vector<double>(static_cast<size_t>(rows) * cols, fill));
}

Value Value::zeros(int rows, int cols) { return full(rows, cols, 0.0); }

Value Value::scalar(double v) { return constant(1, 1, {v}); }

Value Value::param(int rows, int cols, std::vector<double> data) {
  Value v = constant(rows, cols, std::move(data));
  v.node()->requires_grad = true;
  return v;
}

int Value::rows() const { return need(*this, "rows")->rows; }
int Value::cols() const { return need(*this, "cols")->cols; }
int Value::size() const { return need(*this, "size")->size(); }
std::vector<int> Value::shape() const { return {rows(), cols()}; }

double Value::item() const {
  const Node* n = need(*this, "item");
  require(n->size() == 1, "item: Value of shape " + shape_str(*n) + " is not scalar");
  return n->data[0];
}

double Value::at(int r, int c) const {
  const Node* n = need(*this, "at");
  require(r >= 0 && r < n->rows && c >= 0 && c < n->cols, "at: index out of range");
  return n->data[static_cast<size_t>(r) * n->cols + c];
}

std::span<const double> Value::data() const { return need(*this, "data")->data; }

std::span<double> Value::leaf_data() {
  Node* n = need(*this, "leaf_data");
  require(n->is_leaf, "leaf_data: not a leaf Value");
  return n->data;
}

bool Value::requires_grad() const { return need(*this, "requires_grad")->requires_grad; }

std::span<const double> Value::grad() const {
  const Node* n = need(*this, "grad");
  if (n->grad_epoch != g_grad_epoch || g_grad_epoch == 0) return {};
  return n->grad;
}

bool Value::grad_current() const {
  const Node* n = need(*this, "grad_current");
  return g_grad_epoch != 0 && n->grad_epoch == g_grad_epoch;
}

const char* Value::op_name() const {
  return op_names[static_cast<size_t>(need(*this, "op_name")->op)];
}

uint64_t current_grad_epoch() { return g_grad_epoch; }

bool all_finite(const Value& v) {
  for (double x : v.data())
    if (!std::isfinite(x)) return false;
  return true;
}

// --- forward primitives ---------------------------------------------------

Value matmul(const Value& av, const Value& bv) {
  Node* a = need(av, "matmul");
  Node* b = need(bv, "matmul");
  require(a->cols == b->rows, "matmul: inner dimensions of " + shape_str(*a) +
                                  " and " + shape_str(*b) + " differ");
  auto out = make_node(a->rows, b->cols, Op::matmul);
  const int m = a->rows, k = a->cols, n = b->cols;
  for (int i = 0; i < m; ++i) {
    double* orow = out->data.data() + static_cast<size_t>(i) * n;
    const double* arow = a->data.data() + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av_ = arow[p];
      if (av_ == 0.0) continue;
      const double* brow = b->data.data() + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += av_ * brow[j];
    }
  }
  link(out, {&av, &bv});
  return Value(std::move(out));
}

namespace {

Value binary(const Value& av, const Value& bv, Op op, const char* name) {
  Node* a = need(av, name);
  Node* b = need(bv, name);
  // Commutative broadcast: put the larger operand first where possible.
  if ((a->rows == 1 && a->cols == 1 && b->size() > 1) ||
      (a->rows == 1 && a->cols == b->cols && b->rows > 1) ||
      (a->cols == 1 && a->rows == b->rows && b->cols > 1)) {
    if (op != Op::div_) return binary(bv, av, op, name);
  }
  Bcast bc = classify(*a, *b, name);
  auto out = make_node(a->rows, a->cols, op);
  for (int r = 0; r < a->rows; ++r)
    for (int c = 0; c < a->cols; ++c) {
      const size_t i = static_cast<size_t>(r) * a->cols + c;
      const double x = a->data[i];
      const double y = bval(*b, bc, r, c);
      out->data[i] = op == Op::add ? x + y : (op == Op::mul ? x * y : x / y);
    }
  out->axis = static_cast<int>(bc);
  link(out, {&av, &bv});
  return Value(std::move(out));
}

Value unary(const Value& av, Op op, const char* name, double (*f)(double)) {
  Node* a = need(av, name);
  auto out = make_node(a->rows, a->cols, op);
  for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = f(a->data[i]);
  link(out, {&av});
  return Value(std::move(out));
}

}  // namespace

Value add(const Value& a, const Value& b) { return binary(a, b, Op::add, "add"); }
Value mul(const Value& a, const Value& b) { return binary(a, b, Op::mul, "elementwise-mul"); }
Value div(const Value& a, const Value& b) { return binary(a, b, Op::div_, "div"); }
Value sub(const Value& a, const Value& b) { return add(a, scale(b, -1.0)); }
Value scale(const Value& a, double k) { return mul(a, Value::scalar(k)); }
Value add_scalar(const Value& a, double k) { return add(a, Value::scalar(k)); }

Value sigmoid(const Value& a) {
  return unary(a, Op::sigmoid, "sigmoid", +[](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
}
Value tanh(const Value& a) {
  return unary(a, Op::tanh_, "tanh", +[](double x) { return std::tanh(x); });
}
Value exp(const Value& a) {
  return unary(a, Op::exp_, "exp", +[](double x) { return std::exp(x); });
}
Value log(const Value& a) {
  return unary(a, Op::log_, "log", +[](double x) { return std::log(x); });
}
Value sqrt(const Value& a) {
  return unary(a, Op::sqrt_, "sqrt", +[](double x) { return std::sqrt(x); });
}

namespace {

// Stable per-line softmax family. axis=1 walks rows, axis=0 walks columns.
struct LineIter {
  const Node& n;
  int axis;
  int lines() const { return axis == 1 ? n.rows : n.cols; }
  int linelen() const { return axis == 1 ? n.cols : n.rows; }
  size_t idx(int line, int k) const {
    return axis == 1 ? static_cast<size_t>(line) * n.cols + k
                     : static_cast<size_t>(k) * n.cols + line;
  }
};

void check_axis(int axis, const char* name) {
  require(axis == 0 || axis == 1, std::string(name) + ": axis must be 0 or 1");
}

}  // namespace

Value softmax(const Value& av, int axis) {
  Node* a = need(av, "softmax-over-axis");
  check_axis(axis, "softmax-over-axis");
  auto out = make_node(a->rows, a->cols, Op::softmax);
  LineIter it{*a, axis};
  for (int l = 0; l < it.lines(); ++l) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < it.linelen(); ++k) mx = std::max(mx, a->data[it.idx(l, k)]);
    double z = 0.0;
    for (int k = 0; k < it.linelen(); ++k) {
      const double e = std::exp(a->data[it.idx(l, k)] - mx);
      out->data[it.idx(l, k)] = e;
      z += e;
    }
    for (int k = 0; k < it.linelen(); ++k) out->data[it.idx(l, k)] /= z;
  }
  out->axis = axis;
  link(out, {&av});
  return Value(std::move(out));
}

Value log_softmax(const Value& av, int axis) {
  Node* a = need(av, "log-softmax");
  check_axis(axis, "log-softmax");
  auto out = make_node(a->rows, a->cols, Op::log_softmax);
  LineIter it{*a, axis};
  for (int l = 0; l < it.lines(); ++l) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < it.linelen(); ++k) mx = std::max(mx, a->data[it.idx(l, k)]);
    double z = 0.0;
    for (int k = 0; k < it.linelen(); ++k) z += std::exp(a->data[it.idx(l, k)] - mx);
    const double lse = mx + std::log(z);
    for (int k = 0; k < it.linelen(); ++k)
      out->data[it.idx(l, k)] = a->data[it.idx(l, k)] - lse;
  }
  out->axis = axis;
  link(out, {&av});
  return Value(std::move(out));
}

Value logsumexp(const Value& av, int axis) {
  Node* a = need(av, "logsumexp");
  check_axis(axis, "logsumexp");
  auto out = make_node(axis == 1 ? a->rows : 1, axis == 1 ? 1 : a->cols, Op::logsumexp);
  LineIter it{*a, axis};
  for (int l = 0; l < it.lines(); ++l) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < it.linelen(); ++k) mx = std::max(mx, a->data[it.idx(l, k)]);
    double z = 0.0;
    for (int k = 0; k < it.linelen(); ++k) z += std::exp(a->data[it.idx(l, k)] - mx);
    out->data[l] = mx + std::log(z);
  }
  out->axis = axis;
  link(out, {&av});
  return Value(std::move(out));
}

Value sum(const Value& av) {
  Node* a = need(av, "sum");
  auto out = make_node(1, 1, Op::sum_all);
  double s = 0.0;
  for (double x : a->data) s += x;
  out->data[0] = s;
  link(out, {&av});
  return Value(std::move(out));
}

Value sum(const Value& av, int axis) {
  Node* a = need(av, "sum-over-axis");
  check_axis(axis, "sum-over-axis");
  auto out = make_node(axis == 1 ? a->rows : 1, axis == 1 ? 1 : a->cols, Op::sum_axis);
  LineIter it{*a, axis};
  for (int l = 0; l < it.lines(); ++l) {
    double s = 0.0;
    for (int k = 0; k < it.linelen(); ++k) s += a->data[it.idx(l, k)];
    out->data[l] = s;
  }
  out->axis = axis;
  link(out, {&av});
  return Value(std::move(out));
}

Value concat(const std::vector<Value>& parts, int axis) {
  require(!parts.empty(), "concat: no inputs");
  check_axis(axis, "concat");
  const Node* first = need(parts[0], "concat");
  int total = 0;
  for (const Value& p : parts) {
    const Node* n = need(p, "concat");
    if (axis == 0) {
      require(n->cols == first->cols, "concat: column mismatch " + shape_str(*first) +
                                          " vs " + shape_str(*n));
      total += n->rows;
    } else {
      require(n->rows == first->rows, "concat: row mismatch " + shape_str(*first) +
                                          " vs " + shape_str(*n));
      total += n->cols;
    }
  }
  auto out = make_node(axis == 0 ? total : first->rows, axis == 0 ? first->cols : total,
                       Op::concat);
  int off = 0;
  for (const Value& p : parts) {
    const Node* n = p.node();
    if (axis == 0) {
      std::copy(n->data.begin(), n->data.end(),
                out->data.begin() + static_cast<size_t>(off) * out->cols);
      off += n->rows;
    } else {
      for (int r = 0; r < n->rows; ++r)
        std::copy(n->data.begin() + static_cast<size_t>(r) * n->cols,
                  n->data.begin() + static_cast<size_t>(r + 1) * n->cols,
                  out->data.begin() + static_cast<size_t>(r) * out->cols + off);
      off += n->cols;
    }
    out->inputs.push_back(p.node_ptr());
    if (n->requires_grad) out->requires_grad = true;
  }
  out->axis = axis;
  return Value(std::move(out));
}

Value slice(const Value& av, int axis, int start, int len) {
  Node* a = need(av, "slice");
  check_axis(axis, "slice");
  const int extent = axis == 0 ? a->rows : a->cols;
  require(start >= 0 && len >= 1 && start + len <= extent,
          "slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
              ") out of bounds for " + shape_str(*a));
  auto out = make_node(axis == 0 ? len : a->rows, axis == 0 ? a->cols : len, Op::slice);
  if (axis == 0) {
    std::copy(a->data.begin() + static_cast<size_t>(start) * a->cols,
              a->data.begin() + static_cast<size_t>(start + len) * a->cols,
              out->data.begin());
  } else {
    for (int r = 0; r < a->rows; ++r)
      std::copy(a->data.begin() + static_cast<size_t>(r) * a->cols + start,
                a->data.begin() + static_cast<size_t>(r) * a->cols + start + len,
                out->data.begin() + static_cast<size_t>(r) * len);
  }
  out->axis = axis;
  out->start = start;
  out->len = len;
  link(out, {&av});
  return Value(std::move(out));
}

Value pick(const Value& a, int r, int c) { return slice(slice(a, 0, r, 1), 1, c, 1); }

Value transpose(const Value& av) {
  Node* a = need(av, "transpose");
  auto out = make_node(a->cols, a->rows, Op::transpose);
  for (int r = 0; r < a->rows; ++r)
    for (int c = 0; c < a->cols; ++c)
      out->data[static_cast<size_t>(c) * a->rows + r] =
          a->data[static_cast<size_t>(r) * a->cols + c];
  link(out, {&av});
  return Value(std::move(out));
}

Value reshape(const Value& av, int rows, int cols) {
  Node* a = need(av, "reshape");
  require(rows * cols == a->size(), "reshape: cannot view " + shape_str(*a) + " as [" +
                                        std::to_string(rows) + "x" + std::to_string(cols) + "]");
  auto out = make_node(rows, cols, Op::reshape);
  out->data = a->data;
  link(out, {&av});
  return Value(std::move(out));
}

Value dropout(const Value& av, std::vector<double> mask) {
  Node* a = need(av, "dropout-with-mask");
  require(mask.size() == a->data.size(),
          "dropout-with-mask: mask length " + std::to_string(mask.size()) +
              " does not match " + shape_str(*a));
  auto out = make_node(a->rows, a->cols, Op::dropout);
  for (size_t i = 0; i < mask.size(); ++i) out->data[i] = a->data[i] * mask[i];
  out->aux = std::move(mask);
  link(out, {&av});
  return Value(std::move(out));
}

Value gather_rows(const Value& tv, std::span<const int> ids) {
  Node* t = need(tv, "gather-rows");
  for (int id : ids)
    require(id >= 0 && id < t->rows, "gather-rows: row id " + std::to_string(id) +
                                         " out of range for " + shape_str(*t));
  auto out = make_node(static_cast<int>(ids.size()), t->cols, Op::gather);
  for (size_t r = 0; r < ids.size(); ++r)
    std::copy(t->data.begin() + static_cast<size_t>(ids[r]) * t->cols,
              t->data.begin() + static_cast<size_t>(ids[r] + 1) * t->cols,
              out->data.begin() + r * t->cols);
  out->ids.assign(ids.begin(), ids.end());
  link(out, {&tv});
  return Value(std::move(out));
}

// --- backward -------------------------------------------------------------

namespace {

void ensure_grad(Node& n) {
  if (n.grad_epoch != g_grad_epoch) {
    n.grad.assign(n.data.size(), 0.0);
    n.grad_epoch = g_grad_epoch;
  }
}

void backprop_one(Node& n) {
  switch (n.op) {
    case Op::leaf:
      return;
    case Op::matmul: {
      Node& a = *n.inputs[0];
      Node& b = *n.inputs[1];
      const int m = a.rows, k = a.cols, c = b.cols;
      if (a.requires_grad) {
        ensure_grad(a);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < c; ++j) {
            const double g = n.grad[static_cast<size_t>(i) * c + j];
            if (g == 0.0) continue;
            for (int p = 0; p < k; ++p)
              a.grad[static_cast<size_t>(i) * k + p] +=
                  g * b.data[static_cast<size_t>(p) * c + j];
          }
      }
      if (b.requires_grad) {
        ensure_grad(b);
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            const double av = a.data[static_cast<size_t>(i) * k + p];
            if (av == 0.0) continue;
            for (int j = 0; j < c; ++j)
              b.grad[static_cast<size_t>(p) * c + j] +=
                  av * n.grad[static_cast<size_t>(i) * c + j];
          }
      }
      return;
    }
    case Op::add:
    case Op::mul:
    case Op::div_: {
      Node& a = *n.inputs[0];
      Node& b = *n.inputs[1];
      const Bcast bc = static_cast<Bcast>(n.axis);
      if (a.requires_grad) ensure_grad(a);
      if (b.requires_grad) ensure_grad(b);
      for (int r = 0; r < n.rows; ++r)
        for (int c = 0; c < n.cols; ++c) {
          const size_t i = static_cast<size_t>(r) * n.cols + c;
          const double g = n.grad[i];
          if (g == 0.0) continue;
          if (n.op == Op::add) {
            if (a.requires_grad) a.grad[i] += g;
            if (b.requires_grad) bacc(b, bc, r, c, g);
          } else if (n.op == Op::mul) {
            if (a.requires_grad) a.grad[i] += g * bval(b, bc, r, c);
            if (b.requires_grad) bacc(b, bc, r, c, g * a.data[i]);
          } else {
            const double y = bval(b, bc, r, c);
            if (a.requires_grad) a.grad[i] += g / y;
            if (b.requires_grad) bacc(b, bc, r, c, -g * a.data[i] / (y * y));
          }
        }
      return;
    }
    case Op::sigmoid:
    case Op::tanh_:
    case Op::exp_:
    case Op::log_:
    case Op::sqrt_: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      for (size_t i = 0; i < n.data.size(); ++i) {
        const double y = n.data[i];
        double d = 0.0;
        switch (n.op) {
          case Op::sigmoid: d = y * (1.0 - y); break;
          case Op::tanh_: d = 1.0 - y * y; break;
          case Op::exp_: d = y; break;
          case Op::log_: d = 1.0 / a.data[i]; break;
          default: d = 0.5 / y; break;  // sqrt
        }
        a.grad[i] += n.grad[i] * d;
      }
      return;
    }
    case Op::softmax: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      LineIter it{n, n.axis};
      for (int l = 0; l < it.lines(); ++l) {
        double dot = 0.0;
        for (int k = 0; k < it.linelen(); ++k) {
          const size_t i = it.idx(l, k);
          dot += n.grad[i] * n.data[i];
        }
        for (int k = 0; k < it.linelen(); ++k) {
          const size_t i = it.idx(l, k);
          a.grad[i] += n.data[i] * (n.grad[i] - dot);
        }
      }
      return;
    }
    case Op::log_softmax: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      LineIter it{n, n.axis};
      for (int l = 0; l < it.lines(); ++l) {
        double gsum = 0.0;
        for (int k = 0; k < it.linelen(); ++k) gsum += n.grad[it.idx(l, k)];
        for (int k = 0; k < it.linelen(); ++k) {
          const size_t i = it.idx(l, k);
          a.grad[i] += n.grad[i] - std::exp(n.data[i]) * gsum;
        }
      }
      return;
    }
    case Op::logsumexp: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      LineIter it{a, n.axis};
      for (int l = 0; l < it.lines(); ++l) {
        const double g = n.grad[l];
        if (g == 0.0) continue;
        for (int k = 0; k < it.linelen(); ++k) {
          const size_t i = it.idx(l, k);
          a.grad[i] += g * std::exp(a.data[i] - n.data[l]);
        }
      }
      return;
    }
    case Op::sum_all: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      const double g = n.grad[0];
      for (size_t i = 0; i < a.data.size(); ++i) a.grad[i] += g;
      return;
    }
    case Op::sum_axis: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      LineIter it{a, n.axis};
      for (int l = 0; l < it.lines(); ++l) {
        const double g = n.grad[l];
        if (g == 0.0) continue;
        for (int k = 0; k < it.linelen(); ++k) a.grad[it.idx(l, k)] += g;
      }
      return;
    }
    case Op::concat: {
      int off = 0;
      for (auto& inp : n.inputs) {
        Node& a = *inp;
        if (a.requires_grad) {
          ensure_grad(a);
          if (n.axis == 0) {
            for (int r = 0; r < a.rows; ++r)
              for (int c = 0; c < a.cols; ++c)
                a.grad[static_cast<size_t>(r) * a.cols + c] +=
                    n.grad[static_cast<size_t>(off + r) * n.cols + c];
          } else {
            for (int r = 0; r < a.rows; ++r)
              for (int c = 0; c < a.cols; ++c)
                a.grad[static_cast<size_t>(r) * a.cols + c] +=
                    n.grad[static_cast<size_t>(r) * n.cols + off + c];
          }
        }
        off += n.axis == 0 ? a.rows : a.cols;
      }
      return;
    }
    case Op::slice: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      if (n.axis == 0) {
        for (int r = 0; r < n.rows; ++r)
          for (int c = 0; c < n.cols; ++c)
            a.grad[static_cast<size_t>(n.start + r) * a.cols + c] +=
                n.grad[static_cast<size_t>(r) * n.cols + c];
      } else {
        for (int r = 0; r < n.rows; ++r)
          for (int c = 0; c < n.cols; ++c)
            a.grad[static_cast<size_t>(r) * a.cols + n.start + c] +=
                n.grad[static_cast<size_t>(r) * n.cols + c];
      }
      return;
    }
    case Op::transpose: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      for (int r = 0; r < n.rows; ++r)
        for (int c = 0; c < n.cols; ++c)
          a.grad[static_cast<size_t>(c) * a.cols + r] +=
              n.grad[static_cast<size_t>(r) * n.cols + c];
      return;
    }
    case Op::reshape: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      for (size_t i = 0; i < n.grad.size(); ++i) a.grad[i] += n.grad[i];
      return;
    }
    case Op::dropout: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      for (size_t i = 0; i < n.grad.size(); ++i) a.grad[i] += n.grad[i] * n.aux[i];
      return;
    }
    case Op::gather: {
      Node& t = *n.inputs[0];
      if (!t.requires_grad) return;
      ensure_grad(t);
      for (size_t r = 0; r < n.ids.size(); ++r)
        for (int c = 0; c < n.cols; ++c)
          t.grad[static_cast<size_t>(n.ids[r]) * t.cols + c] +=
              n.grad[r * n.cols + c];
      return;
    }
  }
}

bool grads_finite(const Node& n) {
  for (const auto& inp : n.inputs) {
    if (!inp->requires_grad || inp->grad_epoch != g_grad_epoch) continue;
    for (double g : inp->grad)
      if (std::isnan(g)) return false;
  }
  return true;
}

}  // namespace

void backward(const Value& loss) {
  Node* root = need(loss, "backward");
  require(root->size() == 1,
          "backward: loss of shape " + shape_str(*root) + " is not scalar");
  if (!std::isfinite(root->data[0]))
    throw NumericError("backward: loss is not finite");
  if (!root->requires_grad) {
    ++g_grad_epoch;
    return;  // nothing trainable reachable
  }

  ++g_grad_epoch;

  // Iterative post-order over the requires_grad subgraph; reversed post-order
  // is a topological order, so consumers run before their inputs.
  std::vector<Node*> order;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root, 0);
  ensure_grad(*root);
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    bool descended = false;
    while (i < n->inputs.size()) {
      Node* child = n->inputs[i++].get();
      if (child->requires_grad && child->grad_epoch != g_grad_epoch) {
        ensure_grad(*child);
        stack.emplace_back(child, 0);
        descended = true;
        break;
      }
    }
    if (descended) continue;
    order.push_back(n);
    stack.pop_back();
  }

  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    backprop_one(**it);
    if (!grads_finite(**it))
      throw NumericError(std::string("backward: NaN gradient produced by primitive '") +
                         op_names[static_cast<size_t>((*it)->op)] + "'");
  }
}

}  // namespace fgkf
