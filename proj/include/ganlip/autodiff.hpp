#pragma once

// Reverse-mode automatic differentiation over dense 2-D tensors.
//
// Every backward rule is expressed with the same recorded primitives as the
// forward pass, so gradients returned with create_graph = true are ordinary
// tape Values and can be differentiated again (backward-of-backward). This is
// what makes an input-gradient penalty trainable w.r.t. the parameters.
//
// A Tape is single-threaded. Values are lightweight handles {tape, node id};
// they must not outlive their tape or cross tapes.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ganlip/matrix.hpp"

namespace ganlip::ad {

class Tape;

class Value {
 public:
  Value() = default;
  Value(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Matrix& data() const;
  std::size_t rows() const { return data().rows; }
  std::size_t cols() const { return data().cols; }
  // Value of a 1x1 tensor.
  double item() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class Op {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Scale,
  MatMul,
  Transpose,
  AddBias,
  Relu,
  LeakyRelu,
  Tanh,
  Sigmoid,
  Log,
  Sqrt,
  Abs,
  Clamp,
  Sum,
  Mean,
  RowSums,
  ColSums,
  Broadcast,
  BroadcastRows,
  BroadcastCols,
  L2NormRows,
  Concat,
  Slice,
  Reshape,
};

struct Node {
  Op op = Op::Leaf;
  std::vector<std::size_t> inputs;
  Matrix value;
  // Op parameters: scale factor, leaky slope, clamp bounds, slice offsets.
  double p0 = 0.0;
  double p1 = 0.0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves double as variables and constants; differentiability is decided
  // by which leaves are passed to grad().
  Value leaf(Matrix m);
  Value scalar(double v) { return leaf(Matrix(1, 1, v)); }
  Value zeros(std::size_t rows, std::size_t cols) { return leaf(Matrix(rows, cols)); }

  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Appends a computed node; checks finiteness of the result.
  Value push(Op op, std::vector<std::size_t> inputs, Matrix value, double p0 = 0.0, double p1 = 0.0);

 private:
  std::vector<Node> nodes_;
};

// Elementwise ops accept equal shapes or a 1x1 operand on either side.
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value div(Value a, Value b);
Value scale(Value a, double c);
Value add_scalar(Value a, double c);

Value matmul(Value a, Value b);
Value transpose(Value a);
// x (N x D) + b (1 x D), broadcast over rows.
Value add_bias(Value x, Value b);
Value dense(Value x, Value weight, Value bias);

Value relu(Value a);
Value leaky_relu(Value a, double slope = 0.2);
Value tanh(Value a);
Value sigmoid(Value a);
Value log(Value a);
Value sqrt(Value a);
Value abs(Value a);
Value clamp(Value a, double lo, double hi);
Value square(Value a);

Value sum(Value a);
Value mean(Value a);
// N x D -> N x 1
Value row_sums(Value a);
// N x D -> 1 x D
Value col_sums(Value a);
// 1x1 -> rows x cols
Value broadcast(Value a, std::size_t rows, std::size_t cols);
// 1 x D -> rows x D
Value broadcast_rows(Value a, std::size_t rows);
// N x 1 -> N x cols
Value broadcast_cols(Value a, std::size_t cols);
// N x D -> N x 1 Euclidean norm of each row.
Value l2_norm_rows(Value a);

// Column-wise concatenation of equal-row tensors.
Value concat(std::span<const Value> parts);
Value concat(Value a, Value b);
// Columns [begin, end).
Value slice(Value a, std::size_t begin, std::size_t end);
Value reshape(Value a, std::size_t rows, std::size_t cols);

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator*(Value a, Value b) { return mul(a, b); }
inline Value operator/(Value a, Value b) { return div(a, b); }

struct Gradients {
  std::vector<Value> values;
  // False where the input is not an ancestor of the output; the matching
  // entry of `values` is then a zero tensor.
  std::vector<bool> reached;
};

// d output / d input for each input. With create_graph the returned Values
// are recorded on the tape and can be differentiated again; otherwise they
// are detached leaves.
Gradients grad(Value output, std::span<const Value> inputs, bool create_graph = false);

using ScalarFn = std::function<Value(Tape&, Value)>;

// Max over coordinates of |analytic - numeric| / (|analytic| + |numeric| + 1e-12)
// with central differences of step eps.
double finite_diff_check(const ScalarFn& f, const Matrix& x, double eps = 1e-4);

// Central-difference gradient of f at x.
Matrix numeric_gradient(const ScalarFn& f, const Matrix& x, double eps = 1e-4);

}  // namespace ganlip::ad
