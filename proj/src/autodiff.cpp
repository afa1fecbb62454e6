#include "ganlip/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <optional>
#include <string>

#include "ganlip/error.hpp"

namespace ganlip::ad {

namespace {

std::string shape_str(const Matrix& m) { return std::to_string(m.rows) + "x" + std::to_string(m.cols); }

void same_tape(Value a, Value b) {
  require(a.valid() && b.valid(), "autodiff: use of an empty Value");
  require(a.tape() == b.tape(), "autodiff: operands recorded on different tapes");
}

bool is_scalar(const Matrix& m) { return m.rows == 1 && m.cols == 1; }

// Shape of a broadcasting elementwise op, or an error.
std::pair<std::size_t, std::size_t> broadcast_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.same_shape(b)) return {a.rows, a.cols};
  if (is_scalar(a)) return {b.rows, b.cols};
  if (is_scalar(b)) return {a.rows, a.cols};
  fail(ErrorKind::InvalidArgument,
       std::string("autodiff: shape mismatch in ") + op + ": " + shape_str(a) + " vs " + shape_str(b));
}

template <class F>
Matrix elementwise(const Matrix& a, const Matrix& b, const char* name, F f) {
  const auto [r, c] = broadcast_shape(a, b, name);
  Matrix out(r, c);
  const bool sa = is_scalar(a) && !a.same_shape(out);
  const bool sb = is_scalar(b) && !b.same_shape(out);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = f(sa ? a.data[0] : a.data[i], sb ? b.data[0] : b.data[i]);
  }
  return out;
}

template <class F>
Matrix unary(const Matrix& a, F f) {
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = f(a.data[i]);
  return out;
}

// C = A * B with an i-k-j loop.
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix matmul_raw(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  Eigen::Map<const RowMajor> ea(a.data.data(), a.rows, a.cols);
  Eigen::Map<const RowMajor> eb(b.data.data(), b.rows, b.cols);
  Eigen::Map<RowMajor> eo(out.data.data(), out.rows, out.cols);
  eo.noalias() = ea * eb;
  return out;
}

Matrix transpose_raw(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out.data[j * a.rows + i] = a.data[i * a.cols + j];
  return out;
}

// Branch-free exponent test so the scan vectorizes.
bool all_finite(const std::vector<double>& v) {
  constexpr std::uint64_t exponent = 0x7ff0000000000000ULL;
  std::uint64_t bad = 0;
  for (double x : v) bad |= static_cast<std::uint64_t>((std::bit_cast<std::uint64_t>(x) & exponent) == exponent);
  return bad == 0;
}

Value constant_like(Tape& t, Matrix m) { return t.leaf(std::move(m)); }

// Reduces a broadcast gradient back onto a scalar operand when needed.
Value reduce_to(Value g, bool target_is_scalar) {
  if (target_is_scalar && !is_scalar(g.data())) return sum(g);
  return g;
}

}  // namespace

const Matrix& Value::data() const {
  require(valid(), "autodiff: use of an empty Value");
  return tape_->node(id_).value;
}

double Value::item() const {
  const Matrix& m = data();
  require(is_scalar(m), "autodiff: item() on non-scalar " + shape_str(m));
  return m.data[0];
}

Value Tape::leaf(Matrix m) { return push(Op::Leaf, {}, std::move(m)); }

Value Tape::push(Op op, std::vector<std::size_t> inputs, Matrix value, double p0, double p1) {
  if (!all_finite(value.data))
    fail(ErrorKind::Numeric, "autodiff: non-finite value produced by op " + std::to_string(static_cast<int>(op)));
  nodes_.push_back(Node{op, std::move(inputs), std::move(value), p0, p1});
  return Value(this, nodes_.size() - 1);
}

Value add(Value a, Value b) {
  same_tape(a, b);
  return a.tape()->push(Op::Add, {a.id(), b.id()},
                        elementwise(a.data(), b.data(), "add", [](double x, double y) { return x + y; }));
}

Value sub(Value a, Value b) {
  same_tape(a, b);
  return a.tape()->push(Op::Sub, {a.id(), b.id()},
                        elementwise(a.data(), b.data(), "sub", [](double x, double y) { return x - y; }));
}

Value mul(Value a, Value b) {
  same_tape(a, b);
  return a.tape()->push(Op::Mul, {a.id(), b.id()},
                        elementwise(a.data(), b.data(), "mul", [](double x, double y) { return x * y; }));
}

Value div(Value a, Value b) {
  same_tape(a, b);
  return a.tape()->push(Op::Div, {a.id(), b.id()},
                        elementwise(a.data(), b.data(), "div", [](double x, double y) { return x / y; }));
}

Value scale(Value a, double c) {
  return a.tape()->push(Op::Scale, {a.id()}, unary(a.data(), [c](double x) { return x * c; }), c);
}

Value add_scalar(Value a, double c) { return add(a, a.tape()->scalar(c)); }

Value matmul(Value a, Value b) {
  same_tape(a, b);
  const Matrix& ma = a.data();
  const Matrix& mb = b.data();
  if (ma.cols != mb.rows)
    fail(ErrorKind::InvalidArgument, "autodiff: matmul shape mismatch " + shape_str(ma) + " * " + shape_str(mb));
  return a.tape()->push(Op::MatMul, {a.id(), b.id()}, matmul_raw(ma, mb));
}

Value transpose(Value a) { return a.tape()->push(Op::Transpose, {a.id()}, transpose_raw(a.data())); }

Value add_bias(Value x, Value b) {
  same_tape(x, b);
  const Matrix& mx = x.data();
  const Matrix& mb = b.data();
  if (mb.rows != 1 || mb.cols != mx.cols)
    fail(ErrorKind::InvalidArgument, "autodiff: bias shape " + shape_str(mb) + " for input " + shape_str(mx));
  Matrix out = mx;
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += mb.data[j];
  return x.tape()->push(Op::AddBias, {x.id(), b.id()}, std::move(out));
}

Value dense(Value x, Value weight, Value bias) { return add_bias(matmul(x, weight), bias); }

Value relu(Value a) {
  return a.tape()->push(Op::Relu, {a.id()}, unary(a.data(), [](double x) { return x > 0.0 ? x : 0.0; }));
}

Value leaky_relu(Value a, double slope) {
  return a.tape()->push(Op::LeakyRelu, {a.id()},
                        unary(a.data(), [slope](double x) { return x > 0.0 ? x : slope * x; }), slope);
}

Value tanh(Value a) {
  return a.tape()->push(Op::Tanh, {a.id()}, unary(a.data(), [](double x) { return std::tanh(x); }));
}

Value sigmoid(Value a) {
  return a.tape()->push(Op::Sigmoid, {a.id()}, unary(a.data(), [](double x) {
                          if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
                          const double e = std::exp(x);
                          return e / (1.0 + e);
                        }));
}

Value log(Value a) {
  return a.tape()->push(Op::Log, {a.id()}, unary(a.data(), [](double x) { return std::log(x); }));
}

Value sqrt(Value a) {
  return a.tape()->push(Op::Sqrt, {a.id()}, unary(a.data(), [](double x) { return std::sqrt(x); }));
}

Value abs(Value a) {
  return a.tape()->push(Op::Abs, {a.id()}, unary(a.data(), [](double x) { return std::fabs(x); }));
}

Value clamp(Value a, double lo, double hi) {
  require(lo <= hi, "autodiff: clamp bounds inverted");
  return a.tape()->push(Op::Clamp, {a.id()}, unary(a.data(), [=](double x) { return std::clamp(x, lo, hi); }),
                        lo, hi);
}

Value square(Value a) { return mul(a, a); }

Value sum(Value a) {
  double s = 0.0;
  for (double v : a.data().data) s += v;
  return a.tape()->push(Op::Sum, {a.id()}, Matrix(1, 1, s));
}

Value mean(Value a) {
  const Matrix& m = a.data();
  require(m.size() > 0, "autodiff: mean of empty tensor");
  double s = 0.0;
  for (double v : m.data) s += v;
  return a.tape()->push(Op::Mean, {a.id()}, Matrix(1, 1, s / static_cast<double>(m.size())));
}

Value row_sums(Value a) {
  const Matrix& m = a.data();
  Matrix out(m.rows, 1);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (double v : m.row(i)) s += v;
    out.data[i] = s;
  }
  return a.tape()->push(Op::RowSums, {a.id()}, std::move(out));
}

Value col_sums(Value a) {
  const Matrix& m = a.data();
  Matrix out(1, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) out.data[j] += m(i, j);
  return a.tape()->push(Op::ColSums, {a.id()}, std::move(out));
}

Value broadcast(Value a, std::size_t rows, std::size_t cols) {
  require(is_scalar(a.data()), "autodiff: broadcast expects a 1x1 tensor");
  return a.tape()->push(Op::Broadcast, {a.id()}, Matrix(rows, cols, a.data().data[0]));
}

Value broadcast_rows(Value a, std::size_t rows) {
  const Matrix& m = a.data();
  require(m.rows == 1, "autodiff: broadcast_rows expects a 1 x D tensor");
  Matrix out(rows, m.cols);
  for (std::size_t i = 0; i < rows; ++i) std::copy(m.data.begin(), m.data.end(), out.row(i).begin());
  return a.tape()->push(Op::BroadcastRows, {a.id()}, std::move(out));
}

Value broadcast_cols(Value a, std::size_t cols) {
  const Matrix& m = a.data();
  require(m.cols == 1, "autodiff: broadcast_cols expects an N x 1 tensor");
  Matrix out(m.rows, cols);
  for (std::size_t i = 0; i < m.rows; ++i) std::fill(out.row(i).begin(), out.row(i).end(), m.data[i]);
  return a.tape()->push(Op::BroadcastCols, {a.id()}, std::move(out));
}

Value l2_norm_rows(Value a) {
  const Matrix& m = a.data();
  Matrix out(m.rows, 1);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (double v : m.row(i)) s += v * v;
    out.data[i] = std::sqrt(s);
  }
  return a.tape()->push(Op::L2NormRows, {a.id()}, std::move(out));
}

Value concat(std::span<const Value> parts) {
  require(!parts.empty(), "autodiff: concat of nothing");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  for (const Value& p : parts) {
    same_tape(parts.front(), p);
    require(p.rows() == rows, "autodiff: concat row mismatch");
    cols += p.cols();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Value& p : parts) {
    const Matrix& m = p.data();
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(m.row(i).begin(), m.row(i).end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(offset));
    offset += m.cols;
  }
  return parts.front().tape()->push(Op::Concat, std::move(ids), std::move(out));
}

Value concat(Value a, Value b) {
  const Value parts[] = {a, b};
  return concat(parts);
}

Value slice(Value a, std::size_t begin, std::size_t end) {
  const Matrix& m = a.data();
  require(begin < end && end <= m.cols, "autodiff: slice [" + std::to_string(begin) + "," + std::to_string(end) +
                                            ") out of range for " + shape_str(m));
  Matrix out(m.rows, end - begin);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = m(i, j);
  return a.tape()->push(Op::Slice, {a.id()}, std::move(out), static_cast<double>(begin),
                        static_cast<double>(end));
}

Value reshape(Value a, std::size_t rows, std::size_t cols) {
  const Matrix& m = a.data();
  require(rows * cols == m.size(), "autodiff: reshape " + shape_str(m) + " to " + std::to_string(rows) + "x" +
                                       std::to_string(cols));
  return a.tape()->push(Op::Reshape, {a.id()}, Matrix(rows, cols, m.data));
}

namespace {

// Gradients of a node's inputs given the adjoint g of its output, recorded as
// tape ops. Only inputs flagged in `needed` are computed.
std::vector<std::optional<Value>> backward(Tape& t, std::size_t id, Value g, const std::vector<bool>& needed) {
  // Copy what we need: pushing nodes may reallocate the node list.
  const Op op = t.node(id).op;
  const std::vector<std::size_t> in = t.node(id).inputs;
  const double p0 = t.node(id).p0;
  const double p1 = t.node(id).p1;
  const Value self(&t, id);
  auto input = [&](std::size_t k) { return Value(&t, in[k]); };
  auto in_scalar = [&](std::size_t k) { return is_scalar(t.node(in[k]).value); };

  std::vector<std::optional<Value>> out(in.size());
  switch (op) {
    case Op::Leaf:
      break;
    case Op::Add:
      if (needed[0]) out[0] = reduce_to(g, in_scalar(0));
      if (needed[1]) out[1] = reduce_to(g, in_scalar(1));
      break;
    case Op::Sub:
      if (needed[0]) out[0] = reduce_to(g, in_scalar(0));
      if (needed[1]) out[1] = reduce_to(scale(g, -1.0), in_scalar(1));
      break;
    case Op::Mul:
      if (needed[0]) out[0] = reduce_to(mul(g, input(1)), in_scalar(0));
      if (needed[1]) out[1] = reduce_to(mul(g, input(0)), in_scalar(1));
      break;
    case Op::Div:
      if (needed[0]) out[0] = reduce_to(div(g, input(1)), in_scalar(0));
      if (needed[1]) out[1] = reduce_to(scale(div(mul(g, self), input(1)), -1.0), in_scalar(1));
      break;
    case Op::Scale:
      out[0] = scale(g, p0);
      break;
    case Op::MatMul:
      if (needed[0]) out[0] = matmul(g, transpose(input(1)));
      if (needed[1]) out[1] = matmul(transpose(input(0)), g);
      break;
    case Op::Transpose:
      out[0] = transpose(g);
      break;
    case Op::AddBias:
      if (needed[0]) out[0] = g;
      if (needed[1]) out[1] = col_sums(g);
      break;
    case Op::Relu:
    case Op::LeakyRelu: {
      const double slope = op == Op::Relu ? 0.0 : p0;
      Matrix mask = unary(t.node(in[0]).value, [slope](double x) { return x > 0.0 ? 1.0 : slope; });
      out[0] = mul(g, constant_like(t, std::move(mask)));
      break;
    }
    case Op::Tanh:
      out[0] = mul(g, sub(t.scalar(1.0), mul(self, self)));
      break;
    case Op::Sigmoid:
      out[0] = mul(g, mul(self, sub(t.scalar(1.0), self)));
      break;
    case Op::Log:
      out[0] = div(g, input(0));
      break;
    case Op::Sqrt:
      out[0] = div(g, scale(self, 2.0));
      break;
    case Op::Abs: {
      Matrix sign = unary(t.node(in[0]).value, [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
      out[0] = mul(g, constant_like(t, std::move(sign)));
      break;
    }
    case Op::Clamp: {
      Matrix mask = unary(t.node(in[0]).value, [=](double x) { return (x >= p0 && x <= p1) ? 1.0 : 0.0; });
      out[0] = mul(g, constant_like(t, std::move(mask)));
      break;
    }
    case Op::Sum: {
      const Matrix& x = t.node(in[0]).value;
      out[0] = broadcast(g, x.rows, x.cols);
      break;
    }
    case Op::Mean: {
      const Matrix& x = t.node(in[0]).value;
      const std::size_t r = x.rows, c = x.cols;
      out[0] = broadcast(scale(g, 1.0 / static_cast<double>(r * c)), r, c);
      break;
    }
    case Op::RowSums:
      out[0] = broadcast_cols(g, t.node(in[0]).value.cols);
      break;
    case Op::ColSums:
      out[0] = broadcast_rows(g, t.node(in[0]).value.rows);
      break;
    case Op::Broadcast:
      out[0] = sum(g);
      break;
    case Op::BroadcastRows:
      out[0] = col_sums(g);
      break;
    case Op::BroadcastCols:
      out[0] = row_sums(g);
      break;
    case Op::L2NormRows: {
      const std::size_t cols = t.node(in[0]).value.cols;
      out[0] = mul(broadcast_cols(div(g, self), cols), input(0));
      break;
    }
    case Op::Concat: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < in.size(); ++k) {
        const std::size_t w = t.node(in[k]).value.cols;
        if (needed[k]) out[k] = slice(g, offset, offset + w);
        offset += w;
      }
      break;
    }
    case Op::Slice: {
      const Matrix& x = t.node(in[0]).value;
      const std::size_t rows = x.rows, cols = x.cols;
      const auto begin = static_cast<std::size_t>(p0);
      const auto end = static_cast<std::size_t>(p1);
      std::vector<Value> parts;
      if (begin > 0) parts.push_back(t.zeros(rows, begin));
      parts.push_back(g);
      if (end < cols) parts.push_back(t.zeros(rows, cols - end));
      out[0] = parts.size() == 1 ? g : concat(parts);
      break;
    }
    case Op::Reshape: {
      const Matrix& x = t.node(in[0]).value;
      out[0] = reshape(g, x.rows, x.cols);
      break;
    }
  }
  return out;
}

}  // namespace

Gradients grad(Value output, std::span<const Value> inputs, bool create_graph) {
  require(output.valid(), "grad: empty output");
  Tape& t = *output.tape();
  if (!is_scalar(output.data()))
    fail(ErrorKind::InvalidArgument, "grad: output must be scalar, got " + shape_str(output.data()));
  for (const Value& v : inputs) require(v.tape() == &t, "grad: input recorded on a different tape");

  const std::size_t top = output.id();
  // relevant[i]: node i lies on a path from some requested input.
  std::vector<bool> relevant(top + 1, false);
  for (const Value& v : inputs)
    if (v.id() <= top) relevant[v.id()] = true;
  for (std::size_t i = 0; i <= top; ++i) {
    if (relevant[i]) continue;
    for (std::size_t j : t.node(i).inputs) {
      if (relevant[j]) {
        relevant[i] = true;
        break;
      }
    }
  }

  std::vector<std::optional<Value>> adjoint(top + 1);
  if (relevant[top]) adjoint[top] = t.scalar(1.0);
  for (std::size_t i = top + 1; i-- > 0;) {
    if (!adjoint[i] || t.node(i).op == Op::Leaf) continue;
    const std::vector<std::size_t> in = t.node(i).inputs;
    std::vector<bool> needed(in.size());
    for (std::size_t k = 0; k < in.size(); ++k) needed[k] = relevant[in[k]];
    auto contributions = backward(t, i, *adjoint[i], needed);
    for (std::size_t k = 0; k < in.size(); ++k) {
      if (!needed[k] || !contributions[k]) continue;
      auto& slot = adjoint[in[k]];
      slot = slot ? add(*slot, *contributions[k]) : *contributions[k];
    }
  }

  Gradients result;
  for (const Value& v : inputs) {
    const auto& a = v.id() <= top ? adjoint[v.id()] : std::optional<Value>{};
    result.reached.push_back(a.has_value());
    if (!a) {
      result.values.push_back(t.zeros(v.rows(), v.cols()));
    } else if (create_graph) {
      result.values.push_back(*a);
    } else {
      result.values.push_back(t.leaf(a->data()));
    }
  }
  return result;
}

Matrix numeric_gradient(const ScalarFn& f, const Matrix& x, double eps) {
  Matrix out(x.rows, x.cols);
  Matrix probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe.data[i] = x.data[i] + eps;
    Tape tp;
    const double fp = f(tp, tp.leaf(probe)).item();
    probe.data[i] = x.data[i] - eps;
    Tape tm;
    const double fm = f(tm, tm.leaf(probe)).item();
    probe.data[i] = x.data[i];
    out.data[i] = (fp - fm) / (2.0 * eps);
  }
  return out;
}

double finite_diff_check(const ScalarFn& f, const Matrix& x, double eps) {
  Tape t;
  const Value xv = t.leaf(x);
  const Value y = f(t, xv);
  const Value inputs[] = {xv};
  const Matrix analytic = grad(y, inputs).values[0].data();
  const Matrix numeric = numeric_gradient(f, x, eps);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = analytic.data[i], n = numeric.data[i];
    worst = std::max(worst, std::fabs(a - n) / (std::fabs(a) + std::fabs(n) + 1e-12));
  }
  return worst;
}

}  // namespace ganlip::ad
