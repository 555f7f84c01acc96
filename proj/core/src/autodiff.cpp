#include "qseg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qseg/errors.hpp"

namespace qseg::ad {

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data_[0] = v;
  return t;
}

Tensor Tensor::vector(std::vector<double> values) {
  if (values.empty()) throw ShapeMismatch("tensor dimensions must be positive");
  Tensor t;
  t.rank_ = 1;
  t.dims_ = {values.size(), 1};
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::zeros(std::size_t n) { return vector(std::vector<double>(n, 0.0)); }

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return matrix(rows, cols, std::vector<double>(rows * cols, 0.0));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (rows == 0 || cols == 0) throw ShapeMismatch("tensor dimensions must be positive");
  if (values.size() != rows * cols) {
    throw ShapeMismatch("matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                        " given " + std::to_string(values.size()) + " values");
  }
  Tensor t;
  t.rank_ = 2;
  t.dims_ = {rows, cols};
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::from_shape(std::span<const std::size_t> shape, std::vector<double> values) {
  switch (shape.size()) {
    case 0:
      if (values.size() != 1) throw ShapeMismatch("scalar needs exactly one value");
      return scalar(values[0]);
    case 1:
      if (values.size() != shape[0]) throw ShapeMismatch("vector length does not match shape");
      return vector(std::move(values));
    case 2:
      return matrix(shape[0], shape[1], std::move(values));
    default:
      throw ShapeMismatch("tensors of rank > 2 are not supported");
  }
}

std::vector<std::size_t> Tensor::shape() const {
  return std::vector<std::size_t>(dims_.begin(), dims_.begin() + rank_);
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < rank_; ++i) {
    if (i) s += "x";
    s += std::to_string(dims_[i]);
  }
  return s + "]";
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

namespace {

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeMismatch(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                      b.shape_string());
}

void require_vector(const char* op, const Tensor& t) {
  if (t.rank() != 1) throw ShapeMismatch(std::string(op) + ": expected a vector, got " + t.shape_string());
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ShapeMismatch("variable does not belong to this tape");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Tensor& Tape::value(Var v) const {
  const Node& n = node(v);
  return n.ref ? *n.ref : n.value;
}

double Tape::scalar(Var v) const {
  const Tensor& t = value(v);
  if (t.size() != 1) throw NonScalarRoot("expected a scalar, got " + t.shape_string());
  return t[0];
}

void Tape::clear() {
  nodes_.clear();
  grads_.clear();
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::param(const Tensor& value, Tensor* grad) {
  if (grad && !grad->same_shape(value)) mismatch("param", value, *grad);
  Node n{.op = Op::kParam};
  n.ref = &value;
  n.sink = grad;
  n.needs_grad = grad != nullptr;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n{.op = Op::kConst};
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::unary(Op op, Var a, Tensor value) {
  Node n{.op = op};
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::matvec(Var m, Var v) {
  const Tensor& M = value(m);
  const Tensor& x = value(v);
  if (M.rank() != 2 || x.rank() != 1 || M.cols() != x.size()) mismatch("matvec", M, x);
  Tensor out = Tensor::zeros(M.rows());
  const double* pm = M.data();
  const double* px = x.data();
  for (std::size_t r = 0; r < M.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < M.cols(); ++c) acc += pm[r * M.cols() + c] * px[c];
    out[r] = acc;
  }
  Node n{.op = Op::kMatVec};
  n.a = m.id;
  n.b = v.id;
  n.needs_grad = node(m).needs_grad || node(v).needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::vecmat(Var v, Var m) {
  const Tensor& x = value(v);
  const Tensor& M = value(m);
  if (M.rank() != 2 || x.rank() != 1 || M.rows() != x.size()) mismatch("vecmat", x, M);
  Tensor out = Tensor::zeros(M.cols());
  for (std::size_t r = 0; r < M.rows(); ++r) {
    const double xr = x[r];
    for (std::size_t c = 0; c < M.cols(); ++c) out[c] += xr * M.at(r, c);
  }
  Node n{.op = Op::kVecMat};
  n.a = v.id;
  n.b = m.id;
  n.needs_grad = node(m).needs_grad || node(v).needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

namespace {

template <typename F>
Tensor zip(const char* op, const Tensor& a, const Tensor& b, F f) {
  if (!a.same_shape(b)) mismatch(op, a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out = a;
  for (double& x : out.values()) x = f(x);
  return out;
}

}  // namespace

Var Tape::add(Var a, Var b) {
  Node n{.op = Op::kAdd};
  n.value = zip("add", value(a), value(b), [](double x, double y) { return x + y; });
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  Node n{.op = Op::kSub};
  n.value = zip("sub", value(a), value(b), [](double x, double y) { return x - y; });
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  Node n{.op = Op::kMul};
  n.value = zip("mul", value(a), value(b), [](double x, double y) { return x * y; });
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

Var Tape::scale(Var a, double k) {
  Var out = unary(Op::kScale, a, map(value(a), [k](double x) { return k * x; }));
  nodes_.back().k = k;
  return out;
}

Var Tape::tanh(Var a) {
  return unary(Op::kTanh, a, map(value(a), [](double x) { return std::tanh(x); }));
}

Var Tape::sigmoid(Var a) { return unary(Op::kSigmoid, a, map(value(a), stable_sigmoid)); }

Var Tape::exp(Var a) {
  return unary(Op::kExp, a, map(value(a), [](double x) { return std::exp(x); }));
}

Var Tape::log(Var a) {
  return unary(Op::kLog, a, map(value(a), [](double x) { return std::log(x); }));
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeMismatch("concat: no inputs");
  std::vector<double> out;
  Node n{.op = Op::kConcat};
  for (Var p : parts) {
    const Tensor& t = value(p);
    if (t.rank() > 1) throw ShapeMismatch("concat: expected scalars or vectors, got " + t.shape_string());
    out.insert(out.end(), t.values().begin(), t.values().end());
    n.inputs.push_back(p.id);
    n.needs_grad = n.needs_grad || node(p).needs_grad;
  }
  n.value = Tensor::vector(std::move(out));
  return push(std::move(n));
}

Var Tape::stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ShapeMismatch("stack_rows: no inputs");
  const Tensor& first = value(rows[0]);
  require_vector("stack_rows", first);
  std::vector<double> out;
  out.reserve(rows.size() * first.size());
  Node n{.op = Op::kStackRows};
  for (Var r : rows) {
    const Tensor& t = value(r);
    if (!t.same_shape(first)) mismatch("stack_rows", first, t);
    out.insert(out.end(), t.values().begin(), t.values().end());
    n.inputs.push_back(r.id);
    n.needs_grad = n.needs_grad || node(r).needs_grad;
  }
  n.value = Tensor::matrix(rows.size(), first.size(), std::move(out));
  return push(std::move(n));
}

Var Tape::mean_rows(Var m) {
  const Tensor& M = value(m);
  if (M.rank() != 2) throw ShapeMismatch("mean_rows: expected a matrix, got " + M.shape_string());
  Tensor out = Tensor::zeros(M.cols());
  for (std::size_t r = 0; r < M.rows(); ++r) {
    for (std::size_t c = 0; c < M.cols(); ++c) out[c] += M.at(r, c);
  }
  const double inv = 1.0 / static_cast<double>(M.rows());
  for (double& x : out.values()) x *= inv;
  return unary(Op::kMeanRows, m, std::move(out));
}

Var Tape::softmax(Var v) {
  const Tensor& x = value(v);
  require_vector("softmax", x);
  const double mx = *std::max_element(x.values().begin(), x.values().end());
  Tensor out = x;
  double z = 0.0;
  for (double& e : out.values()) {
    e = std::exp(e - mx);
    z += e;
  }
  for (double& e : out.values()) e /= z;
  return unary(Op::kSoftmax, v, std::move(out));
}

Var Tape::logsumexp(Var v) {
  const Tensor& x = value(v);
  const double mx = *std::max_element(x.values().begin(), x.values().end());
  double z = 0.0;
  if (std::isinf(mx)) return unary(Op::kLogSumExp, v, Tensor::scalar(mx));
  for (double e : x.values()) z += std::exp(e - mx);
  return unary(Op::kLogSumExp, v, Tensor::scalar(mx + std::log(z)));
}

Var Tape::lookup_row(Var m, std::size_t row) {
  const Tensor& M = value(m);
  if (M.rank() != 2 || row >= M.rows()) {
    throw ShapeMismatch("lookup_row: row " + std::to_string(row) + " out of range for " +
                        M.shape_string());
  }
  std::vector<double> out(M.data() + row * M.cols(), M.data() + (row + 1) * M.cols());
  Var r = unary(Op::kLookupRow, m, Tensor::vector(std::move(out)));
  nodes_.back().index = {row};
  return r;
}

Var Tape::gather(Var v, std::span<const std::size_t> indices) {
  const Tensor& x = value(v);
  if (indices.empty()) throw ShapeMismatch("gather: no indices");
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= x.size()) throw ShapeMismatch("gather: index out of range for " + x.shape_string());
    out.push_back(x[i]);
  }
  Var r = unary(Op::kGather, v, Tensor::vector(std::move(out)));
  nodes_.back().index.assign(indices.begin(), indices.end());
  return r;
}

Var Tape::sum(Var v) {
  double s = 0.0;
  for (double x : value(v).values()) s += x;
  return unary(Op::kSum, v, Tensor::scalar(s));
}

Var Tape::dot(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!x.same_shape(y)) mismatch("dot", x, y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  Node n{.op = Op::kDot};
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

double* Tape::grad_buffer(std::int32_t id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.needs_grad) return nullptr;
  if (n.op == Op::kParam) return n.sink->data();
  auto& g = grads_[static_cast<std::size_t>(id)];
  if (g.empty()) g.assign(n.value.size(), 0.0);
  return g.data();
}

void Tape::backward(Var root) {
  const Tensor& r = value(root);
  if (r.size() != 1 || r.rank() > 1) throw NonScalarRoot("backward root must be a scalar, got " + r.shape_string());
  grads_.assign(nodes_.size(), {});
  if (!node(root).needs_grad) return;
  if (nodes_[root.id].op == Op::kParam) {
    nodes_[root.id].sink->data()[0] += 1.0;
    return;
  }
  grad_buffer(root.id)[0] = 1.0;

  for (std::int32_t id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.op == Op::kParam || n.op == Op::kConst) continue;
    auto& gvec = grads_[static_cast<std::size_t>(id)];
    if (gvec.empty()) continue;
    const double* g = gvec.data();
    const Tensor& out = n.value;

    switch (n.op) {
      case Op::kMatVec: {
        const Tensor& M = value(Var{n.a});
        const Tensor& x = value(Var{n.b});
        if (double* gm = grad_buffer(n.a)) {
          for (std::size_t i = 0; i < M.rows(); ++i) {
            for (std::size_t j = 0; j < M.cols(); ++j) gm[i * M.cols() + j] += g[i] * x[j];
          }
        }
        if (double* gx = grad_buffer(n.b)) {
          for (std::size_t i = 0; i < M.rows(); ++i) {
            for (std::size_t j = 0; j < M.cols(); ++j) gx[j] += M.at(i, j) * g[i];
          }
        }
        break;
      }
      case Op::kVecMat: {
        const Tensor& x = value(Var{n.a});
        const Tensor& M = value(Var{n.b});
        if (double* gx = grad_buffer(n.a)) {
          for (std::size_t i = 0; i < M.rows(); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < M.cols(); ++j) acc += M.at(i, j) * g[j];
            gx[i] += acc;
          }
        }
        if (double* gm = grad_buffer(n.b)) {
          for (std::size_t i = 0; i < M.rows(); ++i) {
            for (std::size_t j = 0; j < M.cols(); ++j) gm[i * M.cols() + j] += x[i] * g[j];
          }
        }
        break;
      }
      case Op::kAdd:
      case Op::kSub: {
        const double sign = n.op == Op::kAdd ? 1.0 : -1.0;
        if (double* ga = grad_buffer(n.a)) {
          for (std::size_t i = 0; i < out.size(); ++i) ga[i] += g[i];
        }
        if (double* gb = grad_buffer(n.b)) {
          for (std::size_t i = 0; i < out.size(); ++i) gb[i] += sign * g[i];
        }
        break;
      }
      case Op::kMul: {
        const Tensor& x = value(Var{n.a});
        const Tensor& y = value(Var{n.b});
        if (double* ga = grad_buffer(n.a)) {
          for (std::size_t i = 0; i < out.size(); ++i) ga[i] += g[i] * y[i];
        }
        if (double* gb = grad_buffer(n.b)) {
          for (std::size_t i = 0; i < out.size(); ++i) gb[i] += g[i] * x[i];
        }
        break;
      }
      case Op::kScale: {
        if (double* ga = grad_buffer(n.a)) {
          for (std::size_t i = 0; i < out.size(); ++i) ga[i] += n.k * g[i];
        }
        break;
      }
      case Op::kTanh: {
        if (double* ga = grad_buffer(n.a)) {
          for (std::size_t i = 0; i < out.size(); ++i) ga[i] += g[i] * (1.0 - out[i] * out[i]);
        }
        break;
      }
      case Op::kSigmoid: {
        if (double* ga = grad_buffer(n.a)) {
          for (std::size_t i = 0; i < out.size(); ++i) ga[i] += g[i] * out[i] * (1.0 - out[i]);
        }
        break;
      }
      case Op::kExp: {
        if (double* ga = grad_buffer(n.a)) {
          for (std::size_t i = 0; i < out.size(); ++i) ga[i] += g[i] * out[i];
        }
        break;
      }
      case Op::kLog: {
        const Tensor& x = value(Var{n.a});
        if (double* ga = grad_buffer(n.a)) {
          for (std::size_t i = 0; i < out.size(); ++i) ga[i] += g[i] / x[i];
        }
        break;
      }
      case Op::kConcat: {
        std::size_t off = 0;
        for (std::int32_t in : n.inputs) {
          const std::size_t len = value(Var{in}).size();
          if (double* gi = grad_buffer(in)) {
            for (std::size_t i = 0; i < len; ++i) gi[i] += g[off + i];
          }
          off += len;
        }
        break;
      }
      case Op::kStackRows: {
        const std::size_t cols = out.cols();
        for (std::size_t r = 0; r < n.inputs.size(); ++r) {
          if (double* gi = grad_buffer(n.inputs[r])) {
            for (std::size_t c = 0; c < cols; ++c) gi[c] += g[r * cols + c];
          }
        }
        break;
      }
      case Op::kMeanRows: {
        const Tensor& M = value(Var{n.a});
        if (double* gm = grad_buffer(n.a)) {
          const double inv = 1.0 / static_cast<double>(M.rows());
          for (std::size_t r = 0; r < M.rows(); ++r) {
            for (std::size_t c = 0; c < M.cols(); ++c) gm[r * M.cols() + c] += g[c] * inv;
          }
        }
        break;
      }
      case Op::kSoftmax: {
        if (double* ga = grad_buffer(n.a)) {
          double gy = 0.0;
          for (std::size_t i = 0; i < out.size(); ++i) gy += g[i] * out[i];
          for (std::size_t i = 0; i < out.size(); ++i) ga[i] += out[i] * (g[i] - gy);
        }
        break;
      }
      case Op::kLogSumExp: {
        const Tensor& x = value(Var{n.a});
        if (double* ga = grad_buffer(n.a)) {
          if (std::isinf(out[0])) break;
          for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[0] * std::exp(x[i] - out[0]);
        }
        break;
      }
      case Op::kLookupRow: {
        const Tensor& M = value(Var{n.a});
        if (double* gm = grad_buffer(n.a)) {
          double* row = gm + n.index[0] * M.cols();
          for (std::size_t c = 0; c < M.cols(); ++c) row[c] += g[c];
        }
        break;
      }
      case Op::kGather: {
        if (double* ga = grad_buffer(n.a)) {
          for (std::size_t i = 0; i < n.index.size(); ++i) ga[n.index[i]] += g[i];
        }
        break;
      }
      case Op::kSum: {
        const std::size_t len = value(Var{n.a}).size();
        if (double* ga = grad_buffer(n.a)) {
          for (std::size_t i = 0; i < len; ++i) ga[i] += g[0];
        }
        break;
      }
      case Op::kDot: {
        const Tensor& x = value(Var{n.a});
        const Tensor& y = value(Var{n.b});
        if (double* ga = grad_buffer(n.a)) {
          for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[0] * y[i];
        }
        if (double* gb = grad_buffer(n.b)) {
          for (std::size_t i = 0; i < x.size(); ++i) gb[i] += g[0] * x[i];
        }
        break;
      }
      case Op::kParam:
      case Op::kConst:
        break;
    }
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = node(v);
  Tensor out = value(v);
  out.fill(0.0);
  if (n.op == Op::kParam) {
    if (n.sink) out = *n.sink;
    return out;
  }
  const auto& g = grads_.size() > static_cast<std::size_t>(v.id) ? grads_[v.id] : std::vector<double>{};
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i];
  return out;
}

LstmState lstm_cell(Tape& tape, const LstmVars& p, Var x, const LstmState& prev) {
  const Var xh = tape.concat({x, prev.h});
  const Var i = tape.sigmoid(tape.add(tape.matvec(p.w_i, xh), p.b_i));
  const Var f = tape.sigmoid(tape.add(tape.matvec(p.w_f, xh), p.b_f));
  const Var o = tape.sigmoid(tape.add(tape.matvec(p.w_o, xh), p.b_o));
  const Var cand = tape.tanh(tape.add(tape.matvec(p.w_c, xh), p.b_c));
  const Var c = tape.add(tape.mul(f, prev.c), tape.mul(i, cand));
  const Var h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

}  // namespace qseg::ad
