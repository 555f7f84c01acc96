#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

// Small reverse-mode differentiation engine over dense double tensors of rank
// 0 (scalar), 1 (vector) or 2 (row-major matrix).
namespace qseg::ad {

class Tensor {
 public:
  Tensor() = default;
  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> values);
  static Tensor zeros(std::size_t n);
  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  // Builds from a dimension list of length 0..2.
  static Tensor from_shape(std::span<const std::size_t> shape, std::vector<double> values);

  std::size_t rank() const { return rank_; }
  std::size_t rows() const { return dims_[0]; }
  std::size_t cols() const { return dims_[1]; }
  std::vector<std::size_t> shape() const;
  std::string shape_string() const;
  bool same_shape(const Tensor& o) const { return rank_ == o.rank_ && dims_ == o.dims_; }

  std::size_t size() const { return data_.size(); }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * dims_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * dims_[1] + c]; }

  void fill(double v);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::uint8_t rank_ = 0;
  std::array<std::size_t, 2> dims_{1, 1};
  std::vector<double> data_{0.0};
};

struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Append-only record of a computation. Inputs of a node always precede it.
// Parameters enter as leaves that point at caller-owned storage; backward()
// accumulates into their gradient sinks. A tape is single-threaded; use one
// per worker.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // `value` (and `grad`, if given) must outlive the tape. A null grad makes
  // the leaf a constant.
  Var param(const Tensor& value, Tensor* grad = nullptr);
  Var constant(Tensor value);

  const Tensor& value(Var v) const;
  double scalar(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  void clear();

  Var matvec(Var m, Var v);  // M v
  Var vecmat(Var v, Var m);  // v^T M
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double k);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var log(Var a);
  // Scalars and vectors, joined into one vector.
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts)); }
  // Equal-length vectors as rows of a matrix.
  Var stack_rows(std::span<const Var> rows);
  Var mean_rows(Var m);
  Var softmax(Var v);
  Var logsumexp(Var v);
  Var lookup_row(Var m, std::size_t row);
  Var gather(Var v, std::span<const std::size_t> indices);
  Var gather(Var v, std::initializer_list<std::size_t> indices) {
    return gather(v, std::span<const std::size_t>(indices));
  }
  Var sum(Var v);
  Var dot(Var a, Var b);

  // Reverse sweep from a scalar root. Throws NonScalarRoot otherwise.
  void backward(Var root);
  // Gradient of an intermediate node after backward(); zeros if unreached.
  Tensor grad(Var v) const;

 private:
  enum class Op : std::uint8_t {
    kParam, kConst, kMatVec, kVecMat, kAdd, kSub, kMul, kScale, kTanh, kSigmoid, kExp, kLog,
    kConcat, kStackRows, kMeanRows, kSoftmax, kLogSumExp, kLookupRow, kGather, kSum, kDot,
  };

  struct Node {
    Op op;
    bool needs_grad = false;
    std::int32_t a = -1;
    std::int32_t b = -1;
    double k = 0.0;
    std::vector<std::int32_t> inputs{};  // concat / stack_rows
    std::vector<std::size_t> index{};   // gather
    Tensor value{};
    const Tensor* ref = nullptr;  // param leaves
    Tensor* sink = nullptr;
  };

  const Node& node(Var v) const;
  Var push(Node n);
  Var unary(Op op, Var a, Tensor value);
  double* grad_buffer(std::int32_t id);

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

struct LstmVars {
  Var w_i, w_f, w_o, w_c;  // hidden x (input + hidden)
  Var b_i, b_f, b_o, b_c;  // hidden
};

struct LstmState {
  Var h;
  Var c;
};

// Standard LSTM step on [x; h_prev].
LstmState lstm_cell(Tape& tape, const LstmVars& p, Var x, const LstmState& prev);

}  // namespace qseg::ad
