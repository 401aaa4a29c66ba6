#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "memotr/errors.hpp"

namespace memotr {

/// Dense row-major matrix of doubles. Vectors are 1×n (row) or n×1 (column).
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor2 identity(std::size_t n);
  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor2 row_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::size_t rows(const Tensor2& t) { return t.rows(); }
inline std::size_t cols(const Tensor2& t) { return t.cols(); }

// Plain (untaped) operations. All throw ShapeError on non-conformable input
// and NumericError if a result is not finite.
//
// add/sub/mul accept either equal shapes or a broadcast operand `b` that is a
// 1×cols row vector or a rows×1 column vector.
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
Tensor2 transpose(const Tensor2& a);
Tensor2 add(const Tensor2& a, const Tensor2& b);
Tensor2 sub(const Tensor2& a, const Tensor2& b);
Tensor2 mul(const Tensor2& a, const Tensor2& b);
Tensor2 scale(const Tensor2& a, double s);
Tensor2 sigmoid(const Tensor2& a);
Tensor2 relu(const Tensor2& a);
Tensor2 softmax_rows(const Tensor2& a);
Tensor2 concat_cols(std::span<const Tensor2> parts);
Tensor2 concat_rows(std::span<const Tensor2> parts);
Tensor2 slice_cols(const Tensor2& a, std::size_t begin, std::size_t count);
Tensor2 slice_rows(const Tensor2& a, std::size_t begin, std::size_t count);
Tensor2 mean_rows(const Tensor2& a);  // 1×cols column means
Tensor2 sum(const Tensor2& a);        // 1×1

inline Tensor2 make_constant(const Tensor2& /*like*/, Tensor2 value) { return value; }

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor2& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape* tape() const noexcept { return tape_; }
  std::size_t index() const noexcept { return index_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

inline std::size_t rows(const Var& v) { return v.rows(); }
inline std::size_t cols(const Var& v) { return v.cols(); }

/// Reverse-mode recording of the op set above. Nodes are appended in
/// evaluation order, so reverse index order is a reverse topological order.
/// A tape must stay confined to one thread.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor2& out_adjoint)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(Tensor2 value);
  Var constant(Tensor2 value) { return variable(std::move(value)); }

  /// Seeds d(output)=1 for a 1×1 output and propagates. Returns the number of
  /// nodes whose backward rule ran (each at most once).
  std::size_t backward(const Var& output);

  /// Adjoint of `v` after backward(); a zero tensor of v's shape if untouched.
  Tensor2 gradient(const Var& v) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor2& value(std::size_t index) const { return nodes_.at(index).value; }

  // Used by op implementations.
  Var record(Tensor2 value, Backward backward);
  void accumulate(std::size_t index, const Tensor2& delta);

 private:
  struct Node {
    Tensor2 value;
    Tensor2 adjoint;  // empty until touched
    Backward backward;
  };
  std::deque<Node> nodes_;
};

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var softmax_rows(const Var& a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, std::size_t begin, std::size_t count);
Var slice_rows(const Var& a, std::size_t begin, std::size_t count);
Var mean_rows(const Var& a);
Var sum(const Var& a);

Var make_constant(const Var& like, Tensor2 value);

/// Scalar function of several taped inputs. Must return a 1×1 Var on `tape`.
using TapedFunction = std::function<Var(Tape& tape, std::span<const Var> inputs)>;

/// Both error measures of an analytic gradient against central differences.
/// entrywise: max over components of |a − n| / (|a| + 1e-12).
/// normwise: per input, max |a − n| / max(|a|, |n|); worst input. Stays
/// meaningful when some components sit near the finite-difference noise floor.
struct GradReport {
  double entrywise = 0.0;
  double normwise = 0.0;
};

GradReport grad_report(const TapedFunction& f, std::span<const Tensor2> inputs, double eps);

/// Entrywise measure of grad_report. Throws NumericError on non-finite
/// evaluations.
double grad_check(const TapedFunction& f, std::span<const Tensor2> inputs, double eps);
double grad_check(const std::function<Var(Tape&, const Var&)>& f, const Tensor2& x, double eps);

}  // namespace memotr
