#include "memotr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace memotr {

namespace {

std::string shape_str(const Tensor2& t) {
  std::ostringstream os;
  os << t.rows() << "x" << t.cols();
  return os.str();
}

void require_finite(const Tensor2& t, const char* op) {
  if (!t.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite result");
  }
}

enum class Broadcast { same, row, col };

Broadcast broadcast_kind(const Tensor2& a, const Tensor2& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::same;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::col;
  throw ShapeError(std::string(op) + ": cannot combine " + shape_str(a) + " with " + shape_str(b));
}

double at_broadcast(const Tensor2& b, Broadcast kind, std::size_t r, std::size_t c) {
  switch (kind) {
    case Broadcast::same:
      return b(r, c);
    case Broadcast::row:
      return b(0, c);
    case Broadcast::col:
      return b(r, 0);
  }
  return 0.0;
}

// Sums a full-shape adjoint down to the broadcast operand's shape.
Tensor2 reduce_to(const Tensor2& full, Broadcast kind) {
  if (kind == Broadcast::same) return full;
  if (kind == Broadcast::row) {
    Tensor2 out(1, full.cols());
    for (std::size_t r = 0; r < full.rows(); ++r)
      for (std::size_t c = 0; c < full.cols(); ++c) out(0, c) += full(r, c);
    return out;
  }
  Tensor2 out(full.rows(), 1);
  for (std::size_t r = 0; r < full.rows(); ++r)
    for (std::size_t c = 0; c < full.cols(); ++c) out(r, 0) += full(r, c);
  return out;
}

template <class F>
Tensor2 zip(const Tensor2& a, const Tensor2& b, Broadcast kind, F f) {
  Tensor2 out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = f(a(r, c), at_broadcast(b, kind, r, c));
  return out;
}

template <class F>
Tensor2 map(const Tensor2& a, F f) {
  Tensor2 out = a;
  for (double& v : out.values()) v = f(v);
  return out;
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("Tensor2: " + std::to_string(data_.size()) + " values for " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(n * m);
  for (const auto& r : rows) {
    if (r.size() != m) throw ShapeError("from_rows: ragged rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor2(n, m, std::move(values));
}

Tensor2 Tensor2::row_vector(std::span<const double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

bool Tensor2::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a) + " x " + shape_str(b));
  }
  Tensor2 out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  require_finite(out, "matmul");
  return out;
}

Tensor2 transpose(const Tensor2& a) {
  Tensor2 out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  return out;
}

Tensor2 add(const Tensor2& a, const Tensor2& b) {
  Tensor2 out = zip(a, b, broadcast_kind(a, b, "add"), [](double x, double y) { return x + y; });
  require_finite(out, "add");
  return out;
}

Tensor2 sub(const Tensor2& a, const Tensor2& b) {
  Tensor2 out = zip(a, b, broadcast_kind(a, b, "sub"), [](double x, double y) { return x - y; });
  require_finite(out, "sub");
  return out;
}

Tensor2 mul(const Tensor2& a, const Tensor2& b) {
  Tensor2 out = zip(a, b, broadcast_kind(a, b, "mul"), [](double x, double y) { return x * y; });
  require_finite(out, "mul");
  return out;
}

Tensor2 scale(const Tensor2& a, double s) {
  Tensor2 out = map(a, [s](double v) { return v * s; });
  require_finite(out, "scale");
  return out;
}

Tensor2 sigmoid(const Tensor2& a) { return map(a, sigmoid_scalar); }

Tensor2 relu(const Tensor2& a) {
  return map(a, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor2 softmax_rows(const Tensor2& a) {
  Tensor2 out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto in = a.row(r);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    auto o = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (double& v : o) v /= total;
  }
  require_finite(out, "softmax_rows");
  return out;
}

Tensor2 concat_cols(std::span<const Tensor2> parts) {
  if (parts.empty()) return {};
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != n) throw ShapeError("concat_cols: row mismatch");
    total += p.cols();
  }
  Tensor2 out(n, total);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t offset = 0;
    for (const auto& p : parts) {
      std::copy(p.row(r).begin(), p.row(r).end(), out.row(r).begin() + offset);
      offset += p.cols();
    }
  }
  return out;
}

Tensor2 concat_rows(std::span<const Tensor2> parts) {
  if (parts.empty()) return {};
  std::size_t m = 0;
  bool have_width = false;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() == 0) continue;
    if (have_width && p.cols() != m) throw ShapeError("concat_rows: column mismatch");
    m = p.cols();
    have_width = true;
    total += p.rows();
  }
  if (!have_width) m = parts.front().cols();
  std::vector<double> values;
  values.reserve(total * m);
  for (const auto& p : parts) values.insert(values.end(), p.values().begin(), p.values().end());
  return Tensor2(total, m, std::move(values));
}

Tensor2 slice_cols(const Tensor2& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) throw ShapeError("slice_cols: out of range");
  Tensor2 out(a.rows(), count);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = a(r, begin + c);
  return out;
}

Tensor2 slice_rows(const Tensor2& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.rows()) throw ShapeError("slice_rows: out of range");
  Tensor2 out(count, a.cols());
  for (std::size_t r = 0; r < count; ++r)
    std::copy(a.row(begin + r).begin(), a.row(begin + r).end(), out.row(r).begin());
  return out;
}

Tensor2 mean_rows(const Tensor2& a) {
  Tensor2 out(1, a.cols());
  if (a.rows() == 0) return out;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(0, c) += a(r, c);
  return scale(out, 1.0 / static_cast<double>(a.rows()));
}

Tensor2 sum(const Tensor2& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  Tensor2 out(1, 1, total);
  require_finite(out, "sum");
  return out;
}

// ---------------------------------------------------------------------------
// Tape

const Tensor2& Var::value() const {
  if (tape_ == nullptr) throw StateError("Var: not attached to a tape");
  return tape_->value(index_);
}

Var Tape::variable(Tensor2 value) { return record(std::move(value), nullptr); }

Var Tape::record(Tensor2 value, Backward backward) {
  nodes_.push_back(Node{std::move(value), Tensor2{}, std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t index, const Tensor2& delta) {
  Node& node = nodes_.at(index);
  if (node.adjoint.rows() != node.value.rows() || node.adjoint.cols() != node.value.cols()) {
    node.adjoint = Tensor2(node.value.rows(), node.value.cols());
  }
  auto dst = node.adjoint.values();
  auto src = delta.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

std::size_t Tape::backward(const Var& output) {
  if (output.tape() != this) throw StateError("backward: output belongs to another tape");
  const Tensor2& out = nodes_.at(output.index()).value;
  if (out.rows() != 1 || out.cols() != 1) throw ShapeError("backward: output must be 1x1");
  for (auto& n : nodes_) n.adjoint = Tensor2{};
  accumulate(output.index(), Tensor2(1, 1, 1.0));

  std::size_t visited = 0;
  for (std::size_t i = output.index() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.adjoint.empty() || !node.backward) continue;
    // Copy: the rule may accumulate into earlier nodes only, but keep the
    // adjoint stable regardless.
    const Tensor2 adj = node.adjoint;
    node.backward(*this, adj);
    ++visited;
  }
  return visited;
}

Tensor2 Tape::gradient(const Var& v) const {
  const Node& node = nodes_.at(v.index());
  if (node.adjoint.empty()) return Tensor2(node.value.rows(), node.value.cols());
  return node.adjoint;
}

namespace {

Tape& same_tape(const Var& a, const Var& b, const char* op) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw StateError(std::string(op) + ": operands on different tapes");
  }
  return *a.tape();
}

Tape& tape_of(const Var& a, const char* op) {
  if (a.tape() == nullptr) throw StateError(std::string(op) + ": detached operand");
  return *a.tape();
}

}  // namespace

Var make_constant(const Var& like, Tensor2 value) {
  return tape_of(like, "make_constant").constant(std::move(value));
}

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "matmul");
  const std::size_t ia = a.index(), ib = b.index();
  return t.record(matmul(a.value(), b.value()), [ia, ib](Tape& tp, const Tensor2& g) {
    tp.accumulate(ia, matmul(g, transpose(tp.value(ib))));
    tp.accumulate(ib, matmul(transpose(tp.value(ia)), g));
  });
}

Var transpose(const Var& a) {
  Tape& t = tape_of(a, "transpose");
  const std::size_t ia = a.index();
  return t.record(transpose(a.value()),
                  [ia](Tape& tp, const Tensor2& g) { tp.accumulate(ia, transpose(g)); });
}

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "add");
  const auto kind = broadcast_kind(a.value(), b.value(), "add");
  const std::size_t ia = a.index(), ib = b.index();
  return t.record(add(a.value(), b.value()), [ia, ib, kind](Tape& tp, const Tensor2& g) {
    tp.accumulate(ia, g);
    tp.accumulate(ib, reduce_to(g, kind));
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "sub");
  const auto kind = broadcast_kind(a.value(), b.value(), "sub");
  const std::size_t ia = a.index(), ib = b.index();
  return t.record(sub(a.value(), b.value()), [ia, ib, kind](Tape& tp, const Tensor2& g) {
    tp.accumulate(ia, g);
    tp.accumulate(ib, reduce_to(scale(g, -1.0), kind));
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "mul");
  const auto kind = broadcast_kind(a.value(), b.value(), "mul");
  const std::size_t ia = a.index(), ib = b.index();
  return t.record(mul(a.value(), b.value()), [ia, ib, kind](Tape& tp, const Tensor2& g) {
    const Tensor2& av = tp.value(ia);
    const Tensor2& bv = tp.value(ib);
    tp.accumulate(ia, zip(g, bv, kind, [](double x, double y) { return x * y; }));
    tp.accumulate(ib, reduce_to(mul(g, av), kind));
  });
}

Var scale(const Var& a, double s) {
  Tape& t = tape_of(a, "scale");
  const std::size_t ia = a.index();
  return t.record(scale(a.value(), s),
                  [ia, s](Tape& tp, const Tensor2& g) { tp.accumulate(ia, scale(g, s)); });
}

Var sigmoid(const Var& a) {
  Tape& t = tape_of(a, "sigmoid");
  const std::size_t ia = a.index();
  Tensor2 y = sigmoid(a.value());
  return t.record(y, [ia, y](Tape& tp, const Tensor2& g) {
    Tensor2 d = g;
    auto dv = d.values();
    auto yv = y.values();
    for (std::size_t i = 0; i < dv.size(); ++i) dv[i] *= yv[i] * (1.0 - yv[i]);
    tp.accumulate(ia, d);
  });
}

Var relu(const Var& a) {
  Tape& t = tape_of(a, "relu");
  const std::size_t ia = a.index();
  return t.record(relu(a.value()), [ia](Tape& tp, const Tensor2& g) {
    Tensor2 d = g;
    auto dv = d.values();
    auto xv = tp.value(ia).values();
    for (std::size_t i = 0; i < dv.size(); ++i)
      if (!(xv[i] > 0.0)) dv[i] = 0.0;
    tp.accumulate(ia, d);
  });
}

Var softmax_rows(const Var& a) {
  Tape& t = tape_of(a, "softmax_rows");
  const std::size_t ia = a.index();
  Tensor2 y = softmax_rows(a.value());
  return t.record(y, [ia, y](Tape& tp, const Tensor2& g) {
    Tensor2 d(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) d(r, c) = y(r, c) * (g(r, c) - dot);
    }
    tp.accumulate(ia, d);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  Tape& t = tape_of(parts.front(), "concat_cols");
  std::vector<Tensor2> values;
  std::vector<std::size_t> ids, widths;
  for (const auto& p : parts) {
    if (p.tape() != &t) throw StateError("concat_cols: operands on different tapes");
    values.push_back(p.value());
    ids.push_back(p.index());
    widths.push_back(p.cols());
  }
  return t.record(concat_cols(values), [ids, widths](Tape& tp, const Tensor2& g) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      tp.accumulate(ids[i], slice_cols(g, offset, widths[i]));
      offset += widths[i];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Tape& t = tape_of(parts.front(), "concat_rows");
  std::vector<Tensor2> values;
  std::vector<std::size_t> ids, heights;
  for (const auto& p : parts) {
    if (p.tape() != &t) throw StateError("concat_rows: operands on different tapes");
    values.push_back(p.value());
    ids.push_back(p.index());
    heights.push_back(p.rows());
  }
  return t.record(concat_rows(values), [ids, heights](Tape& tp, const Tensor2& g) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      tp.accumulate(ids[i], slice_rows(g, offset, heights[i]));
      offset += heights[i];
    }
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
  Tape& t = tape_of(a, "slice_cols");
  const std::size_t ia = a.index();
  const std::size_t rows = a.rows(), cols = a.cols();
  return t.record(slice_cols(a.value(), begin, count),
                  [ia, rows, cols, begin, count](Tape& tp, const Tensor2& g) {
                    Tensor2 d(rows, cols);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t c = 0; c < count; ++c) d(r, begin + c) = g(r, c);
                    tp.accumulate(ia, d);
                  });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  Tape& t = tape_of(a, "slice_rows");
  const std::size_t ia = a.index();
  const std::size_t rows = a.rows(), cols = a.cols();
  return t.record(slice_rows(a.value(), begin, count),
                  [ia, rows, cols, begin, count](Tape& tp, const Tensor2& g) {
                    Tensor2 d(rows, cols);
                    for (std::size_t r = 0; r < count; ++r)
                      for (std::size_t c = 0; c < cols; ++c) d(begin + r, c) = g(r, c);
                    tp.accumulate(ia, d);
                  });
}

Var mean_rows(const Var& a) {
  Tape& t = tape_of(a, "mean_rows");
  const std::size_t ia = a.index();
  const std::size_t rows = a.rows(), cols = a.cols();
  return t.record(mean_rows(a.value()), [ia, rows, cols](Tape& tp, const Tensor2& g) {
    Tensor2 d(rows, cols);
    const double inv = rows == 0 ? 0.0 : 1.0 / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) d(r, c) = g(0, c) * inv;
    tp.accumulate(ia, d);
  });
}

Var sum(const Var& a) {
  Tape& t = tape_of(a, "sum");
  const std::size_t ia = a.index();
  const std::size_t rows = a.rows(), cols = a.cols();
  return t.record(sum(a.value()), [ia, rows, cols](Tape& tp, const Tensor2& g) {
    tp.accumulate(ia, Tensor2(rows, cols, g(0, 0)));
  });
}

// ---------------------------------------------------------------------------
// Gradient checking

namespace {

double evaluate(const TapedFunction& f, std::span<const Tensor2> inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& x : inputs) vars.push_back(tape.variable(x));
  const Var out = f(tape, vars);
  if (out.rows() != 1 || out.cols() != 1) throw ShapeError("grad_check: f must return 1x1");
  const double v = out.value()(0, 0);
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
  return v;
}

}  // namespace

GradReport grad_report(const TapedFunction& f, std::span<const Tensor2> inputs, double eps) {
  if (!(eps > 0.0)) throw NumericError("grad_check: eps must be positive");
  std::vector<Tensor2> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : inputs) vars.push_back(tape.variable(x));
    const Var out = f(tape, vars);
    if (!out.value().all_finite()) throw NumericError("grad_check: non-finite function value");
    tape.backward(out);
    for (const auto& v : vars) {
      Tensor2 g = tape.gradient(v);
      if (!g.all_finite()) throw NumericError("grad_check: non-finite gradient");
      analytic.push_back(std::move(g));
    }
  }

  std::vector<Tensor2> probe(inputs.begin(), inputs.end());
  GradReport report;
  for (std::size_t b = 0; b < probe.size(); ++b) {
    auto xs = probe[b].values();
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double saved = xs[i];
      xs[i] = saved + eps;
      const double up = evaluate(f, probe);
      xs[i] = saved - eps;
      const double down = evaluate(f, probe);
      xs[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[b].values()[i];
      const double err = std::abs(a - numeric);
      report.entrywise = std::max(report.entrywise, err / (std::abs(a) + 1e-12));
      diff = std::max(diff, err);
      scale = std::max({scale, std::abs(a), std::abs(numeric)});
    }
    if (diff > 0.0) report.normwise = std::max(report.normwise, diff / std::max(scale, 1e-300));
  }
  return report;
}

double grad_check(const TapedFunction& f, std::span<const Tensor2> inputs, double eps) {
  return grad_report(f, inputs, eps).entrywise;
}

double grad_check(const std::function<Var(Tape&, const Var&)>& f, const Tensor2& x, double eps) {
  const TapedFunction wrapped = [&f](Tape& tape, std::span<const Var> in) { return f(tape, in[0]); };
  const Tensor2 inputs[] = {x};
  return grad_check(wrapped, inputs, eps);
}

}  // namespace memotr
