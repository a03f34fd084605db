#include "dualaug/tape.hpp"

#include "dualaug/errors.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace dualaug {

namespace {

// Below this s = r^2 the *Sqrt functions switch to Taylor series.
constexpr double kSeriesCutoff = 1e-3;

double poly(double s, std::initializer_list<double> coeffs) {
  double acc = 0.0;
  double p = 1.0;
  for (double c : coeffs) {
    acc += c * p;
    p *= s;
  }
  return acc;
}

double sinc_sqrt(double s) {
  if (s < kSeriesCutoff) return poly(s, {1.0, -1.0 / 6, 1.0 / 120, -1.0 / 5040, 1.0 / 362880});
  const double r = std::sqrt(s);
  return std::sin(r) / r;
}

double sinc_sqrt_grad(double s) {
  if (s < kSeriesCutoff) return poly(s, {-1.0 / 6, 2.0 / 120, -3.0 / 5040, 4.0 / 362880});
  const double r = std::sqrt(s);
  return (r * std::cos(r) - std::sin(r)) / (2.0 * r * s);
}

double vers_sqrt(double s) {
  if (s < kSeriesCutoff) return poly(s, {0.5, -1.0 / 24, 1.0 / 720, -1.0 / 40320, 1.0 / 3628800});
  return (1.0 - std::cos(std::sqrt(s))) / s;
}

double vers_sqrt_grad(double s) {
  if (s < kSeriesCutoff) return poly(s, {-1.0 / 24, 2.0 / 720, -3.0 / 40320, 4.0 / 3628800});
  const double r = std::sqrt(s);
  return (r * std::sin(r) - 2.0 + 2.0 * std::cos(r)) / (2.0 * s * s);
}

double tanhc_sqrt(double s) {
  if (s < kSeriesCutoff) return poly(s, {1.0, -1.0 / 3, 2.0 / 15, -17.0 / 315, 62.0 / 2835});
  const double r = std::sqrt(s);
  return std::tanh(r) / r;
}

double tanhc_sqrt_grad(double s) {
  if (s < kSeriesCutoff) return poly(s, {-1.0 / 3, 4.0 / 15, -51.0 / 315, 248.0 / 2835});
  const double r = std::sqrt(s);
  const double t = std::tanh(r);
  return (r * (1.0 - t * t) - t) / (2.0 * r * s);
}

std::optional<UnaryFn> derivative_of(UnaryFn fn) {
  switch (fn) {
    case UnaryFn::Tanh: return UnaryFn::Sech2;
    case UnaryFn::Sech2: return UnaryFn::Sech2Grad;
    case UnaryFn::Exp: return UnaryFn::Exp;
    case UnaryFn::Sqrt: return UnaryFn::HalfRsqrt;
    case UnaryFn::HalfRsqrt: return UnaryFn::HalfRsqrtGrad;
    case UnaryFn::Rsqrt: return UnaryFn::RsqrtGrad;
    case UnaryFn::RsqrtGrad: return UnaryFn::RsqrtGrad2;
    case UnaryFn::CosSqrt: return UnaryFn::CosSqrtGrad;
    case UnaryFn::SincSqrt: return UnaryFn::SincSqrtGrad;
    case UnaryFn::VersSqrt: return UnaryFn::VersSqrtGrad;
    case UnaryFn::TanhcSqrt: return UnaryFn::TanhcSqrtGrad;
    default: return std::nullopt;
  }
}

}  // namespace

double apply_unary(UnaryFn fn, double x) {
  switch (fn) {
    case UnaryFn::Tanh: return std::tanh(x);
    case UnaryFn::Sech2: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case UnaryFn::Sech2Grad: {
      const double t = std::tanh(x);
      return -2.0 * (1.0 - t * t) * t;
    }
    case UnaryFn::Exp: return std::exp(x);
    case UnaryFn::Sqrt: return x > 0.0 ? std::sqrt(x) : 0.0;
    case UnaryFn::HalfRsqrt: return x > 0.0 ? 0.5 / std::sqrt(x) : 0.0;
    case UnaryFn::HalfRsqrtGrad: return x > 0.0 ? -0.25 / (x * std::sqrt(x)) : 0.0;
    case UnaryFn::Rsqrt: return 1.0 / std::sqrt(x);
    case UnaryFn::RsqrtGrad: return -0.5 / (x * std::sqrt(x));
    case UnaryFn::RsqrtGrad2: return 0.75 / (x * x * std::sqrt(x));
    case UnaryFn::CosSqrt: return std::cos(std::sqrt(std::max(x, 0.0)));
    case UnaryFn::CosSqrtGrad: return -0.5 * sinc_sqrt(std::max(x, 0.0));
    case UnaryFn::SincSqrt: return sinc_sqrt(std::max(x, 0.0));
    case UnaryFn::SincSqrtGrad: return sinc_sqrt_grad(std::max(x, 0.0));
    case UnaryFn::VersSqrt: return vers_sqrt(std::max(x, 0.0));
    case UnaryFn::VersSqrtGrad: return vers_sqrt_grad(std::max(x, 0.0));
    case UnaryFn::TanhcSqrt: return tanhc_sqrt(std::max(x, 0.0));
    case UnaryFn::TanhcSqrtGrad: return tanhc_sqrt_grad(std::max(x, 0.0));
  }
  return 0.0;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::check(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::out_of_range("Var " + std::to_string(v.id) + " is not on this tape");
  }
}

const Tape::Node& Tape::node(Var v) const {
  check(v);
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) throw NonScalarError("node is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  return m(0, 0);
}

void Tape::truncate(std::size_t n) {
  if (n < nodes_.size()) nodes_.resize(n);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Var Tape::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.rows()) throw ShapeError("matmul: inner dimensions differ");
  Node n{Op::MatMul, a.id, b.id};
  n.value.noalias() = A * B;
  return push(std::move(n));
}

Var Tape::matmul_nt(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.cols()) throw ShapeError("matmul_nt: inner dimensions differ");
  Node n{Op::MatMulNT, a.id, b.id};
  n.value.noalias() = A * B.transpose();
  return push(std::move(n));
}

Var Tape::matmul_tn(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.rows() != B.rows()) throw ShapeError("matmul_tn: inner dimensions differ");
  Node n{Op::MatMulTN, a.id, b.id};
  n.value.noalias() = A.transpose() * B;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Node n{Op::Add, a.id, b.id};
  n.value = value(a) + value(b);
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  Node n{Op::Sub, a.id, b.id};
  n.value = value(a) - value(b);
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  Node n{Op::Mul, a.id, b.id};
  n.value = value(a).cwiseProduct(value(b));
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n{Op::Scale, a.id};
  n.param = s;
  n.value = value(a) * s;
  return push(std::move(n));
}

Var Tape::add_scalar(Var a, double s) {
  Node n{Op::AddScalar, a.id};
  n.param = s;
  n.value = value(a).array() + s;
  return push(std::move(n));
}

Var Tape::add_row(Var x, Var row) {
  const Matrix& X = value(x);
  const Matrix& R = value(row);
  if (R.rows() != 1 || R.cols() != X.cols()) throw ShapeError("add_row: row must be 1 x cols");
  Node n{Op::AddRow, x.id, row.id};
  n.value = X.rowwise() + R.row(0);
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n{Op::Sum, a.id};
  n.value = Matrix::Constant(1, 1, value(a).sum());
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  const auto count = static_cast<double>(value(a).size());
  if (count == 0) throw EmptyBatchError("mean of an empty matrix");
  return scale(sum(a), 1.0 / count);
}

Var Tape::col_sum(Var a) {
  Node n{Op::ColSum, a.id};
  n.value = value(a).colwise().sum();
  return push(std::move(n));
}

Var Tape::row_sum(Var a) {
  Node n{Op::RowSum, a.id};
  n.value = value(a).rowwise().sum();
  return push(std::move(n));
}

Var Tape::tile_rows(Var row, int rows) {
  const Matrix& R = value(row);
  if (R.rows() != 1) throw ShapeError("tile_rows: expected a single row");
  Node n{Op::TileRows, row.id};
  n.i0 = rows;
  n.value = R.replicate(rows, 1);
  return push(std::move(n));
}

Var Tape::tile_cols(Var col, int cols) {
  const Matrix& C = value(col);
  if (C.cols() != 1) throw ShapeError("tile_cols: expected a single column");
  Node n{Op::TileCols, col.id};
  n.i0 = cols;
  n.value = C.replicate(1, cols);
  return push(std::move(n));
}

Var Tape::transpose(Var a) {
  Node n{Op::Transpose, a.id};
  n.value = value(a).transpose();
  return push(std::move(n));
}

Var Tape::gather_cols(Var a, std::vector<int> idx) {
  const Matrix& A = value(a);
  Node n{Op::Gather, a.id};
  n.value.resize(A.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= A.cols()) throw ShapeError("gather_cols: index out of range");
    n.value.col(static_cast<Eigen::Index>(k)) = A.col(idx[k]);
  }
  n.i0 = static_cast<int>(A.cols());
  n.index = std::make_shared<const std::vector<int>>(std::move(idx));
  return push(std::move(n));
}

Var Tape::scatter_cols(Var a, std::vector<int> idx, int cols) {
  const Matrix& A = value(a);
  if (static_cast<std::size_t>(A.cols()) != idx.size()) throw ShapeError("scatter_cols: index length mismatch");
  Node n{Op::Scatter, a.id};
  n.value = Matrix::Zero(A.rows(), cols);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= cols) throw ShapeError("scatter_cols: index out of range");
    n.value.col(idx[k]) += A.col(static_cast<Eigen::Index>(k));
  }
  n.i0 = cols;
  n.index = std::make_shared<const std::vector<int>>(std::move(idx));
  return push(std::move(n));
}

Var Tape::slice_rows(Var a, int start, int count) {
  const Matrix& A = value(a);
  if (start < 0 || count < 0 || start + count > A.rows()) throw ShapeError("slice_rows: out of range");
  Node n{Op::SliceRows, a.id};
  n.i0 = start;
  n.i1 = count;
  n.value = A.middleRows(start, count);
  return push(std::move(n));
}

Var Tape::pad_rows(Var a, int start, int total) {
  const Matrix& A = value(a);
  if (start < 0 || start + A.rows() > total) throw ShapeError("pad_rows: out of range");
  Node n{Op::PadRows, a.id};
  n.i0 = start;
  n.i1 = total;
  n.value = Matrix::Zero(total, A.cols());
  n.value.middleRows(start, A.rows()) = A;
  return push(std::move(n));
}

Var Tape::reshape(Var a, int rows, int cols) {
  const Matrix& A = value(a);
  if (static_cast<Eigen::Index>(rows) * cols != A.size()) throw ShapeError("reshape: size mismatch");
  Node n{Op::Reshape, a.id};
  n.i0 = static_cast<int>(A.rows());
  n.i1 = static_cast<int>(A.cols());
  n.value = Eigen::Map<const Matrix>(A.data(), rows, cols);
  return push(std::move(n));
}

Var Tape::leaky_relu(Var a, double slope) {
  Node n{Op::LeakyRelu, a.id};
  n.param = slope;
  n.value = value(a).unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return push(std::move(n));
}

Var Tape::unary(Var a, UnaryFn fn) {
  Node n{Op::Unary, a.id};
  n.fn = fn;
  n.value = value(a).unaryExpr([fn](double x) { return apply_unary(fn, x); });
  return push(std::move(n));
}

Var Tape::vjp(const Node& n, int which, Var g) {
  const Var a{n.a};
  const Var b{n.b};
  switch (n.op) {
    case Op::Leaf: break;
    case Op::MatMul: return which == 0 ? matmul_nt(g, b) : matmul_tn(a, g);
    case Op::MatMulNT: return which == 0 ? matmul(g, b) : matmul_tn(g, a);
    case Op::MatMulTN: return which == 0 ? matmul_nt(b, g) : matmul(a, g);
    case Op::Add: return g;
    case Op::Sub: return which == 0 ? g : scale(g, -1.0);
    case Op::Mul: return mul(g, which == 0 ? b : a);
    case Op::Scale: return scale(g, n.param);
    case Op::AddScalar: return g;
    case Op::AddRow: return which == 0 ? g : col_sum(g);
    case Op::Sum: {
      const Matrix& A = value(a);
      return tile_rows(tile_cols(g, static_cast<int>(A.cols())), static_cast<int>(A.rows()));
    }
    case Op::ColSum: return tile_rows(g, static_cast<int>(value(a).rows()));
    case Op::RowSum: return tile_cols(g, static_cast<int>(value(a).cols()));
    case Op::TileRows: return col_sum(g);
    case Op::TileCols: return row_sum(g);
    case Op::Transpose: return transpose(g);
    case Op::Gather: return scatter_cols(g, *n.index, n.i0);
    case Op::Scatter: return gather_cols(g, *n.index);
    case Op::SliceRows: return pad_rows(g, n.i0, static_cast<int>(value(a).rows()));
    case Op::PadRows: return slice_rows(g, n.i0, static_cast<int>(value(a).rows()));
    case Op::Reshape: return reshape(g, n.i0, n.i1);
    case Op::LeakyRelu: {
      const double slope = n.param;
      Matrix mask = value(a).unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; });
      return mul(g, constant(std::move(mask)));
    }
    case Op::Unary: {
      const auto d = derivative_of(n.fn);
      if (!d) throw std::logic_error("derivative of this elementwise function is not recorded");
      return mul(g, unary(a, *d));
    }
  }
  throw std::logic_error("vjp requested for a leaf");
}

std::vector<Var> Tape::grad_graph(Var output, std::span<const Var> wrt) {
  check(output);
  if (value(output).size() != 1) throw NonScalarError("gradient requested of a non-scalar node");
  const auto count = static_cast<std::size_t>(output.id) + 1;

  // live[i]: node i depends on some wrt node
  std::vector<char> live(count, 0);
  for (Var w : wrt) {
    check(w);
    if (static_cast<std::size_t>(w.id) < count) live[static_cast<std::size_t>(w.id)] = 1;
  }
  for (std::size_t i = 0; i < count; ++i) {
    const Node& n = nodes_[i];
    if (live[i] || n.op == Op::Leaf) continue;
    if ((n.a >= 0 && live[static_cast<std::size_t>(n.a)]) || (n.b >= 0 && live[static_cast<std::size_t>(n.b)])) {
      live[i] = 1;
    }
  }

  std::vector<Var> acc(count);
  acc[count - 1] = constant(1.0);
  for (std::size_t i = count; i-- > 0;) {
    if (!acc[i].valid() || !live[i]) continue;
    const Node& n = nodes_[i];  // deque references survive push_back
    if (n.op == Op::Leaf) continue;
    const int inputs[2] = {n.a, n.b};
    for (int which = 0; which < 2; ++which) {
      const int in = inputs[which];
      if (in < 0 || !live[static_cast<std::size_t>(in)]) continue;
      Var contrib = vjp(n, which, acc[i]);
      Var& slot = acc[static_cast<std::size_t>(in)];
      slot = slot.valid() ? add(slot, contrib) : contrib;
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (Var w : wrt) {
    const auto id = static_cast<std::size_t>(w.id);
    if (id < count && acc[id].valid()) {
      out.push_back(acc[id]);
    } else {
      const Matrix& v = value(w);
      out.push_back(constant(Matrix::Zero(v.rows(), v.cols())));
    }
  }
  return out;
}

std::vector<Matrix> Tape::grad(Var output, std::span<const Var> wrt) {
  const std::size_t mark = nodes_.size();
  const auto vars = grad_graph(output, wrt);
  std::vector<Matrix> out;
  out.reserve(vars.size());
  for (Var v : vars) out.push_back(value(v));
  truncate(mark);
  return out;
}

Matrix Tape::grad(Var output, Var wrt) {
  const Var w[1] = {wrt};
  return std::move(grad(output, w).front());
}

}  // namespace dualaug
