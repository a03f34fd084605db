#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <vector>

namespace dualaug {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Handle to a node on a Tape. Only meaningful for the tape that issued it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Elementwise functions. Each entry names its own derivative so that
// gradients can themselves be recorded and differentiated again.
// The *Sqrt family are smooth functions of s = r^2 used for axis-angle
// rotations; they stay finite at s = 0.
enum class UnaryFn : std::uint8_t {
  Tanh,
  Sech2,          // 1 - tanh^2
  Sech2Grad,      // -2 sech^2 tanh
  Exp,
  Sqrt,           // derivative is zero at 0 (subgradient)
  HalfRsqrt,      // 0.5 / sqrt(x), 0 for x <= 0
  HalfRsqrtGrad,  // -0.25 x^-1.5, 0 for x <= 0
  Rsqrt,          // x^-1/2
  RsqrtGrad,      // -0.5 x^-3/2
  RsqrtGrad2,     // 0.75 x^-5/2
  CosSqrt,        // cos(sqrt s)
  CosSqrtGrad,    // -0.5 sin(sqrt s)/sqrt s
  SincSqrt,       // sin(sqrt s)/sqrt s
  SincSqrtGrad,
  VersSqrt,       // (1 - cos(sqrt s))/s
  VersSqrtGrad,
  TanhcSqrt,      // tanh(sqrt s)/sqrt s
  TanhcSqrtGrad,
};

double apply_unary(UnaryFn fn, double x);

// Reverse-mode differentiation record over dense double matrices.
//
// Values are computed eagerly as nodes are appended. grad_graph() records
// the backward pass on the same tape, so gradients are ordinary nodes and
// can be differentiated again (used by the gradient penalty and by
// second-order meta updates).
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Matrix value);
  Var constant(double value);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  // Drops every node with id >= n.
  void truncate(std::size_t n);

  Var matmul(Var a, Var b);     // a b
  Var matmul_nt(Var a, Var b);  // a b^T
  Var matmul_tn(Var a, Var b);  // a^T b
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var add_row(Var x, Var row);  // x (n x m) + row (1 x m) broadcast
  Var sum(Var a);               // 1 x 1
  Var mean(Var a);
  Var col_sum(Var a);           // 1 x m
  Var row_sum(Var a);           // n x 1
  Var tile_rows(Var row, int n);
  Var tile_cols(Var col, int m);
  Var transpose(Var a);
  // out(:, k) = a(:, idx[k])
  Var gather_cols(Var a, std::vector<int> idx);
  // out(:, idx[k]) += a(:, k); adjoint of gather_cols
  Var scatter_cols(Var a, std::vector<int> idx, int cols);
  Var slice_rows(Var a, int start, int count);
  Var pad_rows(Var a, int start, int total);  // adjoint of slice_rows
  Var reshape(Var a, int rows, int cols);     // column-major
  Var leaky_relu(Var a, double slope);
  Var unary(Var a, UnaryFn fn);

  Var tanh(Var a) { return unary(a, UnaryFn::Tanh); }
  Var exp(Var a) { return unary(a, UnaryFn::Exp); }
  Var sqrt(Var a) { return unary(a, UnaryFn::Sqrt); }
  Var square(Var a) { return mul(a, a); }

  // Gradients of a 1x1 node w.r.t. `wrt`, recorded on the tape.
  std::vector<Var> grad_graph(Var output, std::span<const Var> wrt);
  // Gradient values only; the tape is restored to its previous size.
  std::vector<Matrix> grad(Var output, std::span<const Var> wrt);
  Matrix grad(Var output, Var wrt);

 private:
  enum class Op : std::uint8_t {
    Leaf, MatMul, MatMulNT, MatMulTN, Add, Sub, Mul, Scale, AddScalar, AddRow,
    Sum, ColSum, RowSum, TileRows, TileCols, Transpose, Gather, Scatter,
    SliceRows, PadRows, Reshape, LeakyRelu, Unary,
  };

  struct Node {
    Op op = Op::Leaf;
    int a = -1;
    int b = -1;
    double param = 0.0;
    int i0 = 0;
    int i1 = 0;
    UnaryFn fn = UnaryFn::Tanh;
    std::shared_ptr<const std::vector<int>> index;
    Matrix value;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  void check(Var v) const;
  // Appends the vector-Jacobian product of `n` w.r.t. input `which` (0 or 1).
  Var vjp(const Node& n, int which, Var g);

  std::deque<Node> nodes_;
};

}  // namespace dualaug
