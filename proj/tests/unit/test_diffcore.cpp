#include "helpers.hpp"

#include "dualaug/checkpoint.hpp"
#include "dualaug/diffcore.hpp"
#include "dualaug/errors.hpp"
#include "dualaug/mlp.hpp"
#include "dualaug/optimizer.hpp"

#include <array>

using namespace dualaug;
using testing::fd_error;
using testing::random_matrix;

TEST_CASE("scalar gradients") {
  Tape t;
  const Var p = t.constant(3.0);
  const Var loss = t.square(p);
  CHECK(t.grad(loss, p)(0, 0) == 6.0);
  // grad() leaves the tape re-runnable.
  CHECK(t.grad(loss, p)(0, 0) == 6.0);
  const Var c = t.constant(7.0);
  CHECK(t.grad(c, p)(0, 0) == 0.0);
  const Var m = t.constant(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(t.grad(m, p), NonScalarError);
}

TEST_CASE("every tape op passes a finite-difference check") {
  std::mt19937_64 rng(11);
  const Matrix a0 = random_matrix(3, 4, rng);
  const Matrix b0 = random_matrix(4, 3, rng);
  const Matrix c0 = random_matrix(3, 4, rng);
  // Composite expression touching each op once.
  const auto f = [&](Tape& t, Var a) {
    const Var b = t.constant(b0);
    const Var c = t.constant(c0);
    Var h = t.matmul(a, b);
    h = t.add(h, t.matmul_nt(a, c));
    h = t.sub(h, t.scale(t.transpose(t.matmul_tn(t.transpose(a), t.transpose(c))), 0.3));
    h = t.mul(h, t.tanh(h));
    h = t.add_scalar(h, 0.5);
    h = t.add_row(h, t.col_sum(h));
    h = t.add(h, t.tile_cols(t.row_sum(h), 3));
    h = t.add(h, t.tile_rows(t.gather_cols(t.slice_rows(h, 1, 1), {2, 0, 1}), 3));
    h = t.leaky_relu(h, 0.1);
    Var g = t.scatter_cols(t.gather_cols(h, {0, 2}), {1, 3}, 4);
    g = t.pad_rows(g, 1, 5);
    g = t.reshape(g, 4, 5);
    Var s = t.add_scalar(t.square(g), 1.0);
    s = t.add(t.sqrt(s), t.unary(s, UnaryFn::Rsqrt));
    s = t.add(s, t.exp(t.scale(g, 0.1)));
    for (UnaryFn fn : {UnaryFn::CosSqrt, UnaryFn::SincSqrt, UnaryFn::VersSqrt, UnaryFn::TanhcSqrt}) {
      s = t.add(s, t.unary(t.scale(t.square(g), 0.2), fn));
    }
    return t.add(t.sum(s), t.mean(t.square(h)));
  };
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(3, 4, rng);
    Tape t;
    const Var av = t.constant(a);
    const Vector g = testing::as_vector(t.grad(f(t, av), av));
    const auto value = [&](const Vector& x) {
      Tape u;
      return u.scalar(f(u, u.constant(Eigen::Map<const Matrix>(x.data(), 3, 4))));
    };
    CHECK(fd_error(value, testing::as_vector(a), g) < 1e-6);
  }
}

TEST_CASE("mlp forward") {
  std::mt19937_64 rng(12);
  SUBCASE("zero final layer gives zeros") {
    const MlpSpec spec{5, {7, 7}, 3, 0.01, true, 0};
    const ParamStore p = init_mlp(spec, rng);
    CHECK(mlp_eval(spec, p.values, random_matrix(4, 5, rng)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("identity single layer") {
    const MlpSpec spec{3, {}, 3, 0.01, false, 0};
    ParamStore p = init_mlp(spec, rng);
    p.values.setZero();
    const ParamSegment& w = p.layout.find("out.weight");
    Eigen::Map<Matrix>(p.values.data() + w.offset, 3, 3) = Matrix::Identity(3, 3);
    const Matrix x = random_matrix(6, 3, rng);
    CHECK((mlp_eval(spec, p.values, x) - x).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("4-8-2 network against a direct oracle") {
    const MlpSpec spec{4, {8}, 2, 0.01, false, 0};
    ParamStore p = init_mlp(spec, rng);
    p.values = random_matrix(p.size(), 1, rng);
    const auto seg = [&](const std::string& n) {
      const ParamSegment& s = p.layout.find(n);
      return Matrix(Eigen::Map<const Matrix>(p.values.data() + s.offset, s.rows, s.cols));
    };
    const Matrix x = random_matrix(5, 4, rng);
    Matrix h = (x * seg("fc0.weight")).rowwise() + seg("fc0.bias").row(0);
    h = h.unaryExpr([](double v) { return v > 0 ? v : 0.01 * v; });
    const Matrix y = (h * seg("out.weight")).rowwise() + seg("out.bias").row(0);
    CHECK((mlp_eval(spec, p.values, x) - y).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("shape errors") {
    const MlpSpec spec{4, {8}, 2, 0.01, false, 0};
    const ParamStore p = init_mlp(spec, rng);
    CHECK_THROWS_AS(mlp_eval(spec, p.values, random_matrix(2, 3, rng)), ShapeError);
    CHECK_THROWS_AS(mlp_eval(spec, Vector::Zero(5), random_matrix(2, 4, rng)), ShapeError);
  }
  SUBCASE("layout covers the vector") {
    const MlpSpec spec{32, {256}, 48, 0.01, true, 2};
    const ParamLayout l = mlp_layout(spec);
    CHECK(l.is_contiguous());
    CHECK(l.total() == 32 * 256 + 256 + 2 * 2 * (256 * 256 + 256) + 256 * 48 + 48);
  }
}

TEST_CASE("mlp mse gradient matches finite differences") {
  std::mt19937_64 rng(13);
  const MlpSpec spec{6, {10}, 4, 0.01, false, 1};
  const Matrix x = random_matrix(7, 6, rng);
  const Matrix y = random_matrix(7, 4, rng);
  for (int trial = 0; trial < 10; ++trial) {
    const ParamStore p = init_mlp(spec, rng);
    const auto loss = [&](const Vector& v) {
      Tape t;
      return t.scalar(mse(t, mlp_forward(spec, t, t.constant(v), t.constant(x)), t.constant(y)));
    };
    Tape t;
    const Var pv = t.constant(p.values);
    const Var l = mse(t, mlp_forward(spec, t, pv, t.constant(x)), t.constant(y));
    CHECK(fd_error(loss, p.values, testing::as_vector(t.grad(l, pv))) < 1e-4);
  }
}

TEST_CASE("optimizers") {
  Vector p = Vector::Constant(1, 1.0);
  OptimizerState adam = make_optimizer(OptimizerKind::adam, 1e-3, 1);
  optimizer_step(adam, p, Vector::Constant(1, 1.0));
  CHECK(1.0 - p(0) == doctest::Approx(1e-3 / (1.0 + 1e-8)).epsilon(1e-9));
  CHECK(adam.step == 1);

  Vector q = Vector::Constant(3, 2.5);
  OptimizerState a2 = make_optimizer(OptimizerKind::adam, 1e-3, 3);
  optimizer_step(a2, q, Vector::Zero(3));
  CHECK(q == Vector::Constant(3, 2.5));

  Vector r = Vector::Constant(1, 1.0);
  OptimizerState w = make_optimizer(OptimizerKind::adamw, 1e-3, 1);
  w.weight_decay = 0.01;
  optimizer_step(w, r, Vector::Zero(1));
  CHECK(r(0) == doctest::Approx(0.99999).epsilon(1e-15));

  Vector s = Vector::Constant(2, 1.0);
  OptimizerState sgd = make_optimizer(OptimizerKind::sgd, 0.5, 2);
  optimizer_step(sgd, s, Vector::Constant(2, 1.0));
  CHECK(s(0) == 0.5);
  CHECK_THROWS_AS(optimizer_step(sgd, s, Vector::Zero(3)), LengthError);
  CHECK(optimizer_kind_from_string(to_string(OptimizerKind::adamw)) == OptimizerKind::adamw);
}

TEST_CASE("grad_norm") {
  std::mt19937_64 rng(14);
  const Matrix w = random_matrix(1, 5, rng);
  Tape t;
  const Var y = t.constant(random_matrix(1, 5, rng));
  const Var d = t.sum(t.mul(y, t.constant(w)));
  const std::array<Var, 1> in{y};
  CHECK(t.scalar(grad_norm(t, d, in)) == doctest::Approx(w.norm()).epsilon(1e-14));
  const Var c = t.add_scalar(t.scale(t.sum(y), 0.0), 2.0);
  CHECK(t.scalar(grad_norm(t, c, in)) == 0.0);

  // Double backward through the norm of a small tanh critic.
  const MlpSpec spec{5, {6}, 1, 0.01, false, 0};
  const Matrix x = random_matrix(1, 5, rng);
  for (int trial = 0; trial < 10; ++trial) {
    const ParamStore p = init_mlp(spec, rng);
    const auto norm_of = [&](const Vector& v) {
      Tape u;
      const Var xv = u.constant(x);
      const std::array<Var, 1> ins{xv};
      return u.scalar(grad_norm(u, u.sum(mlp_forward(spec, u, u.constant(v), xv)), ins));
    };
    Tape u;
    const Var pv = u.constant(p.values);
    const Var xv = u.constant(x);
    const std::array<Var, 1> ins{xv};
    const Var n = grad_norm(u, u.sum(mlp_forward(spec, u, pv, xv)), ins);
    CHECK(fd_error(norm_of, p.values, testing::as_vector(u.grad(n, pv))) < 1e-3);

    // Norm itself against a finite-difference input gradient.
    const auto score = [&](const Vector& xi) {
      return mlp_eval(spec, p.values, Eigen::Map<const Matrix>(xi.data(), 1, 5))(0, 0);
    };
    Vector fd(5);
    Vector probe = testing::as_vector(x);
    for (int i = 0; i < 5; ++i) {
      probe(i) += 1e-6;
      const double up = score(probe);
      probe(i) -= 2e-6;
      const double down = score(probe);
      probe(i) += 1e-6;
      fd(i) = (up - down) / 2e-6;
    }
    CHECK(u.scalar(n) == doctest::Approx(fd.norm()).epsilon(1e-4));
  }
}

TEST_CASE("param store json round trip is exact") {
  std::mt19937_64 rng(15);
  const MlpSpec spec{3, {4}, 2, 0.01, false, 0};
  ParamStore p = init_mlp(spec, rng);
  p.values(0) = 0.1 + 0.2;
  const ParamStore back = param_store_from_json(nlohmann::json::parse(to_json(p).dump()));
  CHECK(back.values == p.values);
  CHECK(back.layout.segments.size() == p.layout.segments.size());
  const MlpSpec s2 = mlp_spec_from_json(to_json(spec));
  CHECK(s2.hidden_dims == spec.hidden_dims);
}
