#include "helpers.hpp"

#include "dualaug/critic.hpp"
#include "dualaug/errors.hpp"

using namespace dualaug;
using testing::random_matrix;

namespace {

CriticParams random_critic(std::mt19937_64& rng, double scale = 0.05) {
  CriticParams c = make_critic(CriticRole::weak, 16, rng, {12, 12});
  c.params.values = random_matrix(c.params.size(), 1, rng, scale);
  return c;
}

std::vector<Pose3D> random_poses(std::mt19937_64& rng, int n) {
  std::vector<Pose3D> out;
  for (int i = 0; i < n; ++i) out.push_back(testing::random_pose(rng));
  return out;
}

}  // namespace

TEST_CASE("zero critic") {
  std::mt19937_64 rng(31);
  CriticParams c = make_critic(CriticRole::strong, 16, rng);
  c.params.values.setZero();
  const auto a = random_poses(rng, 4);
  const auto b = random_poses(rng, 4);
  CHECK(critic_score(a[0], c) == 0.0);
  CHECK(gradient_penalty(c, a[0], b[0], 0.3) == 1.0);
  CHECK(gradient_penalty(c, a[0], b[0], 0.3, false) == 1.0);
  CHECK(weak_critic_loss(a, b, c, 4.0, rng) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(strong_critic_loss(a, b, c, 4.0, rng) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(generator_adv_loss(b, c) == 0.0);
}

TEST_CASE("interpolation endpoints") {
  std::mt19937_64 rng(32);
  const Pose3D a = testing::random_pose(rng);
  const Pose3D b = testing::random_pose(rng);
  CHECK(make_gp_sample(a, b, 1.0).interpolant.joints == a.joints);
  CHECK(make_gp_sample(a, b, 0.0).interpolant.joints == b.joints);
  const GpSample mid = make_gp_sample(a, b, 0.25);
  CHECK((mid.interpolant.joints - (0.25 * a.joints + 0.75 * b.joints)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("linear critic penalty") {
  // A single linear layer has a constant input gradient equal to its weights.
  std::mt19937_64 rng(33);
  CriticParams c = make_critic(CriticRole::weak, 16, rng, {});
  c.params.values = random_matrix(c.params.size(), 1, rng, 0.1);
  const double wnorm = c.params.values.head(48).norm();
  const Pose3D a = testing::random_pose(rng);
  const Pose3D b = testing::random_pose(rng);
  CHECK(gradient_penalty(c, a, b, 0.6) == doctest::Approx((1.0 - wnorm) * (1.0 - wnorm)).epsilon(1e-12));
  CHECK(gradient_penalty(c, a, b, 0.6, false) == doctest::Approx(1.0 - wnorm).epsilon(1e-12));
}

TEST_CASE("critic loss gradients match finite differences") {
  std::mt19937_64 rng(34);
  const Matrix real = random_matrix(3, 48, rng, 300.0);
  const Matrix synth = random_matrix(3, 48, rng, 300.0);
  for (int trial = 0; trial < 5; ++trial) {
    const CriticParams c = random_critic(rng);
    const std::uint64_t seed = rng();
    const auto value = [&](const Vector& v) {
      std::mt19937_64 r(seed);
      Tape t;
      return t.scalar(critic_loss_graph(t, c, t.constant(v), real, synth, 4.0, r));
    };
    std::mt19937_64 r(seed);
    Tape t;
    const Var pv = t.constant(c.params.values);
    const Vector g = testing::as_vector(t.grad(critic_loss_graph(t, c, pv, real, synth, 4.0, r), pv));
    CHECK(testing::fd_directional_error(value, c.params.values, g, rng) < 1e-4);
  }
}

TEST_CASE("generator adversarial gradient flows into the samples only") {
  std::mt19937_64 rng(35);
  const CriticParams c = random_critic(rng);
  const Matrix synth = random_matrix(2, 48, rng, 300.0);
  const auto value = [&](const Vector& x) {
    Tape t;
    return t.scalar(generator_adv_graph(t, c, t.constant(Eigen::Map<const Matrix>(x.data(), 2, 48))));
  };
  Tape t;
  const Var s = t.constant(synth);
  const Vector g = testing::as_vector(t.grad(generator_adv_graph(t, c, s), s));
  CHECK(testing::fd_error(value, testing::as_vector(synth), g, 1e-4) < 1e-4);
}

TEST_CASE("critic json round trip") {
  std::mt19937_64 rng(36);
  const CriticParams c = random_critic(rng);
  const CriticParams back = critic_from_json(nlohmann::json::parse(to_json(c).dump()));
  CHECK(back.params.values == c.params.values);
  const Pose3D p = testing::random_pose(rng);
  CHECK(critic_score(p, back) == critic_score(p, c));
}
