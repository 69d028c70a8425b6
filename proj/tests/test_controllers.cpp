#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "artde/controllers.hpp"
#include "helpers.hpp"

using namespace artde;
using artde::testing::random_vector;

namespace {

ControllerConfig config(Eigen::Index n, Variant v) {
  ControllerConfig c;
  c.m_bar = 0.5 * Matrix::Identity(n, n);
  c.kp = 25.0 * Matrix::Identity(n, n);
  c.kd = 10.0 * Matrix::Identity(n, n);
  c.q_lyap = Matrix::Identity(2 * n, 2 * n);
  c.variant = v;
  return c;
}

}  // namespace

TEST(Controllers, ParseVariant) {
  EXPECT_EQ(parse_variant("ARTDE"), Variant::ARTDE);
  EXPECT_EQ(parse_variant("atde"), Variant::ATDE);
  EXPECT_EQ(parse_variant("tde"), Variant::TDC);
  EXPECT_THROW(parse_variant("pid"), Error);
}

TEST(Controllers, SigSmoothStaysInsideUnitBall) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 200; ++k) {
    const Vector s = random_vector(rng, 3, -2.0, 2.0);
    EXPECT_LT(sig_smooth(s, 5e-5).norm(), 1.0);
  }
  EXPECT_TRUE(sig_smooth(Vector::Zero(3), 5e-5).isZero());
  const Vector big = Vector::Constant(2, 1e3);
  EXPECT_NEAR(sig_smooth(big, 5e-5).norm(), 1.0, 1e-9);
}

TEST(Controllers, RegionRadius) {
  EXPECT_NEAR(region_radius(4.0, 5e-5), std::sqrt(5e-5 / 15.0), 1e-16);
  EXPECT_THROW(region_radius(1.0, 5e-5), Error);
  EXPECT_THROW(region_radius(0.5, 5e-5), Error);
}

TEST(Controllers, ConfigValidation) {
  ControllerConfig c = config(2, Variant::ARTDE);
  EXPECT_NO_THROW(c.validate());
  c.alpha = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = config(2, Variant::ARTDE);
  c.m_bar(0, 0) = -1.0;
  EXPECT_THROW(c.validate(), Error);
  c = config(2, Variant::ARTDE);
  c.period = 0.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Controllers, GainEstimateValidation) {
  EXPECT_NO_THROW(GainEstimates::make(0.1, 0.1, 0.01, 0.01, 1.0, 1.0));
  EXPECT_THROW(GainEstimates::make(0.1, 0.1, 0.0, 0.01, 1.0, 1.0), Error);
  EXPECT_THROW(GainEstimates::make(0.1, 0.1, 0.01, 0.01, -1.0, 1.0), Error);
  EXPECT_THROW(GainEstimates::make(0.001, 0.1, 0.01, 0.01, 1.0, 1.0), Error);
}

TEST(Controllers, SlidingVariableIsLowerHalfOfPXi) {
  const ControllerConfig c = config(2, Variant::ARTDE);
  const Matrix p = lyapunov_solve(companion_matrix(c.kp, c.kd), c.q_lyap);
  const ErrorState err(Vector::Constant(2, 0.1), Vector::Constant(2, -0.3));
  Matrix b = Matrix::Zero(4, 2);
  b.bottomRows(2).setIdentity();
  EXPECT_LT((sliding_variable(p, err) - b.transpose() * p * err.xi()).norm(), 1e-15);
}

TEST(Controllers, ControlDecomposition) {
  const ErrorState err(Vector::Constant(2, 0.1), Vector::Constant(2, 0.2));
  const Vector qdd = Vector::Constant(2, 1.0), n_hat = Vector::Constant(2, -0.4);
  for (Variant v : {Variant::TDC, Variant::ATDE, Variant::ARTDE}) {
    const ControllerConfig c = config(2, v);
    const Matrix p = lyapunov_solve(companion_matrix(c.kp, c.kd), c.q_lyap);
    const ControlOutput out = compute_control(c, p, err, qdd, n_hat, 0.3);
    EXPECT_LT((out.total - out.tde_part - out.desired_dynamics_part - out.adaptive_robust_part).norm(), 1e-15);
    EXPECT_EQ(out.tde_part, n_hat);
    const Vector u0 = qdd + c.kd * err.de() + c.kp * err.e();
    EXPECT_LT((out.desired_dynamics_part - c.m_bar * u0).norm(), 1e-14);
    if (v == Variant::TDC) {
      EXPECT_TRUE(out.adaptive_robust_part.isZero());
    } else {
      const Vector s = sliding_variable(p, err);
      const Vector expect = c.m_bar * (c.alpha * 0.3 * s / std::sqrt(s.squaredNorm() + c.epsilon));
      EXPECT_LT((out.adaptive_robust_part - expect).norm(), 1e-14);
    }
  }
}

TEST(Adaptation, BranchSelection) {
  GainEstimates g{0.5, 0.5, 0.01, 0.01, 1.0, 1.0};
  const Vector s = Vector::Constant(2, 1.0);
  EXPECT_EQ(adapt_branch(g, s, s), AdaptBranch::Increase);
  EXPECT_EQ(adapt_branch(g, s, -s), AdaptBranch::Decrease);
  EXPECT_EQ(adapt_branch(g, s, Vector::Zero(2)), AdaptBranch::Decrease);
  g.beta1 = g.floor1;
  EXPECT_EQ(adapt_branch(g, s, -s), AdaptBranch::Increase);
}

TEST(Adaptation, StepSizes) {
  const GainEstimates g{0.5, 0.5, 0.01, 0.01, 2.0, 3.0};
  const ErrorState err(Vector::Constant(1, 0.3), Vector::Constant(1, 0.4));  // |xi| = 0.5
  const double dt = 1e-3;
  const Vector s = Vector::Constant(1, 0.2), s_up = Vector::Constant(1, 0.1), s_down = Vector::Constant(1, 0.3);
  const GainEstimates up = adapt_gains(g, err, s, s_up, dt);
  EXPECT_NEAR(up.beta0 - g.beta0, 2.0 * 0.2 * dt, 1e-15);
  EXPECT_NEAR(up.beta1 - g.beta1, 3.0 * 0.5 * 0.2 * dt, 1e-15);
  const GainEstimates down = adapt_gains(g, err, s, s_down, dt);
  EXPECT_NEAR(g.beta0 - down.beta0, 2.0 * 0.2 * dt, 1e-15);
  EXPECT_NEAR(g.beta1 - down.beta1, 3.0 * 0.5 * 0.2 * dt, 1e-15);
}

TEST(Adaptation, DecreaseClampsAtFloor) {
  const GainEstimates g{0.011, 0.0105, 0.01, 0.01, 100.0, 100.0};
  const ErrorState err(Vector::Constant(1, 1.0), Vector::Constant(1, 1.0));
  const GainEstimates out = adapt_gains(g, err, Vector::Constant(1, 1.0), Vector::Constant(1, 2.0), 1e-3);
  EXPECT_EQ(out.beta0, g.floor0);
  EXPECT_EQ(out.beta1, g.floor1);
}

TEST(Adaptation, RandomizedInvariants) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GainEstimates g = GainEstimates::make(0.02, 0.02, 0.01, 0.01, 5.0, 5.0);
  double c = 0.01;
  Vector s_prev = Vector::Zero(3);
  for (int k = 0; k < 20000; ++k) {
    const ErrorState err(random_vector(rng, 3, -1.0, 1.0), random_vector(rng, 3, -1.0, 1.0));
    const Vector s = random_vector(rng, 3, -1.0, 1.0);
    const double dt = 1e-4 + 1e-2 * u(rng);
    const AdaptBranch b = adapt_branch(g, s, (s - s_prev) / dt);
    const GainEstimates next = adapt_gains(g, err, s, s_prev, dt);
    ASSERT_GE(next.beta0, g.floor0);
    ASSERT_GE(next.beta1, g.floor1);
    if (b == AdaptBranch::Increase) {
      ASSERT_GE(next.beta0, g.beta0);
      ASSERT_GE(next.beta1, g.beta1);
    } else {
      ASSERT_LE(next.beta0, g.beta0);
      ASSERT_LE(next.beta1, g.beta1);
    }
    c = atde_gain_update(c, s, s_prev.norm(), 5.0, 0.01, dt);
    ASSERT_GE(c, 0.01);
    g = next;
    s_prev = s;
  }
}

TEST(Adaptation, AtdeLaw) {
  const Vector s = Vector::Constant(1, 0.5);
  EXPECT_NEAR(atde_gain_update(0.2, s, 0.4, 2.0, 0.01, 0.1), 0.2 + 2.0 * 0.5 * 0.1, 1e-15);
  EXPECT_NEAR(atde_gain_update(0.2, s, 0.6, 2.0, 0.01, 0.1), 0.2 - 2.0 * 0.5 * 0.1, 1e-15);
  EXPECT_EQ(atde_gain_update(0.05, s, 0.6, 2.0, 0.01, 0.1), 0.01);
  EXPECT_GT(atde_gain_update(0.01, s, 0.6, 2.0, 0.01, 0.1), 0.01);
}

TEST(Controllers, MbarCondition) {
  std::vector<Matrix> samples = {Matrix::Identity(1, 1) * 1.0, Matrix::Identity(1, 1) * 2.0};
  EXPECT_TRUE(check_mbar_condition(samples, Matrix::Identity(1, 1) * 1.5).satisfied);
  // M_bar above 2 min(M) breaks the contraction.
  const MbarCheck bad = check_mbar_condition(samples, Matrix::Identity(1, 1) * 2.5);
  EXPECT_FALSE(bad.satisfied);
  EXPECT_NEAR(bad.worst_norm, 1.5, 1e-14);
}

TEST(TdeLoopTest, RecordAppliedChecks) {
  TdeLoop loop(config(2, Variant::ARTDE), GainEstimates{});
  EXPECT_THROW(loop.record_applied(Vector::Zero(2)), Error);
  const ErrorState err(Vector::Zero(2), Vector::Zero(2));
  loop.step(0.0, err, Vector::Zero(2), Vector::Zero(2));
  EXPECT_THROW(loop.record_applied(Vector::Zero(3)), Error);
  EXPECT_NO_THROW(loop.record_applied(Vector::Constant(2, 1.0)));
  EXPECT_THROW(loop.step(0.0, err, Vector::Zero(2), Vector::Zero(2)), Error);
  // The replaced input is what the estimate sees one delay later.
  const LoopStep st = loop.step(0.001, err, Vector::Zero(2), Vector::Zero(2));
  EXPECT_EQ(st.n_hat, Vector::Constant(2, 1.0));
}

TEST(TdeLoopTest, TdcKeepsGainsFixed) {
  TdeLoop loop(config(1, Variant::TDC), GainEstimates{});
  for (int k = 0; k < 10; ++k) {
    const ErrorState err(Vector::Constant(1, 0.1 * k), Vector::Constant(1, 0.0));
    const LoopStep st = loop.step(0.001 * k, err, Vector::Zero(1), Vector::Zero(1));
    EXPECT_EQ(st.switching_gain, 0.0);
    EXPECT_TRUE(st.control.adaptive_robust_part.isZero());
  }
}
