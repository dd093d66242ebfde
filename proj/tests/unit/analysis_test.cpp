#include "epcag/analysis.hpp"
#include "epcag/catalog.hpp"
#include "epcag/errors.hpp"
#include "epcag/linalg.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <gtest/gtest.h>

#include <random>

using namespace epcag;

namespace {

ArgumentSchedule epca(long lo, long hi) {
  ScheduleParams p;
  p.i_min = lo;
  p.i_max = hi;
  return make_schedule(ScheduleKind::epca, p);
}

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace

TEST(Analysis, DiagonalSplit) {
  const auto s = spectral_split(diag2(-1.0, 0.0));
  EXPECT_EQ(s.n, 2);
  EXPECT_EQ(s.k, 1);
  EXPECT_DOUBLE_EQ(s.mu, -1.0);
  EXPECT_DOUBLE_EQ(s.sigma, 0.5);
  EXPECT_EQ(s.m_pow, 0);
  EXPECT_NEAR(s.b_plus(0, 0), -1.0, 1e-14);
  EXPECT_NEAR(s.b_minus(0, 0), 0.0, 1e-14);
  EXPECT_NEAR(s.k_const, 1.1, 1e-12);
  EXPECT_LT(s.reconstruction_error, 1e-14);
}

TEST(Analysis, BlocksReconstructNonNormalMatrix) {
  // stable pair -1 +- 2i, centre rotation +- i and a centre Jordan block
  Matrix a(4, 4);
  a << -1, 2, 5, 0,
       -2, -1, 0, 3,
       0, 0, 0, 1,
       0, 0, -1, 0;
  const auto s = spectral_split(a);
  EXPECT_EQ(s.k, 2);
  EXPECT_LT(s.reconstruction_error, 1e-12);
  // T A T^{-1} is block diagonal
  const Matrix blocks = s.transform * a * s.transform_inv;
  EXPECT_LT(blocks.topRightCorner(2, 2).norm(), 1e-12);
  EXPECT_LT(blocks.bottomLeftCorner(2, 2).norm(), 1e-12);
  Vector z(4);
  z << 0.3, -1.0, 2.0, 0.5;
  EXPECT_LT((s.from_blocks(s.to_blocks(z)) - z).norm(), 1e-13);
  EXPECT_LT((s.join(s.u_part(s.to_blocks(z)), s.v_part(s.to_blocks(z))) - s.to_blocks(z)).norm(), 1e-15);
}

TEST(Analysis, JordanCentreBlockNeedsPolynomialWeight) {
  Matrix a = Matrix::Zero(3, 3);
  a(0, 0) = -2.0;
  a(1, 2) = 1.0;
  const auto s = spectral_split(a);
  EXPECT_EQ(s.k, 1);
  EXPECT_EQ(s.m_pow, 1);
}

// Sampled envelopes hold on a finer and longer grid than the one K came from.
TEST(Analysis, GrowthEnvelopesHold) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a(i, j) = 0.4 * g(rng);
    a(0, 0) -= 2.0;
    a(1, 1) -= 1.5;
    // force a centre direction: a rotation-free null vector
    a.row(2).setZero();
    a.col(2).setZero();
    const auto s = spectral_split(a);
    ASSERT_EQ(s.k, 2);
    for (int j = 0; j <= 600; ++j) {
      const double t = 60.0 * j / 600.0;
      EXPECT_LE(norm2(expm(s.b_plus * t)), s.k_const * std::exp(-s.sigma * t) * (1 + 1e-9));
      EXPECT_LE(norm2(expm(-s.b_minus * t)), s.k_const * (1.0 + std::pow(t, s.m_pow)) * (1 + 1e-9));
    }
  }
}

TEST(Analysis, PositiveSpectrumAndConditioning) {
  EXPECT_THROW(spectral_split(diag2(-1.0, 0.2)), PositiveSpectrumError);
  Matrix bad(2, 2);
  bad << -1.0, 1e12, 0.0, 0.0;
  EXPECT_THROW(spectral_split(bad), ConditioningError);
  SplitOptions o;
  o.sigma = 1.5;
  EXPECT_THROW(spectral_split(diag2(-1.0, 0.0), o), ParameterError);
}

TEST(Analysis, GammaMatchesQuadrature) {
  boost::math::quadrature::exp_sinh<double> integrator;
  for (int m = 0; m <= 3; ++m) {
    for (double alpha : {0.1, 0.25, 0.5, 1.3}) {
      const double q = integrator.integrate(
          [&](double t) {
            if (alpha * t > 700.0) return 0.0;
            return (1.0 + std::pow(t, m)) * std::exp(-alpha * t);
          });
      EXPECT_NEAR(gamma_closed_form(alpha, m), q, 1e-9 * q) << m << " " << alpha;
    }
  }
}

TEST(Analysis, ConstantsFromDefinitions) {
  const Matrix a = diag2(-1.0, 0.0);
  const auto s = spectral_split(a);
  const auto b = compute_constants(a, s, epca(0, 10), 0.01, 0.25);
  EXPECT_DOUBLE_EQ(b.omega, 1.0);
  EXPECT_DOUBLE_EQ(b.theta, 1.0);
  EXPECT_NEAR(b.M_up, std::exp(1.0), 1e-15);
  EXPECT_NEAR(b.m_low, std::exp(-1.0), 1e-15);
  EXPECT_NEAR(b.gamma, 8.0, 1e-12);
  const double p = 1.1 * (1.0 + std::exp(0.25)) * (1.0 / 0.25 + 8.0);
  EXPECT_NEAR(b.p_const, p, 1e-12);
  EXPECT_NEAR(b.two_p_l, 2.0 * p * 0.01, 1e-12);
  EXPECT_TRUE(b.c10_pass);
  EXPECT_TRUE(b.c5_all());
  const double x = std::exp(1.0) * 0.01;
  EXPECT_NEAR(b.c5_lhs[0], x * std::exp(x), 1e-15);
  EXPECT_NEAR(b.anchor_ratio_bound(), 2.0 * x, 1e-15);
  EXPECT_THROW(compute_constants(a, s, epca(0, 10), 0.01, 0.5), ParameterError);
  EXPECT_THROW(compute_constants(a, s, epca(0, 10), 0.01, 0.0), ParameterError);
}

TEST(Analysis, SmallnessFailsForLargeLipschitz) {
  const Matrix a = diag2(-1.0, 0.0);
  const auto s = spectral_split(a);
  const auto b = compute_constants(a, s, epca(0, 10), 0.5, 0.25);
  EXPECT_FALSE(b.c5_all());
  EXPECT_FALSE(b.c10_pass);
  const auto near = compute_constants(a, s, epca(0, 10), 0.95 / (2.0 * std::exp(1.0)), 0.25);
  EXPECT_TRUE(near.c5_pass[1]);
  EXPECT_TRUE(near.c5_near_boundary[1]);
}

TEST(Analysis, ConditionReportEntries) {
  const Matrix a = diag2(-1.0, 0.0);
  const auto s = spectral_split(a);
  const auto sched = epca(-20, 20);
  const auto cubic = make_catalog_system("damped-cubic", {}, a);
  const auto b = compute_constants(a, s, sched, cubic.lipschitz(), 0.25);
  const auto rep = check_conditions(cubic, sched, s, b, 100, 1);
  for (const char* id : {"C1", "C2", "C3", "C4", "C5", "10", "C6", "C7"}) {
    EXPECT_TRUE(rep.at(id).pass) << id << " " << rep.at(id).detail;
  }
  EXPECT_TRUE(rep.all_pass());
  EXPECT_NE(rep.table().find("C6"), std::string::npos);

  // tanh coupling has a nonzero derivative at the origin
  const auto tanh = make_catalog_system("tanh-coupled", {}, a);
  const auto rep2 = check_conditions(tanh, sched, s, b, 100, 1);
  EXPECT_FALSE(rep2.at("C6").pass);
  EXPECT_FALSE(rep2.all_pass());
  EXPECT_THROW(rep2.at("C9"), ParameterError);
}
