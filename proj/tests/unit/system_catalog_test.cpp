#include "epcag/catalog.hpp"
#include "epcag/errors.hpp"
#include "epcag/system.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace epcag;

namespace {

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace

TEST(System, RhsAddsLinearPart) {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  HybridSystem sys(a, Nonlinearity([](double, const Vector&, const Vector& w) { return Vector(0.1 * w); }),
                   0.1);
  Vector z(2), w(2);
  z << 1, -1;
  w << 2, 3;
  const Vector r = sys.rhs(0.0, 0.0, z, w);
  EXPECT_DOUBLE_EQ(r(0), 1 - 2 + 0.2);
  EXPECT_DOUBLE_EQ(r(1), 3 - 4 + 0.3);
}

TEST(System, RejectsNonzeroAtOrigin) {
  EXPECT_THROW(HybridSystem(Matrix::Identity(1, 1),
                            Nonlinearity([](double t, const Vector&, const Vector&) {
                              return Vector(Vector::Constant(1, 1e-3 * std::sin(t) + 1e-3));
                            }),
                            1.0),
               ValidationError);
}

TEST(System, RejectsUnderstatedLipschitz) {
  auto f = Nonlinearity([](double, const Vector& z, const Vector&) { return Vector(0.5 * z); });
  EXPECT_THROW(HybridSystem(Matrix::Identity(1, 1), f, 0.4), ValidationError);
  EXPECT_NO_THROW(HybridSystem(Matrix::Identity(1, 1), f, 0.5));
  EXPECT_THROW(HybridSystem(Matrix::Identity(1, 1), f, -1.0), ValidationError);
  EXPECT_THROW(HybridSystem(Matrix::Zero(2, 3), f, 1.0), ValidationError);
}

TEST(Catalog, ListsRequiredEntries) {
  const auto& zero = catalog_find("zero");
  EXPECT_DOUBLE_EQ(zero.lipschitz(catalog_params(zero, {})), 0.0);
  const auto& quad = catalog_find("example1-quadratic");
  const auto f = quad.make(catalog_params(quad, {}), 1);
  EXPECT_DOUBLE_EQ(f(0.0, Vector::Constant(1, 5.0), Vector::Constant(1, 3.0))(0), -9.0);
  const auto& lin = catalog_find("epca-linear");
  const auto g = lin.make(catalog_params(lin, {{"b", -0.7}}), 3);
  EXPECT_DOUBLE_EQ(g(0.0, Vector::Zero(3), Vector::Constant(3, 2.0))(2), -1.4);
  EXPECT_DOUBLE_EQ(lin.lipschitz(catalog_params(lin, {{"b", -0.7}})), 0.7);
  EXPECT_NO_THROW(catalog_find("damped-cubic"));
  EXPECT_NO_THROW(catalog_find("tanh-coupled"));
}

TEST(Catalog, UnknownNamesAndParametersThrow) {
  EXPECT_THROW(catalog_find("sine"), ParameterError);
  EXPECT_THROW(catalog_params(catalog_find("zero"), {{"b", 1.0}}), ParameterError);
  EXPECT_THROW(make_catalog_system("tanh-coupled", {}, Matrix::Identity(3, 3)), ParameterError);
}

// Each analytic Lipschitz formula bounds sampled difference quotients, both
// for far-apart pairs and for nearby pairs around the steepest region.
TEST(Catalog, LipschitzFormulasBoundSampledRatios) {
  struct Case {
    std::string name;
    ParamMap params;
    int n;
    double radius;
  };
  const std::vector<Case> cases{
      {"zero", {}, 3, 1.0},
      {"example1-quadratic", {{"R", 2.0}}, 1, 2.0},
      {"epca-linear", {{"b", 0.3}}, 2, 5.0},
      {"damped-cubic", {}, 2, 1.0},
      {"damped-cubic", {{"s", -1.0}, {"kc", 0.4}, {"rho", 0.2}}, 2, 1.0},
      {"tanh-coupled", {{"eps", 0.05}}, 2, 3.0},
  };
  std::mt19937_64 rng(11);
  for (const auto& c : cases) {
    const auto& e = catalog_find(c.name);
    const auto p = catalog_params(e, c.params);
    const auto f = e.make(p, c.n);
    const double l = e.lipschitz(p);
    const double rho = p.count("rho") ? p.at("rho") : 1.0;
    std::uniform_real_distribution<double> box(-c.radius, c.radius);
    std::uniform_real_distribution<double> near(-rho, rho);
    double worst = 0.0;
    for (int k = 0; k < 4000; ++k) {
      Vector z1(c.n), z2(c.n), w1(c.n), w2(c.n);
      for (int i = 0; i < c.n; ++i) {
        if (k % 2) {
          z1(i) = near(rng);
          w1(i) = near(rng);
          z2(i) = z1(i) + 1e-4 * near(rng);
          w2(i) = w1(i) + 1e-4 * near(rng);
        } else {
          z1(i) = box(rng);
          z2(i) = box(rng);
          w1(i) = box(rng);
          w2(i) = box(rng);
        }
      }
      const double den = (z1 - z2).norm() + (w1 - w2).norm();
      worst = std::max(worst, (f(0.0, z1, w1) - f(0.0, z2, w2)).norm() / den);
    }
    EXPECT_LE(worst, l * (1.0 + 1e-9)) << c.name;
    EXPECT_LE(f(0.3, Vector::Zero(c.n), Vector::Zero(c.n)).norm(), 1e-15) << c.name;
  }
}

TEST(Catalog, SystemUsesFormulaUnlessOverridden) {
  const auto sys = make_catalog_system("damped-cubic", {{"eps", 0.02}, {"kc", 0.0}}, diag2(-1, 0));
  EXPECT_DOUBLE_EQ(sys.lipschitz(), 0.02 * 9.0 / 8.0);
  const auto loose = make_catalog_system("tanh-coupled", {}, diag2(-1, 0), {}, 0.5);
  EXPECT_DOUBLE_EQ(loose.lipschitz(), 0.5);
  EXPECT_EQ(sys.name(), "damped-cubic");
  EXPECT_TRUE(sys.autonomous());
}
