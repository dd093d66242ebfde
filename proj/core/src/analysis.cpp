#include "epcag/analysis.hpp"

#include "epcag/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace epcag {
namespace {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

// Bubble eigenvalues satisfying `first` to the top of the Schur form with
// Givens swaps of adjacent diagonal entries.
template <class Pred>
void reorder_schur(CMatrix& t, CMatrix& u, Pred first) {
  const auto n = t.rows();
  bool changed = true;
  while (changed) {
    changed = false;
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
      if (first(t(k, k)) || !first(t(k + 1, k + 1))) continue;
      Eigen::JacobiRotation<Complex> rot;
      rot.makeGivens(t(k, k + 1), t(k + 1, k + 1) - t(k, k));
      t.applyOnTheLeft(k, k + 1, rot.adjoint());
      t.applyOnTheRight(k, k + 1, rot);
      u.applyOnTheRight(k, k + 1, rot);
      t(k + 1, k) = 0.0;
      changed = true;
    }
  }
}

// Real orthonormal basis of span(q) for a conjugation-closed subspace. The
// columns of the orthogonal projector picked by pivoted QR are taken in index
// order, so coordinate subspaces come back as unit vectors.
Matrix real_basis(const CMatrix& q) {
  const auto n = q.rows();
  const auto r = q.cols();
  if (r == 0) return Matrix(n, 0);
  const Matrix p = (q * q.adjoint()).real();
  Eigen::ColPivHouseholderQR<Matrix> qr(p);
  std::vector<Eigen::Index> cols(static_cast<std::size_t>(r));
  for (Eigen::Index j = 0; j < r; ++j) cols[j] = qr.colsPermutation().indices()(j);
  std::sort(cols.begin(), cols.end());
  Matrix basis(n, r);
  for (Eigen::Index j = 0; j < r; ++j) {
    Vector v = p.col(cols[j]);
    for (Eigen::Index i = 0; i < j; ++i) v -= basis.col(i).dot(v) * basis.col(i);
    for (Eigen::Index i = 0; i < j; ++i) v -= basis.col(i).dot(v) * basis.col(i);
    basis.col(j) = v / v.norm();
  }
  return basis;
}

int numeric_rank(const CMatrix& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index j = 0; j < s.size(); ++j) r += s(j) > tol ? 1 : 0;
  return r;
}

// Largest Jordan-like block over the eigenvalues of b, minus one.
int polynomial_power(const Matrix& b, const std::vector<Complex>& eig) {
  const auto d = b.rows();
  if (d == 0) return 0;
  std::vector<Complex> clusters;
  for (const auto& lam : eig) {
    const bool seen = std::any_of(clusters.begin(), clusters.end(),
                                  [&](const Complex& c) { return std::abs(c - lam) < 1e-6; });
    if (!seen) clusters.push_back(lam);
  }
  const double scale = std::max(1.0, norm2(b));
  int largest = 1;
  for (const auto& lam : clusters) {
    const CMatrix shifted = b.cast<Complex>() - lam * CMatrix::Identity(d, d);
    CMatrix power = CMatrix::Identity(d, d);
    int prev = static_cast<int>(d);
    for (int j = 1; j <= d; ++j) {
      power = power * shifted;
      const int r = numeric_rank(power, 1e-8 * std::pow(scale, j));
      if (r == prev) {
        largest = std::max(largest, j - 1);
        break;
      }
      prev = r;
      if (j == d) largest = std::max(largest, static_cast<int>(d));
    }
  }
  return largest - 1;
}

}  // namespace

Vector SpectralSplit::join(const Vector& u, const Vector& v) const {
  Vector y(n);
  y.head(k) = u;
  y.tail(n - k) = v;
  return y;
}

GrowthSample sample_growth(const SpectralSplit& split, double t_check, int grid) {
  GrowthSample out;
  const double h = t_check / grid;
  if (split.k > 0) {
    const Matrix step = expm(split.b_plus * h);
    Matrix e = Matrix::Identity(split.k, split.k);
    for (int j = 0; j <= grid; ++j) {
      out.stable_ratio = std::max(out.stable_ratio, norm2(e) * std::exp(split.sigma * j * h));
      e = step * e;
    }
  }
  if (split.k < split.n) {
    const auto d = split.n - split.k;
    const Matrix step = expm(-split.b_minus * h);
    Matrix e = Matrix::Identity(d, d);
    for (int j = 0; j <= grid; ++j) {
      const double t = j * h;
      out.centre_ratio = std::max(out.centre_ratio, norm2(e) / (1.0 + std::pow(t, split.m_pow)));
      e = step * e;
    }
  }
  return out;
}

SpectralSplit spectral_split(const Matrix& a, const SplitOptions& options) {
  if (a.rows() == 0 || a.rows() != a.cols()) {
    throw ParameterError("analysis", "matrix must be square and non-empty");
  }
  const auto n = a.rows();
  const double tol = options.tol_eig;

  Eigen::ComplexSchur<CMatrix> schur(a.cast<Complex>());
  CMatrix t = schur.matrixT();
  CMatrix u = schur.matrixU();

  SpectralSplit out;
  out.n = static_cast<int>(n);
  for (Eigen::Index j = 0; j < n; ++j) out.eigenvalues.push_back(t(j, j));
  for (const auto& lam : out.eigenvalues) {
    if (lam.real() > tol) {
      std::ostringstream os;
      os << "eigenvalue " << lam.real() << (lam.imag() >= 0 ? "+" : "") << lam.imag()
         << "i has positive real part";
      throw PositiveSpectrumError(os.str());
    }
  }
  auto stable = [tol](const Complex& lam) { return lam.real() < -tol; };
  out.k = static_cast<int>(
      std::count_if(out.eigenvalues.begin(), out.eigenvalues.end(), stable));
  const int k = out.k;

  CMatrix ts = t, us = u;
  reorder_schur(ts, us, stable);
  CMatrix tc = t, uc = u;
  reorder_schur(tc, uc, [&](const Complex& lam) { return !stable(lam); });

  Matrix s(n, n);
  s.leftCols(k) = real_basis(us.leftCols(k));
  s.rightCols(n - k) = real_basis(uc.leftCols(n - k));
  out.transform_cond = condition_number(s);
  if (!(out.transform_cond <= options.cond_max)) {
    std::ostringstream os;
    os << "block transform condition number " << out.transform_cond << " exceeds "
       << options.cond_max;
    throw ConditioningError(os.str(), out.transform_cond);
  }
  out.transform_inv = s;
  out.transform = s.inverse();
  const Matrix blocks = out.transform * a * s;
  out.b_plus = blocks.topLeftCorner(k, k);
  out.b_minus = blocks.bottomRightCorner(n - k, n - k);
  Matrix diag = Matrix::Zero(n, n);
  diag.topLeftCorner(k, k) = out.b_plus;
  diag.bottomRightCorner(n - k, n - k) = out.b_minus;
  out.reconstruction_error = (s * diag * out.transform - a).norm();

  std::vector<Complex> centre;
  out.mu = -std::numeric_limits<double>::infinity();
  for (const auto& lam : out.eigenvalues) {
    if (stable(lam)) {
      out.mu = std::max(out.mu, lam.real());
    } else {
      centre.push_back(lam);
    }
  }
  if (options.sigma > 0.0) {
    if (k > 0 && !(options.sigma < -out.mu)) {
      throw ParameterError("analysis", "sigma must lie in (0, |mu|)");
    }
    out.sigma = options.sigma;
  } else {
    // Vacuous when there is no stable block.
    out.sigma = k > 0 ? -out.mu / 2.0 : 1.0;
  }
  out.m_pow = polynomial_power(out.b_minus, centre);

  const auto g = sample_growth(out, options.t_check, options.grid);
  out.k_const = options.inflation * std::max({1.0, g.stable_ratio, g.centre_ratio});
  return out;
}

double gamma_closed_form(double alpha, int m_pow) {
  return 1.0 / alpha + std::tgamma(m_pow + 1.0) / std::pow(alpha, m_pow + 1);
}

ConstantsBundle compute_constants(const Matrix& a, const SpectralSplit& split,
                                  const ArgumentSchedule& sched, double l, double alpha) {
  if (!(alpha > 0.0) || !(alpha < split.sigma)) {
    std::ostringstream os;
    os << "alpha = " << alpha << " must lie in (0, sigma = " << split.sigma << ")";
    throw ParameterError("analysis", os.str());
  }
  ConstantsBundle b;
  b.omega = norm2(a);
  b.theta = sched.theta_bound();
  b.M_up = std::exp(b.omega * b.theta);
  b.m_low = std::exp(-b.omega * b.theta);
  b.l = l;
  b.l_block = l * norm2(split.transform) * norm2(split.transform_inv);
  b.alpha = alpha;
  b.sigma = split.sigma;
  b.K = split.k_const;
  b.m_pow = split.m_pow;
  b.gamma = gamma_closed_form(alpha, split.m_pow);
  b.p_const = b.K * (1.0 + std::exp(alpha * b.theta)) * (1.0 / (b.sigma - alpha) + b.gamma);

  const double x = b.M_up * l * b.theta;
  const double q = x * std::exp(x);
  b.c5_lhs = {q, 2.0 * x,
              q < 1.0 ? b.M_up * b.M_up * l * b.theta * ((q + 1.0) / (1.0 - q) + q)
                      : std::numeric_limits<double>::infinity()};
  b.c5_rhs = {1.0, 1.0, b.m_low};
  for (int j = 0; j < 3; ++j) {
    b.c5_pass[j] = b.c5_lhs[j] < b.c5_rhs[j];
    b.c5_near_boundary[j] = b.c5_pass[j] && b.c5_lhs[j] > 0.9 * b.c5_rhs[j];
  }
  b.two_p_l = 2.0 * b.p_const * b.l_block;
  b.c10_pass = b.two_p_l < 1.0;
  return b;
}

bool ConditionReport::all_pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
}

const ConditionEntry& ConditionReport::at(const std::string& id) const {
  auto it = std::find_if(entries.begin(), entries.end(),
                         [&](const auto& e) { return e.id == id; });
  if (it == entries.end()) throw ParameterError("analysis", "no condition " + id);
  return *it;
}

std::string ConditionReport::table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-4s %-6s %13s %13s  %s\n", "cond", "status", "value",
                "threshold", "detail");
  os << line;
  for (const auto& e : entries) {
    const char* status = e.pass ? (e.near_boundary ? "near" : "pass") : "FAIL";
    std::snprintf(line, sizeof line, "%-4s %-6s %13.6g %13.6g  ", e.id.c_str(), status, e.value,
                  e.threshold);
    os << line << e.detail << '\n';
  }
  return os.str();
}

ConditionReport check_conditions(const HybridSystem& sys, const ArgumentSchedule& sched,
                                 const SpectralSplit& split, const ConstantsBundle& bundle,
                                 int probes, std::uint64_t seed, double tol_eig) {
  ConditionReport report;
  const int n = sys.dim();
  const double l = sys.lipschitz();

  {
    ConditionEntry e{"C1", sys.a().allFinite(), false, static_cast<double>(n), 0.0, ""};
    std::ostringstream os;
    os << "real " << n << "x" << n << " matrix; schedule window [" << sched.t_min() << ", "
       << sched.t_max() << "], gap bound " << sched.theta_bound();
    e.detail = os.str();
    report.entries.push_back(e);
  }
  {
    const auto pr = sys.probe(probes, seed, sys.options().probe_radius);
    ConditionEntry e;
    e.id = "C2";
    e.value = pr.max_lipschitz_ratio;
    e.threshold = l;
    e.pass = pr.max_origin_residual <= 1e-12 && pr.max_lipschitz_ratio <= l * (1 + 1e-6) + 1e-12;
    std::ostringstream os;
    os << "sampled Lipschitz ratio over " << probes << " probes; |f(t,0,0)| <= "
       << pr.max_origin_residual;
    e.detail = os.str();
    report.entries.push_back(e);
  }
  double centre_re = 0.0;
  for (const auto& lam : split.eigenvalues) {
    if (!(lam.real() < -tol_eig)) centre_re = std::max(centre_re, std::abs(lam.real()));
  }
  {
    ConditionEntry e;
    e.id = "C3";
    e.value = split.k > 0 ? split.mu : 0.0;
    e.threshold = 0.0;
    e.pass = split.k >= 1 && split.mu < 0.0;
    std::ostringstream os;
    os << "k = " << split.k << " stable eigenvalues, sigma = " << split.sigma
       << ", K = " << split.k_const << ", m = " << split.m_pow;
    e.detail = os.str();
    report.entries.push_back(e);
  }
  {
    ConditionEntry e;
    e.id = "C4";
    e.value = split.reconstruction_error;
    e.threshold = 1e-10 * std::max(1.0, sys.a().norm());
    e.pass = e.value <= e.threshold;
    std::ostringstream os;
    os << "block transform condition number " << split.transform_cond;
    e.detail = os.str();
    report.entries.push_back(e);
  }
  {
    ConditionEntry e;
    e.id = "C5";
    e.pass = bundle.c5_all();
    e.near_boundary = bundle.c5_near_boundary[0] || bundle.c5_near_boundary[1] ||
                      bundle.c5_near_boundary[2];
    e.threshold = 1.0;
    std::ostringstream os;
    for (int j = 0; j < 3; ++j) {
      e.value = std::max(e.value, bundle.c5_lhs[j] / bundle.c5_rhs[j]);
      os << (j ? "; " : "") << bundle.c5_lhs[j] << " < " << bundle.c5_rhs[j]
         << (bundle.c5_pass[j] ? "" : " fails");
    }
    e.detail = os.str();
    report.entries.push_back(e);
  }
  {
    ConditionEntry e;
    e.id = "10";
    e.value = bundle.two_p_l;
    e.threshold = 1.0;
    e.pass = bundle.c10_pass;
    e.near_boundary = e.pass && e.value > 0.9;
    std::ostringstream os;
    os << "2pl with p = " << bundle.p_const << ", block Lipschitz " << bundle.l_block;
    e.detail = os.str();
    report.entries.push_back(e);
  }
  {
    // Central differences of f at the origin.
    const double h = 1e-5;
    const auto& opt = sys.options();
    double worst = 0.0;
    const Vector zero = Vector::Zero(n);
    for (int s = 0; s < 5; ++s) {
      const double t = opt.t_lo + (opt.t_hi - opt.t_lo) * s / 4.0;
      for (int j = 0; j < n; ++j) {
        Vector e = Vector::Zero(n);
        e(j) = h;
        const Vector dz = (sys.nonlinearity(t, t, e, zero) - sys.nonlinearity(t, t, -e, zero)) / (2 * h);
        const Vector dw = (sys.nonlinearity(t, t, zero, e) - sys.nonlinearity(t, t, zero, -e)) / (2 * h);
        worst = std::max({worst, dz.norm(), dw.norm()});
      }
    }
    ConditionEntry e;
    e.id = "C6";
    e.value = worst;
    e.threshold = 10.0 * l * h;
    e.pass = worst <= e.threshold;
    e.detail = "largest Jacobian column at the origin (central differences, h = 1e-5)";
    report.entries.push_back(e);
  }
  {
    ConditionEntry e;
    e.id = "C7";
    e.value = centre_re;
    e.threshold = tol_eig;
    e.pass = split.k >= 1 && centre_re <= tol_eig;
    e.detail = "largest |Re lambda| over the centre block";
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace epcag
