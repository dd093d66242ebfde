#include "picard.hpp"

#include "epcag/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace epcag::detail {
namespace {

bool near(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

std::size_t find_node(const std::vector<double>& times, double t) {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it != times.end() && near(*it, t)) return static_cast<std::size_t>(it - times.begin());
  if (it != times.begin() && near(*std::prev(it), t)) {
    return static_cast<std::size_t>(std::prev(it) - times.begin());
  }
  std::ostringstream os;
  os << "time " << t << " is not a grid node";
  throw ParameterError("manifolds", os.str());
}

struct Piece {
  std::size_t first = 0;  // global index of the left node
  int steps = 0;
  double h = 0.0;
  double anchor = 0.0;
  std::size_t anchor_node = 0;
  std::size_t table = 0;  // index into the exponential tables
};

// e^{B m h} for m = -3..3, one array per block.
struct ExpTable {
  double h = 0.0;
  std::vector<std::array<Matrix, 7>> blocks;
  const Matrix& get(std::size_t block, int m) const { return blocks[block][m + 3]; }
};

// Quadrature weights over [0, 1] for node offsets {s, s+1, s+2, s+3}, s = -2, -1, 0.
std::array<std::array<double, 4>, 3> stencil_weights() {
  std::array<std::array<double, 4>, 3> out{};
  for (int s = -2; s <= 0; ++s) {
    const std::array<double, 4> nodes{double(s), double(s + 1), double(s + 2), double(s + 3)};
    const auto w = interpolatory_weights(nodes);
    std::copy(w.begin(), w.end(), out[s + 2].begin());
  }
  return out;
}

}  // namespace

Vector PicardResult::at(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.end()) return states.back();
  const auto k = static_cast<std::size_t>(it - times.begin());
  if (near(*it, t) || k == 0) return states[k];
  if (near(times[k - 1], t)) return states[k - 1];
  const double s = (t - times[k - 1]) / (times[k] - times[k - 1]);
  return (1.0 - s) * states[k - 1] + s * states[k];
}

PicardResult picard_solve(const PicardProblem& pr) {
  const auto& sched = *pr.sched;
  const double slack = 1e-12 * std::max({1.0, std::abs(pr.lo), std::abs(pr.hi)});
  if (pr.lo < sched.t_min() - slack || pr.hi > sched.t_max() + slack) {
    std::ostringstream os;
    os << "integration domain [" << pr.lo << ", " << pr.hi << "] leaves the schedule window ["
       << sched.t_min() << ", " << sched.t_max() << "]";
    throw WindowError(os.str(), sched.t_min(), sched.t_max());
  }

  // Breakpoints: domain ends, every theta_j and zeta_j inside, extra times.
  std::vector<double> breaks{pr.lo, pr.hi};
  const long j_lo = sched.interval_index(std::max(pr.lo, sched.t_min()));
  const long j_hi = sched.interval_index(std::min(pr.hi, sched.t_max()));
  for (long j = j_lo; j <= j_hi; ++j) {
    for (double t : {sched.theta(j), sched.theta(j + 1), sched.zeta(j)}) {
      if (t > pr.lo && t < pr.hi) breaks.push_back(t);
    }
  }
  for (double t : pr.extra_breaks) {
    if (t > pr.lo && t < pr.hi) breaks.push_back(t);
  }
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> uniq;
  for (double t : breaks) {
    if (uniq.empty() || !near(uniq.back(), t)) uniq.push_back(t);
  }

  PicardResult out;
  auto& times = out.times;
  std::vector<Piece> pieces;
  times.push_back(uniq.front());
  for (std::size_t b = 0; b + 1 < uniq.size(); ++b) {
    const double a = uniq[b];
    const double len = uniq[b + 1] - a;
    Piece p;
    p.first = times.size() - 1;
    p.steps = std::max(4, static_cast<int>(std::ceil(len / pr.step - 1e-9)));
    p.h = len / p.steps;
    p.anchor = sched.beta(std::min(0.5 * (a + uniq[b + 1]), sched.t_max()));
    for (int q = 1; q < p.steps; ++q) times.push_back(a + len * q / p.steps);
    times.push_back(uniq[b + 1]);
    pieces.push_back(p);
  }
  const std::size_t nodes = times.size();
  for (auto& p : pieces) p.anchor_node = find_node(times, p.anchor);

  std::vector<ExpTable> tables;
  for (auto& p : pieces) {
    auto it = std::find_if(tables.begin(), tables.end(),
                           [&](const ExpTable& e) { return near(e.h, p.h); });
    if (it == tables.end()) {
      ExpTable e;
      e.h = p.h;
      for (const auto& blk : pr.blocks) {
        std::array<Matrix, 7> mats;
        const Matrix one = expm(blk.b * p.h);
        const Matrix inv = expm(-blk.b * p.h);
        const auto d = blk.b.rows();
        mats[3] = Matrix::Identity(d, d);
        for (int m = 1; m <= 3; ++m) {
          mats[3 + m] = one * mats[2 + m];
          mats[3 - m] = inv * mats[4 - m];
        }
        e.blocks.push_back(std::move(mats));
      }
      tables.push_back(std::move(e));
      it = std::prev(tables.end());
    }
    p.table = static_cast<std::size_t>(it - tables.begin());
  }

  // step k (from node k to k+1) -> (piece, local step)
  std::vector<std::pair<std::size_t, int>> step_of(nodes - 1);
  for (std::size_t pi = 0; pi < pieces.size(); ++pi) {
    for (int q = 0; q < pieces[pi].steps; ++q) step_of[pieces[pi].first + q] = {pi, q};
  }
  std::vector<std::size_t> start_node;
  for (const auto& blk : pr.blocks) start_node.push_back(find_node(times, blk.start_time));

  const auto weights = stencil_weights();
  const int dim = pr.dim;

  // Integrand per piece; nodes shared by two pieces carry one value per side.
  std::vector<std::vector<Vector>> g(pieces.size());

  auto sweep = [&](const std::vector<Vector>& y, bool with_g) {
    if (with_g) {
      for (std::size_t pi = 0; pi < pieces.size(); ++pi) {
        const auto& p = pieces[pi];
        g[pi].resize(p.steps + 1);
        const Vector& ybar = y[p.anchor_node];
        for (int r = 0; r <= p.steps; ++r) {
          g[pi][r] = pr.g(times[p.first + r], p.anchor, y[p.first + r], ybar);
        }
      }
    }
    std::vector<Vector> next(nodes, Vector::Zero(dim));
    for (std::size_t bi = 0; bi < pr.blocks.size(); ++bi) {
      const auto& blk = pr.blocks[bi];
      const auto d = blk.b.rows();
      const std::size_t s0 = start_node[bi];
      next[s0].segment(blk.offset, d) = blk.datum;
      auto quad = [&](std::size_t k, bool forward) {
        const auto [pi, q] = step_of[k];
        const auto& p = pieces[pi];
        const auto& tab = tables[p.table];
        const int first = std::clamp(q - 1, 0, p.steps - 3);
        const int s = first - q;
        Vector acc = Vector::Zero(d);
        if (!with_g) return acc;
        for (int j = 0; j < 4; ++j) {
          const int r = first + j;
          const int m = forward ? (q + 1 - r) : (q - r);
          acc.noalias() += (weights[s + 2][j] * p.h) * (tab.get(bi, m) * g[pi][r].segment(blk.offset, d));
        }
        return acc;
      };
      for (std::size_t k = s0; k + 1 < nodes; ++k) {
        const auto& tab = tables[pieces[step_of[k].first].table];
        next[k + 1].segment(blk.offset, d) =
            tab.get(bi, 1) * next[k].segment(blk.offset, d) + quad(k, true);
      }
      for (std::size_t k = s0; k-- > 0;) {
        const auto& tab = tables[pieces[step_of[k].first].table];
        next[k].segment(blk.offset, d) =
            tab.get(bi, -1) * next[k + 1].segment(blk.offset, d) - quad(k, false);
      }
    }
    return next;
  };

  std::vector<Vector> y(nodes, Vector::Zero(dim));
  if (pr.init == PicardInit::linear) y = sweep(y, false);

  for (int m = 1; m <= pr.max_iter; ++m) {
    auto next = sweep(y, true);
    double delta = 0.0;
    for (std::size_t k = 0; k < nodes; ++k) delta = std::max(delta, (next[k] - y[k]).norm());
    y = std::move(next);
    out.iterations = m;
    out.deltas.push_back(delta);
    out.last_delta = delta;
    if (!std::isfinite(delta)) {
      throw DivergenceError("Picard iterate became non-finite", out.deltas);
    }
    if (delta < pr.tol) {
      out.states = std::move(y);
      return out;
    }
    const auto& ds = out.deltas;
    const auto c = ds.size();
    if (c >= 4 && ds[c - 1] >= ds[c - 2] && ds[c - 2] >= ds[c - 3] && ds[c - 3] >= ds[c - 4]) {
      std::ostringstream os;
      os << "Picard deltas stopped decreasing at iterate " << m << " (delta " << delta << ")";
      throw DivergenceError(os.str(), out.deltas);
    }
  }
  std::ostringstream os;
  os << "Picard iteration did not reach tol " << pr.tol << " in " << pr.max_iter
     << " iterates (last delta " << out.last_delta << ")";
  throw DivergenceError(os.str(), out.deltas);
}

}  // namespace epcag::detail
