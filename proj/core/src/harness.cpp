#include "epcag/harness.hpp"

#include "epcag/errors.hpp"

#include <json.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#ifndef EPCAG_VERSION
#define EPCAG_VERSION "0.0.0"
#endif

namespace epcag {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& what) { throw ConfigError(what); }

// Typed access to one JSON object; finish() rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j_->is_object()) fail(path_ + " must be an object");
  }

  double number(const std::string& key, double fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_number()) fail(where(key) + " must be a number");
    return v->get<double>();
  }

  long integer(const std::string& key, long fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail(where(key) + " must be an integer");
    return v->get<long>();
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) fail(where(key) + " must be a non-negative integer");
    return v->get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(where(key) + " must be true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_string()) fail(where(key) + " must be a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_array()) fail(where(key) + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : *v) {
      if (!x.is_number()) fail(where(key) + " must be an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  /// Object of name -> number.
  ParamMap number_map(const std::string& key) {
    ParamMap out;
    const json* v = take(key);
    if (!v) return out;
    if (!v->is_object()) fail(where(key) + " must be an object of numbers");
    for (const auto& [name, x] : v->items()) {
      if (!x.is_number()) fail(where(key) + "." + name + " must be a number");
      out[name] = x.get<double>();
    }
    return out;
  }

  std::optional<Reader> child(const std::string& key) {
    const json* v = take(key);
    if (!v) return std::nullopt;
    return Reader(*v, where(key));
  }

  const json* raw(const std::string& key) { return take(key); }

  std::string where(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& item : j_->items()) {
      if (!used_.count(item.key())) fail("unknown key " + where(item.key()));
    }
  }

 private:
  const json* take(const std::string& key) {
    used_.insert(key);
    auto it = j_->find(key);
    if (it == j_->end() || it->is_null()) return nullptr;
    return &*it;
  }

  const json* j_;
  std::string path_;
  std::set<std::string> used_;
};

void require_positive(double v, const std::string& name) {
  if (!(v > 0.0) || !std::isfinite(v)) fail(name + " must be positive");
}

void require_positive(long v, const std::string& name) {
  if (v <= 0) fail(name + " must be positive");
}

Matrix read_matrix(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) fail(name + " must be a non-empty array of rows");
  const auto n = static_cast<Eigen::Index>(j.size());
  Matrix a(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      fail(name + " must be square (row " + std::to_string(r) + ")");
    }
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto& x = row[static_cast<std::size_t>(c)];
      if (!x.is_number()) fail(name + " entries must be numbers");
      a(r, c) = x.get<double>();
    }
  }
  return a;
}

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

bool needs_system(const std::string& recipe) { return recipe != "example1"; }

bool needs_initial(const std::string& recipe) {
  return recipe == "simulate" || recipe == "continue-backward" || recipe == "phase";
}

void read_system(Reader r, ExperimentConfig& cfg) {
  auto& s = cfg.system;
  const json* a = r.raw("A");
  if (!a) fail(r.where("A") + " is required");
  s.a = read_matrix(*a, r.where("A"));
  s.nonlinearity = r.string("nonlinearity", "zero");
  s.params = r.number_map("params");
  const double l = r.number("lipschitz", std::numeric_limits<double>::quiet_NaN());
  if (!std::isnan(l)) {
    if (!(l >= 0.0)) fail(r.where("lipschitz") + " must be non-negative");
    s.lipschitz = l;
  }
  s.validate = r.boolean("validate", true);
  r.finish();

  const CatalogEntry* entry = nullptr;
  try {
    entry = &catalog_find(s.nonlinearity);
    catalog_params(*entry, s.params);
  } catch (const ParameterError& e) {
    fail(r.where("nonlinearity") + ": " + e.what());
  }
  if (entry->dim != 0 && entry->dim != s.a.rows()) {
    fail(r.where("nonlinearity") + ": '" + s.nonlinearity + "' needs dimension " +
         std::to_string(entry->dim));
  }
}

void read_schedule(Reader r, ExperimentConfig& cfg, bool seed_override) {
  auto& s = cfg.schedule;
  try {
    s.kind = parse_schedule_kind(r.string("kind", "epca"));
  } catch (const Error& e) {
    fail(r.where("kind") + ": " + e.what());
  }
  s.params.i_min = r.integer("i_min", s.params.i_min);
  s.params.i_max = r.integer("i_max", s.params.i_max);
  s.params.thetas = r.numbers("thetas", {});
  s.params.zetas = r.numbers("zetas", {});
  s.params.theta_bound = r.number("theta_bound", s.params.theta_bound);
  s.params.origin = r.number("origin", s.params.origin);
  s.params.seed = r.seed("seed", cfg.seed);
  if (seed_override) s.params.seed = cfg.seed;
  r.finish();
  if (s.kind != ScheduleKind::explicit_arrays && s.params.i_max <= s.params.i_min) {
    fail(r.where("i_max") + " must exceed i_min");
  }
  if (s.kind == ScheduleKind::randomized) require_positive(s.params.theta_bound, r.where("theta_bound"));
}

void read_solver(Reader r, SolverOptions& s, const std::string& path) {
  s.step = r.number("step", s.step);
  s.tol = r.number("tol", s.tol);
  s.max_iter = static_cast<int>(r.integer("max_iter", s.max_iter));
  s.newton_fallback = r.boolean("newton_fallback", s.newton_fallback);
  s.uniqueness_probe = r.boolean("uniqueness_probe", s.uniqueness_probe);
  r.finish();
  require_positive(s.step, path + ".step");
  require_positive(s.tol, path + ".tol");
  require_positive(static_cast<long>(s.max_iter), path + ".max_iter");
}

void read_analysis(Reader r, AnalysisSpec& a) {
  a.split.tol_eig = r.number("tol_eig", a.split.tol_eig);
  a.split.sigma = r.number("sigma", a.split.sigma);
  a.split.t_check = r.number("t_check", a.split.t_check);
  a.split.grid = static_cast<int>(r.integer("grid", a.split.grid));
  a.split.inflation = r.number("inflation", a.split.inflation);
  a.split.cond_max = r.number("cond_max", a.split.cond_max);
  a.probes = static_cast<int>(r.integer("probes", a.probes));
  r.finish();
  require_positive(a.split.tol_eig, "analysis.tol_eig");
  require_positive(a.split.t_check, "analysis.t_check");
  require_positive(static_cast<long>(a.split.grid), "analysis.grid");
  require_positive(a.split.inflation, "analysis.inflation");
  require_positive(a.split.cond_max, "analysis.cond_max");
  require_positive(static_cast<long>(a.probes), "analysis.probes");
  if (a.split.sigma < 0.0) fail("analysis.sigma must be non-negative");
}

void read_manifold(Reader r, ManifoldSpec& m) {
  auto& o = m.options;
  m.alpha = r.number("alpha", m.alpha);
  o.horizon = r.number("horizon", o.horizon);
  o.tol = r.number("tol", o.tol);
  o.max_iter = static_cast<int>(r.integer("max_iter", o.max_iter));
  o.step = r.number("step", o.step);
  const std::string init = r.string("init", "zero");
  if (init == "zero") o.init = PicardStart::zero;
  else if (init == "linear") o.init = PicardStart::linear;
  else fail("manifold.init must be \"zero\" or \"linear\"");
  o.kappa = r.number("kappa", o.kappa);
  o.kappa_ratio = r.number("kappa_ratio", o.kappa_ratio);
  m.t0 = r.number("t0", m.t0);
  m.box = r.number("box", m.box);
  m.grid = static_cast<int>(r.integer("grid", m.grid));
  m.lipschitz_pairs = static_cast<int>(r.integer("lipschitz_pairs", m.lipschitz_pairs));
  if (auto c = r.child("cache")) {
    auto& g = m.cache;
    g.box = c->number("box", g.box);
    g.v_nodes = static_cast<int>(c->integer("v_nodes", g.v_nodes));
    g.inner = c->number("inner", g.inner);
    g.t_nodes = static_cast<int>(c->integer("t_nodes", g.t_nodes));
    g.use_periodicity = c->boolean("use_periodicity", g.use_periodicity);
    c->finish();
    require_positive(g.box, "manifold.cache.box");
    require_positive(g.inner, "manifold.cache.inner");
    if (g.v_nodes < 3 || g.v_nodes % 2 == 0) fail("manifold.cache.v_nodes must be odd and >= 3");
    if (g.t_nodes < 2) fail("manifold.cache.t_nodes must be >= 2");
  }
  r.finish();
  if (m.alpha < 0.0) fail("manifold.alpha must be non-negative");
  if (o.horizon < 0.0) fail("manifold.horizon must be non-negative");
  if (o.kappa < 0.0) fail("manifold.kappa must be non-negative");
  require_positive(o.tol, "manifold.tol");
  require_positive(o.step, "manifold.step");
  require_positive(static_cast<long>(o.max_iter), "manifold.max_iter");
  if (!(o.kappa_ratio > 0.0 && o.kappa_ratio < 1.0)) fail("manifold.kappa_ratio must lie in (0, 1)");
  require_positive(m.box, "manifold.box");
  if (m.grid < 2) fail("manifold.grid must be >= 2");
  require_positive(static_cast<long>(m.lipschitz_pairs), "manifold.lipschitz_pairs");
}

void read_initial(Reader r, InitialSpec& s) {
  s.t0 = r.number("t0", s.t0);
  s.z0 = to_vector(r.numbers("z0", {}));
  s.t_end = r.number("t_end", s.t_end);
  r.finish();
}

void read_phase(Reader r, PhaseOptions& p) {
  p.tol = r.number("tol", p.tol);
  p.max_iter = static_cast<int>(r.integer("max_iter", p.max_iter));
  p.span = r.number("span", p.span);
  p.samples = static_cast<int>(r.integer("samples", p.samples));
  r.finish();
  require_positive(p.tol, "phase.tol");
  require_positive(static_cast<long>(p.max_iter), "phase.max_iter");
  if (p.samples < 2) fail("phase.samples must be >= 2");
}

void read_stability(Reader r, StabilityOptions& s, std::uint64_t seed, bool seed_override) {
  s.radii = r.numbers("radii", s.radii);
  s.horizon = r.number("horizon", s.horizon);
  s.t0_samples = r.numbers("t0_samples", s.t0_samples);
  s.random_dirs = static_cast<int>(r.integer("random_dirs", s.random_dirs));
  s.seed = r.seed("seed", seed);
  if (seed_override) s.seed = seed;
  s.escape_factor = r.number("escape_factor", s.escape_factor);
  s.bound_factor = r.number("bound_factor", s.bound_factor);
  s.decay_factor = r.number("decay_factor", s.decay_factor);
  s.fit_r2 = r.number("fit_r2", s.fit_r2);
  s.solver.step = r.number("step", s.solver.step);
  r.finish();
  if (s.radii.empty()) fail("stability.radii must not be empty");
  for (double x : s.radii) require_positive(x, "stability.radii");
  if (s.horizon < 0.0) fail("stability.horizon must be non-negative");
  if (s.random_dirs < 0) fail("stability.random_dirs must be non-negative");
  require_positive(s.escape_factor, "stability.escape_factor");
  require_positive(s.bound_factor, "stability.bound_factor");
  require_positive(s.decay_factor, "stability.decay_factor");
  require_positive(s.fit_r2, "stability.fit_r2");
  require_positive(s.solver.step, "stability.step");
}

ExperimentConfig parse_json(json j, const Overrides& overrides) {
  if (!j.is_object()) fail("config must be a JSON object");
  if (overrides.recipe) j["recipe"] = *overrides.recipe;
  if (overrides.seed) j["seed"] = *overrides.seed;
  if (overrides.step) j["solver"]["step"] = *overrides.step;
  if (overrides.tol) j["solver"]["tol"] = *overrides.tol;

  ExperimentConfig cfg;
  Reader root(j, "");
  cfg.recipe = root.string("recipe", "");
  if (cfg.recipe.empty()) fail("recipe is required");
  const auto& names = recipe_names();
  if (std::find(names.begin(), names.end(), cfg.recipe) == names.end()) {
    fail("unknown recipe '" + cfg.recipe + "'");
  }
  cfg.seed = root.seed("seed", cfg.seed);
  const bool seed_override = overrides.seed.has_value();

  if (auto r = root.child("system")) read_system(*r, cfg);
  else if (needs_system(cfg.recipe)) fail("system is required for recipe " + cfg.recipe);
  if (auto r = root.child("schedule")) read_schedule(*r, cfg, seed_override);
  else cfg.schedule.params.seed = cfg.seed;
  if (cfg.recipe == "example1") {
    // the collision check compares two trajectories to 1e-8
    cfg.solver.step = 0.001;
    cfg.solver.tol = 1e-13;
  }
  if (auto r = root.child("solver")) read_solver(*r, cfg.solver, "solver");
  if (auto r = root.child("analysis")) read_analysis(*r, cfg.analysis);
  if (auto r = root.child("manifold")) read_manifold(*r, cfg.manifold);
  if (auto r = root.child("initial")) read_initial(*r, cfg.initial);
  if (auto r = root.child("phase")) read_phase(*r, cfg.phase);
  cfg.stability.seed = cfg.seed;
  if (auto r = root.child("stability")) read_stability(*r, cfg.stability, cfg.seed, seed_override);
  root.finish();

  if (needs_initial(cfg.recipe)) {
    if (cfg.initial.z0.size() == 0) fail("initial.z0 is required for recipe " + cfg.recipe);
    if (cfg.initial.z0.size() != cfg.system.a.rows()) {
      fail("initial.z0 has dimension " + std::to_string(cfg.initial.z0.size()) +
           ", system has " + std::to_string(cfg.system.a.rows()));
    }
  }
  if (cfg.recipe == "simulate" && !(cfg.initial.t_end > cfg.initial.t0)) {
    fail("initial.t_end must exceed initial.t0 for simulate");
  }
  if (cfg.recipe == "continue-backward" && !(cfg.initial.t_end < cfg.initial.t0)) {
    fail("initial.t_end must lie below initial.t0 for continue-backward");
  }
  cfg.phase.solver = cfg.solver;
  cfg.echo = j.dump(2);
  return cfg;
}

// ---- output helpers ---------------------------------------------------------

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const fs::path& path) : out_(path) {
    if (!out_) throw Error("harness", "cannot write " + path.string());
  }
  void header(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
    out_ << '\n';
  }
  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << fmt(values[i]);
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

std::vector<std::string> numbered(const std::string& stem, long count) {
  std::vector<std::string> out;
  for (long i = 1; i <= count; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

void write_trajectory(const fs::path& path, const Trajectory& tr, int n) {
  CsvWriter csv(path);
  auto cols = numbered("z_", n);
  cols.insert(cols.begin(), "t");
  cols.push_back("interval_index");
  csv.header(cols);
  for (const auto& seg : tr.segments()) {
    for (std::size_t j = 0; j < seg.times.size(); ++j) {
      std::vector<double> row{seg.times[j]};
      for (int k = 0; k < n; ++k) row.push_back(seg.states[j](k));
      row.push_back(static_cast<double>(seg.interval));
      csv.row(row);
    }
  }
}

void write_segment(const fs::path& path, const Segment& seg, int n) {
  Trajectory tr;
  tr.add(seg, Vector::Zero(n), IntervalReport{});
  write_trajectory(path, tr, n);
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json trajectory_json(const Trajectory& tr, const ArgumentSchedule& sched) {
  json intervals = json::array();
  for (const auto& r : tr.reports()) {
    json alternates = json::array();
    for (const auto& a : r.alternate_anchors) alternates.push_back(to_std(a));
    intervals.push_back({{"interval", r.interval},
                         {"iterations", r.iterations},
                         {"last_delta", r.last_delta},
                         {"ratios", r.ratios},
                         {"contracted", r.contracted},
                         {"non_unique", r.non_unique},
                         {"alternate_anchors", alternates},
                         {"anchor_mismatch", r.anchor_mismatch}});
  }
  return {{"t_min", tr.t_min()},
          {"t_max", tr.t_max()},
          {"non_unique", tr.non_unique()},
          {"continuity_defect", tr.continuity_defect()},
          {"anchor_defect", tr.anchor_defect(sched.zetas(), sched.i_min())},
          {"intervals", intervals}};
}

json split_json(const SpectralSplit& s) {
  json eig = json::array();
  for (const auto& e : s.eigenvalues) eig.push_back({e.real(), e.imag()});
  return {{"n", s.n},
          {"k", s.k},
          {"sigma", s.sigma},
          {"K", s.k_const},
          {"m_pow", s.m_pow},
          {"transform_cond", s.transform_cond},
          {"reconstruction_error", s.reconstruction_error},
          {"eigenvalues", eig}};
}

json bundle_json(const ConstantsBundle& b) {
  return {{"omega", b.omega},       {"M", b.M_up},
          {"m_low", b.m_low},       {"theta", b.theta},
          {"l", b.l},               {"l_block", b.l_block},
          {"alpha", b.alpha},       {"sigma", b.sigma},
          {"K", b.K},               {"m_pow", b.m_pow},
          {"gamma", b.gamma},       {"p", b.p_const},
          {"c5_lhs", b.c5_lhs},     {"c5_rhs", b.c5_rhs},
          {"c5_pass", b.c5_pass},   {"c5_near_boundary", b.c5_near_boundary},
          {"two_p_l", b.two_p_l},   {"c10_pass", b.c10_pass},
          {"anchor_ratio_bound", b.anchor_ratio_bound()}};
}

json conditions_json(const ConditionReport& rep) {
  json entries = json::array();
  for (const auto& e : rep.entries) {
    entries.push_back({{"id", e.id},
                       {"pass", e.pass},
                       {"near_boundary", e.near_boundary},
                       {"value", finite_or_null(e.value)},
                       {"threshold", finite_or_null(e.threshold)},
                       {"detail", e.detail}});
  }
  return {{"all_pass", rep.all_pass()}, {"entries", entries}};
}

json verdict_json(const StabilityVerdict& v) {
  json evidence = json::array();
  for (const auto& e : v.evidence) {
    evidence.push_back({{"t0", e.t0},
                        {"radius", e.radius},
                        {"max_excursion", finite_or_null(e.max_excursion)},
                        {"final_norm", finite_or_null(e.final_norm)},
                        {"horizon", e.horizon},
                        {"blew_up", e.blew_up},
                        {"sustained_decay", e.sustained_decay},
                        {"fit_rate", e.fit_rate},
                        {"fit_r2", e.fit_r2}});
  }
  return {{"classification", to_string(v.classification)},
          {"rate", v.rate ? json(*v.rate) : json(nullptr)},
          {"t0_sweep", v.t0_sweep},
          {"evidence", evidence}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("harness", "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_manifest(const ExperimentConfig& cfg, const fs::path& out_dir) {
  std::ofstream out(out_dir / "manifest");
  if (!out) throw ConfigError("cannot write " + (out_dir / "manifest").string());
  out << "epcag run manifest\n"
      << "version: " << version_string() << '\n'
      << "recipe: " << cfg.recipe << '\n'
      << "seed: " << cfg.seed << '\n'
      << "timestamp: " << timestamp() << '\n'
      << "config:\n"
      << cfg.echo << '\n';
  out.flush();
}

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const WindowError*>(&e)) return "WindowError";
  if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
  if (dynamic_cast<const ParameterError*>(&e)) return "ParameterError";
  if (dynamic_cast<const BlowUpError*>(&e)) return "BlowUpError";
  if (dynamic_cast<const NonContractionError*>(&e)) return "NonContractionError";
  if (dynamic_cast<const PositiveSpectrumError*>(&e)) return "PositiveSpectrumError";
  if (dynamic_cast<const ConditioningError*>(&e)) return "ConditioningError";
  if (dynamic_cast<const SmallnessError*>(&e)) return "SmallnessError";
  if (dynamic_cast<const DivergenceError*>(&e)) return "DivergenceError";
  if (dynamic_cast<const BoxExceededError*>(&e)) return "BoxExceededError";
  if (dynamic_cast<const ContractionFailureError*>(&e)) return "ContractionFailureError";
  if (dynamic_cast<const DegenerateDimensionError*>(&e)) return "DegenerateDimensionError";
  if (dynamic_cast<const Error*>(&e)) return "Error";
  return "exception";
}

json error_record(int status, const std::exception& e) {
  json rec{{"status", status}, {"type", error_type(e)}, {"message", e.what()}};
  if (const auto* err = dynamic_cast<const Error*>(&e)) rec["module"] = err->module();
  if (const auto* nc = dynamic_cast<const NonContractionError*>(&e)) {
    rec["interval"] = nc->interval();
    rec["ratios"] = nc->ratios();
  }
  if (const auto* dv = dynamic_cast<const DivergenceError*>(&e)) rec["deltas"] = dv->deltas();
  if (const auto* bu = dynamic_cast<const BlowUpError*>(&e)) {
    rec["last_finite_time"] = bu->last_finite_time();
  }
  if (const auto* ve = dynamic_cast<const ValidationError*>(&e)) rec["index"] = ve->index();
  if (const auto* ce = dynamic_cast<const ConditioningError*>(&e)) {
    rec["condition_number"] = ce->condition_number();
  }
  return rec;
}

// ---- recipes ----------------------------------------------------------------

struct Context {
  const ExperimentConfig& cfg;
  const fs::path& out;
  std::ostream& console;
  ArgumentSchedule sched;
  HybridSystem sys;
  json report;
};

ArgumentSchedule build_schedule(const ExperimentConfig& cfg) {
  return make_schedule(cfg.schedule.kind, cfg.schedule.params);
}

HybridSystem build_system(const ExperimentConfig& cfg) {
  SystemOptions opt;
  opt.validate = cfg.system.validate;
  opt.seed = cfg.seed;
  opt.probes = cfg.analysis.probes;
  return make_catalog_system(cfg.system.nonlinearity, cfg.system.params, cfg.system.a, opt,
                             cfg.system.lipschitz.value_or(-1.0));
}

struct ManifoldSetup {
  SpectralSplit split;
  ConstantsBundle bundle;
};

ManifoldSetup manifold_setup(const Context& c) {
  auto split = spectral_split(c.sys.a(), c.cfg.analysis.split);
  const double alpha = c.cfg.manifold.alpha > 0.0 ? c.cfg.manifold.alpha : 0.5 * split.sigma;
  auto bundle = compute_constants(c.sys.a(), split, c.sched, c.sys.lipschitz(), alpha);
  return {std::move(split), std::move(bundle)};
}

std::vector<Vector> box_grid(int dim, double box, int per_axis) {
  if (std::pow(static_cast<double>(per_axis), dim) > 1e5) {
    throw ConfigError("manifold.grid^dim exceeds 100000 points");
  }
  std::vector<double> axis;
  for (int j = 0; j < per_axis; ++j) axis.push_back(-box + 2.0 * box * j / (per_axis - 1));
  std::vector<Vector> out;
  std::vector<int> idx(dim, 0);
  while (true) {
    Vector x(dim);
    for (int d = 0; d < dim; ++d) x(d) = axis[idx[d]];
    out.push_back(x);
    int d = dim - 1;
    while (d >= 0 && ++idx[d] == per_axis) idx[d--] = 0;
    if (d < 0) break;
  }
  return out;
}

void recipe_simulate(Context& c, bool forward) {
  const auto& in = c.cfg.initial;
  const auto tr = forward ? solve_forward(c.sys, c.sched, in.t0, in.z0, in.t_end, c.cfg.solver)
                          : solve_backward(c.sys, c.sched, in.t0, in.z0, in.t_end, c.cfg.solver);
  const std::string name = forward ? "trajectory_forward.csv" : "trajectory_backward.csv";
  write_trajectory(c.out / name, tr, c.sys.dim());
  c.report["trajectory"] = trajectory_json(tr, c.sched);
  c.report["files"] = {name};
  c.console << (forward ? "forward" : "backward") << " continuation over [" << tr.t_min() << ", "
            << tr.t_max() << "], " << tr.segments().size() << " intervals"
            << (tr.non_unique() ? ", non-unique anchors flagged" : "") << '\n';
}

void recipe_conditions(Context& c) {
  const auto setup = manifold_setup(c);
  const auto rep = check_conditions(c.sys, c.sched, setup.split, setup.bundle, c.cfg.analysis.probes,
                                    c.cfg.seed, c.cfg.analysis.split.tol_eig);
  c.report["split"] = split_json(setup.split);
  c.report["constants"] = bundle_json(setup.bundle);
  c.report["conditions"] = conditions_json(rep);
  c.console << rep.table();
}

void recipe_manifold(Context& c, ManifoldKind kind) {
  const auto setup = manifold_setup(c);
  ManifoldBuilder builder(c.sys, c.sched, setup.split, setup.bundle, c.cfg.manifold.options);
  const auto& m = c.cfg.manifold;
  const int n = setup.split.n;
  const int k = setup.split.k;
  const bool F = kind == ManifoldKind::stable;
  const int dom = F ? k : n - k;
  const int img = n - dom;
  const std::string name = F ? "manifold_F.csv" : "manifold_G.csv";

  c.report["split"] = split_json(setup.split);
  c.report["constants"] = bundle_json(setup.bundle);
  c.report["files"] = {name};
  CsvWriter csv(c.out / name);
  auto cols = numbered(F ? "u_" : "v_", dom);
  for (const auto& s : numbered(F ? "F_" : "G_", img)) cols.push_back(s);
  cols.push_back("iterates");
  cols.push_back("last_delta");
  csv.header(cols);
  if (dom == 0 || img == 0) {
    c.report["manifold"] = {{"degenerate", true}};
    c.console << "manifold is trivial: split has k = " << k << " of n = " << n << '\n';
    return;
  }

  const auto grid = box_grid(dom, m.box, m.grid);
  int max_iter = 0;
  double worst_delta = 0.0, worst_envelope = 0.0, lip = 0.0;
  std::vector<Vector> values;
  double horizon = 0.0, bound = 0.0;
  for (const auto& x : grid) {
    const auto approx = F ? builder.eval_F(m.t0, x) : builder.eval_G(m.t0, x);
    horizon = approx.horizon;
    bound = approx.lipschitz_bound;
    max_iter = std::max(max_iter, approx.iterates);
    worst_delta = std::max(worst_delta, approx.last_delta);
    worst_envelope = std::max(worst_envelope, approx.envelope_ratio);
    std::vector<double> row = to_std(x);
    for (int j = 0; j < img; ++j) row.push_back(approx.value(j));
    row.push_back(approx.iterates);
    row.push_back(approx.last_delta);
    csv.row(row);
    values.push_back(approx.value);
  }
  for (std::size_t a = 0; a < grid.size(); ++a) {
    for (std::size_t b = a + 1; b < grid.size(); ++b) {
      const double den = (grid[a] - grid[b]).norm();
      if (den > 0.0) lip = std::max(lip, (values[a] - values[b]).norm() / den);
    }
  }
  json man{{"kind", F ? "F" : "G"},
           {"t0", m.t0},
           {"box", m.box},
           {"points", grid.size()},
           {"horizon", horizon},
           {"max_iterates", max_iter},
           {"max_last_delta", worst_delta},
           {"max_envelope_ratio", worst_envelope},
           {"sampled_lipschitz", lip},
           {"analytic_lipschitz", bound}};
  if (F) {
    man["tail_bound"] = builder.tail_bound(horizon, m.box * std::sqrt(static_cast<double>(dom)));
  } else {
    const auto& sh = builder.shifted();
    man["shifted"] = {{"kappa", sh.kappa},         {"kappa_bar", sh.kappa_bar},
                      {"K_bar", sh.K_bar},         {"alpha1", sh.alpha1},
                      {"alpha_tilde", sh.alpha_tilde}, {"l_bar", sh.l_bar},
                      {"p_bar", sh.p_bar},         {"two_p_l_bar", sh.two_p_l_bar},
                      {"P_analytic", sh.P_analytic}};
    man["P_empirical"] = estimate_P(builder, m.t0, m.lipschitz_pairs, c.cfg.seed, m.box);
  }
  c.report["manifold"] = man;
  c.console << (F ? "F" : "G") << " on " << grid.size() << " points at t0 = " << m.t0
            << ": max iterates " << max_iter << ", sampled Lipschitz " << lip << '\n';
}

void recipe_phase(Context& c) {
  const auto setup = manifold_setup(c);
  ManifoldBuilder builder(c.sys, c.sched, setup.split, setup.bundle, c.cfg.manifold.options);
  auto opt = c.cfg.phase;
  opt.P = estimate_P(builder, c.cfg.initial.t0, c.cfg.manifold.lipschitz_pairs, c.cfg.seed,
                     std::max(1.0, 2.0 * c.cfg.initial.z0.norm()));
  const auto res = asymptotic_phase(builder, c.cfg.initial.t0, c.cfg.initial.z0, opt);
  write_trajectory(c.out / "trajectory_solution.csv", res.solution, c.sys.dim());
  write_trajectory(c.out / "trajectory_companion.csv", res.companion, c.sys.dim());
  c.report["files"] = {"trajectory_solution.csv", "trajectory_companion.csv"};
  c.report["constants"] = bundle_json(setup.bundle);
  c.report["phase"] = {{"d_star", to_std(res.d_star)},
                       {"X0", to_std(res.X0)},
                       {"iterations", res.iterations},
                       {"ball_distances", res.ball_distances},
                       {"ball_radius", res.ball_radius},
                       {"P", opt.P},
                       {"times", res.times},
                       {"weighted", res.weighted},
                       {"max_weighted", res.max_weighted},
                       {"bound", res.bound},
                       {"bounded", res.bounded},
                       {"assumptions_hold", res.assumptions_hold}};
  c.console << "asymptotic phase: " << res.iterations << " iterations, max weighted distance "
            << res.max_weighted << " (bound " << res.bound << ")\n";
}

std::string verdict_row(const std::string& label, const StabilityVerdict& v) {
  std::ostringstream os;
  os << std::left << std::setw(10) << label << std::setw(24) << to_string(v.classification)
     << (v.rate ? fmt(*v.rate) : std::string("-")) << "  runs " << v.evidence.size() << '\n';
  return os.str();
}

void recipe_stability(Context& c) {
  const auto v = classify_stability(c.sys, c.sched, c.cfg.stability);
  c.report["stability"] = verdict_json(v);
  c.console << verdict_row("full", v);
}

void recipe_reduce(Context& c) {
  const auto setup = manifold_setup(c);
  ManifoldBuilder builder(c.sys, c.sched, setup.split, setup.bundle, c.cfg.manifold.options);
  GCache cache(builder, c.cfg.manifold.cache);
  const double P = estimate_P(builder, c.cfg.manifold.t0, c.cfg.manifold.lipschitz_pairs,
                              c.cfg.seed, c.cfg.manifold.cache.box);
  const auto res = reduction_check(
      builder, [&cache](double t, const Vector& v) { return cache(t, v); }, P, c.cfg.stability);
  c.report["constants"] = bundle_json(setup.bundle);
  c.report["P_empirical"] = P;
  c.report["cache_tables"] = cache.tables_built();
  c.report["full"] = verdict_json(res.full);
  c.report["reduced"] = verdict_json(res.reduced);
  c.report["agree"] = res.agree;
  c.console << std::left << std::setw(10) << "system" << std::setw(24) << "classification"
            << "rate\n"
            << verdict_row("full", res.full) << verdict_row("reduced", res.reduced)
            << "agree: " << (res.agree ? "true" : "false") << '\n';
}

void recipe_example1(Context& c) {
  // z' = 3 z - z(beta)^2 with beta(t) = 2[(t+1)/2]: theta_i = 2i - 1, zeta_i = 2i.
  const double E = std::exp(3.0);
  auto closed = [E](double z) { return E * z - z * z / 3.0 * (E - 1.0); };
  const double S = 3.0 * E / (E - 1.0);
  const double z0 = 1.0, z1 = S - 1.0;
  const double threshold = -3.0 / (4.0 * E * (E - 1.0));

  const auto& sched = c.sched;
  const auto& sys = c.sys;
  auto opts = c.cfg.solver;
  const Vector X(Vector::Constant(1, closed(z0)));

  json out{{"equation", "z' = 3 z - z(2[(t+1)/2])^2"},
           {"collision_sum", S},
           {"z0", z0},
           {"z1", z1},
           {"z0_at_1_closed", closed(z0)},
           {"z1_at_1_closed", closed(z1)},
           {"collision_gap_closed", std::abs(closed(z0) - closed(z1))},
           {"forward_threshold", threshold}};

  const auto f0 = solve_forward(sys, sched, 0.0, Vector::Constant(1, z0), 1.0, opts);
  const auto f1 = solve_forward(sys, sched, 0.0, Vector::Constant(1, z1), 1.0, opts);
  const double n0 = f0.at(1.0)(0), n1 = f1.at(1.0)(0);
  out["z0_at_1_numeric"] = n0;
  out["z1_at_1_numeric"] = n1;
  out["collision_gap_numeric"] = std::abs(n0 - n1);

  const auto back = solve_backward(sys, sched, 1.0, X, -1.0, opts);
  write_trajectory(c.out / "trajectory_example1_backward.csv", back, 1);
  json files{"trajectory_example1_backward.csv"};
  out["backward"] = trajectory_json(back, sched);
  int alt = 0;
  for (const auto& r : back.reports()) {
    for (const auto& w : r.alternate_anchors) {
      const double t_anchor = sched.zeta(r.interval);
      const auto seg = integrate_interval(sys, sched, r.interval, t_anchor, w, w,
                                          interval_step(sched, r.interval, opts.step));
      const std::string name = "trajectory_example1_alternate_" + std::to_string(alt++) + ".csv";
      write_segment(c.out / name, seg, 1);
      files.push_back(name);
    }
  }
  out["backward_non_unique"] = back.non_unique();

  json forward{{"t0", -1.0}, {"x0", -10.0}};
  try {
    const auto tr = solve_forward(sys, sched, -1.0, Vector::Constant(1, -10.0), 1.0, opts);
    forward["continued"] = true;
    forward["trajectory"] = trajectory_json(tr, sched);
  } catch (const NonContractionError& e) {
    forward["continued"] = false;
    forward["diagnostic"] = error_record(kStatusNumerical, e);
  } catch (const BlowUpError& e) {
    forward["continued"] = false;
    forward["diagnostic"] = error_record(kStatusNumerical, e);
  }
  out["forward"] = forward;
  c.report["example1"] = out;
  c.report["files"] = files;

  c.console << "collision: z0 + z1 = " << fmt(S) << ", |z0(1) - z1(1)| = "
            << fmt(std::abs(n0 - n1)) << " (numeric)\n"
            << "backward from (1, " << fmt(X(0)) << "): "
            << (back.non_unique() ? "non-unique anchors flagged" : "unique") << ", " << alt
            << " alternate branch(es)\n"
            << "forward from (-1, -10): "
            << (forward["continued"].get<bool>() ? "continued" : "no continuation past t = 0")
            << " (roots exist only for x0 >= " << fmt(threshold) << ")\n";
}

Context make_context(const ExperimentConfig& cfg, const fs::path& out, std::ostream& console) {
  if (cfg.recipe == "example1") {
    ScheduleParams p;
    p.i_min = 0;
    p.i_max = 2;
    Matrix a(1, 1);
    a(0, 0) = 3.0;
    SystemOptions opt;
    opt.validate = false;
    opt.name = "example1";
    return Context{cfg, out, console, make_schedule(ScheduleKind::alternating, p),
                   make_catalog_system("example1-quadratic", {{"R", 10.0}}, a, opt), json::object()};
  }
  return Context{cfg, out, console, build_schedule(cfg), build_system(cfg), json::object()};
}

}  // namespace

const std::vector<std::string>& recipe_names() {
  static const std::vector<std::string> names{"simulate", "continue-backward", "manifold-F",
                                              "manifold-G", "phase", "stability",
                                              "reduce", "conditions", "example1"};
  return names;
}

ExperimentConfig parse_config(const std::string& json_text, const Overrides& overrides) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_json(std::move(j), overrides);
}

ExperimentConfig load_config(const fs::path& file, const Overrides& overrides) {
  std::ifstream in(file);
  if (!in) fail("cannot read config " + file.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str(), overrides);
}

void write_error_record(const fs::path& out_dir, int status, const std::exception& e,
                        std::ostream& console) {
  const auto rec = error_record(status, e);
  console << rec.dump() << '\n';
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::ofstream out(out_dir / "error.json");
  if (out) out << rec.dump(2) << '\n';
}

int run(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& console) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    write_error_record(out_dir, kStatusConfig, ConfigError("cannot create " + out_dir.string()),
                       std::cerr);
    return kStatusConfig;
  }
  bool setup = true;
  try {
    write_manifest(cfg, out_dir);
    auto c = make_context(cfg, out_dir, console);
    setup = false;
    c.report["recipe"] = cfg.recipe;
    c.report["seed"] = cfg.seed;
    c.report["system"] = c.sys.name();
    c.report["lipschitz"] = c.sys.lipschitz();
    c.report["schedule"] = {{"kind", to_string(cfg.recipe == "example1" ? ScheduleKind::alternating
                                                                         : cfg.schedule.kind)},
                            {"i_min", c.sched.i_min()},
                            {"i_max", c.sched.i_max()},
                            {"theta_bound", c.sched.theta_bound()}};
    const auto& r = cfg.recipe;
    if (r == "simulate") recipe_simulate(c, true);
    else if (r == "continue-backward") recipe_simulate(c, false);
    else if (r == "manifold-F") recipe_manifold(c, ManifoldKind::stable);
    else if (r == "manifold-G") recipe_manifold(c, ManifoldKind::centre);
    else if (r == "phase") recipe_phase(c);
    else if (r == "stability") recipe_stability(c);
    else if (r == "reduce") recipe_reduce(c);
    else if (r == "conditions") recipe_conditions(c);
    else if (r == "example1") recipe_example1(c);
    else throw ConfigError("unknown recipe '" + r + "'");
    c.report["status"] = kStatusOk;
    write_json(out_dir / "report.json", c.report);
    return kStatusOk;
  } catch (const ConfigError& e) {
    write_error_record(out_dir, kStatusConfig, e, std::cerr);
    return kStatusConfig;
  } catch (const std::exception& e) {
    // Schedule and system construction failures are problems with the config.
    const int status = setup ? kStatusConfig : kStatusNumerical;
    write_error_record(out_dir, status, e, std::cerr);
    return status;
  }
}

std::string catalog_text() {
  std::ostringstream os;
  for (const auto& e : catalog_list()) {
    os << e.name << (e.dim ? " (n = " + std::to_string(e.dim) + ")" : std::string()) << '\n'
       << "  " << e.formula << '\n'
       << "  " << e.lipschitz_formula << '\n';
    for (const auto& p : e.params) {
      os << "  " << p.name << " = " << p.default_value << "  " << p.description << '\n';
    }
  }
  return os.str();
}

std::string version_string() {
  std::ostringstream os;
  os << "epcag " << EPCAG_VERSION << ", Eigen " << EIGEN_WORLD_VERSION << '.'
     << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << ", nlohmann_json "
     << NLOHMANN_JSON_VERSION_MAJOR << '.' << NLOHMANN_JSON_VERSION_MINOR << '.'
     << NLOHMANN_JSON_VERSION_PATCH;
  return os.str();
}

}  // namespace epcag
