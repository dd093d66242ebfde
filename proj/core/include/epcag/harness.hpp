#pragma once

#include "epcag/analysis.hpp"
#include "epcag/catalog.hpp"
#include "epcag/manifolds.hpp"
#include "epcag/reduction.hpp"
#include "epcag/schedule.hpp"
#include "epcag/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace epcag {

struct SystemSpec {
  Matrix a;
  std::string nonlinearity = "zero";
  ParamMap params;
  /// Declared Lipschitz constant; the catalog formula when absent.
  std::optional<double> lipschitz;
  bool validate = true;
};

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::epca;
  ScheduleParams params;
};

/// Initial data for simulate, continue-backward and phase.
struct InitialSpec {
  double t0 = 0.0;
  Vector z0;
  double t_end = 5.0;
};

struct ManifoldSpec {
  ManifoldOptions options;
  /// Decay exponent alpha; <= 0 selects sigma / 2.
  double alpha = 0.0;
  /// Anchor time of the dumped graphs.
  double t0 = 0.0;
  /// Dumped graphs cover [-box, box] per coordinate.
  double box = 1.0;
  int grid = 21;
  /// Random pairs used for the empirical Lipschitz constant of G.
  int lipschitz_pairs = 20;
  GCacheOptions cache;
};

struct AnalysisSpec {
  SplitOptions split;
  int probes = 200;
};

struct ExperimentConfig {
  std::string recipe;
  std::uint64_t seed = 1;
  SystemSpec system;
  ScheduleSpec schedule;
  SolverOptions solver;
  AnalysisSpec analysis;
  ManifoldSpec manifold;
  InitialSpec initial;
  PhaseOptions phase;
  StabilityOptions stability;
  /// Canonical JSON of the effective configuration, echoed in the manifest.
  std::string echo;
};

const std::vector<std::string>& recipe_names();

struct Overrides {
  std::optional<std::string> recipe;
  std::optional<std::uint64_t> seed;
  std::optional<double> step;
  std::optional<double> tol;
};

/// Parses and validates a JSON config. Throws ConfigError naming the
/// offending key.
ExperimentConfig parse_config(const std::string& json_text, const Overrides& overrides = {});

ExperimentConfig load_config(const std::filesystem::path& file, const Overrides& overrides = {});

/// Exit statuses of run().
inline constexpr int kStatusOk = 0;
inline constexpr int kStatusConfig = 2;
inline constexpr int kStatusNumerical = 3;

/// Executes the recipe and writes its artifacts into out_dir. Failures are
/// recorded in out_dir/error.json and echoed to stderr.
int run(const ExperimentConfig& config, const std::filesystem::path& out_dir,
        std::ostream& console);

/// Writes an error record for failures that happen before a config exists.
void write_error_record(const std::filesystem::path& out_dir, int status, const std::exception& e,
                        std::ostream& console);

/// Human-readable listing of the nonlinearity catalog.
std::string catalog_text();

std::string version_string();

}  // namespace epcag
