#pragma once

// Experiment configuration, orchestration and artifacts. Configs and reports
// are JSON, tables and plot data CSV. Artifacts carry no timestamps (those go
// to run.log only), so reruns with the same (config, seed) are bit-identical.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsym/domain.hpp"
#include "qsym/errors.hpp"
#include "qsym/moving_planes.hpp"
#include "qsym/problem.hpp"

namespace qsym {

using Json = nlohmann::ordered_json;

/// Schema violation; keys() names every offending key (dotted paths).
class ConfigError : public InvalidInput {
 public:
  ConfigError(const std::string& what, std::vector<std::string> keys) : InvalidInput(what), keys_(std::move(keys)) {}
  const std::vector<std::string>& keys() const { return keys_; }

 private:
  std::vector<std::string> keys_;
};

enum class ExperimentKind { ball_sweep, space_sweep, verify_suite, single_solve, bubble_report };
std::string to_string(ExperimentKind kind);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::single_solve;
  // problem
  int n = 2;
  double p = 3.0;
  std::string f = "power:1";
  std::string kappa = "const:1";
  double tol = 1e-8;
  int max_iter = 2000;
  std::string mode = "disk";  // single-solve: radial | disk
  // sweeps
  std::vector<double> eps;
  bool fit = true;
  MeshParams mesh;
  // thresholds
  double tau_deficit_factor = 0.0;
  bool deficit_threshold = false;
  int levels = 200;
  double lambda_tol = 1e-4;
  // bubble-report
  Point z;
  double lambda = 1.0;
  bool dump_fields = false;
  // verify-suite
  std::vector<std::string> checks;  // empty: all registered
  std::size_t samples = 1000000;
  std::size_t resolution = 24;      // polar rings for solver-generated pairs

  std::filesystem::path out = "qsym_out";
  std::uint64_t seed = 0x5eed;

  /// Missing keys take the defaults above; unknown or ill-typed keys throw
  /// ConfigError listing all of them.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  Json to_json() const;
  /// Throws ConfigError on semantic violations.
  void validate() const;
  ProblemSpec problem() const;
};

/// FNV-1a 64 of the canonical (sorted-key) JSON without the output directory.
std::string config_hash(const ExperimentConfig& cfg);

struct ResultRecord {
  std::string kind;
  std::string config_hash;
  std::uint64_t seed = 0;
  Json config;
  Json outputs;
  std::optional<LogLawFit> fit;
  std::vector<LogLawSample> fit_samples;  // retained samples, in sweep order
  std::vector<std::string> artifacts;     // file names relative to the output dir
  std::string started, finished;          // wall clock, written to run.log only

  Json to_json() const;  // timestamps omitted
  static ResultRecord from_json(const nlohmann::json& j);
};

/// Executes the pipeline and writes artifacts under cfg.out. Solver failures
/// propagate as NumericalFailure with the run context prepended.
ResultRecord run(const ExperimentConfig& cfg);

/// plot.csv with (log|log(C d)|, log s) per retained sample and plot_line.json
/// with log s = intercept + slope x. Throws InvalidInput when the record has no
/// fit or fewer than two samples.
std::vector<std::string> emit_plot_data(const ResultRecord& record, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------

struct Verdict {
  std::string name;
  bool pass = false;
  Json metrics;
};

std::vector<std::string> registered_checks();
/// Throws ConfigError for an unknown name.
Verdict run_check(const std::string& name, const ExperimentConfig& cfg);

/// Sweep samples as rows epsilon,deficit,lambda_star_1..n,osc,rot_deficit.
std::string sweep_csv(const SweepResult& result, const std::string& header_comment);
/// Log-law fit from a table with columns deficit and deviation (or osc).
LogLawFit fit_from_csv(const std::filesystem::path& path, std::vector<LogLawSample>* samples = nullptr);

Json to_json(const LogLawFit& fit);
Json to_json(const MovingPlanesReport& r);

/// Writes text exactly; creates parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace qsym
