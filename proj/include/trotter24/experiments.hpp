#pragma once

// Declarative experiment configs and the commands behind the CLI.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "trotter24/adaptive.hpp"
#include "trotter24/baselines.hpp"
#include "trotter24/formulas.hpp"
#include "trotter24/models.hpp"

namespace trotter24 {

enum class ModelKind { IsingX, IsingRamp, Custom };

struct ModulationSpec {
  double slope = 0.0;
  double intercept = 1.0;
};

struct ExperimentConfig {
  ModelKind model = ModelKind::IsingX;
  int num_sites = 10;
  IsingCouplings couplings;
  /// Custom model only.
  std::optional<nlohmann::json> custom_a;
  std::optional<nlohmann::json> custom_b;
  ModulationSpec a_modulation;
  ModulationSpec b_modulation;

  /// "+x", "-y", ... or "random" (seeded).
  std::string initial_state = "-y";
  ControllerMode mode = ControllerMode::Fidelity;
  /// "m_x" / "m_y" / "m_z" or a Pauli-sum list.
  nlohmann::json observable = "m_x";
  std::vector<std::string> record = {"m_x"};

  double epsilon = 1e-3;
  double safety_c = 0.95;
  double dt0 = 0.1;
  double dt_min = 1e-8;
  std::optional<double> dt_max;
  int max_rejections_per_step = 50;
  bool clamp_final = false;
  AcceptanceSemantics semantics = AcceptanceSemantics::Prose;
  double t_ini = 0.0;
  double t_fin = 2.0;

  bool dense_oracle = false;
  int dense_limit = kDefaultDenseLimit;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int threads = 1;

  // bounds
  int bounds_l_min = 4;
  int bounds_l_max = 12;
  std::vector<double> bounds_epsilons = {1e-2, 1e-3};
  // scaling
  std::vector<double> scaling_dts = {0.1, 0.05, 0.025};
  /// The initial state is first evolved exactly to this time.
  double scaling_state_time = 0.0;
  // compare-extrapolation
  std::vector<double> compare_times = {1.7, 10.0};
  std::vector<int> compare_m_values = {0, 1, 2, 3, 4, 5};
  std::vector<int> compare_m_sequence;
  // sweep-c
  std::vector<double> sweep_c_values = {0.80, 0.85, 0.90, 0.95, 0.99};
};

/// Parses and validates a config document.  Unknown keys and type errors raise
/// ConfigError carrying the source line of the offending key.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
/// Every field with defaults filled in; parse_experiment_config accepts it back.
nlohmann::json resolved_config(const ExperimentConfig& cfg);

SplitHamiltonian build_hamiltonian(const ExperimentConfig& cfg);
StateVector build_initial_state(const ExperimentConfig& cfg);
PauliSum build_observable(const ExperimentConfig& cfg, const nlohmann::json& spec);
ControllerConfig build_controller_config(const ExperimentConfig& cfg);
NormOptions build_norm_options(const ExperimentConfig& cfg);

struct RunResult {
  SimulationTrace trace;
  std::optional<BudgetReport> budget;
  double wall_seconds = 0.0;
  nlohmann::json summary;
};

struct ScalingRow {
  double dt = 0.0;
  double eta_f = 0.0;
  double eta_f_24 = 0.0;
  double eta_f_23 = 0.0;
  double eta_f_variance = 0.0;
  double eta_o = 0.0;
  double eta_o_24 = 0.0;
  double eta_o_23 = 0.0;
  double t2_error = 0.0;
  double t3_error = 0.0;
  double t4_error = 0.0;
};

struct ScalingResult {
  std::vector<ScalingRow> rows;
  /// Least-squares log-log slopes keyed by column name.
  std::vector<std::pair<std::string, double>> slopes;
};

struct BoundsRow {
  WNormReport report;
  std::vector<double> dt_bounds;  // one per configured epsilon
};

RunResult run_experiment(const ExperimentConfig& cfg);
ScalingResult scaling_experiment(const ExperimentConfig& cfg);
std::vector<BoundsRow> bounds_experiment(const ExperimentConfig& cfg);
std::vector<ComparisonRow> compare_experiment(const ExperimentConfig& cfg);
std::vector<SweepPoint> sweep_experiment(const ExperimentConfig& cfg);

/// Slope of log y against log x by least squares (|y| is used).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Commands write their files under cfg.out_dir and a readable summary to `out`; they return the exit code.
int cmd_run(const ExperimentConfig& cfg, std::ostream& out);
int cmd_bounds(const ExperimentConfig& cfg, std::ostream& out);
int cmd_scaling(const ExperimentConfig& cfg, std::ostream& out);
int cmd_compare_extrapolation(const ExperimentConfig& cfg, std::ostream& out);
int cmd_sweep_c(const ExperimentConfig& cfg, std::ostream& out);

}  // namespace trotter24
