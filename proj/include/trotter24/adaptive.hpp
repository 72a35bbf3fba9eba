#pragma once

// Adaptive-stepsize T2 evolution controlled by a measured (2,4) error estimate.
//
// Per step: measure eta at the trial dt; accept when eta is within tolerance,
// otherwise retry.  In both cases the next trial is
//   dt <- C * (target / |eta|)^(1/p) * dt,   p = 6 (fidelity) or 3 (observable).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "trotter24/formulas.hpp"
#include "trotter24/pauli.hpp"
#include "trotter24/statevector.hpp"

namespace trotter24 {

enum class ControllerMode { Fidelity, Observable };

/// Prose: the accepted step uses the measured dt.  Pseudocode: the step uses
/// the already-updated (unmeasured) dt, as a literal reading of the listing.
enum class AcceptanceSemantics { Prose, Pseudocode };

const char* to_string(ControllerMode mode);
const char* to_string(AcceptanceSemantics semantics);

inline constexpr double kTinyEta = 1e-14;

struct NamedObservable {
  std::string name;
  PauliSum op;
};

struct ControllerConfig {
  double t_ini = 0.0;
  double t_fin = 2.0;
  /// epsilon (fidelity mode) or epsilon_O (observable mode).
  double epsilon = 1e-3;
  double safety_c = 0.95;
  double dt0 = 0.1;
  double dt_min = 1e-8;
  /// Defaults to 10 * dt0.
  std::optional<double> dt_max;
  int max_rejections_per_step = 50;
  bool clamp_final = false;
  AcceptanceSemantics semantics = AcceptanceSemantics::Prose;
  /// Controlled observable (observable mode) and its operator norm; the norm is computed when absent.
  std::optional<PauliSum> observable;
  std::optional<double> obs_norm;
  /// Expectation values logged after every accepted step.
  std::vector<NamedObservable> recorded;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  double effective_dt_max() const { return dt_max.value_or(10.0 * dt0); }
};

struct StepRecord {
  int step_index = 0;  // N, starting at 1
  double t_before = 0.0;
  double dt_accepted = 0.0;
  double eta_measured = 0.0;
  int rejections = 0;
  /// Every trial dt of this step in order; the last one was accepted.
  std::vector<double> trial_dts;
  std::vector<std::pair<std::string, double>> observables_after;
  /// N^2 eps (fidelity mode) or N eps_O ||O|| (observable mode).
  double budget_bound = 0.0;
};

struct ScheduleEntry {
  std::string formula;  // "T2" or "T2mid"
  double t = 0.0;
  double dt = 0.0;
};

struct SimulationTrace {
  ControllerMode mode = ControllerMode::Fidelity;
  ControllerConfig config;
  double obs_norm = 0.0;
  std::vector<StepRecord> steps;
  std::vector<ScheduleEntry> schedule;  // U_list in application order
  StateVector final_state;
  double t_last = 0.0;

  int total_rejections() const;
  double mean_dt() const;
};

/// C * (target/|eta|)^(1/p) * dt, with the growth clamped to dt_max (and to dt_max/dt when |eta| < 1e-14).
double next_trial_dt(double dt, double eta_abs, double target, double safety_c, double exponent, double dt_max);

SimulationTrace run_fidelity(const ControllerConfig& config, const SplitHamiltonian& h, const StateVector& psi0);
SimulationTrace run_observable(const ControllerConfig& config, const SplitHamiltonian& h, const PauliSum& obs,
                               const StateVector& psi0);

/// Applies the accepted schedule to psi0.
StateVector replay(const SimulationTrace& trace, const SplitHamiltonian& h, const StateVector& psi0);

struct BudgetOptions {
  int dense_limit = kDefaultDenseLimit;
  /// Substep of the tiny-step T4(t,dt) reference used for time-dependent h.
  double reference_substep = 1e-3;
};

struct BudgetRow {
  int step_index = 0;
  double t = 0.0;
  double fidelity_error = 0.0;  // delta F_N
  double fidelity_bound = 0.0;  // N^2 eps (fidelity mode only)
  double observable_error = 0.0;  // |delta O_N| for the bounded observable
  double observable_bound = 0.0;  // N sqrt(eps) ||O|| or N eps_O ||O||
  double exact_value = 0.0;
  double simulated_value = 0.0;
};

struct BudgetReport {
  ControllerMode mode = ControllerMode::Fidelity;
  std::string observable_name;
  std::vector<BudgetRow> rows;
  bool fidelity_within = true;
  bool observable_within = true;
};

/// Replays the accepted schedule against exact (dense) or reference evolution and checks
/// delta F_N <= N^2 eps, delta O_N <= N sqrt(eps) ||O|| (fidelity mode) and delta O_N <= N eps_O ||O||.
BudgetReport verify_budget(const SimulationTrace& trace, const SplitHamiltonian& h, const StateVector& psi0,
                           const BudgetOptions& opts = {});

struct SweepPoint {
  double safety_c = 0.0;
  double mean_dt = 0.0;
  double rejection_rate = 0.0;  // rejections per accepted step
  int steps = 0;
  int rejections = 0;
};

/// Fidelity-mode runs of the template config for each C, on up to `threads` worker threads.
std::vector<SweepPoint> sweep_safety_c(const ControllerConfig& templ, const SplitHamiltonian& h,
                                       const StateVector& psi0, const std::vector<double>& c_values, int threads = 1);

/// Header line (config snapshot + version) followed by one StepRecord per line.
void write_trace_jsonl(std::ostream& os, const SimulationTrace& trace, const nlohmann::json& header_extra = {});
nlohmann::json step_to_json(const StepRecord& step);
nlohmann::json config_to_json(const ControllerConfig& config);

}  // namespace trotter24
