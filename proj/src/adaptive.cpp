#include "trotter24/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iostream>
#include <ostream>
#include <stdexcept>

#include "trotter24/errors.hpp"
#include "trotter24/estimators.hpp"
#include "trotter24/version.hpp"

namespace trotter24 {

namespace {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

SimulationTrace run_controller(ControllerMode mode, const ControllerConfig& config, const SplitHamiltonian& h_in,
                               const PauliSum* obs, const StateVector& psi0) {
  config.validate();
  if (psi0.num_sites() != h_in.num_sites()) throw std::invalid_argument("initial state and Hamiltonian differ in size");
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw std::invalid_argument("initial state must be normalized");

  if (config.safety_c == 1.0) std::clog << "warning: safety_c = 1 drops the safety margin; expect frequent rejections\n";

  SplitHamiltonian h = h_in;
  if (h.time_dependent() && config.t_fin > config.t_ini) h.calibrate_u_bound(config.t_ini, config.t_fin);

  SimulationTrace trace;
  trace.mode = mode;
  trace.config = config;
  if (mode == ControllerMode::Observable) {
    trace.config.observable = *obs;
    trace.obs_norm = config.obs_norm ? *config.obs_norm : spectral_norm(*obs);
    if (!(trace.obs_norm > 0.0)) throw std::invalid_argument("controlled observable has zero norm");
  }

  const double eps = config.epsilon;
  const double target = mode == ControllerMode::Fidelity ? eps : eps * trace.obs_norm;
  const double exponent = mode == ControllerMode::Fidelity ? 1.0 / 6.0 : 1.0 / 3.0;
  const double dt_max = config.effective_dt_max();
  const double end_slack = 1e-12 * std::max(1.0, std::abs(config.t_fin));
  const char* formula_label = h.time_dependent() ? "T2mid" : "T2";

  StateVector psi = psi0;
  CompensatedSum elapsed;
  double t = config.t_ini;
  double dt = config.dt0;

  auto keep_going = [&] { return config.clamp_final ? t < config.t_fin - end_slack : t + dt < config.t_fin; };

  while (keep_going()) {
    StepRecord rec;
    rec.step_index = static_cast<int>(trace.steps.size()) + 1;
    rec.t_before = t;
    for (;;) {
      const double trial = config.clamp_final ? std::min(dt, config.t_fin - t) : dt;
      rec.trial_dts.push_back(trial);
      EstimatorResult r = mode == ControllerMode::Fidelity ? eta_f_24(h, psi, t, trial)
                                                           : eta_o_24(h, *obs, psi, t, trial);
      const double eta = r.estimate.value;
      const double eta_abs = std::abs(eta);
      const bool accepted = eta_abs <= target;
      const double next = next_trial_dt(trial, eta_abs, target, config.safety_c, exponent, dt_max);
      if (accepted) {
        double step_dt = trial;
        if (config.semantics == AcceptanceSemantics::Prose) {
          psi = std::move(r.low_order);
        } else {
          step_dt = next;
          apply_schedule(second_order_schedule(h, t, step_dt), h, psi);
        }
        rec.dt_accepted = step_dt;
        rec.eta_measured = eta;
        trace.schedule.push_back({formula_label, t, step_dt});
        elapsed.add(step_dt);
        t = config.t_ini + elapsed.value();
        dt = next;
        break;
      }
      ++rec.rejections;
      dt = next;
      if (dt < config.dt_min) {
        throw ControllerAbort("trial stepsize " + std::to_string(dt) + " fell below dt_min", rec.step_index);
      }
      if (rec.rejections > config.max_rejections_per_step) {
        throw ControllerAbort("more than " + std::to_string(config.max_rejections_per_step) + " rejections",
                              rec.step_index);
      }
    }

    const double n = rec.step_index;
    rec.budget_bound = mode == ControllerMode::Fidelity ? n * n * eps : n * eps * trace.obs_norm;
    if (mode == ControllerMode::Observable) rec.observables_after.emplace_back("O", expectation(*obs, psi));
    for (const NamedObservable& o : config.recorded) rec.observables_after.emplace_back(o.name, expectation(o.op, psi));
    trace.steps.push_back(std::move(rec));
  }

  trace.t_last = t;
  trace.final_state = std::move(psi);
  return trace;
}

nlohmann::json pauli_or_null(const std::optional<PauliSum>& p) { return p ? to_json(*p) : nlohmann::json(nullptr); }

}  // namespace

const char* to_string(ControllerMode mode) { return mode == ControllerMode::Fidelity ? "fidelity" : "observable"; }

const char* to_string(AcceptanceSemantics semantics) {
  return semantics == AcceptanceSemantics::Prose ? "prose" : "pseudocode";
}

void ControllerConfig::validate() const {
  if (!(safety_c > 0.0 && safety_c <= 1.0)) throw std::invalid_argument("safety_c must lie in (0, 1]");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(dt0 > 0.0)) throw std::invalid_argument("dt0 must be positive");
  if (!(dt_min > 0.0)) throw std::invalid_argument("dt_min must be positive");
  if (!(t_fin >= t_ini)) throw std::invalid_argument("t_fin must not precede t_ini");
  if (dt_max && !(*dt_max >= dt0)) throw std::invalid_argument("dt_max must be at least dt0");
  if (max_rejections_per_step < 0) throw std::invalid_argument("max_rejections_per_step must be nonnegative");
  if (obs_norm && !(*obs_norm > 0.0)) throw std::invalid_argument("obs_norm must be positive");
}

int SimulationTrace::total_rejections() const {
  int acc = 0;
  for (const StepRecord& s : steps) acc += s.rejections;
  return acc;
}

double SimulationTrace::mean_dt() const {
  if (steps.empty()) return 0.0;
  CompensatedSum acc;
  for (const StepRecord& s : steps) acc.add(s.dt_accepted);
  return acc.value() / static_cast<double>(steps.size());
}

double next_trial_dt(double dt, double eta_abs, double target, double safety_c, double exponent, double dt_max) {
  if (eta_abs < kTinyEta) return std::max(dt_max, 0.0);
  return std::min(safety_c * std::pow(target / eta_abs, exponent) * dt, dt_max);
}

SimulationTrace run_fidelity(const ControllerConfig& config, const SplitHamiltonian& h, const StateVector& psi0) {
  return run_controller(ControllerMode::Fidelity, config, h, nullptr, psi0);
}

SimulationTrace run_observable(const ControllerConfig& config, const SplitHamiltonian& h, const PauliSum& obs,
                               const StateVector& psi0) {
  if (!obs.is_hermitian()) throw std::invalid_argument("controlled observable must be Hermitian");
  if (obs.num_sites() != h.num_sites()) throw std::invalid_argument("observable and Hamiltonian differ in size");
  return run_controller(ControllerMode::Observable, config, h, &obs, psi0);
}

StateVector replay(const SimulationTrace& trace, const SplitHamiltonian& h, const StateVector& psi0) {
  StateVector psi = psi0;
  for (const ScheduleEntry& e : trace.schedule) apply_schedule(second_order_schedule(h, e.t, e.dt), h, psi);
  return psi;
}

BudgetReport verify_budget(const SimulationTrace& trace, const SplitHamiltonian& h, const StateVector& psi0,
                           const BudgetOptions& opts) {
  BudgetReport report;
  report.mode = trace.mode;

  std::optional<ExactPropagator> exact;
  if (!h.time_dependent()) exact.emplace(h.full(), opts.dense_limit);

  const PauliSum* bounded = nullptr;
  double bounded_norm = 0.0;
  if (trace.mode == ControllerMode::Observable) {
    bounded = &*trace.config.observable;
    bounded_norm = trace.obs_norm;
    report.observable_name = "O";
  } else if (!trace.config.recorded.empty()) {
    bounded = &trace.config.recorded.front().op;
    bounded_norm = spectral_norm(*bounded);
    report.observable_name = trace.config.recorded.front().name;
  }

  const double eps = trace.config.epsilon;
  StateVector simulated = psi0;
  StateVector reference = psi0;
  for (std::size_t i = 0; i < trace.schedule.size(); ++i) {
    const ScheduleEntry& e = trace.schedule[i];
    apply_schedule(second_order_schedule(h, e.t, e.dt), h, simulated);
    if (exact) {
      exact->apply(reference, e.dt);
    } else {
      reference_evolve(h, reference, e.t, e.dt, opts.reference_substep);
    }

    BudgetRow row;
    row.step_index = static_cast<int>(i) + 1;
    row.t = e.t + e.dt;
    const double n = row.step_index;
    row.fidelity_error = infidelity(reference, simulated);
    if (trace.mode == ControllerMode::Fidelity) {
      row.fidelity_bound = n * n * eps;
      report.fidelity_within = report.fidelity_within && row.fidelity_error <= row.fidelity_bound;
    }
    if (bounded) {
      row.exact_value = expectation(*bounded, reference);
      row.simulated_value = expectation(*bounded, simulated);
      row.observable_error = std::abs(row.exact_value - row.simulated_value);
      row.observable_bound =
          trace.mode == ControllerMode::Fidelity ? n * std::sqrt(eps) * bounded_norm : n * eps * bounded_norm;
      report.observable_within = report.observable_within && row.observable_error <= row.observable_bound;
    }
    report.rows.push_back(row);
  }
  return report;
}

std::vector<SweepPoint> sweep_safety_c(const ControllerConfig& templ, const SplitHamiltonian& h,
                                       const StateVector& psi0, const std::vector<double>& c_values, int threads) {
  for (double c : c_values) {
    if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("safety constants must lie in (0, 1]");
  }
  auto run_one = [&](double c) {
    ControllerConfig cfg = templ;
    cfg.safety_c = c;
    const SimulationTrace trace = run_fidelity(cfg, h, psi0);
    SweepPoint p;
    p.safety_c = c;
    p.steps = static_cast<int>(trace.steps.size());
    p.rejections = trace.total_rejections();
    p.mean_dt = trace.mean_dt();
    p.rejection_rate = p.steps > 0 ? static_cast<double>(p.rejections) / p.steps : 0.0;
    return p;
  };

  std::vector<SweepPoint> out(c_values.size());
  const std::size_t width = static_cast<std::size_t>(std::max(threads, 1));
  for (std::size_t begin = 0; begin < c_values.size(); begin += width) {
    const std::size_t end = std::min(c_values.size(), begin + width);
    if (width == 1) {
      out[begin] = run_one(c_values[begin]);
      continue;
    }
    std::vector<std::future<SweepPoint>> jobs;
    for (std::size_t k = begin; k < end; ++k) jobs.push_back(std::async(std::launch::async, run_one, c_values[k]));
    for (std::size_t k = begin; k < end; ++k) out[k] = jobs[k - begin].get();
  }
  return out;
}

nlohmann::json config_to_json(const ControllerConfig& config) {
  nlohmann::json j;
  j["t_ini"] = config.t_ini;
  j["t_fin"] = config.t_fin;
  j["epsilon"] = config.epsilon;
  j["safety_c"] = config.safety_c;
  j["dt0"] = config.dt0;
  j["dt_min"] = config.dt_min;
  j["dt_max"] = config.effective_dt_max();
  j["max_rejections_per_step"] = config.max_rejections_per_step;
  j["clamp_final"] = config.clamp_final;
  j["semantics"] = to_string(config.semantics);
  j["observable"] = pauli_or_null(config.observable);
  j["obs_norm"] = config.obs_norm ? nlohmann::json(*config.obs_norm) : nlohmann::json(nullptr);
  nlohmann::json rec = nlohmann::json::array();
  for (const NamedObservable& o : config.recorded) rec.push_back({{"name", o.name}, {"op", to_json(o.op)}});
  j["recorded"] = rec;
  return j;
}

nlohmann::json step_to_json(const StepRecord& step) {
  nlohmann::json j;
  j["type"] = "step";
  j["N"] = step.step_index;
  j["t_before"] = step.t_before;
  j["dt"] = step.dt_accepted;
  j["eta"] = step.eta_measured;
  j["rejections"] = step.rejections;
  j["trial_dts"] = step.trial_dts;
  nlohmann::json obs = nlohmann::json::object();
  for (const auto& [name, value] : step.observables_after) obs[name] = value;
  j["observables"] = obs;
  j["budget_bound"] = step.budget_bound;
  return j;
}

void write_trace_jsonl(std::ostream& os, const SimulationTrace& trace, const nlohmann::json& header_extra) {
  nlohmann::json header;
  header["type"] = "header";
  header["version"] = kVersion;
  header["mode"] = to_string(trace.mode);
  header["config"] = config_to_json(trace.config);
  header["obs_norm"] = trace.obs_norm;
  header["semantics"] = to_string(trace.config.semantics);
  if (header_extra.is_object()) {
    for (const auto& [key, value] : header_extra.items()) header[key] = value;
  }
  os << header.dump() << '\n';
  for (const StepRecord& s : trace.steps) os << step_to_json(s).dump() << '\n';
}

}  // namespace trotter24
