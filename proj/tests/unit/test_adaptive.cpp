#include "doctest.h"

#include <cmath>
#include <sstream>

#include "trotter24/adaptive.hpp"
#include "trotter24/errors.hpp"
#include "trotter24/estimators.hpp"
#include "trotter24/models.hpp"

using namespace trotter24;

TEST_CASE("update rule arithmetic") {
  CHECK(next_trial_dt(0.1, 8e-3, 1e-3, 0.95, 1.0 / 6.0, 1.0) == doctest::Approx(0.95 * 0.1 / std::sqrt(2.0)));
  CHECK(next_trial_dt(0.1, 27e-2, 1e-2, 0.95, 1.0 / 3.0, 1.0) == doctest::Approx(0.95 * 0.1 / 3.0));
  CHECK(next_trial_dt(0.1, 0.0, 1e-3, 0.95, 1.0 / 6.0, 1.0) == 1.0);
  CHECK(next_trial_dt(0.1, 1e-30, 1.0, 0.95, 1.0 / 6.0, 0.5) == 0.5);
}

TEST_CASE("config validation") {
  ControllerConfig c;
  CHECK_NOTHROW(c.validate());
  c.safety_c = 1.2;
  CHECK_THROWS(c.validate());
  c = {};
  c.t_fin = -1.0;
  CHECK_THROWS(c.validate());
  c = {};
  c.dt_max = 0.01;
  CHECK_THROWS(c.validate());
  c = {};
  CHECK(c.effective_dt_max() == doctest::Approx(1.0));
}

TEST_CASE("fidelity controller on a small ring") {
  const SplitHamiltonian h = ising_x(6);
  const StateVector psi0 = prepare_polarized(6, Axis::MinusY);
  ControllerConfig c;
  c.epsilon = 1e-4;
  const SimulationTrace tr = run_fidelity(c, h, psi0);
  REQUIRE_FALSE(tr.steps.empty());

  double sum = 0.0;
  StateVector psi = psi0;
  for (std::size_t i = 0; i < tr.steps.size(); ++i) {
    const StepRecord& s = tr.steps[i];
    CHECK(s.step_index == static_cast<int>(i) + 1);
    CHECK(s.eta_measured <= c.epsilon);
    CHECK(s.trial_dts.back() == s.dt_accepted);
    CHECK(s.trial_dts.size() == static_cast<std::size_t>(s.rejections) + 1);
    for (std::size_t k = 1; k < s.trial_dts.size(); ++k) CHECK(s.trial_dts[k] < s.trial_dts[k - 1]);
    CHECK(s.dt_accepted <= c.effective_dt_max());
    // The recorded estimate is reproducible from the pre-step state.
    CHECK(std::abs(eta_f_24(h, psi, s.t_before, s.dt_accepted).estimate.value - s.eta_measured) <= 1e-12);
    apply_schedule(second_order_schedule(h, s.t_before, s.dt_accepted), h, psi);
    sum += s.dt_accepted;
  }
  CHECK(tr.t_last == doctest::Approx(sum).epsilon(1e-15));
  CHECK(tr.t_last < c.t_fin);
  CHECK(distance(replay(tr, h, psi0), tr.final_state) < 1e-12);
}

TEST_CASE("commuting parts are always accepted and grow to dt_max") {
  PauliSum a(3);
  a.add("ZII", 0.5).add("IZI", -0.3);
  const SplitHamiltonian h(a, ising_bond_part(3));
  ControllerConfig c;
  c.t_fin = 5.0;
  const SimulationTrace tr = run_fidelity(c, h, prepare_polarized(3, Axis::PlusX));
  CHECK(tr.total_rejections() == 0);
  for (std::size_t i = 1; i < tr.steps.size(); ++i) CHECK(tr.steps[i].dt_accepted >= tr.steps[i - 1].dt_accepted);
  CHECK(tr.steps.back().dt_accepted == doctest::Approx(c.effective_dt_max()));
}

TEST_CASE("clamped final step lands on t_fin") {
  const SplitHamiltonian h = ising_x(4);
  ControllerConfig c;
  c.clamp_final = true;
  c.t_fin = 0.77;
  const SimulationTrace tr = run_fidelity(c, h, prepare_polarized(4, Axis::MinusY));
  CHECK(tr.t_last == doctest::Approx(0.77).epsilon(1e-14));
}

TEST_CASE("zero-length interval gives an empty trace") {
  ControllerConfig c;
  c.t_fin = c.t_ini;
  const SimulationTrace tr = run_fidelity(c, ising_x(3), prepare_polarized(3, Axis::MinusY));
  CHECK(tr.steps.empty());
  CHECK(tr.t_last == c.t_ini);
}

TEST_CASE("rejection spiral aborts with the step index") {
  const SplitHamiltonian h = ising_x(4);
  ControllerConfig c;
  c.epsilon = 1e-30;
  c.dt_min = 1e-3;
  try {
    (void)run_fidelity(c, h, prepare_polarized(4, Axis::MinusY));
    FAIL("expected an abort");
  } catch (const ControllerAbort& e) {
    CHECK(e.step_index() == 1);
  }
}

TEST_CASE("observable controller") {
  const SplitHamiltonian h = ising_x(6);
  const PauliSum mx = magnetization(6, 'X');
  const StateVector psi0 = prepare_polarized(6, Axis::MinusY);
  ControllerConfig c;
  c.epsilon = 1e-3;
  const SimulationTrace tr = run_observable(c, h, mx, psi0);
  CHECK(tr.obs_norm == doctest::Approx(1.0));
  for (const StepRecord& s : tr.steps) {
    CHECK(std::abs(s.eta_measured) <= c.epsilon * tr.obs_norm);
    CHECK(s.observables_after.front().first == "O");
  }
  const BudgetReport rep = verify_budget(tr, h, psi0);
  CHECK(rep.observable_within);
  PauliSum zero(6);
  CHECK_THROWS(run_observable(c, h, zero, psi0));
}

TEST_CASE("budget replay in fidelity mode") {
  const SplitHamiltonian h = ising_x(6);
  const StateVector psi0 = prepare_polarized(6, Axis::MinusY);
  ControllerConfig c;
  c.recorded.push_back({"mx", magnetization(6, 'X')});
  const SimulationTrace tr = run_fidelity(c, h, psi0);
  const BudgetReport rep = verify_budget(tr, h, psi0);
  CHECK(rep.fidelity_within);
  CHECK(rep.observable_within);
  CHECK(rep.observable_name == "mx");
  REQUIRE(rep.rows.size() == tr.steps.size());
  CHECK(rep.rows.front().fidelity_error <= c.epsilon);
}

TEST_CASE("safety sweep is thread-count independent") {
  const SplitHamiltonian h = ising_x(4);
  const StateVector psi0 = prepare_polarized(4, Axis::MinusY);
  const std::vector<double> cs{0.8, 0.9, 0.95};
  const auto serial = sweep_safety_c({}, h, psi0, cs, 1);
  const auto parallel = sweep_safety_c({}, h, psi0, cs, 3);
  for (std::size_t i = 0; i < cs.size(); ++i) {
    CHECK(serial[i].mean_dt == parallel[i].mean_dt);
    CHECK(serial[i].rejections == parallel[i].rejections);
  }
  CHECK_THROWS(sweep_safety_c({}, h, psi0, {0.0}));
}

TEST_CASE("trace serialization is deterministic") {
  const SplitHamiltonian h = ising_x(4);
  const StateVector psi0 = prepare_polarized(4, Axis::MinusY);
  std::ostringstream a;
  std::ostringstream b;
  write_trace_jsonl(a, run_fidelity({}, h, psi0), {{"model", "ising_x"}});
  write_trace_jsonl(b, run_fidelity({}, h, psi0), {{"model", "ising_x"}});
  CHECK(a.str() == b.str());
  std::istringstream in(a.str());
  std::string first;
  std::getline(in, first);
  const nlohmann::json header = nlohmann::json::parse(first);
  CHECK(header["type"] == "header");
  CHECK(header["semantics"] == "prose");
  CHECK(header["model"] == "ising_x");
}
