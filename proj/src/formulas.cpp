#include "trotter24/formulas.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "trotter24/errors.hpp"

namespace trotter24 {

namespace {

constexpr double kQuadratureRelTol = 1e-12;
constexpr unsigned kQuadratureMaxDepth = 8;

double gk_integrate(const std::function<double(double)>& f, double t0, double t1) {
  if (t0 == t1) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, t0, t1, kQuadratureMaxDepth, kQuadratureRelTol);
}

}  // namespace

double ProductFormula::coefficient_sum(Part part) const {
  double acc = 0.0;
  for (const Factor& f : factors) {
    if (f.part == part) acc += f.coefficient;
  }
  return acc;
}

double frs_s() { return 1.0 / (2.0 - std::cbrt(2.0)); }

ProductFormula make_t2() {
  return {{{Part::A, 0.5}, {Part::B, 1.0}, {Part::A, 0.5}}, 2, "T2"};
}

ProductFormula make_t3() {
  return {{{Part::A, 7.0 / 24.0},
           {Part::B, 2.0 / 3.0},
           {Part::A, 3.0 / 4.0},
           {Part::B, -2.0 / 3.0},
           {Part::A, -1.0 / 24.0},
           {Part::B, 1.0}},
          3,
          "T3"};
}

ProductFormula make_t4() {
  const double s = frs_s();
  return {{{Part::A, s / 2.0},
           {Part::B, s},
           {Part::A, (1.0 - s) / 2.0},
           {Part::B, 1.0 - 2.0 * s},
           {Part::A, (1.0 - s) / 2.0},
           {Part::B, s},
           {Part::A, s / 2.0}},
          4,
          "T4"};
}

Schedule scaled(const ProductFormula& f, double dt) {
  Schedule out = f.factors;
  for (Factor& factor : out) factor.coefficient *= dt;
  return out;
}

Modulation Modulation::constant(double value) {
  Modulation m;
  m.intercept_ = value;
  return m;
}

Modulation Modulation::linear(double slope, double intercept) {
  Modulation m;
  m.slope_ = slope;
  m.intercept_ = intercept;
  m.name_ = slope == 0.0 ? "constant" : "linear";
  return m;
}

Modulation Modulation::custom(std::function<double(double)> fn, std::string name) {
  if (!fn) throw std::invalid_argument("custom modulation needs a callable");
  Modulation m;
  m.fn_ = std::move(fn);
  m.name_ = std::move(name);
  return m;
}

double Modulation::operator()(double t) const { return fn_ ? fn_(t) : slope_ * t + intercept_; }

double Modulation::integral(double t0, double t1) const {
  if (fn_) return integral_quadrature(t0, t1);
  return slope_ * (t1 * t1 - t0 * t0) / 2.0 + intercept_ * (t1 - t0);
}

double Modulation::integral_quadrature(double t0, double t1) const {
  return gk_integrate([this](double s) { return (*this)(s); }, t0, t1);
}

BetaIntegrals compute_betas(const Modulation& a, const Modulation& b, double t, double dt) {
  if (!a.has_closed_form() || !b.has_closed_form()) return compute_betas_quadrature(a, b, t, dt);
  // Shift to tau = s - t: a = a0 + p tau, b = b0 + r tau.  The inner double
  // integral collapses to tau^2 (r a0 - p b0) / 2.
  const double p = a.slope();
  const double r = b.slope();
  const double a0 = a(t);
  const double b0 = b(t);
  BetaIntegrals out;
  out.beta1 = a0 * dt + p * dt * dt / 2.0;
  out.beta2 = b0 * dt + r * dt * dt / 2.0;
  out.beta12 = dt * dt * dt * (r * a0 - p * b0) / 12.0;
  out.u = out.beta2 == 0.0 ? 0.0 : out.beta12 / out.beta2;
  return out;
}

BetaIntegrals compute_betas_quadrature(const Modulation& a, const Modulation& b, double t, double dt) {
  BetaIntegrals out;
  out.beta1 = a.integral_quadrature(t, t + dt);
  out.beta2 = b.integral_quadrature(t, t + dt);
  auto inner = [&](double t2) {
    return b(t2) * a.integral_quadrature(t, t2) - a(t2) * b.integral_quadrature(t, t2);
  };
  out.beta12 = 0.5 * gk_integrate(inner, t, t + dt);
  out.u = out.beta2 == 0.0 ? 0.0 : out.beta12 / out.beta2;
  return out;
}

SplitHamiltonian::SplitHamiltonian(PauliSum part_a, PauliSum part_b, Modulation a_mod, Modulation b_mod)
    : part_a_(std::move(part_a)),
      part_b_(std::move(part_b)),
      a_mod_(std::move(a_mod)),
      b_mod_(std::move(b_mod)) {
  if (part_a_.num_sites() != part_b_.num_sites()) throw std::invalid_argument("parts A and B have different site counts");
  if (!part_a_.terms_commute()) throw std::invalid_argument("part A terms must pairwise commute");
  if (!part_b_.terms_commute()) throw std::invalid_argument("part B terms must pairwise commute");
  layer_a_ = CommutingLayer(part_a_);
  layer_b_ = CommutingLayer(part_b_);
}

PauliSum SplitHamiltonian::at(double t) const { return part_a_ * Complex{a_mod_(t)} + part_b_ * Complex{b_mod_(t)}; }

PauliSum SplitHamiltonian::full() const {
  if (time_dependent()) throw std::logic_error("full() called on a time-dependent Hamiltonian");
  return at(0.0);
}

void SplitHamiltonian::calibrate_u_bound(double t0, double t1) {
  if (!time_dependent()) {
    u_bound_ = 0.0;
    return;
  }
  constexpr double probe = 1e-3;
  constexpr int samples = 33;
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double t = t0 + (t1 - t0) * k / (samples - 1);
    const BetaIntegrals b = compute_betas(a_mod_, b_mod_, t, probe);
    if (std::abs(b.beta2) < 1e-12 * probe) continue;
    worst = std::max(worst, std::abs(b.u) / (probe * probe));
  }
  u_bound_ = 10.0 * std::max(worst, 1e-12);
}

Schedule make_midpoint_t2(const SplitHamiltonian& h, double t, double dt) {
  const double mid = t + dt / 2.0;
  const double a = h.modulation(Part::A)(mid);
  const double b = h.modulation(Part::B)(mid);
  return {{Part::A, a * dt / 2.0}, {Part::B, b * dt}, {Part::A, a * dt / 2.0}};
}

Schedule make_tdep_t4(const SplitHamiltonian& h, double t, double dt, double degeneracy_floor) {
  const BetaIntegrals beta = compute_betas(h.modulation(Part::A), h.modulation(Part::B), t, dt);
  if (std::abs(beta.beta2) < degeneracy_floor * std::abs(dt) || (dt != 0.0 && beta.beta2 == 0.0)) {
    throw DegenerateFormulaError("integrated B modulation vanishes on [" + std::to_string(t) + ", " +
                                 std::to_string(t + dt) + "]; fall back to the midpoint rule with a smaller step");
  }
  if (const auto bound = h.u_bound(); bound && std::abs(beta.u) > *bound * dt * dt * (1.0 + 1e-9) + 1e-300) {
    std::clog << "warning: |u| = " << std::abs(beta.u) << " exceeds " << *bound << " * dt^2 at t = " << t << '\n';
  }
  const double s = frs_s();
  const double b1 = beta.beta1;
  const double b2 = beta.beta2;
  return {{Part::A, s * b1 / 2.0 - beta.u},
          {Part::B, s * b2},
          {Part::A, (1.0 - s) * b1 / 2.0},
          {Part::B, (1.0 - 2.0 * s) * b2},
          {Part::A, (1.0 - s) * b1 / 2.0},
          {Part::B, s * b2},
          {Part::A, s * b1 / 2.0 + beta.u}};
}

void apply_schedule(const Schedule& schedule, const SplitHamiltonian& h, StateVector& state) {
  for (auto it = schedule.rbegin(); it != schedule.rend(); ++it) h.layer(it->part).apply(state, it->coefficient);
}

StateVector apply_formula(const ProductFormula& f, const SplitHamiltonian& h, double dt, StateVector psi) {
  if (h.time_dependent()) {
    throw std::invalid_argument("apply_formula is the time-independent path; use the midpoint/T4(t,dt) schedules");
  }
  const double a = h.modulation(Part::A)(0.0);
  const double b = h.modulation(Part::B)(0.0);
  Schedule schedule = scaled(f, dt);
  for (Factor& factor : schedule) factor.coefficient *= factor.part == Part::A ? a : b;
  apply_schedule(schedule, h, psi);
  return psi;
}

Eigen::MatrixXcd schedule_matrix(const Schedule& schedule, const SplitHamiltonian& h, int dense_limit) {
  const int n = h.num_sites();
  if (n > dense_limit) throw DimensionLimitError(n, dense_limit);
  const Eigen::Index dim = Eigen::Index{1} << n;
  Eigen::MatrixXcd m(dim, dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    StateVector col = StateVector::basis(n, static_cast<std::uint64_t>(k));
    apply_schedule(schedule, h, col);
    m.col(k) = col.as_eigen();
  }
  return m;
}

void reference_evolve(const SplitHamiltonian& h, StateVector& state, double t, double dt, double max_substep) {
  if (dt == 0.0) return;
  if (!(max_substep > 0.0)) throw std::invalid_argument("reference substep must be positive");
  const auto n = static_cast<long>(std::ceil(std::abs(dt) / max_substep - 1e-9));
  const long steps = std::max(1L, n);
  const double h_dt = dt / static_cast<double>(steps);
  for (long k = 0; k < steps; ++k) {
    const double tk = t + static_cast<double>(k) * h_dt;
    Schedule schedule;
    if (h.time_dependent()) {
      try {
        schedule = make_tdep_t4(h, tk, h_dt);
      } catch (const DegenerateFormulaError&) {
        schedule = make_midpoint_t2(h, tk, h_dt);
      }
    } else {
      schedule = make_tdep_t4(h, tk, h_dt);
    }
    apply_schedule(schedule, h, state);
  }
}

}  // namespace trotter24
