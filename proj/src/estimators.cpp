#include "trotter24/estimators.hpp"

#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

#include "trotter24/errors.hpp"
#include "trotter24/models.hpp"

namespace trotter24 {

namespace {

constexpr double kNegativeInfidelityTolerance = 1e-12;
constexpr int kCalibrationSiteLimit = 4;

Schedule with_constant_modulations(const SplitHamiltonian& h, Schedule schedule) {
  const double a = h.modulation(Part::A)(0.0);
  const double b = h.modulation(Part::B)(0.0);
  for (Factor& f : schedule) f.coefficient *= f.part == Part::A ? a : b;
  return schedule;
}

}  // namespace

const char* to_string(FormulaPair pair) { return pair == FormulaPair::P24 ? "24" : "23"; }

Schedule second_order_schedule(const SplitHamiltonian& h, double t, double dt) {
  if (h.time_dependent()) return make_midpoint_t2(h, t, dt);
  return with_constant_modulations(h, scaled(make_t2(), dt));
}

Schedule companion_schedule(const SplitHamiltonian& h, double t, double dt, FormulaPair pair) {
  if (pair == FormulaPair::P23) {
    if (h.time_dependent()) throw std::invalid_argument("the (2,3) estimators are defined for time-independent h only");
    return with_constant_modulations(h, scaled(make_t3(), dt));
  }
  if (h.time_dependent()) return make_tdep_t4(h, t, dt);
  return with_constant_modulations(h, scaled(make_t4(), dt));
}

EstimatorResult estimate_fidelity(const SplitHamiltonian& h, const StateVector& psi, double t, double dt,
                                  FormulaPair pair) {
  const Schedule high_schedule = companion_schedule(h, t, dt, pair);
  EstimatorResult out{{}, psi, psi};
  apply_schedule(second_order_schedule(h, t, dt), h, out.low_order);
  apply_schedule(high_schedule, h, out.high_order);
  double value = infidelity(out.high_order, out.low_order);
  if (value < 0.0) {
    if (value < -kNegativeInfidelityTolerance) throw std::runtime_error("fidelity estimator produced a negative error");
    value = 0.0;
  }
  out.estimate = {value, EstimateKind::Fidelity, pair, dt, t};
  return out;
}

EstimatorResult estimate_observable(const SplitHamiltonian& h, const PauliSum& obs, const StateVector& psi, double t,
                                    double dt, FormulaPair pair) {
  const Schedule high_schedule = companion_schedule(h, t, dt, pair);
  EstimatorResult out{{}, psi, psi};
  apply_schedule(second_order_schedule(h, t, dt), h, out.low_order);
  apply_schedule(high_schedule, h, out.high_order);
  const double value = expectation(obs, out.high_order) - expectation(obs, out.low_order);
  out.estimate = {value, EstimateKind::Observable, pair, dt, t};
  return out;
}

BchCalibration calibrate_bch(const SplitHamiltonian& h, double dt) {
  if (h.time_dependent()) throw std::invalid_argument("BCH calibration needs a time-independent Hamiltonian");
  if (h.num_sites() > kCalibrationSiteLimit) throw DimensionLimitError(h.num_sites(), kCalibrationSiteLimit);

  const ExactPropagator exact(h.full());
  auto error_log = [&](double step) -> Eigen::MatrixXcd {
    const Eigen::MatrixXcd w = exact.matrix(step).adjoint() * schedule_matrix(second_order_schedule(h, 0.0, step), h);
    return w.log();
  };
  // log(U^dagger T2)(d) / d^3 = K3 + d K4 + O(d^2); two step sizes eliminate K4.
  const double d1 = dt;
  const double d2 = 2.0 * dt;
  const Eigen::MatrixXcd k3 =
      (d2 * error_log(d1) / (d1 * d1 * d1) - d1 * error_log(d2) / (d2 * d2 * d2)) / (d2 - d1);
  const Eigen::MatrixXcd g = Complex{0.0, 1.0} * k3;

  const PauliSum a = h.part(Part::A) * Complex{h.modulation(Part::A)(0.0)};
  const PauliSum b = h.part(Part::B) * Complex{h.modulation(Part::B)(0.0)};
  const PauliSum ab = commutator(a, b);
  const Eigen::MatrixXcd x = to_dense(commutator(a, ab));
  const Eigen::MatrixXcd y = to_dense(commutator(b, ab));

  auto dot = [](const Eigen::MatrixXcd& p, const Eigen::MatrixXcd& q) { return (p.adjoint() * q).trace().real(); };
  Eigen::Matrix2d normal;
  normal << dot(x, x), dot(x, y), dot(y, x), dot(y, y);
  const Eigen::Vector2d rhs(dot(x, g), dot(y, g));
  if (std::abs(normal.determinant()) < 1e-12 * normal.norm() * normal.norm()) {
    throw std::invalid_argument("calibration Hamiltonian has linearly dependent nested commutators");
  }
  const Eigen::Vector2d c = normal.ldlt().solve(rhs);

  BchCalibration out;
  out.c_aab = c(0);
  out.c_bab = c(1);
  out.residual = (g - c(0) * x - c(1) * y).norm() / g.norm();
  return out;
}

const BchCalibration& default_bch_calibration() {
  static const BchCalibration cal = calibrate_bch(ising_x(3));
  return cal;
}

PauliSum leading_error_generator(const SplitHamiltonian& h, double dt, const BchCalibration& cal) {
  if (h.time_dependent()) throw std::invalid_argument("the variance estimator needs a time-independent Hamiltonian");
  const PauliSum a = h.part(Part::A) * Complex{h.modulation(Part::A)(0.0)};
  const PauliSum b = h.part(Part::B) * Complex{h.modulation(Part::B)(0.0)};
  const PauliSum ab = commutator(a, b);
  const double d3 = dt * dt * dt;
  return commutator(a, ab) * Complex{cal.c_aab * d3} + commutator(b, ab) * Complex{cal.c_bab * d3};
}

double eta_f_variance(const SplitHamiltonian& h, const StateVector& psi, double dt, const BchCalibration& cal) {
  // Variance of the unit-step generator scaled afterwards, so small dt^3 never meets the prune threshold.
  const double d3 = dt * dt * dt;
  return d3 * d3 * variance(leading_error_generator(h, 1.0, cal), psi);
}

}  // namespace trotter24
