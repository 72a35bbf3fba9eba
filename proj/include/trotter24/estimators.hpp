#pragma once

// Trotter-error estimators for one T2 step, built from a higher-order companion step.

#include "trotter24/formulas.hpp"
#include "trotter24/pauli.hpp"
#include "trotter24/statevector.hpp"

namespace trotter24 {

enum class EstimateKind { Fidelity, Observable };
enum class FormulaPair { P24, P23 };

const char* to_string(FormulaPair pair);

struct ErrorEstimate {
  double value = 0.0;
  EstimateKind kind = EstimateKind::Fidelity;
  FormulaPair pair = FormulaPair::P24;
  double dt = 0.0;
  double t = 0.0;
};

/// An estimate plus both evolved states, so an accepted step reuses low_order.
struct EstimatorResult {
  ErrorEstimate estimate;
  StateVector low_order;   // T2 (midpoint rule when h is time-dependent)
  StateVector high_order;  // T4 / T3 companion
};

/// The T2 step schedule at (t, dt): plain T2 or the midpoint rule.
Schedule second_order_schedule(const SplitHamiltonian& h, double t, double dt);
/// Companion schedule: FRS / T4(t,dt) for P24, Ruth T3 for P23 (time-independent only).
Schedule companion_schedule(const SplitHamiltonian& h, double t, double dt, FormulaPair pair);

/// 1 - |<psi_high|psi_low>|^2, clamped to 0 for negative residues above -1e-12.
EstimatorResult estimate_fidelity(const SplitHamiltonian& h, const StateVector& psi, double t, double dt,
                                  FormulaPair pair);
/// <psi_high|O|psi_high> - <psi_low|O|psi_low> (signed).
EstimatorResult estimate_observable(const SplitHamiltonian& h, const PauliSum& obs, const StateVector& psi, double t,
                                    double dt, FormulaPair pair);

inline EstimatorResult eta_f_24(const SplitHamiltonian& h, const StateVector& psi, double t, double dt) {
  return estimate_fidelity(h, psi, t, dt, FormulaPair::P24);
}
inline EstimatorResult eta_o_24(const SplitHamiltonian& h, const PauliSum& obs, const StateVector& psi, double t,
                                double dt) {
  return estimate_observable(h, obs, psi, t, dt, FormulaPair::P24);
}
inline EstimatorResult eta_f_23(const SplitHamiltonian& h, const StateVector& psi, double t, double dt) {
  return estimate_fidelity(h, psi, t, dt, FormulaPair::P23);
}
inline EstimatorResult eta_o_23(const SplitHamiltonian& h, const PauliSum& obs, const StateVector& psi, double t,
                                double dt) {
  return estimate_observable(h, obs, psi, t, dt, FormulaPair::P23);
}

/// Coefficients of the leading T2 error generator,
///   i * log(U(dt)^dagger T2(dt)) = dt^3 (c_aab [A,[A,B]] + c_bab [B,[A,B]]) + O(dt^4),
/// fitted from dense matrix logarithms.
struct BchCalibration {
  double c_aab = 0.0;
  double c_bab = 0.0;
  /// ||K3 - fit||_F / ||K3||_F for the extracted dt^3 component K3.
  double residual = 0.0;
};

/// Fits the coefficients on h (at most 4 sites) using matrix logarithms at dt and 2 dt.
BchCalibration calibrate_bch(const SplitHamiltonian& h, double dt = 5e-3);
/// Calibration on the built-in three-site transverse-field Ising ring, computed once.
const BchCalibration& default_bch_calibration();

/// Hermitian leading error generator dt^3 (c_aab [A,[A,B]] + c_bab [B,[A,B]]).
PauliSum leading_error_generator(const SplitHamiltonian& h, double dt, const BchCalibration& cal);

/// Variance of the leading error generator in psi; leading-order fidelity error of one T2 step.
double eta_f_variance(const SplitHamiltonian& h, const StateVector& psi, double dt,
                      const BchCalibration& cal = default_bch_calibration());

}  // namespace trotter24
