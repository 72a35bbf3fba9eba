#pragma once

// Product formulas as ordered coefficient schedules.
//
// Factors are listed left to right exactly as in the operator product
// (leftmost factor acts last) and are applied to a state right to left.
// A factor (part, angle) stands for exp(-i * angle * part).

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "trotter24/pauli.hpp"
#include "trotter24/statevector.hpp"

namespace trotter24 {

enum class Part : std::uint8_t { A, B };

struct Factor {
  Part part;
  double coefficient;

  friend bool operator==(const Factor&, const Factor&) = default;
};

struct ProductFormula {
  std::vector<Factor> factors;
  int order = 0;
  std::string label;

  double coefficient_sum(Part part) const;
};

/// Concrete factor list with absolute angles (already multiplied by dt or the beta integrals).
using Schedule = std::vector<Factor>;

/// s = 1 / (2 - 2^{1/3}).
double frs_s();

ProductFormula make_t2();
ProductFormula make_t3();
ProductFormula make_t4();

Schedule scaled(const ProductFormula& f, double dt);

/// Scalar time modulation f(t) of one Hamiltonian part.
class Modulation {
 public:
  /// f(t) = 1.
  Modulation() = default;

  static Modulation constant(double value);
  /// f(t) = slope * t + intercept.
  static Modulation linear(double slope, double intercept);
  /// Arbitrary f; integrals fall back to adaptive Gauss-Kronrod quadrature.
  static Modulation custom(std::function<double(double)> fn, std::string name = "custom");

  double operator()(double t) const;
  bool is_constant() const { return !fn_ && slope_ == 0.0; }
  bool has_closed_form() const { return !fn_; }
  double slope() const { return slope_; }
  double intercept() const { return intercept_; }
  const std::string& name() const { return name_; }

  /// int_{t0}^{t1} f.
  double integral(double t0, double t1) const;
  double integral_quadrature(double t0, double t1) const;

 private:
  double slope_ = 0.0;
  double intercept_ = 1.0;
  std::function<double(double)> fn_;
  std::string name_ = "constant";
};

/// Integrals entering the time-dependent fourth-order formula over [t, t + dt].
struct BetaIntegrals {
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta12 = 0.0;
  double u = 0.0;
};

/// Closed forms when both modulations are affine in t, quadrature otherwise.
BetaIntegrals compute_betas(const Modulation& a, const Modulation& b, double t, double dt);
/// Always by nested adaptive quadrature (1e-12 absolute target).
BetaIntegrals compute_betas_quadrature(const Modulation& a, const Modulation& b, double t, double dt);

/// H(t) = a(t) A + b(t) B with each part a sum of mutually commuting strings.
class SplitHamiltonian {
 public:
  SplitHamiltonian(PauliSum part_a, PauliSum part_b, Modulation a_mod = {}, Modulation b_mod = {});

  int num_sites() const { return part_a_.num_sites(); }
  const PauliSum& part(Part p) const { return p == Part::A ? part_a_ : part_b_; }
  const CommutingLayer& layer(Part p) const { return p == Part::A ? layer_a_ : layer_b_; }
  const Modulation& modulation(Part p) const { return p == Part::A ? a_mod_ : b_mod_; }
  bool time_dependent() const { return !a_mod_.is_constant() || !b_mod_.is_constant(); }

  /// a(t) A + b(t) B.
  PauliSum at(double t) const;
  /// A + B scaled by the constant modulations; throws for time-dependent h.
  PauliSum full() const;

  /// Estimates c in |u| <= c dt^2 over [t0, t1]; make_tdep_t4 warns when the bound is violated.
  void calibrate_u_bound(double t0, double t1);
  std::optional<double> u_bound() const { return u_bound_; }

 private:
  PauliSum part_a_;
  PauliSum part_b_;
  Modulation a_mod_;
  Modulation b_mod_;
  CommutingLayer layer_a_;
  CommutingLayer layer_b_;
  std::optional<double> u_bound_;
};

/// Midpoint rule: [(A, a(t+dt/2) dt/2), (B, b(t+dt/2) dt), (A, a(t+dt/2) dt/2)].
Schedule make_midpoint_t2(const SplitHamiltonian& h, double t, double dt);

/// Seven-exponential fourth-order formula for scalar-modulated parts.  Throws
/// DegenerateFormulaError when |beta2| < floor * |dt|.
Schedule make_tdep_t4(const SplitHamiltonian& h, double t, double dt, double degeneracy_floor = 1e-12);

void apply_schedule(const Schedule& schedule, const SplitHamiltonian& h, StateVector& state);

/// Time-independent path only.
StateVector apply_formula(const ProductFormula& f, const SplitHamiltonian& h, double dt, StateVector psi);

/// Dense matrix of a schedule, assembled column by column through the state-vector path.
Eigen::MatrixXcd schedule_matrix(const Schedule& schedule, const SplitHamiltonian& h,
                                 int dense_limit = kDefaultDenseLimit);

/// Reference propagation for time-dependent h: repeated T4(t, dt) with substeps no larger than max_substep.
void reference_evolve(const SplitHamiltonian& h, StateVector& state, double t, double dt, double max_substep);

}  // namespace trotter24
