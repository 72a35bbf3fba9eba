#pragma once

// Comparison methods: a priori commutator-norm stepsize and fixed-step T2
// with polynomial (Richardson/Neville) extrapolation to zero stepsize.

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "trotter24/adaptive.hpp"
#include "trotter24/formulas.hpp"
#include "trotter24/pauli.hpp"
#include "trotter24/statevector.hpp"

namespace trotter24 {

enum class Ordering { AB, BA };

struct WNormReport {
  double w_ab = 0.0;      // ||[B,[B,A]]|| + ||[A,[B,A]]|| / 2
  double w_ba = 0.0;      // ||[A,[A,B]]|| + ||[B,[A,B]]|| / 2
  double norm_bba = 0.0;  // ||[B,[B,A]]||
  double norm_aba = 0.0;  // ||[A,[B,A]]||
  int num_sites = 0;
  Ordering tighter_side = Ordering::AB;

  double tighter() const { return tighter_side == Ordering::AB ? w_ab : w_ba; }
};

WNormReport w_norms(const SplitHamiltonian& h, const NormOptions& opts = {});

/// (eps / W)^(1/3).
double dt_bound(double w, double epsilon);
/// dt_bound with the tighter ordering's W.
double dt_bound(const WNormReport& report, double epsilon);

/// Expectation of obs after M equal T2 steps covering [t_start, t_start + t] from psi0.
double fixed_step_expectation(const SplitHamiltonian& h, const PauliSum& obs, const StateVector& psi0, double t,
                              int steps, double t_start = 0.0);

struct ExtrapolationResult {
  double estimate = 0.0;
  std::vector<double> coefficients;  // estimate = sum c_i * value_i
};

/// Degree-(n-1) polynomial through the n points, evaluated at 0 by Neville's
/// tableau; the weights come from running the same tableau on unit vectors.
ExtrapolationResult neville_extrapolate(const std::vector<std::pair<double, double>>& points);

struct ComparisonRow {
  double t = 0.0;
  std::string method;  // "exact", "trotter24", "fixed", "extrapolation"
  double m_or_eps = 0.0;
  double estimate = 0.0;
  double abs_error = 0.0;
  long gate_count = 0;  // exponentials in the deepest circuit
};

struct ComparisonOptions {
  /// Explicit step counts (M_0 > ... > M_m) overriding the default N, N-1, ..., N-m.
  std::vector<int> m_sequence;
  int dense_limit = kDefaultDenseLimit;
};

/// For accepted step N of an observable-mode trace (1-based), compares the
/// controller's value against fixed-step T2 and its m-th order extrapolation
/// (for each m), all against exact evolution to t_N.
std::vector<ComparisonRow> compare_extrapolation_vs_adaptive(const SplitHamiltonian& h, const PauliSum& obs,
                                                             const StateVector& psi0, const SimulationTrace& trace,
                                                             int step_index, const std::vector<int>& m_values,
                                                             const ComparisonOptions& opts = {});

/// Index (1-based) of the accepted step whose end time is closest to t.
int step_closest_to(const SimulationTrace& trace, double t);

void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows);
nlohmann::json comparison_to_json(const std::vector<ComparisonRow>& rows);

}  // namespace trotter24
