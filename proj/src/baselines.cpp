#include "trotter24/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "trotter24/estimators.hpp"

namespace trotter24 {

namespace {

PauliSum scaled_part(const SplitHamiltonian& h, Part p) {
  return h.part(p) * Complex{h.modulation(p)(0.0)};
}

// Neville's tableau evaluated at x = 0.
double neville_at_zero(const std::vector<double>& xs, std::vector<double> column) {
  const std::size_t n = xs.size();
  for (std::size_t width = 1; width < n; ++width) {
    for (std::size_t i = 0; i + width < n; ++i) {
      const std::size_t j = i + width;
      column[i] = (-xs[j] * column[i] + xs[i] * column[i + 1]) / (xs[i] - xs[j]);
    }
  }
  return column.front();
}

}  // namespace

WNormReport w_norms(const SplitHamiltonian& h, const NormOptions& opts) {
  if (h.time_dependent()) throw std::invalid_argument("W norms need a time-independent Hamiltonian");
  const PauliSum a = scaled_part(h, Part::A);
  const PauliSum b = scaled_part(h, Part::B);
  const PauliSum ba = commutator(b, a);
  const PauliSum ab = ba * Complex{-1.0};

  WNormReport r;
  r.num_sites = h.num_sites();
  r.norm_bba = spectral_norm(commutator(b, ba), opts);
  r.norm_aba = spectral_norm(commutator(a, ba), opts);
  const double norm_aab = spectral_norm(commutator(a, ab), opts);
  const double norm_bab = spectral_norm(commutator(b, ab), opts);
  r.w_ab = r.norm_bba + 0.5 * r.norm_aba;
  r.w_ba = norm_aab + 0.5 * norm_bab;
  r.tighter_side = r.w_ab <= r.w_ba ? Ordering::AB : Ordering::BA;
  return r;
}

double dt_bound(double w, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (w <= 0.0) return std::numeric_limits<double>::infinity();
  return std::cbrt(epsilon / w);
}

double dt_bound(const WNormReport& report, double epsilon) { return dt_bound(report.tighter(), epsilon); }

double fixed_step_expectation(const SplitHamiltonian& h, const PauliSum& obs, const StateVector& psi0, double t,
                              int steps, double t_start) {
  if (steps < 1) throw std::invalid_argument("fixed-step evolution needs M >= 1");
  StateVector psi = psi0;
  const double dt = t / steps;
  if (t != 0.0) {
    const bool td = h.time_dependent();
    const Schedule fixed = td ? Schedule{} : second_order_schedule(h, t_start, dt);
    for (int k = 0; k < steps; ++k) {
      apply_schedule(td ? second_order_schedule(h, t_start + k * dt, dt) : fixed, h, psi);
    }
  }
  return expectation(obs, psi);
}

ExtrapolationResult neville_extrapolate(const std::vector<std::pair<double, double>>& points) {
  if (points.empty()) throw std::invalid_argument("extrapolation needs at least one point");
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0)) throw std::invalid_argument("extrapolation abscissae must be positive");
    xs.push_back(x);
    ys.push_back(y);
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      if (xs[i] == xs[j]) throw std::invalid_argument("duplicate extrapolation abscissae");
    }
  }
  ExtrapolationResult out;
  out.estimate = neville_at_zero(xs, ys);
  out.coefficients.resize(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::vector<double> unit(xs.size(), 0.0);
    unit[i] = 1.0;
    out.coefficients[i] = neville_at_zero(xs, std::move(unit));
  }
  return out;
}

int step_closest_to(const SimulationTrace& trace, double t) {
  if (trace.schedule.empty()) throw std::invalid_argument("trace has no accepted steps");
  int best = 1;
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trace.schedule.size(); ++i) {
    const double end = trace.schedule[i].t + trace.schedule[i].dt;
    if (std::abs(end - t) < gap) {
      gap = std::abs(end - t);
      best = static_cast<int>(i) + 1;
    }
  }
  return best;
}

std::vector<ComparisonRow> compare_extrapolation_vs_adaptive(const SplitHamiltonian& h, const PauliSum& obs,
                                                             const StateVector& psi0, const SimulationTrace& trace,
                                                             int step_index, const std::vector<int>& m_values,
                                                             const ComparisonOptions& opts) {
  if (step_index < 1 || static_cast<std::size_t>(step_index) > trace.schedule.size()) {
    throw std::out_of_range("step index outside the trace");
  }
  const int n = step_index;
  const double t_start = trace.config.t_ini;
  const ScheduleEntry& last = trace.schedule[static_cast<std::size_t>(n - 1)];
  const double t_n = last.t + last.dt;
  const double span = t_n - t_start;

  // Reference value at t_N.
  StateVector exact_state = psi0;
  if (h.time_dependent()) {
    reference_evolve(h, exact_state, t_start, span, 1e-3);
  } else {
    ExactPropagator(h.full(), opts.dense_limit).apply(exact_state, span);
  }
  const double exact = expectation(obs, exact_state);

  // Controller value: replay the first N accepted steps.
  StateVector adaptive = psi0;
  for (int k = 0; k < n; ++k) {
    const ScheduleEntry& e = trace.schedule[static_cast<std::size_t>(k)];
    apply_schedule(second_order_schedule(h, e.t, e.dt), h, adaptive);
  }
  const double adaptive_value = expectation(obs, adaptive);

  std::vector<ComparisonRow> rows;
  rows.push_back({t_n, "exact", 0.0, exact, 0.0, 0});
  rows.push_back({t_n, "trotter24", trace.config.epsilon, adaptive_value, std::abs(adaptive_value - exact), 3L * n});

  std::map<int, double> cache;
  auto sample = [&](int m_steps) {
    auto it = cache.find(m_steps);
    if (it != cache.end()) return it->second;
    const double v = fixed_step_expectation(h, obs, psi0, span, m_steps, t_start);
    cache.emplace(m_steps, v);
    return v;
  };

  const double raw = sample(n);
  rows.push_back({t_n, "fixed", 1.0 / n, raw, std::abs(raw - exact), 3L * n});

  for (int m : m_values) {
    if (m < 0) throw std::invalid_argument("extrapolation order must be nonnegative");
    std::vector<int> ms;
    if (!opts.m_sequence.empty()) {
      if (opts.m_sequence.size() < static_cast<std::size_t>(m + 1)) {
        throw std::invalid_argument("configured M sequence is shorter than m + 1");
      }
      ms.assign(opts.m_sequence.begin(), opts.m_sequence.begin() + m + 1);
    } else {
      if (n < m + 1) {
        throw std::invalid_argument("step N = " + std::to_string(n) + " has fewer than m + 1 = " +
                                    std::to_string(m + 1) + " distinct step counts");
      }
      for (int i = 0; i <= m; ++i) ms.push_back(n - i);
    }
    std::vector<std::pair<double, double>> points;
    int deepest = 0;
    for (int m_steps : ms) {
      if (m_steps > n) throw std::invalid_argument("step counts must not exceed N");
      points.emplace_back(1.0 / m_steps, sample(m_steps));
      deepest = std::max(deepest, m_steps);
    }
    const ExtrapolationResult ex = neville_extrapolate(points);
    rows.push_back({t_n, "extrapolation", static_cast<double>(m), ex.estimate, std::abs(ex.estimate - exact),
                    3L * deepest});
  }
  return rows;
}

void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << "t,method,m_or_eps,estimate,abs_error,gate_count\n";
  os.precision(17);
  for (const ComparisonRow& r : rows) {
    os << r.t << ',' << r.method << ',' << r.m_or_eps << ',' << r.estimate << ',' << r.abs_error << ','
       << r.gate_count << '\n';
  }
}

nlohmann::json comparison_to_json(const std::vector<ComparisonRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const ComparisonRow& r : rows) {
    out.push_back({{"t", r.t},
                   {"method", r.method},
                   {"m_or_eps", r.m_or_eps},
                   {"estimate", r.estimate},
                   {"abs_error", r.abs_error},
                   {"gate_count", r.gate_count}});
  }
  return out;
}

}  // namespace trotter24
