#include "trotter24/statevector.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <memory>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "trotter24/errors.hpp"

namespace trotter24 {

namespace {

void require_same_sites(const StateVector& a, const StateVector& b) {
  if (a.num_sites() != b.num_sites()) {
    throw std::invalid_argument("state vectors have different site counts (" + std::to_string(a.num_sites()) +
                                " vs " + std::to_string(b.num_sites()) + ")");
  }
}

void check_sites(int num_sites) {
  if (num_sites < 0 || num_sites > kMaxStateSites) {
    throw std::invalid_argument("state vector site count must lie in [0, " + std::to_string(kMaxStateSites) + "]");
  }
}

}  // namespace

StateVector::StateVector(int num_sites) : num_sites_(num_sites) {
  check_sites(num_sites);
  amps_.assign(std::size_t{1} << num_sites, Complex{});
  amps_[0] = 1.0;
}

StateVector::StateVector(int num_sites, std::vector<Complex> amplitudes)
    : num_sites_(num_sites), amps_(std::move(amplitudes)) {
  check_sites(num_sites);
  if (amps_.size() != (std::size_t{1} << num_sites)) {
    throw std::invalid_argument("amplitude count does not match 2^num_sites");
  }
}

StateVector StateVector::basis(int num_sites, std::uint64_t index) {
  StateVector s(num_sites);
  if (index >= s.dimension()) throw std::out_of_range("basis index out of range");
  s.amps_[0] = 0.0;
  s.amps_[index] = 1.0;
  return s;
}

StateVector StateVector::random(int num_sites, std::uint64_t seed) {
  StateVector s(num_sites);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (auto& a : s.amps_) a = Complex{gauss(rng), gauss(rng)};
  s.normalize();
  return s;
}

double StateVector::norm() const {
  double acc = 0.0;
  for (const auto& a : amps_) acc += std::norm(a);
  return std::sqrt(acc);
}

void StateVector::normalize() {
  const double n = norm();
  if (n == 0.0) throw std::domain_error("cannot normalize the zero vector");
  for (auto& a : amps_) a /= n;
}

void StateVector::write_binary(std::ostream& os) const {
  static_assert(sizeof(Complex) == 2 * sizeof(double));
  // Assumes a little-endian host, which is the documented dump format.
  os.write(reinterpret_cast<const char*>(amps_.data()), static_cast<std::streamsize>(amps_.size() * sizeof(Complex)));
}

StateVector StateVector::read_binary(std::istream& is, int num_sites) {
  std::vector<Complex> amps(std::size_t{1} << num_sites);
  is.read(reinterpret_cast<char*>(amps.data()), static_cast<std::streamsize>(amps.size() * sizeof(Complex)));
  if (!is) throw std::runtime_error("truncated state vector dump");
  return StateVector(num_sites, std::move(amps));
}

Axis parse_axis(std::string_view text) {
  if (text == "+x" || text == "x") return Axis::PlusX;
  if (text == "-x") return Axis::MinusX;
  if (text == "+y" || text == "y") return Axis::PlusY;
  if (text == "-y") return Axis::MinusY;
  if (text == "+z" || text == "z") return Axis::PlusZ;
  if (text == "-z") return Axis::MinusZ;
  throw std::invalid_argument("unknown polarization axis '" + std::string(text) + "'");
}

StateVector prepare_polarized(int num_sites, Axis axis) {
  if (num_sites < 1) throw std::invalid_argument("prepare_polarized needs at least one site");
  const double r = 1.0 / std::sqrt(2.0);
  Complex up;
  Complex down;
  switch (axis) {
    case Axis::PlusX: up = r; down = r; break;
    case Axis::MinusX: up = r; down = -r; break;
    case Axis::PlusY: up = r; down = Complex{0.0, r}; break;
    case Axis::MinusY: up = r; down = Complex{0.0, -r}; break;
    case Axis::PlusZ: up = 1.0; down = 0.0; break;
    case Axis::MinusZ: up = 0.0; down = 1.0; break;
  }
  StateVector s(num_sites);
  auto amps = s.amplitudes();
  for (std::size_t i = 0; i < amps.size(); ++i) {
    Complex a = 1.0;
    for (int j = 0; j < num_sites; ++j) a *= ((i >> j) & 1U) ? down : up;
    amps[i] = a;
  }
  return s;
}

Complex inner_product(const StateVector& phi, const StateVector& psi) {
  require_same_sites(phi, psi);
  Complex acc{};
  const auto a = phi.amplitudes();
  const auto b = psi.amplitudes();
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

double fidelity(const StateVector& phi, const StateVector& psi) { return std::norm(inner_product(phi, psi)); }

double infidelity(const StateVector& phi, const StateVector& psi) {
  const Complex overlap = inner_product(phi, psi);
  const auto a = phi.amplitudes();
  const auto b = psi.amplitudes();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::norm(b[i] - overlap * a[i]);
  return acc;
}

double distance(const StateVector& phi, const StateVector& psi) {
  require_same_sites(phi, psi);
  const auto a = phi.amplitudes();
  const auto b = psi.amplitudes();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::norm(a[i] - b[i]);
  return std::sqrt(acc);
}

double expectation(const PauliSum& obs, const StateVector& psi) {
  if (obs.num_sites() != psi.num_sites()) throw std::invalid_argument("observable and state have different site counts");
  if (!obs.is_hermitian()) throw std::invalid_argument("expectation requires a Hermitian observable");
  const auto amps = psi.amplitudes();
  Complex total{};
  double scale = 1.0;
  for (const auto& [key, c] : obs.terms()) {
    const auto [x, z] = key;
    const Complex base = phase_power(std::popcount(x & z));
    Complex acc{};
    for (std::size_t i = 0; i < amps.size(); ++i) {
      const Complex v = std::conj(amps[i ^ x]) * amps[i];
      acc += (std::popcount(z & i) & 1) ? -v : v;
    }
    total += c * base * acc;
    scale += std::abs(c);
  }
  if (std::abs(total.imag()) > 1e-10 * scale) {
    throw std::runtime_error("expectation value has a non-negligible imaginary part");
  }
  return total.real();
}

double variance(const PauliSum& obs, const StateVector& psi) {
  if (!obs.is_hermitian()) throw std::invalid_argument("variance requires a Hermitian observable");
  const auto amps = psi.amplitudes();
  std::vector<Complex> applied(amps.size());
  obs.apply(amps, applied);
  Complex mean{};
  for (std::size_t i = 0; i < amps.size(); ++i) mean += std::conj(amps[i]) * applied[i];
  double acc = 0.0;
  for (std::size_t i = 0; i < amps.size(); ++i) acc += std::norm(applied[i] - mean.real() * amps[i]);
  return std::max(acc, 0.0);
}

CommutingLayer::CommutingLayer(PauliSum generator) : generator_(std::move(generator)) {
  if (!generator_.is_hermitian()) throw std::invalid_argument("layer generator must be Hermitian");
  if (!generator_.terms_commute()) throw std::invalid_argument("layer generator terms do not pairwise commute");

  bool single_site = true;
  for (const auto& [key, c] : generator_.terms()) {
    const PauliString p{key.first, key.second, 0};
    terms_.push_back({key.first, key.second, c.real()});
    if (p.weight() != 1) single_site = false;
  }

  if (generator_.is_diagonal()) {
    plan_ = Plan::Diagonal;
    const std::size_t dim = std::size_t{1} << generator_.num_sites();
    diagonal_.assign(dim, 0.0);
    for (const Term& t : terms_) {
      for (std::size_t i = 0; i < dim; ++i) {
        diagonal_[i] += (std::popcount(t.z & i) & 1) ? -t.coefficient : t.coefficient;
      }
    }
    terms_.clear();
  } else if (single_site) {
    // Commuting one-site strings necessarily sit on distinct sites.
    plan_ = Plan::SingleSite;
    for (const Term& t : terms_) {
      const int site = std::countr_zero(t.x | t.z);
      const char axis = t.x == 0 ? 'Z' : (t.z == 0 ? 'X' : 'Y');
      rotations_.push_back({site, axis, t.coefficient});
    }
    terms_.clear();
  } else {
    plan_ = Plan::PerTerm;
  }
}

void CommutingLayer::apply(StateVector& state, double theta) const {
  if (state.num_sites() != generator_.num_sites()) {
    throw std::invalid_argument("layer and state have different site counts");
  }
  if (theta == 0.0) return;
  auto amps = state.amplitudes();
  const std::size_t dim = amps.size();

  switch (plan_) {
    case Plan::Diagonal: {
      for (std::size_t i = 0; i < dim; ++i) amps[i] *= std::polar(1.0, -theta * diagonal_[i]);
      return;
    }
    case Plan::SingleSite: {
      for (const SiteRotation& r : rotations_) {
        const double phi = theta * r.coefficient;
        const double c = std::cos(phi);
        const double s = std::sin(phi);
        Complex m00;
        Complex m01;
        Complex m10;
        Complex m11;
        switch (r.axis) {
          case 'X': m00 = c; m01 = Complex{0.0, -s}; m10 = Complex{0.0, -s}; m11 = c; break;
          case 'Y': m00 = c; m01 = -s; m10 = s; m11 = c; break;
          default: m00 = std::polar(1.0, -phi); m01 = 0.0; m10 = 0.0; m11 = std::polar(1.0, phi); break;
        }
        const std::size_t bit = std::size_t{1} << r.site;
        for (std::size_t i = 0; i < dim; ++i) {
          if (i & bit) continue;
          const Complex a0 = amps[i];
          const Complex a1 = amps[i | bit];
          amps[i] = m00 * a0 + m01 * a1;
          amps[i | bit] = m10 * a0 + m11 * a1;
        }
      }
      return;
    }
    case Plan::PerTerm: {
      for (const Term& t : terms_) {
        const double phi = theta * t.coefficient;
        const double c = std::cos(phi);
        const double s = std::sin(phi);
        if (t.x == 0) {
          const Complex plus = std::polar(1.0, -phi);
          const Complex minus = std::polar(1.0, phi);
          for (std::size_t i = 0; i < dim; ++i) amps[i] *= (std::popcount(t.z & i) & 1) ? minus : plus;
          continue;
        }
        const std::size_t high = std::size_t{1} << (63 - std::countl_zero(t.x));
        const Complex minus_i_s{0.0, -s};
        for (std::size_t i = 0; i < dim; ++i) {
          if (i & high) continue;
          const std::size_t j = i ^ t.x;
          const Complex ph_i = phase_power(action_phase(t.x, t.z, i));
          const Complex ph_j = phase_power(action_phase(t.x, t.z, j));
          const Complex ai = amps[i];
          const Complex aj = amps[j];
          amps[i] = c * ai + minus_i_s * ph_j * aj;
          amps[j] = c * aj + minus_i_s * ph_i * ai;
        }
      }
      return;
    }
  }
}

StateVector apply_layer(StateVector state, const CommutingLayer& layer, double theta) {
  layer.apply(state, theta);
  return state;
}

ExactPropagator::ExactPropagator(const PauliSum& hamiltonian, int dense_limit)
    : num_sites_(hamiltonian.num_sites()) {
  if (!hamiltonian.is_hermitian()) throw std::invalid_argument("exact propagation requires a Hermitian Hamiltonian");
  const Eigen::MatrixXcd h = to_dense(hamiltonian, dense_limit);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
  if (solver.info() != Eigen::Success) throw ConvergenceError("dense Hamiltonian eigendecomposition failed");
  eigenvalues_ = solver.eigenvalues();
  eigenvectors_ = solver.eigenvectors();
}

void ExactPropagator::apply(StateVector& state, double dt) const {
  if (state.num_sites() != num_sites_) throw std::invalid_argument("propagator and state have different site counts");
  if (dt == 0.0) return;
  Eigen::VectorXcd coeffs = eigenvectors_.adjoint() * state.as_eigen();
  for (Eigen::Index k = 0; k < coeffs.size(); ++k) coeffs(k) *= std::polar(1.0, -eigenvalues_(k) * dt);
  state.as_eigen() = eigenvectors_ * coeffs;
}

Eigen::MatrixXcd ExactPropagator::matrix(double dt) const {
  Eigen::VectorXcd phases(eigenvalues_.size());
  for (Eigen::Index k = 0; k < phases.size(); ++k) phases(k) = std::polar(1.0, -eigenvalues_(k) * dt);
  return eigenvectors_ * phases.asDiagonal() * eigenvectors_.adjoint();
}

StateVector exact_evolve(const StateVector& state, const PauliSum& h, double dt, int dense_limit) {
  if (h.num_sites() > dense_limit) throw DimensionLimitError(h.num_sites(), dense_limit);
  struct Cache {
    PauliSum key;
    std::unique_ptr<ExactPropagator> propagator;
  };
  thread_local Cache cache;
  if (!cache.propagator || !(cache.key == h)) {
    cache.propagator = std::make_unique<ExactPropagator>(h, dense_limit);
    cache.key = h;
  }
  StateVector out = state;
  cache.propagator->apply(out, dt);
  return out;
}

}  // namespace trotter24
