#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "trotter24/pauli.hpp"

namespace trotter24 {

inline constexpr int kMaxStateSites = 30;

/// Dense amplitude vector over 2^L basis states (bit j of the index is site j).
class StateVector {
 public:
  StateVector() = default;
  /// |0...0>.
  explicit StateVector(int num_sites);
  StateVector(int num_sites, std::vector<Complex> amplitudes);

  static StateVector basis(int num_sites, std::uint64_t index);
  /// Haar-like random state from complex Gaussian amplitudes.
  static StateVector random(int num_sites, std::uint64_t seed);

  int num_sites() const { return num_sites_; }
  std::size_t dimension() const { return amps_.size(); }

  std::span<Complex> amplitudes() { return amps_; }
  std::span<const Complex> amplitudes() const { return amps_; }
  Complex& operator[](std::size_t i) { return amps_[i]; }
  const Complex& operator[](std::size_t i) const { return amps_[i]; }

  double norm() const;
  void normalize();

  Eigen::Map<const Eigen::VectorXcd> as_eigen() const {
    return {amps_.data(), static_cast<Eigen::Index>(amps_.size())};
  }
  Eigen::Map<Eigen::VectorXcd> as_eigen() { return {amps_.data(), static_cast<Eigen::Index>(amps_.size())}; }

  /// Little-endian interleaved (re, im) float64 pairs.  Debugging aid only.
  void write_binary(std::ostream& os) const;
  static StateVector read_binary(std::istream& is, int num_sites);

 private:
  int num_sites_ = 0;
  std::vector<Complex> amps_;
};

enum class Axis { PlusX, MinusX, PlusY, MinusY, PlusZ, MinusZ };

Axis parse_axis(std::string_view text);

/// Product state with every site in the +1 (Plus*) or -1 (Minus*) eigenstate of the axis.
StateVector prepare_polarized(int num_sites, Axis axis);

Complex inner_product(const StateVector& phi, const StateVector& psi);
/// |<phi|psi>|^2.
double fidelity(const StateVector& phi, const StateVector& psi);
/// 1 - |<phi|psi>|^2 evaluated as the squared norm of psi's component orthogonal
/// to phi, which keeps relative accuracy when the states are nearly equal.
double infidelity(const StateVector& phi, const StateVector& psi);
double distance(const StateVector& phi, const StateVector& psi);

/// <psi|obs|psi>; throws for non-Hermitian observables or a residual imaginary part above 1e-10.
double expectation(const PauliSum& obs, const StateVector& psi);
/// <psi|obs^2|psi> - <psi|obs|psi>^2, clamped at 0 from below.
double variance(const PauliSum& obs, const StateVector& psi);

/// exp(-i theta G) for a Hermitian generator G whose terms pairwise commute.
class CommutingLayer {
 public:
  enum class Plan {
    Diagonal,    // only Z/I strings: per-basis-state phases
    SingleSite,  // one-site terms on distinct sites: fused 2x2 rotations
    PerTerm,     // general commuting strings: cos/sin block rotation per term
  };

  CommutingLayer() = default;
  explicit CommutingLayer(PauliSum generator);

  const PauliSum& generator() const { return generator_; }
  Plan plan() const { return plan_; }
  int num_sites() const { return generator_.num_sites(); }

  void apply(StateVector& state, double theta) const;

 private:
  struct SiteRotation {
    int site;
    char axis;
    double coefficient;
  };
  struct Term {
    Mask x;
    Mask z;
    double coefficient;
  };

  PauliSum generator_;
  Plan plan_ = Plan::Diagonal;
  std::vector<double> diagonal_;
  std::vector<SiteRotation> rotations_;
  std::vector<Term> terms_;
};

StateVector apply_layer(StateVector state, const CommutingLayer& layer, double theta);

/// exp(-i H dt) via a cached dense eigendecomposition of H.
class ExactPropagator {
 public:
  explicit ExactPropagator(const PauliSum& hamiltonian, int dense_limit = kDefaultDenseLimit);

  int num_sites() const { return num_sites_; }
  void apply(StateVector& state, double dt) const;
  Eigen::MatrixXcd matrix(double dt) const;
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }

 private:
  int num_sites_ = 0;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXcd eigenvectors_;
};

/// Uses a per-thread single-entry cache keyed on h.
StateVector exact_evolve(const StateVector& state, const PauliSum& h, double dt,
                         int dense_limit = kDefaultDenseLimit);

}  // namespace trotter24
