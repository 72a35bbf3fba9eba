#pragma once

// Pauli-string algebra over bitmasks.
//
// A string on L sites is stored as a pair of masks (x, z); bit j of each mask
// refers to site j.  The canonical (Hermitian) string for a mask pair is the
// tensor product of sigma(x_j, z_j) with sigma(0,0)=I, sigma(1,0)=X,
// sigma(0,1)=Z and sigma(1,1)=Y.  Dense matrices and state vectors use the
// same convention: basis index bit j is the computational state of site j,
// so site 0 is the least significant bit.

#include <bit>
#include <complex>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "json.hpp"

namespace trotter24 {

using Complex = std::complex<double>;
using Mask = std::uint64_t;

inline constexpr int kMaxSites = 62;
inline constexpr int kDefaultDenseLimit = 12;
inline constexpr int kDefaultNormDenseLimit = 8;
inline constexpr double kDefaultPruneThreshold = 1e-14;

/// i^k for k in 0..3.
Complex phase_power(int k);

/// Sign and phase picked up by the canonical string (x, z) acting on basis state |index>:
/// P|index> = i^{phase_exponent} |index ^ x>.
inline int action_phase(Mask x, Mask z, Mask index) {
  return (std::popcount(x & z) + 2 * std::popcount(z & index)) & 3;
}

struct PauliString {
  Mask x = 0;
  Mask z = 0;
  /// Overall factor i^phase in front of the canonical string.
  std::uint8_t phase = 0;

  static PauliString identity() { return {}; }
  /// axis is one of 'I', 'X', 'Y', 'Z'.
  static PauliString single(int site, char axis);
  /// Parses "XIZZ" with site 0 leftmost; an optional leading sign/phase
  /// ("-", "i", "-i", "+") is accepted.
  static PauliString parse(std::string_view text);

  /// Letters only, site 0 leftmost; the phase is not rendered.
  std::string letters(int num_sites) const;
  Complex phase_factor() const { return phase_power(phase); }
  bool commutes_with(const PauliString& other) const {
    return ((std::popcount(x & other.z) + std::popcount(z & other.x)) & 1) == 0;
  }
  int weight() const { return std::popcount(x | z); }

  friend bool operator==(const PauliString&, const PauliString&) = default;
};

/// Product pq including the group phase.
PauliString multiply(const PauliString& p, const PauliString& q);
inline PauliString operator*(const PauliString& p, const PauliString& q) { return multiply(p, q); }

/// Weighted sum of canonical Pauli strings on a fixed number of sites.
class PauliSum {
 public:
  using Key = std::pair<Mask, Mask>;
  using TermMap = std::map<Key, Complex>;

  PauliSum() = default;
  explicit PauliSum(int num_sites, double prune_threshold = kDefaultPruneThreshold);

  /// Adds coeff * p (the string's phase is folded into the coefficient).
  PauliSum& add(const PauliString& p, Complex coeff);
  PauliSum& add(std::string_view letters, Complex coeff);

  int num_sites() const { return num_sites_; }
  double prune_threshold() const { return prune_threshold_; }
  const TermMap& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  Complex coefficient(Mask x, Mask z) const;

  /// Drops coefficients with magnitude at or below the prune threshold.
  PauliSum& prune();

  /// Canonical strings are Hermitian, so the sum is Hermitian iff all coefficients are real.
  bool is_hermitian(double tol = 1e-12) const;
  bool is_anti_hermitian(double tol = 1e-12) const;
  /// Pairwise commutation of all stored strings.
  bool terms_commute() const;
  bool is_diagonal() const;

  PauliSum& operator+=(const PauliSum& other);
  PauliSum& operator-=(const PauliSum& other);
  PauliSum& operator*=(Complex scale);

  friend PauliSum operator+(PauliSum a, const PauliSum& b) { return a += b; }
  friend PauliSum operator-(PauliSum a, const PauliSum& b) { return a -= b; }
  friend PauliSum operator*(PauliSum a, Complex s) { return a *= s; }
  friend PauliSum operator*(Complex s, PauliSum a) { return a *= s; }
  friend PauliSum operator*(const PauliSum& a, const PauliSum& b);
  friend bool operator==(const PauliSum& a, const PauliSum& b) {
    return a.num_sites_ == b.num_sites_ && a.terms_ == b.terms_;
  }

  /// out = S * in, matrix-free.  out must not alias in.
  void apply(std::span<const Complex> in, std::span<Complex> out) const;

 private:
  int num_sites_ = 0;
  double prune_threshold_ = kDefaultPruneThreshold;
  TermMap terms_;
};

/// ab - ba.  Only anticommuting string pairs contribute (2 * p * q each).
PauliSum commutator(const PauliSum& a, const PauliSum& b);

Eigen::MatrixXcd to_dense(const PauliSum& s, int dense_limit = kDefaultDenseLimit);

struct NormOptions {
  /// Dense eigendecomposition at or below this many sites; Lanczos above.
  int dense_limit = kDefaultNormDenseLimit;
  int max_krylov = 200;
  int max_restarts = 40;
  double rel_tol = 1e-6;
  std::uint64_t seed = 0x7e57'5eedULL;
};

/// Largest |eigenvalue|.  Anti-Hermitian input is multiplied by i first;
/// anything else that is not Hermitian is rejected.
double spectral_norm(const PauliSum& s, const NormOptions& opts = {});
double spectral_norm_dense(const PauliSum& s, int dense_limit = kDefaultDenseLimit);
double spectral_norm_lanczos(const PauliSum& s, const NormOptions& opts = {});

/// [{"coefficient": c, "string": "XIZZ"}, ...]; c is a number or [re, im].
nlohmann::json to_json(const PauliSum& s);
/// The site count is taken from the string length unless num_sites >= 0 is given.
PauliSum pauli_sum_from_json(const nlohmann::json& j, int num_sites = -1);

}  // namespace trotter24
