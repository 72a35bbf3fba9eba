// Matrix-free Lanczos for the largest |eigenvalue| of a Hermitian PauliSum.
//
// Full (twice-iterated Gram-Schmidt) reorthogonalization against the stored
// basis, explicit restarts from the dominant Ritz vector once the basis
// reaches max_krylov vectors.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "trotter24/errors.hpp"
#include "trotter24/pauli.hpp"

namespace trotter24 {

namespace {

using Vec = Eigen::VectorXcd;

struct RitzPair {
  double value = 0.0;
  double residual = 0.0;
  Eigen::VectorXd coords;
};

// Extremal Ritz pair (largest |theta|) of the k x k tridiagonal block.
RitzPair dominant_ritz(const std::vector<double>& alpha, const std::vector<double>& beta, std::size_t k,
                       double beta_next) {
  Eigen::VectorXd diag(static_cast<Eigen::Index>(k));
  Eigen::VectorXd sub(static_cast<Eigen::Index>(std::max<std::size_t>(k, 1) - 1));
  for (std::size_t i = 0; i < k; ++i) diag(static_cast<Eigen::Index>(i)) = alpha[i];
  for (std::size_t i = 0; i + 1 < k; ++i) sub(static_cast<Eigen::Index>(i)) = beta[i];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
  tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  const auto& vals = tri.eigenvalues();
  const Eigen::Index last = vals.size() - 1;
  const Eigen::Index pick = std::abs(vals(0)) >= std::abs(vals(last)) ? 0 : last;
  RitzPair out;
  out.value = vals(pick);
  out.coords = tri.eigenvectors().col(pick);
  out.residual = std::abs(beta_next * out.coords(last));
  return out;
}

}  // namespace

double spectral_norm_lanczos(const PauliSum& s, const NormOptions& opts) {
  PauliSum h = s;
  if (!h.is_hermitian()) {
    if (!h.is_anti_hermitian()) {
      throw std::invalid_argument("spectral_norm requires a Hermitian or anti-Hermitian PauliSum");
    }
    h *= Complex{0.0, 1.0};
  }
  if (h.empty()) return 0.0;

  const Eigen::Index dim = Eigen::Index{1} << h.num_sites();
  const auto max_krylov = static_cast<std::size_t>(std::max<Eigen::Index>(2, std::min<Eigen::Index>(opts.max_krylov, dim)));

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss;
  Vec start(dim);
  for (Eigen::Index i = 0; i < dim; ++i) start(i) = Complex{gauss(rng), gauss(rng)};
  start.normalize();

  auto apply = [&h](const Vec& in, Vec& out) {
    h.apply(std::span<const Complex>(in.data(), static_cast<std::size_t>(in.size())),
            std::span<Complex>(out.data(), static_cast<std::size_t>(out.size())));
  };

  double previous = 0.0;
  for (int restart = 0; restart <= opts.max_restarts; ++restart) {
    std::vector<Vec> basis;
    basis.reserve(max_krylov);
    basis.push_back(start);
    std::vector<double> alpha;
    std::vector<double> beta;
    Vec w(dim);

    RitzPair ritz;
    std::size_t k = 0;
    bool invariant = false;
    while (k < max_krylov) {
      apply(basis[k], w);
      alpha.push_back(basis[k].dot(w).real());
      for (int pass = 0; pass < 2; ++pass) {
        for (const Vec& q : basis) w -= q * q.dot(w);
      }
      const double b = w.norm();
      ++k;
      const bool check = (k % 5 == 0) || k == max_krylov || b < 1e-12 * std::max(1.0, std::abs(alpha.back()));
      if (check) {
        ritz = dominant_ritz(alpha, beta, k, b);
        const double scale = std::max(std::abs(ritz.value), 1e-300);
        if (b < 1e-12 * std::max(1.0, std::abs(alpha.back())) || static_cast<Eigen::Index>(k) == dim) {
          invariant = true;
          break;
        }
        if (ritz.residual <= opts.rel_tol * scale) return std::abs(ritz.value);
      }
      if (k == max_krylov) break;
      beta.push_back(b);
      basis.push_back(w / b);
    }
    if (invariant) return std::abs(ritz.value);

    // Restart from the dominant Ritz vector.
    Vec next = Vec::Zero(dim);
    for (std::size_t i = 0; i < k; ++i) next += basis[i] * ritz.coords(static_cast<Eigen::Index>(i));
    next.normalize();
    start = std::move(next);
    if (restart > 0 && std::abs(std::abs(ritz.value) - previous) <= 1e-3 * opts.rel_tol * std::abs(ritz.value)) {
      return std::abs(ritz.value);
    }
    previous = std::abs(ritz.value);
  }
  throw ConvergenceError("Lanczos spectral norm did not converge within " + std::to_string(opts.max_restarts) +
                         " restarts");
}

}  // namespace trotter24
