#include "trotter24/pauli.hpp"

#include <cmath>
#include <stdexcept>

#include "trotter24/errors.hpp"

namespace trotter24 {

Complex phase_power(int k) {
  switch (k & 3) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

PauliString PauliString::single(int site, char axis) {
  if (site < 0 || site >= kMaxSites) throw std::out_of_range("Pauli site index out of range");
  const Mask bit = Mask{1} << site;
  switch (axis) {
    case 'I': return {};
    case 'X': return {bit, 0, 0};
    case 'Y': return {bit, bit, 0};
    case 'Z': return {0, bit, 0};
    default: throw std::invalid_argument(std::string("unknown Pauli axis '") + axis + "'");
  }
}

PauliString PauliString::parse(std::string_view text) {
  PauliString out;
  if (text.starts_with("+")) {
    text.remove_prefix(1);
  } else if (text.starts_with("-")) {
    out.phase = 2;
    text.remove_prefix(1);
  }
  if (text.starts_with("i")) {
    out.phase = static_cast<std::uint8_t>((out.phase + 1) & 3);
    text.remove_prefix(1);
  }
  if (text.size() > static_cast<std::size_t>(kMaxSites)) {
    throw std::invalid_argument("Pauli string longer than " + std::to_string(kMaxSites) + " sites");
  }
  for (std::size_t j = 0; j < text.size(); ++j) {
    const PauliString s = single(static_cast<int>(j), text[j]);
    out.x |= s.x;
    out.z |= s.z;
  }
  return out;
}

std::string PauliString::letters(int num_sites) const {
  std::string out(static_cast<std::size_t>(num_sites), 'I');
  for (int j = 0; j < num_sites; ++j) {
    const bool xb = (x >> j) & 1U;
    const bool zb = (z >> j) & 1U;
    out[static_cast<std::size_t>(j)] = xb ? (zb ? 'Y' : 'X') : (zb ? 'Z' : 'I');
  }
  return out;
}

PauliString multiply(const PauliString& p, const PauliString& q) {
  PauliString r;
  r.x = p.x ^ q.x;
  r.z = p.z ^ q.z;
  // Canonical P(x,z) = i^{|x&z|} X^x Z^z, and Z^z1 X^x2 = (-1)^{|z1&x2|} X^x2 Z^z1.
  const int k = p.phase + q.phase + std::popcount(p.x & p.z) + std::popcount(q.x & q.z) +
                2 * std::popcount(p.z & q.x) - std::popcount(r.x & r.z);
  r.phase = static_cast<std::uint8_t>(((k % 4) + 4) & 3);
  return r;
}

PauliSum::PauliSum(int num_sites, double prune_threshold)
    : num_sites_(num_sites), prune_threshold_(prune_threshold) {
  if (num_sites < 0 || num_sites > kMaxSites) throw std::invalid_argument("invalid number of sites");
}

PauliSum& PauliSum::add(const PauliString& p, Complex coeff) {
  const Mask limit = num_sites_ >= 64 ? ~Mask{0} : ((Mask{1} << num_sites_) - 1);
  if ((p.x & ~limit) != 0 || (p.z & ~limit) != 0) {
    throw std::invalid_argument("Pauli string acts outside the " + std::to_string(num_sites_) + " sites");
  }
  const Complex c = coeff * p.phase_factor();
  auto [it, inserted] = terms_.try_emplace(Key{p.x, p.z}, c);
  if (!inserted) it->second += c;
  if (std::abs(it->second) <= prune_threshold_) terms_.erase(it);
  return *this;
}

PauliSum& PauliSum::add(std::string_view letters, Complex coeff) {
  const PauliString p = PauliString::parse(letters);
  return add(p, coeff);
}

Complex PauliSum::coefficient(Mask x, Mask z) const {
  auto it = terms_.find(Key{x, z});
  return it == terms_.end() ? Complex{} : it->second;
}

PauliSum& PauliSum::prune() {
  std::erase_if(terms_, [this](const auto& kv) { return std::abs(kv.second) <= prune_threshold_; });
  return *this;
}

bool PauliSum::is_hermitian(double tol) const {
  for (const auto& [key, c] : terms_) {
    if (std::abs(c.imag()) > tol * std::max(1.0, std::abs(c))) return false;
  }
  return true;
}

bool PauliSum::is_anti_hermitian(double tol) const {
  for (const auto& [key, c] : terms_) {
    if (std::abs(c.real()) > tol * std::max(1.0, std::abs(c))) return false;
  }
  return true;
}

bool PauliSum::terms_commute() const {
  for (auto i = terms_.begin(); i != terms_.end(); ++i) {
    const PauliString p{i->first.first, i->first.second, 0};
    for (auto j = std::next(i); j != terms_.end(); ++j) {
      if (!p.commutes_with(PauliString{j->first.first, j->first.second, 0})) return false;
    }
  }
  return true;
}

bool PauliSum::is_diagonal() const {
  for (const auto& [key, c] : terms_) {
    if (key.first != 0) return false;
  }
  return true;
}

PauliSum& PauliSum::operator+=(const PauliSum& other) {
  if (other.num_sites_ != num_sites_) throw std::invalid_argument("PauliSum site counts differ");
  for (const auto& [key, c] : other.terms_) add(PauliString{key.first, key.second, 0}, c);
  return *this;
}

PauliSum& PauliSum::operator-=(const PauliSum& other) {
  if (other.num_sites_ != num_sites_) throw std::invalid_argument("PauliSum site counts differ");
  for (const auto& [key, c] : other.terms_) add(PauliString{key.first, key.second, 0}, -c);
  return *this;
}

PauliSum& PauliSum::operator*=(Complex scale) {
  for (auto& [key, c] : terms_) c *= scale;
  return prune();
}

PauliSum operator*(const PauliSum& a, const PauliSum& b) {
  if (a.num_sites_ != b.num_sites_) throw std::invalid_argument("PauliSum site counts differ");
  PauliSum out(a.num_sites_, std::min(a.prune_threshold_, b.prune_threshold_));
  for (const auto& [ka, ca] : a.terms_) {
    const PauliString p{ka.first, ka.second, 0};
    for (const auto& [kb, cb] : b.terms_) {
      const PauliString pq = multiply(p, PauliString{kb.first, kb.second, 0});
      auto [it, inserted] = out.terms_.try_emplace(PauliSum::Key{pq.x, pq.z}, Complex{});
      it->second += ca * cb * pq.phase_factor();
    }
  }
  return out.prune();
}

void PauliSum::apply(std::span<const Complex> in, std::span<Complex> out) const {
  const std::size_t dim = std::size_t{1} << num_sites_;
  if (in.size() != dim || out.size() != dim) throw std::invalid_argument("PauliSum::apply dimension mismatch");
  std::fill(out.begin(), out.end(), Complex{});
  for (const auto& [key, c] : terms_) {
    const auto [x, z] = key;
    const Complex base = c * phase_power(std::popcount(x & z));
    const Complex flipped = -base;
    for (std::size_t i = 0; i < dim; ++i) {
      const Complex amp = (std::popcount(z & i) & 1) ? flipped : base;
      out[i ^ x] += amp * in[i];
    }
  }
}

PauliSum commutator(const PauliSum& a, const PauliSum& b) {
  if (a.num_sites() != b.num_sites()) throw std::invalid_argument("PauliSum site counts differ");
  PauliSum out(a.num_sites(), std::min(a.prune_threshold(), b.prune_threshold()));
  for (const auto& [ka, ca] : a.terms()) {
    const PauliString p{ka.first, ka.second, 0};
    for (const auto& [kb, cb] : b.terms()) {
      const PauliString q{kb.first, kb.second, 0};
      if (p.commutes_with(q)) continue;
      out.add(multiply(p, q), 2.0 * ca * cb);
    }
  }
  return out.prune();
}

Eigen::MatrixXcd to_dense(const PauliSum& s, int dense_limit) {
  const int n = s.num_sites();
  if (n > dense_limit) throw DimensionLimitError(n, dense_limit);
  const Eigen::Index dim = Eigen::Index{1} << n;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& [key, c] : s.terms()) {
    const auto [x, z] = key;
    for (Eigen::Index i = 0; i < dim; ++i) {
      const auto col = static_cast<Mask>(i);
      m(static_cast<Eigen::Index>(col ^ x), i) += c * phase_power(action_phase(x, z, col));
    }
  }
  return m;
}

namespace {

PauliSum as_hermitian(const PauliSum& s) {
  if (s.is_hermitian()) return s;
  if (s.is_anti_hermitian()) return s * Complex{0.0, 1.0};
  throw std::invalid_argument("spectral_norm requires a Hermitian or anti-Hermitian PauliSum");
}

}  // namespace

double spectral_norm_dense(const PauliSum& s, int dense_limit) {
  const PauliSum h = as_hermitian(s);
  if (h.empty()) return 0.0;
  const Eigen::MatrixXcd m = to_dense(h, dense_limit);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_norm(const PauliSum& s, const NormOptions& opts) {
  if (s.num_sites() <= opts.dense_limit) return spectral_norm_dense(s, opts.dense_limit);
  return spectral_norm_lanczos(s, opts);
}

nlohmann::json to_json(const PauliSum& s) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [key, c] : s.terms()) {
    nlohmann::json term;
    if (c.imag() == 0.0) {
      term["coefficient"] = c.real();
    } else {
      term["coefficient"] = {c.real(), c.imag()};
    }
    term["string"] = PauliString{key.first, key.second, 0}.letters(s.num_sites());
    out.push_back(std::move(term));
  }
  return out;
}

PauliSum pauli_sum_from_json(const nlohmann::json& j, int num_sites) {
  if (!j.is_array()) throw std::invalid_argument("PauliSum JSON must be a list of terms");
  int sites = num_sites;
  for (const auto& term : j) {
    if (!term.is_object() || !term.contains("string") || !term.contains("coefficient") || term.size() != 2) {
      throw std::invalid_argument("PauliSum term must be {\"coefficient\": ..., \"string\": ...}");
    }
    std::string letters = term.at("string").get<std::string>();
    std::erase_if(letters, [](char ch) { return ch == '+' || ch == '-' || ch == 'i'; });
    const int len = static_cast<int>(letters.size());
    if (sites < 0) sites = len;
    if (len != sites) throw std::invalid_argument("PauliSum strings have inconsistent lengths");
  }
  PauliSum out(std::max(sites, 0));
  for (const auto& term : j) {
    const auto& c = term.at("coefficient");
    Complex coeff;
    if (c.is_number()) {
      coeff = c.get<double>();
    } else if (c.is_array() && c.size() == 2) {
      coeff = {c[0].get<double>(), c[1].get<double>()};
    } else {
      throw std::invalid_argument("PauliSum coefficient must be a number or [re, im]");
    }
    out.add(term.at("string").get<std::string>(), coeff);
  }
  return out;
}

}  // namespace trotter24
