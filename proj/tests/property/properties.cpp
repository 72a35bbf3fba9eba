#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "../oracle.hpp"
#include "trotter24/adaptive.hpp"
#include "trotter24/baselines.hpp"
#include "trotter24/estimators.hpp"
#include "trotter24/experiments.hpp"
#include "trotter24/formulas.hpp"
#include "trotter24/models.hpp"
#include "trotter24/pauli.hpp"
#include "trotter24/statevector.hpp"

using namespace trotter24;

namespace {

std::string random_letters(std::mt19937_64& rng, int n) {
  static constexpr char kLetters[] = {'I', 'X', 'Y', 'Z'};
  std::uniform_int_distribution<int> pick(0, 3);
  std::string s;
  for (int j = 0; j < n; ++j) s += kLetters[pick(rng)];
  return s;
}

PauliSum random_hermitian(std::mt19937_64& rng, int n, int terms) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  PauliSum s(n);
  for (int k = 0; k < terms; ++k) s.add(random_letters(rng, n), coef(rng));
  return s;
}

// Dense image built from letters by Kronecker products, independent of the bitmask algebra.
oracle::Mat dense(const PauliSum& s) {
  const long dim = 1L << s.num_sites();
  oracle::Mat out = oracle::Mat::Zero(dim, dim);
  for (const auto& [key, c] : s.terms()) {
    PauliString p{key.first, key.second, 0};
    out += c * oracle::string_matrix(p.letters(s.num_sites()));
  }
  return out;
}

oracle::Mat dense(const PauliString& p, int n) { return p.phase_factor() * oracle::string_matrix(p.letters(n)); }

oracle::Vec vec(const StateVector& s) { return s.as_eigen(); }

// Random generator of one of the three application plans.
PauliSum random_layer_generator(std::mt19937_64& rng, int n, int kind) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  PauliSum g(n);
  if (kind == 0) {
    for (int k = 0; k < 4; ++k) {
      std::string s = random_letters(rng, n);
      for (char& c : s) c = (c == 'I' || c == 'X') ? 'I' : 'Z';
      g.add(s, coef(rng));
    }
  } else if (kind == 1) {
    const char axis = "XYZ"[std::uniform_int_distribution<int>(0, 2)(rng)];
    for (int j = 0; j < n; ++j) {
      std::string s(static_cast<std::size_t>(n), 'I');
      s[static_cast<std::size_t>(j)] = axis;
      g.add(s, coef(rng));
    }
  } else {
    std::vector<PauliString> kept;
    for (int tries = 0; tries < 30 && kept.size() < 4; ++tries) {
      const PauliString p = PauliString::parse(random_letters(rng, n));
      bool ok = true;
      for (const PauliString& q : kept) ok = ok && p.commutes_with(q);
      if (ok) {
        kept.push_back(p);
        g.add(p, coef(rng));
      }
    }
  }
  return g;
}

}  // namespace

TEST_SUITE("pauli") {
  TEST_CASE("single-site products equal dense products exactly") {
    for (char a : {'I', 'X', 'Y', 'Z'}) {
      for (char b : {'I', 'X', 'Y', 'Z'}) {
        const PauliString p = PauliString::parse(std::string(1, a));
        const PauliString q = PauliString::parse(std::string(1, b));
        CHECK((dense(p * q, 1) - dense(p, 1) * dense(q, 1)).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }

  TEST_CASE("random three-site products equal dense products exactly") {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 100; ++k) {
      const PauliString p = PauliString::parse(random_letters(rng, 3));
      const PauliString q = PauliString::parse(random_letters(rng, 3));
      CHECK((dense(p * q, 3) - dense(p, 3) * dense(q, 3)).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  TEST_CASE("commutator is antisymmetric term by term") {
    std::mt19937_64 rng(12);
    for (int k = 0; k < 50; ++k) {
      const PauliSum a = random_hermitian(rng, 4, 5);
      const PauliSum b = random_hermitian(rng, 4, 5);
      CHECK(commutator(a, b) == commutator(b, a) * Complex(-1.0));
    }
  }

  TEST_CASE("hermiticity chain of nested commutators") {
    std::mt19937_64 rng(13);
    for (int n = 1; n <= 4; ++n) {
      for (int k = 0; k < 10; ++k) {
        const PauliSum a = random_hermitian(rng, n, 4);
        const PauliSum b = random_hermitian(rng, n, 4);
        const PauliSum iab = commutator(a, b) * Complex(0.0, 1.0);
        const PauliSum bba = commutator(b, commutator(b, a));
        CHECK(iab.is_hermitian());
        CHECK(bba.is_hermitian());
        const oracle::Mat da = dense(a);
        const oracle::Mat db = dense(b);
        const oracle::Mat dba = db * da - da * db;
        CHECK((dense(iab) - oracle::C(0, 1) * (da * db - db * da)).norm() < 1e-12);
        CHECK((dense(bba) - (db * dba - dba * db)).norm() < 1e-12);
      }
    }
  }

  TEST_CASE("iterative spectral norm matches dense") {
    std::mt19937_64 rng(14);
    NormOptions lanczos;
    lanczos.dense_limit = 0;
    for (int n = 2; n <= 8; ++n) {
      for (int k = 0; k < 3; ++k) {
        const PauliSum s = random_hermitian(rng, n, 2 * n);
        const double want = spectral_norm_dense(s);
        CHECK(std::abs(spectral_norm(s, lanczos) - want) <= 1e-6 * want);
      }
    }
  }
}

TEST_SUITE("statevector") {
  TEST_CASE("layers preserve the norm") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> angle(-3.0, 3.0);
    for (int k = 0; k < 1000; ++k) {
      const int n = 2 + k % 5;
      const CommutingLayer layer(random_layer_generator(rng, n, k % 3));
      const StateVector out = apply_layer(StateVector::random(n, rng()), layer, angle(rng));
      CHECK(std::abs(out.norm() - 1.0) <= 1e-10);
    }
  }

  TEST_CASE("layers are reversible") {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> angle(-3.0, 3.0);
    for (int k = 0; k < 300; ++k) {
      const int n = 2 + k % 5;
      const CommutingLayer layer(random_layer_generator(rng, n, k % 3));
      const StateVector psi = StateVector::random(n, rng());
      const double theta = angle(rng);
      CHECK((vec(apply_layer(apply_layer(psi, layer, theta), layer, -theta)) - vec(psi)).norm() <= 1e-12);
    }
  }

  TEST_CASE("composed layers equal dense exponentials") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> angle(-1.5, 1.5);
    for (int k = 0; k < 40; ++k) {
      const int n = 2 + k % 5;
      StateVector psi = StateVector::random(n, rng());
      oracle::Vec want = vec(psi);
      for (int f = 0; f < 5; ++f) {
        const PauliSum g = random_layer_generator(rng, n, (k + f) % 3);
        const double theta = angle(rng);
        CommutingLayer(g).apply(psi, theta);
        want = oracle::expm(dense(g), theta) * want;
      }
      CHECK((vec(psi) - want).norm() <= 1e-12);
    }
  }

  TEST_CASE("exact evolution composes") {
    const PauliSum h = ising_x(6).full();
    const ExactPropagator u(h);
    for (double d1 : {0.1, 0.7}) {
      for (double d2 : {0.25, 1.3}) {
        StateVector a = StateVector::random(6, 5);
        StateVector b = a;
        u.apply(a, d1);
        u.apply(a, d2);
        u.apply(b, d1 + d2);
        CHECK(distance(a, b) <= 1e-10);
      }
    }
  }
}

TEST_SUITE("formulas") {
  TEST_CASE("symmetric formulas are time-reversible") {
    const SplitHamiltonian h = ising_x(6);
    for (const ProductFormula& f : {make_t2(), make_t4()}) {
      for (double dt : {0.03, 0.2, 0.9}) {
        const StateVector psi = StateVector::random(6, 31);
        const StateVector back = apply_formula(f, h, dt, apply_formula(f, h, -dt, psi));
        CHECK(distance(back, psi) <= 1e-12);
      }
    }
  }

  TEST_CASE("time-dependent T4 steps are undone by the reversed step") {
    const SplitHamiltonian h = ising_ramp(5);
    for (double t : {-2.5, 0.3}) {
      for (double dt : {0.05, 0.3}) {
        StateVector psi = StateVector::random(5, 32);
        const StateVector start = psi;
        apply_schedule(make_tdep_t4(h, t, dt), h, psi);
        apply_schedule(make_tdep_t4(h, t + dt, -dt), h, psi);
        CHECK(distance(psi, start) <= 1e-12);
      }
    }
  }

  TEST_CASE("coefficient sums") {
    for (const ProductFormula& f : {make_t2(), make_t3(), make_t4()}) {
      CHECK(std::abs(f.coefficient_sum(Part::A) - 1.0) <= 1e-15);
      CHECK(std::abs(f.coefficient_sum(Part::B) - 1.0) <= 1e-15);
    }
  }

  TEST_CASE("halving ratios of one-step operator errors") {
    const SplitHamiltonian h = ising_x(4);
    const oracle::Ising ref = oracle::ising(4);
    const oracle::Mat full = ref.a + ref.b;
    auto err = [&](const ProductFormula& f, double dt) {
      return oracle::op_norm(schedule_matrix(scaled(f, dt), h) - oracle::expm(full, dt));
    };
    const std::pair<ProductFormula, double> cases[] = {{make_t2(), 8.0}, {make_t3(), 16.0}, {make_t4(), 32.0}};
    for (const auto& [f, ratio] : cases) {
      const double dt = 0.01;
      CHECK(err(f, dt) / err(f, dt / 2) == doctest::Approx(ratio).epsilon(0.05));
    }
  }

  TEST_CASE("constant modulations reduce to FRS angles") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> pick(-3.0, 3.0);
    const SplitHamiltonian h = ising_x(3);
    for (int k = 0; k < 50; ++k) {
      const double t = pick(rng);
      const double dt = std::abs(pick(rng)) / 6 + 1e-3;
      const Schedule got = make_tdep_t4(h, t, dt);
      const Schedule want = scaled(make_t4(), dt);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i].coefficient - want[i].coefficient) <= 1e-14);
    }
  }
}

TEST_SUITE("estimators") {
  TEST_CASE("fidelity estimates are nonnegative") {
    const SplitHamiltonian h = ising_x(5);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const StateVector psi = StateVector::random(5, seed);
      const double dt = 0.01 + 0.01 * static_cast<double>(seed);
      CHECK(eta_f_24(h, psi, 0.0, dt).estimate.value >= -1e-12);
      CHECK(eta_f_variance(h, psi, dt) >= 0.0);
    }
  }

  TEST_CASE("fidelity estimators agree with the exact error") {
    const SplitHamiltonian h = ising_x(6);
    const oracle::Ising ref = oracle::ising(6);
    const StateVector psi = exact_evolve(prepare_polarized(6, Axis::MinusY), h.full(), 1.0);
    const oracle::Vec v = vec(psi);
    double prev[3] = {1e9, 1e9, 1e9};
    for (double dt : {0.1, 0.05, 0.025}) {
      const double exact = oracle::infid(oracle::expm(ref.a + ref.b, dt) * v, oracle::t2(ref, dt) * v);
      const double dev[3] = {std::abs(eta_f_24(h, psi, 0.0, dt).estimate.value / exact - 1.0),
                             std::abs(eta_f_23(h, psi, 0.0, dt).estimate.value / exact - 1.0),
                             std::abs(eta_f_variance(h, psi, dt) / exact - 1.0)};
      for (int k = 0; k < 3; ++k) {
        CHECK(dev[k] < 0.15);
        CHECK(dev[k] <= prev[k]);
        prev[k] = dev[k];
      }
    }
  }

  TEST_CASE("estimates depend on the state") {
    const SplitHamiltonian h = ising_x(5);
    const PauliSum mx = magnetization(5, 'X');
    const StateVector a = prepare_polarized(5, Axis::MinusY);
    const StateVector b = StateVector::random(5, 3);
    CHECK(eta_f_24(h, a, 0.0, 0.1).estimate.value != eta_f_24(h, b, 0.0, 0.1).estimate.value);
    CHECK(eta_o_24(h, mx, a, 0.0, 0.1).estimate.value != eta_o_24(h, mx, b, 0.0, 0.1).estimate.value);
  }
}

TEST_SUITE("adaptive") {
  TEST_CASE("controller invariants") {
    const SplitHamiltonian h = ising_x(6);
    const PauliSum mx = magnetization(6, 'X');
    const StateVector psi0 = prepare_polarized(6, Axis::MinusY);
    for (ControllerMode mode : {ControllerMode::Fidelity, ControllerMode::Observable}) {
      for (double eps : {1e-2, 1e-3, 1e-4}) {
        ControllerConfig c;
        c.epsilon = eps;
        const SimulationTrace tr =
            mode == ControllerMode::Fidelity ? run_fidelity(c, h, psi0) : run_observable(c, h, mx, psi0);
        StateVector psi = psi0;
        for (const StepRecord& s : tr.steps) {
          const double eta = mode == ControllerMode::Fidelity
                                 ? eta_f_24(h, psi, s.t_before, s.dt_accepted).estimate.value
                                 : eta_o_24(h, mx, psi, s.t_before, s.dt_accepted).estimate.value;
          CHECK(std::abs(eta - s.eta_measured) <= 1e-12);
          for (std::size_t k = 1; k < s.trial_dts.size(); ++k) CHECK(s.trial_dts[k] < s.trial_dts[k - 1]);
          CHECK(s.dt_accepted <= c.effective_dt_max());
          apply_schedule(second_order_schedule(h, s.t_before, s.dt_accepted), h, psi);
        }
        CHECK(distance(replay(tr, h, psi0), tr.final_state) <= 1e-12);
      }
    }
  }
}

TEST_SUITE("baselines") {
  TEST_CASE("extrapolation weights sum to one") {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> val(-2.0, 2.0);
    for (int k = 0; k < 200; ++k) {
      const int m = 1 + k % 6;
      std::vector<std::pair<double, double>> pts;
      for (int i = 0; i <= m; ++i) pts.emplace_back(1.0 / (10 + k % 7 + i), val(rng));
      const auto r = neville_extrapolate(pts);
      double sum = 0.0;
      double combo = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        sum += r.coefficients[i];
        combo += r.coefficients[i] * pts[i].second;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
      CHECK(std::abs(combo - r.estimate) <= 1e-9 * (1.0 + std::abs(r.estimate)));
    }
  }

  TEST_CASE("W norms grow with the chain length") {
    double prev = 0.0;
    for (int n = 4; n <= 8; ++n) {
      const double w = w_norms(ising_x(n)).tighter();
      CHECK(w > prev);
      prev = w;
    }
  }
}

TEST_SUITE("cli") {
  TEST_CASE("re-running from the embedded config reproduces the trace") {
    const auto dir = std::filesystem::temp_directory_path() / "trotter24_property_roundtrip";
    std::filesystem::remove_all(dir);
    ExperimentConfig c = parse_experiment_config(R"({"L": 6, "mode": "observable", "epsilon": 0.01})");
    c.out_dir = (dir / "a").string();
    std::ostringstream sink;
    REQUIRE(cmd_run(c, sink) == 0);
    auto slurp = [](const std::filesystem::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    const nlohmann::json summary = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
    ExperimentConfig again = parse_experiment_config(summary.at("resolved_config").dump());
    again.out_dir = (dir / "b").string();
    REQUIRE(cmd_run(again, sink) == 0);
    CHECK(slurp(dir / "a" / "trace.jsonl") == slurp(dir / "b" / "trace.jsonl"));
  }
}
