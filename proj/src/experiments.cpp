#include "trotter24/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "trotter24/errors.hpp"
#include "trotter24/estimators.hpp"
#include "trotter24/version.hpp"

namespace trotter24 {

namespace {

using json = nlohmann::json;

// JSON pointer of every object key and array element -> 1-based source line.
class LineMap {
 public:
  explicit LineMap(const std::string& text) { scan(text); }

  int line_of(std::string path) const {
    for (;;) {
      auto it = lines_.find(path);
      if (it != lines_.end()) return it->second;
      const auto cut = path.find_last_of('/');
      if (cut == std::string::npos || path.empty()) return 1;
      path.erase(cut);
      if (path.empty()) return 1;
    }
  }

 private:
  struct Frame {
    bool object;
    std::string key;
    int index = 0;
    bool expect_key = true;
  };

  static std::string component(const Frame& f) { return f.object ? f.key : std::to_string(f.index); }

  std::string path_of(const std::vector<Frame>& stack) const {
    std::string p;
    for (const Frame& f : stack) p += "/" + component(f);
    return p;
  }

  void scan(const std::string& text) {
    std::vector<Frame> stack;
    int line = 1;
    auto mark_value = [&] {
      if (!stack.empty() && !stack.back().object) lines_.emplace(path_of(stack), line);
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
      const char c = text[i];
      if (c == '\n') {
        ++line;
      } else if (c == '"') {
        std::string s;
        for (++i; i < text.size() && text[i] != '"'; ++i) {
          if (text[i] == '\\' && i + 1 < text.size()) ++i;
          s += text[i];
        }
        if (!stack.empty() && stack.back().object && stack.back().expect_key) {
          stack.back().key = s;
          stack.back().expect_key = false;
          lines_.emplace(path_of(stack), line);
        } else {
          mark_value();
        }
      } else if (c == '{' || c == '[') {
        mark_value();
        stack.push_back({c == '{', "", 0, true});
      } else if (c == '}' || c == ']') {
        if (!stack.empty()) stack.pop_back();
      } else if (c == ',') {
        if (!stack.empty()) {
          if (stack.back().object) {
            stack.back().expect_key = true;
          } else {
            ++stack.back().index;
          }
        }
      } else if (!std::isspace(static_cast<unsigned char>(c)) && c != ':') {
        // Scalar literal: record array elements once.
        if (i == 0 || std::string_view("[,: \t\r\n").find(text[i - 1]) != std::string_view::npos) mark_value();
      }
    }
  }

  std::map<std::string, int> lines_;
};

class Reader {
 public:
  Reader(const json& root, const LineMap& lines) : root_(root), lines_(lines) {}

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw ConfigError((path.empty() ? std::string("config") : path) + ": " + what, lines_.line_of(path));
  }

  void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
      if (!allowed.count(key)) fail(path + "/" + key, "unknown key '" + key + "'");
    }
  }

  template <class Fn>
  void with(const json& obj, const std::string& path, const std::string& key, Fn&& fn) const {
    auto it = obj.find(key);
    if (it != obj.end()) fn(*it, path + "/" + key);
  }

  double number(const json& v, const std::string& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }

  double positive(const json& v, const std::string& path) const {
    const double x = number(v, path);
    if (!(x > 0.0)) fail(path, "must be positive");
    return x;
  }

  long integer(const json& v, const std::string& path) const {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<long>();
  }

  bool boolean(const json& v, const std::string& path) const {
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
  }

  std::string string(const json& v, const std::string& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const json& v, const std::string& path) const {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "/" + std::to_string(i)));
    return out;
  }

  std::vector<int> integers(const json& v, const std::string& path) const {
    if (!v.is_array()) fail(path, "expected an array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(static_cast<int>(integer(v[i], path + "/" + std::to_string(i))));
    }
    return out;
  }

  const json& root() const { return root_; }

 private:
  const json& root_;
  const LineMap& lines_;
};

const std::set<std::string> kTopKeys = {
    "model",    "L",          "couplings",     "custom",        "initial_state",
    "mode",     "observable", "record",        "epsilon",       "safety_c",
    "dt0",      "dt_min",     "dt_max",        "max_rejections_per_step",
    "clamp_final", "semantics", "t_ini",       "t_fin",         "dense_oracle",
    "dense_limit", "output_dir", "seed",       "threads",       "bounds",
    "scaling",  "compare",    "sweep"};

const char* model_name(ModelKind m) {
  switch (m) {
    case ModelKind::IsingX: return "ising_x";
    case ModelKind::IsingRamp: return "ising_ramp";
    case ModelKind::Custom: return "custom";
  }
  return "ising_x";
}

json modulation_json(const ModulationSpec& m) { return {{"slope", m.slope}, {"intercept", m.intercept}}; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << text;
}

double operator_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a - b);
  return svd.singularValues()(0);
}

std::ostringstream csv_stream() {
  std::ostringstream os;
  os.precision(17);
  return os;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()) && i + 1 < e.byte; ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ConfigError(std::string("malformed JSON: ") + e.what(), line);
  }
  const LineMap lines(text);
  const Reader r(doc, lines);
  r.check_keys(doc, "", kTopKeys);

  ExperimentConfig cfg;
  r.with(doc, "", "model", [&](const json& v, const std::string& p) {
    const std::string m = r.string(v, p);
    if (m == "ising_x") {
      cfg.model = ModelKind::IsingX;
    } else if (m == "ising_ramp") {
      cfg.model = ModelKind::IsingRamp;
    } else if (m == "custom") {
      cfg.model = ModelKind::Custom;
    } else {
      r.fail(p, "unknown model '" + m + "' (ising_x, ising_ramp or custom)");
    }
  });
  r.with(doc, "", "L", [&](const json& v, const std::string& p) {
    const long n = r.integer(v, p);
    if (n < 1 || n > kMaxStateSites) r.fail(p, "L must lie in [1, " + std::to_string(kMaxStateSites) + "]");
    cfg.num_sites = static_cast<int>(n);
  });
  r.with(doc, "", "couplings", [&](const json& v, const std::string& p) {
    r.check_keys(v, p, {"J_z", "h_z", "h_x"});
    r.with(v, p, "J_z", [&](const json& x, const std::string& q) { cfg.couplings.j_z = r.number(x, q); });
    r.with(v, p, "h_z", [&](const json& x, const std::string& q) { cfg.couplings.h_z = r.number(x, q); });
    r.with(v, p, "h_x", [&](const json& x, const std::string& q) { cfg.couplings.h_x = r.number(x, q); });
  });
  r.with(doc, "", "custom", [&](const json& v, const std::string& p) {
    r.check_keys(v, p, {"A", "B", "a_modulation", "b_modulation"});
    auto modulation = [&](const json& m, const std::string& q, ModulationSpec& out) {
      r.check_keys(m, q, {"slope", "intercept"});
      r.with(m, q, "slope", [&](const json& x, const std::string& s) { out.slope = r.number(x, s); });
      r.with(m, q, "intercept", [&](const json& x, const std::string& s) { out.intercept = r.number(x, s); });
    };
    r.with(v, p, "A", [&](const json& x, const std::string&) { cfg.custom_a = x; });
    r.with(v, p, "B", [&](const json& x, const std::string&) { cfg.custom_b = x; });
    r.with(v, p, "a_modulation", [&](const json& x, const std::string& q) { modulation(x, q, cfg.a_modulation); });
    r.with(v, p, "b_modulation", [&](const json& x, const std::string& q) { modulation(x, q, cfg.b_modulation); });
  });
  r.with(doc, "", "initial_state", [&](const json& v, const std::string& p) {
    cfg.initial_state = r.string(v, p);
    if (cfg.initial_state != "random") {
      try {
        (void)parse_axis(cfg.initial_state);
      } catch (const std::invalid_argument& e) {
        r.fail(p, e.what());
      }
    }
  });
  r.with(doc, "", "mode", [&](const json& v, const std::string& p) {
    const std::string m = r.string(v, p);
    if (m == "fidelity") {
      cfg.mode = ControllerMode::Fidelity;
    } else if (m == "observable") {
      cfg.mode = ControllerMode::Observable;
    } else {
      r.fail(p, "mode must be 'fidelity' or 'observable'");
    }
  });
  r.with(doc, "", "observable", [&](const json& v, const std::string& p) {
    if (!v.is_string() && !v.is_array()) r.fail(p, "expected m_x/m_y/m_z or a list of Pauli terms");
    cfg.observable = v;
  });
  r.with(doc, "", "record", [&](const json& v, const std::string& p) {
    if (!v.is_array()) r.fail(p, "expected an array of observable names");
    cfg.record.clear();
    for (std::size_t i = 0; i < v.size(); ++i) cfg.record.push_back(r.string(v[i], p + "/" + std::to_string(i)));
  });
  r.with(doc, "", "epsilon", [&](const json& v, const std::string& p) { cfg.epsilon = r.positive(v, p); });
  r.with(doc, "", "safety_c", [&](const json& v, const std::string& p) {
    cfg.safety_c = r.number(v, p);
    if (!(cfg.safety_c > 0.0 && cfg.safety_c <= 1.0)) r.fail(p, "safety_c must lie in (0, 1]");
  });
  r.with(doc, "", "dt0", [&](const json& v, const std::string& p) { cfg.dt0 = r.positive(v, p); });
  r.with(doc, "", "dt_min", [&](const json& v, const std::string& p) { cfg.dt_min = r.positive(v, p); });
  r.with(doc, "", "dt_max", [&](const json& v, const std::string& p) {
    if (!v.is_null()) cfg.dt_max = r.positive(v, p);
  });
  r.with(doc, "", "max_rejections_per_step", [&](const json& v, const std::string& p) {
    cfg.max_rejections_per_step = static_cast<int>(r.integer(v, p));
    if (cfg.max_rejections_per_step < 0) r.fail(p, "must be nonnegative");
  });
  r.with(doc, "", "clamp_final", [&](const json& v, const std::string& p) { cfg.clamp_final = r.boolean(v, p); });
  r.with(doc, "", "semantics", [&](const json& v, const std::string& p) {
    const std::string s = r.string(v, p);
    if (s == "prose") {
      cfg.semantics = AcceptanceSemantics::Prose;
    } else if (s == "pseudocode") {
      cfg.semantics = AcceptanceSemantics::Pseudocode;
    } else {
      r.fail(p, "semantics must be 'prose' or 'pseudocode'");
    }
  });
  if (cfg.model == ModelKind::IsingRamp) {
    cfg.t_ini = -3.0;
    cfg.t_fin = 3.0;
  }
  r.with(doc, "", "t_ini", [&](const json& v, const std::string& p) { cfg.t_ini = r.number(v, p); });
  r.with(doc, "", "t_fin", [&](const json& v, const std::string& p) { cfg.t_fin = r.number(v, p); });
  if (cfg.t_fin < cfg.t_ini) r.fail(doc.contains("t_fin") ? "/t_fin" : "/t_ini", "t_fin must not precede t_ini");
  r.with(doc, "", "dense_oracle", [&](const json& v, const std::string& p) { cfg.dense_oracle = r.boolean(v, p); });
  r.with(doc, "", "dense_limit", [&](const json& v, const std::string& p) {
    cfg.dense_limit = static_cast<int>(r.integer(v, p));
    if (cfg.dense_limit < 1 || cfg.dense_limit > 14) r.fail(p, "dense_limit must lie in [1, 14]");
  });
  r.with(doc, "", "output_dir", [&](const json& v, const std::string& p) { cfg.out_dir = r.string(v, p); });
  r.with(doc, "", "seed", [&](const json& v, const std::string& p) {
    if (!v.is_number_unsigned()) r.fail(p, "expected a nonnegative integer");
    cfg.seed = v.get<std::uint64_t>();
  });
  r.with(doc, "", "threads", [&](const json& v, const std::string& p) {
    cfg.threads = static_cast<int>(r.integer(v, p));
    if (cfg.threads < 1) r.fail(p, "threads must be at least 1");
  });
  r.with(doc, "", "bounds", [&](const json& v, const std::string& p) {
    r.check_keys(v, p, {"L_min", "L_max", "epsilons"});
    r.with(v, p, "L_min", [&](const json& x, const std::string& q) { cfg.bounds_l_min = static_cast<int>(r.integer(x, q)); });
    r.with(v, p, "L_max", [&](const json& x, const std::string& q) { cfg.bounds_l_max = static_cast<int>(r.integer(x, q)); });
    r.with(v, p, "epsilons", [&](const json& x, const std::string& q) {
      cfg.bounds_epsilons = r.numbers(x, q);
      for (std::size_t i = 0; i < cfg.bounds_epsilons.size(); ++i) {
        if (!(cfg.bounds_epsilons[i] > 0.0)) r.fail(q + "/" + std::to_string(i), "must be positive");
      }
    });
    if (cfg.bounds_l_min < 1 || cfg.bounds_l_max < cfg.bounds_l_min || cfg.bounds_l_max > kMaxStateSites) {
      r.fail(p, "need 1 <= L_min <= L_max <= " + std::to_string(kMaxStateSites));
    }
  });
  r.with(doc, "", "scaling", [&](const json& v, const std::string& p) {
    r.check_keys(v, p, {"dt_grid", "state_time"});
    r.with(v, p, "state_time", [&](const json& x, const std::string& q) { cfg.scaling_state_time = r.number(x, q); });
    r.with(v, p, "dt_grid", [&](const json& x, const std::string& q) {
      cfg.scaling_dts = r.numbers(x, q);
      if (cfg.scaling_dts.size() < 2) r.fail(q, "need at least two step sizes");
      for (std::size_t i = 0; i < cfg.scaling_dts.size(); ++i) {
        if (!(cfg.scaling_dts[i] > 0.0)) r.fail(q + "/" + std::to_string(i), "must be positive");
      }
    });
  });
  r.with(doc, "", "compare", [&](const json& v, const std::string& p) {
    r.check_keys(v, p, {"times", "m_values", "m_sequence"});
    r.with(v, p, "times", [&](const json& x, const std::string& q) { cfg.compare_times = r.numbers(x, q); });
    r.with(v, p, "m_values", [&](const json& x, const std::string& q) {
      cfg.compare_m_values = r.integers(x, q);
      for (std::size_t i = 0; i < cfg.compare_m_values.size(); ++i) {
        if (cfg.compare_m_values[i] < 0) r.fail(q + "/" + std::to_string(i), "must be nonnegative");
      }
    });
    r.with(v, p, "m_sequence", [&](const json& x, const std::string& q) {
      cfg.compare_m_sequence = r.integers(x, q);
      for (std::size_t i = 0; i < cfg.compare_m_sequence.size(); ++i) {
        if (cfg.compare_m_sequence[i] < 1) r.fail(q + "/" + std::to_string(i), "step counts must be positive");
      }
    });
  });
  r.with(doc, "", "sweep", [&](const json& v, const std::string& p) {
    r.check_keys(v, p, {"c_values"});
    r.with(v, p, "c_values", [&](const json& x, const std::string& q) {
      cfg.sweep_c_values = r.numbers(x, q);
      for (std::size_t i = 0; i < cfg.sweep_c_values.size(); ++i) {
        const double c = cfg.sweep_c_values[i];
        if (!(c > 0.0 && c <= 1.0)) r.fail(q + "/" + std::to_string(i), "safety constants must lie in (0, 1]");
      }
    });
  });

  if (cfg.model == ModelKind::Custom) {
    if (!cfg.custom_a || !cfg.custom_b) r.fail("/custom", "the custom model needs both A and B");
    for (const char* part : {"A", "B"}) {
      const std::string p = std::string("/custom/") + part;
      try {
        const PauliSum s = pauli_sum_from_json(part[0] == 'A' ? *cfg.custom_a : *cfg.custom_b, cfg.num_sites);
        if (!s.is_hermitian()) r.fail(p, "Hamiltonian parts must have real coefficients");
        if (!s.terms_commute()) r.fail(p, "terms of each part must pairwise commute");
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        r.fail(p, e.what());
      }
    }
  } else if (doc.contains("custom")) {
    r.fail("/custom", "only allowed with model 'custom'");
  }
  if (cfg.observable.is_array()) {
    try {
      const PauliSum o = pauli_sum_from_json(cfg.observable, cfg.num_sites);
      if (!o.is_hermitian()) r.fail("/observable", "observable must have real coefficients");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      r.fail("/observable", e.what());
    }
  } else {
    const std::string name = cfg.observable.get<std::string>();
    if (name != "m_x" && name != "m_y" && name != "m_z") r.fail("/observable", "unknown observable '" + name + "'");
  }
  for (std::size_t i = 0; i < cfg.record.size(); ++i) {
    const std::string& name = cfg.record[i];
    if (name != "m_x" && name != "m_y" && name != "m_z") {
      r.fail("/record/" + std::to_string(i), "unknown observable '" + name + "'");
    }
  }
  if (cfg.dt_max && *cfg.dt_max < cfg.dt0) r.fail("/dt_max", "dt_max must be at least dt0");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_experiment_config(buf.str());
}

json resolved_config(const ExperimentConfig& cfg) {
  json j;
  j["model"] = model_name(cfg.model);
  j["L"] = cfg.num_sites;
  j["couplings"] = {{"J_z", cfg.couplings.j_z}, {"h_z", cfg.couplings.h_z}, {"h_x", cfg.couplings.h_x}};
  if (cfg.model == ModelKind::Custom) {
    j["custom"] = {{"A", *cfg.custom_a},
                   {"B", *cfg.custom_b},
                   {"a_modulation", modulation_json(cfg.a_modulation)},
                   {"b_modulation", modulation_json(cfg.b_modulation)}};
  }
  j["initial_state"] = cfg.initial_state;
  j["mode"] = to_string(cfg.mode);
  j["observable"] = cfg.observable;
  j["record"] = cfg.record;
  j["epsilon"] = cfg.epsilon;
  j["safety_c"] = cfg.safety_c;
  j["dt0"] = cfg.dt0;
  j["dt_min"] = cfg.dt_min;
  j["dt_max"] = cfg.dt_max ? json(*cfg.dt_max) : json(nullptr);
  j["max_rejections_per_step"] = cfg.max_rejections_per_step;
  j["clamp_final"] = cfg.clamp_final;
  j["semantics"] = to_string(cfg.semantics);
  j["t_ini"] = cfg.t_ini;
  j["t_fin"] = cfg.t_fin;
  j["dense_oracle"] = cfg.dense_oracle;
  j["dense_limit"] = cfg.dense_limit;
  j["output_dir"] = cfg.out_dir;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["bounds"] = {{"L_min", cfg.bounds_l_min}, {"L_max", cfg.bounds_l_max}, {"epsilons", cfg.bounds_epsilons}};
  j["scaling"] = {{"dt_grid", cfg.scaling_dts}, {"state_time", cfg.scaling_state_time}};
  j["compare"] = {{"times", cfg.compare_times},
                  {"m_values", cfg.compare_m_values},
                  {"m_sequence", cfg.compare_m_sequence}};
  j["sweep"] = {{"c_values", cfg.sweep_c_values}};
  return j;
}

SplitHamiltonian build_hamiltonian(const ExperimentConfig& cfg) {
  switch (cfg.model) {
    case ModelKind::IsingX: return ising_x(cfg.num_sites, cfg.couplings);
    case ModelKind::IsingRamp: return ising_ramp(cfg.num_sites, cfg.couplings);
    case ModelKind::Custom: break;
  }
  auto modulation = [](const ModulationSpec& m) {
    return m.slope == 0.0 ? Modulation::constant(m.intercept) : Modulation::linear(m.slope, m.intercept);
  };
  return SplitHamiltonian(pauli_sum_from_json(*cfg.custom_a, cfg.num_sites),
                          pauli_sum_from_json(*cfg.custom_b, cfg.num_sites), modulation(cfg.a_modulation),
                          modulation(cfg.b_modulation));
}

StateVector build_initial_state(const ExperimentConfig& cfg) {
  if (cfg.initial_state == "random") return StateVector::random(cfg.num_sites, cfg.seed);
  return prepare_polarized(cfg.num_sites, parse_axis(cfg.initial_state));
}

PauliSum build_observable(const ExperimentConfig& cfg, const json& spec) {
  if (spec.is_string()) {
    const std::string name = spec.get<std::string>();
    if (name.size() == 3 && name.rfind("m_", 0) == 0) {
      return magnetization(cfg.num_sites, static_cast<char>(std::toupper(static_cast<unsigned char>(name[2]))));
    }
    throw std::invalid_argument("unknown observable '" + name + "'");
  }
  return pauli_sum_from_json(spec, cfg.num_sites);
}

NormOptions build_norm_options(const ExperimentConfig& cfg) {
  NormOptions opts;
  opts.dense_limit = std::min(cfg.dense_limit, kDefaultNormDenseLimit);
  opts.seed ^= cfg.seed;
  return opts;
}

ControllerConfig build_controller_config(const ExperimentConfig& cfg) {
  ControllerConfig c;
  c.t_ini = cfg.t_ini;
  c.t_fin = cfg.t_fin;
  c.epsilon = cfg.epsilon;
  c.safety_c = cfg.safety_c;
  c.dt0 = cfg.dt0;
  c.dt_min = cfg.dt_min;
  c.dt_max = cfg.dt_max;
  c.max_rejections_per_step = cfg.max_rejections_per_step;
  c.clamp_final = cfg.clamp_final;
  c.semantics = cfg.semantics;
  for (const std::string& name : cfg.record) c.recorded.push_back({name, build_observable(cfg, json(name))});
  if (cfg.mode == ControllerMode::Observable) {
    c.observable = build_observable(cfg, cfg.observable);
    c.obs_norm = spectral_norm(*c.observable, build_norm_options(cfg));
  }
  return c;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs two or more points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(std::abs(x[i])) / n;
    my += std::log(std::abs(y[i])) / n;
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(std::abs(x[i])) - mx;
    num += dx * (std::log(std::abs(y[i])) - my);
    den += dx * dx;
  }
  return num / den;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  const SplitHamiltonian h = build_hamiltonian(cfg);
  const StateVector psi0 = build_initial_state(cfg);
  const ControllerConfig cc = build_controller_config(cfg);

  RunResult out;
  const auto start = std::chrono::steady_clock::now();
  out.trace = cfg.mode == ControllerMode::Fidelity ? run_fidelity(cc, h, psi0)
                                                   : run_observable(cc, h, *cc.observable, psi0);
  if (cfg.dense_oracle && cfg.num_sites <= cfg.dense_limit) {
    BudgetOptions opts;
    opts.dense_limit = cfg.dense_limit;
    out.budget = verify_budget(out.trace, h, psi0, opts);
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json s;
  s["resolved_config"] = resolved_config(cfg);
  s["version"] = kVersion;
  s["steps"] = out.trace.steps.size();
  s["rejections"] = out.trace.total_rejections();
  s["mean_dt"] = out.trace.mean_dt();
  s["t_last"] = out.trace.t_last;
  s["wall_seconds"] = out.wall_seconds;
  if (out.budget) {
    s["budget"] = {{"fidelity_within", out.budget->fidelity_within},
                   {"observable_within", out.budget->observable_within},
                   {"observable", out.budget->observable_name}};
  } else if (cfg.dense_oracle) {
    s["budget"] = {{"skipped", "L exceeds the dense limit"}};
  }
  out.summary = s;
  return out;
}

ScalingResult scaling_experiment(const ExperimentConfig& cfg) {
  const SplitHamiltonian h = build_hamiltonian(cfg);
  if (h.time_dependent()) throw std::invalid_argument("scaling needs a time-independent model");
  if (cfg.num_sites > cfg.dense_limit) throw DimensionLimitError(cfg.num_sites, cfg.dense_limit);
  StateVector psi0 = build_initial_state(cfg);
  const PauliSum obs = build_observable(cfg, cfg.observable);
  const ExactPropagator exact(h.full(), cfg.dense_limit);
  if (cfg.scaling_state_time != 0.0) exact.apply(psi0, cfg.scaling_state_time);

  ScalingResult out;
  for (double dt : cfg.scaling_dts) {
    ScalingRow row;
    row.dt = dt;
    StateVector reference = psi0;
    exact.apply(reference, dt);
    const EstimatorResult f24 = eta_f_24(h, psi0, 0.0, dt);
    row.eta_f = infidelity(reference, f24.low_order);
    row.eta_f_24 = f24.estimate.value;
    row.eta_f_23 = eta_f_23(h, psi0, 0.0, dt).estimate.value;
    row.eta_f_variance = eta_f_variance(h, psi0, dt);
    row.eta_o = expectation(obs, reference) - expectation(obs, f24.low_order);
    row.eta_o_24 = eta_o_24(h, obs, psi0, 0.0, dt).estimate.value;
    row.eta_o_23 = eta_o_23(h, obs, psi0, 0.0, dt).estimate.value;
    const Eigen::MatrixXcd u = exact.matrix(dt);
    row.t2_error = operator_distance(schedule_matrix(second_order_schedule(h, 0.0, dt), h, cfg.dense_limit), u);
    row.t3_error = operator_distance(schedule_matrix(companion_schedule(h, 0.0, dt, FormulaPair::P23), h,
                                                     cfg.dense_limit), u);
    row.t4_error = operator_distance(schedule_matrix(companion_schedule(h, 0.0, dt, FormulaPair::P24), h,
                                                     cfg.dense_limit), u);
    out.rows.push_back(row);
  }

  const std::vector<std::pair<std::string, double ScalingRow::*>> columns = {
      {"eta_f", &ScalingRow::eta_f},       {"eta_f_24", &ScalingRow::eta_f_24},
      {"eta_f_23", &ScalingRow::eta_f_23}, {"eta_f_variance", &ScalingRow::eta_f_variance},
      {"eta_o", &ScalingRow::eta_o},       {"eta_o_24", &ScalingRow::eta_o_24},
      {"eta_o_23", &ScalingRow::eta_o_23}, {"t2_error", &ScalingRow::t2_error},
      {"t3_error", &ScalingRow::t3_error}, {"t4_error", &ScalingRow::t4_error}};
  std::vector<double> dts;
  for (const ScalingRow& row : out.rows) dts.push_back(row.dt);
  for (const auto& [name, member] : columns) {
    std::vector<double> ys;
    for (const ScalingRow& row : out.rows) ys.push_back(row.*member);
    out.slopes.emplace_back(name, loglog_slope(dts, ys));
  }
  return out;
}

std::vector<BoundsRow> bounds_experiment(const ExperimentConfig& cfg) {
  std::vector<BoundsRow> rows;
  const NormOptions opts = build_norm_options(cfg);
  const int lo = cfg.model == ModelKind::Custom ? cfg.num_sites : cfg.bounds_l_min;
  const int hi = cfg.model == ModelKind::Custom ? cfg.num_sites : cfg.bounds_l_max;
  for (int n = lo; n <= hi; ++n) {
    ExperimentConfig sized = cfg;
    sized.num_sites = n;
    SplitHamiltonian h = build_hamiltonian(sized);
    if (h.time_dependent()) throw std::invalid_argument("W norms need a time-independent model");
    BoundsRow row;
    row.report = w_norms(h, opts);
    for (double eps : cfg.bounds_epsilons) row.dt_bounds.push_back(dt_bound(row.report, eps));
    rows.push_back(row);
  }
  return rows;
}

std::vector<ComparisonRow> compare_experiment(const ExperimentConfig& cfg) {
  const SplitHamiltonian h = build_hamiltonian(cfg);
  const StateVector psi0 = build_initial_state(cfg);
  ExperimentConfig obs_cfg = cfg;
  obs_cfg.mode = ControllerMode::Observable;
  const ControllerConfig cc = build_controller_config(obs_cfg);
  const SimulationTrace trace = run_observable(cc, h, *cc.observable, psi0);

  ComparisonOptions opts;
  opts.m_sequence = cfg.compare_m_sequence;
  opts.dense_limit = cfg.dense_limit;
  std::vector<ComparisonRow> rows;
  for (double t : cfg.compare_times) {
    if (trace.steps.empty() || t > trace.t_last + trace.steps.back().dt_accepted) {
      throw std::invalid_argument("compare time " + std::to_string(t) + " lies beyond the trace end " +
                                  std::to_string(trace.t_last) + "; raise t_fin");
    }
    const int n = step_closest_to(trace, t);
    const auto part = compare_extrapolation_vs_adaptive(h, *cc.observable, psi0, trace, n, cfg.compare_m_values, opts);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

std::vector<SweepPoint> sweep_experiment(const ExperimentConfig& cfg) {
  ExperimentConfig fid = cfg;
  fid.mode = ControllerMode::Fidelity;
  return sweep_safety_c(build_controller_config(fid), build_hamiltonian(cfg), build_initial_state(cfg),
                        cfg.sweep_c_values, cfg.threads);
}

int cmd_run(const ExperimentConfig& cfg, std::ostream& out) {
  const RunResult r = run_experiment(cfg);
  const std::filesystem::path dir(cfg.out_dir);

  json deterministic = resolved_config(cfg);
  deterministic.erase("output_dir");
  deterministic.erase("threads");
  std::ostringstream trace;
  write_trace_jsonl(trace, r.trace, {{"experiment", deterministic}});
  write_text(dir / "trace.jsonl", trace.str());
  write_text(dir / "summary.json", r.summary.dump(2) + "\n");

  if (r.budget) {
    std::ostringstream csv = csv_stream();
    csv << "N,t,fidelity_error,fidelity_bound,observable_error,observable_bound,exact_value,simulated_value\n";
    for (const BudgetRow& b : r.budget->rows) {
      csv << b.step_index << ',' << b.t << ',' << b.fidelity_error << ',' << b.fidelity_bound << ','
          << b.observable_error << ',' << b.observable_bound << ',' << b.exact_value << ',' << b.simulated_value
          << '\n';
    }
    write_text(dir / "budget.csv", csv.str());
  }

  out << "mode        " << to_string(cfg.mode) << " (" << model_name(cfg.model) << ", L=" << cfg.num_sites << ")\n";
  out << "interval    [" << cfg.t_ini << ", " << cfg.t_fin << "], reached " << r.trace.t_last << '\n';
  out << "steps       " << r.trace.steps.size() << '\n';
  out << "rejections  " << r.trace.total_rejections() << '\n';
  out << "mean dt     " << r.trace.mean_dt() << '\n';
  out << "wall time   " << r.wall_seconds << " s\n";
  if (r.budget) {
    out << "budget      ";
    if (cfg.mode == ControllerMode::Fidelity) {
      out << "fidelity " << (r.budget->fidelity_within ? "within" : "EXCEEDED") << ", ";
    }
    out << "observable " << (r.budget->observable_within ? "within" : "EXCEEDED") << '\n';
  } else if (cfg.dense_oracle) {
    out << "budget      skipped (L above dense limit " << cfg.dense_limit << ")\n";
  }
  out << "trace       " << (dir / "trace.jsonl").string() << '\n';
  return 0;
}

int cmd_bounds(const ExperimentConfig& cfg, std::ostream& out) {
  const auto rows = bounds_experiment(cfg);
  std::ostringstream csv = csv_stream();
  csv << "L,w_ab,w_ba,norm_bba,norm_aba,tighter";
  for (double eps : cfg.bounds_epsilons) csv << ",dt_bound_" << eps;
  csv << '\n';
  out << "L   W_AB          W_BA          tighter  dt_bound\n";
  for (const BoundsRow& row : rows) {
    const WNormReport& w = row.report;
    const char* side = w.tighter_side == Ordering::AB ? "AB" : "BA";
    csv << w.num_sites << ',' << w.w_ab << ',' << w.w_ba << ',' << w.norm_bba << ',' << w.norm_aba << ',' << side;
    for (double b : row.dt_bounds) csv << ',' << b;
    csv << '\n';
    out << w.num_sites << "  " << w.w_ab << "  " << w.w_ba << "  " << side;
    for (double b : row.dt_bounds) out << "  " << b;
    out << '\n';
  }
  write_text(std::filesystem::path(cfg.out_dir) / "bounds.csv", csv.str());
  return 0;
}

int cmd_scaling(const ExperimentConfig& cfg, std::ostream& out) {
  const ScalingResult r = scaling_experiment(cfg);
  std::ostringstream csv = csv_stream();
  csv << "dt,eta_f,eta_f_24,eta_f_23,eta_f_variance,eta_o,eta_o_24,eta_o_23,t2_error,t3_error,t4_error\n";
  for (const ScalingRow& row : r.rows) {
    csv << row.dt << ',' << row.eta_f << ',' << row.eta_f_24 << ',' << row.eta_f_23 << ',' << row.eta_f_variance
        << ',' << row.eta_o << ',' << row.eta_o_24 << ',' << row.eta_o_23 << ',' << row.t2_error << ','
        << row.t3_error << ',' << row.t4_error << '\n';
  }
  const std::filesystem::path dir(cfg.out_dir);
  write_text(dir / "scaling.csv", csv.str());
  json slopes = json::object();
  for (const auto& [name, value] : r.slopes) slopes[name] = value;
  write_text(dir / "scaling_slopes.json", slopes.dump(2) + "\n");
  out << "fitted log-log slopes\n";
  for (const auto& [name, value] : r.slopes) out << "  " << name << "  " << value << '\n';
  return 0;
}

int cmd_compare_extrapolation(const ExperimentConfig& cfg, std::ostream& out) {
  const auto rows = compare_experiment(cfg);
  std::ostringstream csv = csv_stream();
  write_comparison_csv(csv, rows);
  const std::filesystem::path dir(cfg.out_dir);
  write_text(dir / "comparison.csv", csv.str());
  write_text(dir / "comparison.json", comparison_to_json(rows).dump(2) + "\n");
  for (const ComparisonRow& row : rows) {
    out << row.t << "  " << row.method << "  " << row.m_or_eps << "  abs_error=" << row.abs_error
        << "  gates=" << row.gate_count << '\n';
  }
  return 0;
}

int cmd_sweep_c(const ExperimentConfig& cfg, std::ostream& out) {
  const auto points = sweep_experiment(cfg);
  std::ostringstream csv = csv_stream();
  csv << "C,mean_dt,rejection_rate,steps,rejections\n";
  for (const SweepPoint& p : points) {
    csv << p.safety_c << ',' << p.mean_dt << ',' << p.rejection_rate << ',' << p.steps << ',' << p.rejections << '\n';
    out << "C=" << p.safety_c << "  mean dt " << p.mean_dt << "  rejection rate " << p.rejection_rate << '\n';
  }
  write_text(std::filesystem::path(cfg.out_dir) / "sweep_c.csv", csv.str());
  return 0;
}

}  // namespace trotter24
