#pragma once

// Experiment configuration: a flat key=value text format.
//
//   # comment
//   experiment = ss-inconsistency
//   seed = 7
//   epsilons = 0, 0.5, 1
//   p = 0.4 0.1; 0.1 0.4
//   q = @data/uniform2x2.txt
//
// Keys mirror ExperimentConfig one to one (see fields() below). Distributions
// are written inline with ';' between rows, or as @path to a distribution
// file. The canonical serialization lists every key in a fixed order with
// round-trip number formatting; its FNV-1a hash identifies the run. `out`
// and `workers` are execution details and are left out of both.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "divlab/divlab.hpp"
#include "runner/distfile.hpp"

namespace divlab::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"divergence", "ss-inconsistency", "ss-train",
                                              "figure1",    "adversarial",      "js-limits"};
  return names;
}

struct ScheduleSpec {
  std::string kind = "constant";  // constant | linear | inverse_sigmoid
  double start = 1.0;
  double end = 0.0;
  std::size_t steps = 100000;
  double rate = 5.0;

  SSSchedule build(double constant_epsilon) const {
    if (kind == "constant") return SSSchedule(schedule::Constant{constant_epsilon});
    if (kind == "linear") return SSSchedule(schedule::LinearAnneal{start, end, steps});
    return SSSchedule(schedule::InverseSigmoidAnneal{rate, steps});
  }
};

struct GaussianSpec {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double major = 4.0;
  double minor = 1.0;
  double angle_deg = 30.0;

  Gaussian2D build() const {
    return Gaussian2D({mean_x, mean_y}, Sym2::rotated(major, minor, angle_deg * std::numbers::pi / 180.0));
  }
};

struct AdvSettings {
  std::string family = "gaussian";  // gaussian | discrete
  std::size_t discriminator_steps = 5;
  std::size_t batch_size = 256;
  double lr_discriminator = 1.0;
  double lr_generator = 0.1;
  std::size_t rounds = 2000;

  AdvConfig build(MixtureWeight pi, RngSeed seed) const {
    AdvConfig c(pi);
    c.discriminator_steps = discriminator_steps;
    c.batch_size = batch_size;
    c.lr_discriminator = lr_discriminator;
    c.lr_generator = lr_generator;
    c.rounds = rounds;
    c.seed = seed;
    return c;
  }
};

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string out = "report";
  std::size_t workers = 1;

  Table p;
  Table q;
  bool renormalize = false;

  std::vector<double> pis;
  std::vector<double> epsilons;

  OptConfig opt;
  std::size_t brute_divisions = 200;

  SSTrainConfig ss;
  ScheduleSpec schedule;

  std::size_t grid_resolution = 256;
  GaussianSpec gaussian;

  AdvSettings adv;

  std::size_t js_alphabet = 4;
  std::size_t js_max_power = 4;
};

/// Defaults for one experiment before any file or flag is applied.
inline ExperimentConfig defaults_for(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  if (experiment == "divergence") {
    c.pis = {0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95};
  } else if (experiment == "ss-inconsistency") {
    c.p = {{0.4, 0.1}, {0.1, 0.4}};
    c.epsilons = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    c.opt.restarts = 5;
  } else if (experiment == "ss-train") {
    c.p = {{0.4, 0.1}, {0.1, 0.4}};
    c.epsilons = {0.0, 1.0};
  } else if (experiment == "figure1") {
    c.pis = {0.1, 0.5, 0.99};
    c.opt = isotropic_fit_defaults();
  } else if (experiment == "adversarial") {
    c.pis = {0.1, 0.5, 0.9};
    c.p = {{0.1, 0.2, 0.3, 0.4}};
  } else if (experiment != "js-limits") {
    throw ConfigError("unknown experiment '" + experiment + "'");
  }
  return c;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

template <class Int>
Int parse_integer(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  return out;
}

inline std::string choice(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed) {
    if (v == a) return v;
  }
  std::string msg = key + ": '" + v + "' is not one of";
  for (const char* a : allowed) msg += std::string(" ") + a;
  throw ConfigError(msg);
}

inline std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

inline std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt_double(v[i]);
  return out;
}

inline std::string fmt_table(const Table& t) {
  std::string out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    if (r) out += "; ";
    for (std::size_t c = 0; c < t[r].size(); ++c) out += (c ? " " : "") + fmt_double(t[r][c]);
  }
  return out;
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define DIVLAB_DOUBLE(k, m) \
  Field{k, [](ExperimentConfig& c, const std::string& v) { c.m = parse_double(k, v); }, \
        [](const ExperimentConfig& c) { return fmt_double(c.m); }}
#define DIVLAB_SIZE(k, m) \
  Field{k, [](ExperimentConfig& c, const std::string& v) { c.m = parse_integer<std::size_t>(k, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.m); }}

/// Every hashed key, in canonical order. p, q and renormalize are handled
/// separately since distributions are resolved after all keys are read.
inline const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      Field{"experiment", [](ExperimentConfig& c, const std::string& v) { c.experiment = v; },
            [](const ExperimentConfig& c) { return c.experiment; }},
      Field{"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = parse_integer<std::uint64_t>("seed", v); },
            [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      Field{"pis", [](ExperimentConfig& c, const std::string& v) { c.pis = parse_list("pis", v); },
            [](const ExperimentConfig& c) { return fmt_list(c.pis); }},
      Field{"epsilons", [](ExperimentConfig& c, const std::string& v) { c.epsilons = parse_list("epsilons", v); },
            [](const ExperimentConfig& c) { return fmt_list(c.epsilons); }},
      DIVLAB_SIZE("opt.max_iters", opt.max_iters),
      DIVLAB_DOUBLE("opt.step_size", opt.step_size),
      DIVLAB_DOUBLE("opt.grad_tolerance", opt.grad_tolerance),
      DIVLAB_DOUBLE("opt.objective_tolerance", opt.objective_tolerance),
      DIVLAB_DOUBLE("opt.fd_step", opt.fd_step),
      DIVLAB_SIZE("opt.restarts", opt.restarts),
      DIVLAB_SIZE("scan.brute_divisions", brute_divisions),
      DIVLAB_SIZE("ss.sequences", ss.sequences),
      DIVLAB_DOUBLE("ss.step_size", ss.step_size),
      DIVLAB_SIZE("ss.checkpoints", ss.checkpoints),
      DIVLAB_SIZE("ss.heldout", ss.heldout),
      Field{"ss.replacement",
            [](ExperimentConfig& c, const std::string& v) {
              c.ss.replacement = choice("ss.replacement", v, {"sampled", "argmax"}) == "argmax" ? Replacement::Argmax
                                                                                              : Replacement::Sampled;
            },
            [](const ExperimentConfig& c) {
              return std::string(c.ss.replacement == Replacement::Argmax ? "argmax" : "sampled");
            }},
      Field{"schedule",
            [](ExperimentConfig& c, const std::string& v) {
              c.schedule.kind = choice("schedule", v, {"constant", "linear", "inverse_sigmoid"});
            },
            [](const ExperimentConfig& c) { return c.schedule.kind; }},
      DIVLAB_DOUBLE("schedule.start", schedule.start),
      DIVLAB_DOUBLE("schedule.end", schedule.end),
      DIVLAB_SIZE("schedule.steps", schedule.steps),
      DIVLAB_DOUBLE("schedule.rate", schedule.rate),
      DIVLAB_SIZE("grid.resolution", grid_resolution),
      DIVLAB_DOUBLE("gaussian.mean_x", gaussian.mean_x),
      DIVLAB_DOUBLE("gaussian.mean_y", gaussian.mean_y),
      DIVLAB_DOUBLE("gaussian.major", gaussian.major),
      DIVLAB_DOUBLE("gaussian.minor", gaussian.minor),
      DIVLAB_DOUBLE("gaussian.angle_deg", gaussian.angle_deg),
      Field{"adv.family",
            [](ExperimentConfig& c, const std::string& v) {
              c.adv.family = choice("adv.family", v, {"gaussian", "discrete"});
            },
            [](const ExperimentConfig& c) { return c.adv.family; }},
      DIVLAB_SIZE("adv.discriminator_steps", adv.discriminator_steps),
      DIVLAB_SIZE("adv.batch_size", adv.batch_size),
      DIVLAB_DOUBLE("adv.lr_discriminator", adv.lr_discriminator),
      DIVLAB_DOUBLE("adv.lr_generator", adv.lr_generator),
      DIVLAB_SIZE("adv.rounds", adv.rounds),
      DIVLAB_SIZE("js.alphabet", js_alphabet),
      DIVLAB_SIZE("js.max_power", js_max_power),
  };
  return table;
}

#undef DIVLAB_DOUBLE
#undef DIVLAB_SIZE

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Checks every nested config against its own invariants.
inline void validate(const ExperimentConfig& c) {
  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  if (c.out.empty()) throw ConfigError("out must name a directory");
  const std::string& e = c.experiment;
  if ((e == "divergence" || e == "figure1" || e == "adversarial") && c.pis.empty()) {
    throw ConfigError(e + " needs at least one value in pis");
  }
  if ((e == "ss-inconsistency" || (e == "ss-train" && c.schedule.kind == "constant")) && c.epsilons.empty()) {
    throw ConfigError(e + " needs at least one value in epsilons");
  }
  for (double pi : c.pis) MixtureWeight{pi};
  for (double eps : c.epsilons) SSWeight{eps};
  c.opt.validate();
  c.ss.validate();
  c.schedule.build(1.0);
  if (c.grid_resolution < 2) throw ConfigError("grid.resolution must be at least 2");
  c.gaussian.build();
  c.adv.build(MixtureWeight{0.5}, RngSeed{c.seed}).validate();
  if (c.js_alphabet < 2) throw ConfigError("js.alphabet must be at least 2");
  if (c.js_max_power < 2 || c.js_max_power > 8) throw ConfigError("js.max_power must lie in [2, 8]");
}

/// Collects key=value assignments from files and flags, then resolves them
/// against the experiment's defaults. Later assignments win.
class ConfigBuilder {
 public:
  explicit ConfigBuilder(std::string experiment) : experiment_(std::move(experiment)) {}

  void set(const std::string& key, const std::string& value, const std::string& where = "command line") {
    if (key == "experiment" && value != experiment_) {
      throw ConfigError(where + ": experiment '" + value + "' does not match subcommand '" + experiment_ + "'");
    }
    if (key != "out" && key != "workers" && key != "p" && key != "q" && key != "renormalize" && !known(key)) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
    assignments_.push_back({key, value, where});
  }

  /// Reads a key=value file. Relative @paths inside it resolve against the
  /// file's directory.
  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    const std::string base = std::filesystem::path(path).parent_path().string();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      const std::string body = detail::trim(line.substr(0, hash));
      if (body.empty()) continue;
      const auto eq = body.find('=');
      const std::string where = path + ":" + std::to_string(lineno);
      if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
      const std::string key = detail::trim(body.substr(0, eq));
      std::string value = detail::trim(body.substr(eq + 1));
      if ((key == "p" || key == "q") && value.starts_with('@') && !base.empty() &&
          std::filesystem::path(value.substr(1)).is_relative()) {
        value = "@" + (std::filesystem::path(base) / value.substr(1)).string();
      }
      set(key, value, where);
    }
  }

  ExperimentConfig build() const {
    ExperimentConfig c = defaults_for(experiment_);
    std::optional<std::pair<std::string, std::string>> p_src;
    std::optional<std::pair<std::string, std::string>> q_src;
    for (const auto& a : assignments_) {
      try {
        if (a.key == "out") {
          c.out = a.value;
        } else if (a.key == "workers") {
          c.workers = detail::parse_integer<std::size_t>("workers", a.value);
        } else if (a.key == "renormalize") {
          c.renormalize = detail::parse_bool("renormalize", a.value);
        } else if (a.key == "p") {
          p_src = {a.value, a.where};
        } else if (a.key == "q") {
          q_src = {a.value, a.where};
        } else {
          for (const auto& f : detail::fields()) {
            if (a.key == f.key) f.set(c, a.value);
          }
        }
      } catch (const ConfigError& e) {
        throw ConfigError(a.where + ": " + e.what());
      }
    }
    if (p_src) c.p = resolve_distribution(p_src->first, "p", c.renormalize);
    if (q_src) c.q = resolve_distribution(q_src->first, "q", c.renormalize);
    validate(c);
    return c;
  }

 private:
  struct Assignment {
    std::string key;
    std::string value;
    std::string where;
  };

  static bool known(const std::string& key) {
    for (const auto& f : detail::fields()) {
      if (key == f.key) return true;
    }
    return false;
  }

  static Table resolve_distribution(const std::string& value, const std::string& name, bool renormalize) {
    if (value.starts_with('@')) return read_distribution_file(value.substr(1), renormalize);
    std::string text = value;
    for (char& ch : text) {
      if (ch == ';') ch = '\n';
    }
    return parse_distribution(text, name, renormalize);
  }

  std::string experiment_;
  std::vector<Assignment> assignments_;
};

/// Canonical text: every hashed key in fixed order, then p and q if set.
inline std::string serialize(const ExperimentConfig& c) {
  std::string out;
  for (const auto& f : detail::fields()) out += fmt::format("{} = {}\n", f.key, f.get(c));
  if (!c.p.empty()) out += "p = " + detail::fmt_table(c.p) + "\n";
  if (!c.q.empty()) out += "q = " + detail::fmt_table(c.q) + "\n";
  return out;
}

inline std::uint64_t config_hash(const ExperimentConfig& c) { return detail::fnv1a64(serialize(c)); }

inline std::string hash_hex(std::uint64_t h) { return fmt::format("{:016x}", h); }

}  // namespace divlab::cli
