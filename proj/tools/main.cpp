// divlab: run a named experiment and write its report bundle.
//
// Exit codes: 0 success, 2 config or parse error, 3 numeric failure,
// 1 anything else (I/O failures, internal errors).

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "runner/config.hpp"
#include "runner/experiments.hpp"
#include "runner/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Options {
  std::string config_file;
  std::vector<std::string> sets;
  std::string p;
  std::string q;
  std::string pis;
  std::string epsilons;
  std::string family;
  bool renormalize = false;
};

// Flags that are plain aliases for config keys.
void alias(const std::string& value, const char* key, divlab::cli::ConfigBuilder& b) {
  if (!value.empty()) b.set(key, value, std::string("--") + key);
}

int run(const std::string& experiment, const Options& o, const std::map<std::string, std::string>& globals) {
  divlab::cli::ConfigBuilder builder(experiment);
  if (!o.config_file.empty()) builder.load_file(o.config_file);
  for (const auto& [k, v] : globals) builder.set(k, v, "--" + k);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw divlab::cli::ConfigError("--set expects key=value, got '" + s + "'");
    builder.set(divlab::cli::detail::trim(s.substr(0, eq)), divlab::cli::detail::trim(s.substr(eq + 1)), "--set");
  }
  if (o.renormalize) builder.set("renormalize", "true", "--renormalize");
  alias(o.p, "p", builder);
  alias(o.q, "q", builder);
  alias(o.pis, "pis", builder);
  alias(o.epsilons, "epsilons", builder);
  if (!o.family.empty()) builder.set("adv.family", o.family, "--family");

  const divlab::cli::ExperimentConfig cfg = builder.build();
  const divlab::cli::ReportBundle bundle = divlab::cli::run_experiment(cfg);
  divlab::cli::write_bundle(bundle, cfg.out);
  std::cout << "wrote " << cfg.out << " (config " << divlab::cli::hash_hex(divlab::cli::config_hash(cfg)) << ")\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"divlab: divergence and scheduled-sampling experiments"};
  app.require_subcommand(1);

  std::string seed;
  std::string out;
  std::string workers;
  Options opts;
  app.add_option("--seed", seed, "Base RNG seed (nonnegative integer)");
  app.add_option("--out", out, "Output directory for the report bundle");
  app.add_option("--config", opts.config_file, "key=value config file");
  app.add_option("--workers", workers, "Worker threads for sweeps");
  app.add_option("--set", opts.sets, "Override any config key: --set key=value (repeatable)");

  std::map<std::string, CLI::App*> subs;
  const std::map<std::string, std::string> help{
      {"divergence", "Entropies, KL both ways, JSD and JS_pi over a pi grid"},
      {"ss-inconsistency", "Minimize the scheduled-sampling objective across epsilon"},
      {"ss-train", "Tabular scheduled-sampling training runs"},
      {"figure1", "Fit isotropic Gaussians to a correlated Gaussian under JS_pi"},
      {"adversarial", "Generalized adversarial training sweep over pi"},
      {"js-limits", "Convergence of JS_pi / pi to the two KL directions"}};
  for (const auto& name : divlab::cli::experiment_names()) {
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    sub->fallthrough();
    if (name == "divergence" || name == "js-limits" || name == "ss-inconsistency" || name == "ss-train" ||
        name == "adversarial") {
      sub->add_option("--p", opts.p, "Distribution P: inline rows separated by ';' or @file");
      sub->add_flag("--renormalize", opts.renormalize, "Rescale input tables to unit mass");
    }
    if (name == "divergence" || name == "js-limits") {
      sub->add_option("--q", opts.q, "Distribution Q: inline rows separated by ';' or @file");
    }
    if (name == "divergence" || name == "figure1" || name == "adversarial") {
      sub->add_option("--pis", opts.pis, "Comma-separated mixture weights");
    }
    if (name == "ss-inconsistency" || name == "ss-train") {
      sub->add_option("--epsilons", opts.epsilons, "Comma-separated epsilon values");
    }
    if (name == "adversarial") sub->add_option("--family", opts.family, "gaussian or discrete");
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  std::map<std::string, std::string> globals;
  if (!seed.empty()) globals["seed"] = seed;
  if (!out.empty()) globals["out"] = out;
  if (!workers.empty()) globals["workers"] = workers;

  std::string experiment;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) experiment = name;
  }

  try {
    return run(experiment, opts, globals);
  } catch (const divlab::cli::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const divlab::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const divlab::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const divlab::AlphabetMismatch& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const divlab::ZeroMarginal& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const divlab::GridTooLarge& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const divlab::NumericFault& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const divlab::DegenerateGrid& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const divlab::GridMismatch& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const divlab::EmptySamples& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}
