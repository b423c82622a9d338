#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tidanse/tidanse.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> algorithms;
  std::optional<std::string> pruning;
  std::vector<double> connectivity;
  bool dynamic = false;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

nlohmann::json load_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream text;
  text << in.rdbuf();
  try {
    auto j = nlohmann::json::parse(text.str());
    if (!j.is_object()) throw ConfigError(path + ": config must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string experiment_json(const Overrides& o) {
  nlohmann::json j = load_config(o.config_path);
  if (o.seed) j["seed"] = *o.seed;
  if (o.out) j["output_dir"] = *o.out;
  if (!o.algorithms.empty()) j["algorithms"] = o.algorithms;
  if (o.pruning) j["pruning"] = *o.pruning;
  if (!o.connectivity.empty()) j["connectivity"] = o.connectivity;
  if (o.dynamic) j["topology_mode"] = "dynamic";
  return j.dump();
}

int report(tdn_status status) {
  if (status == TDN_OK) return 0;
  std::cerr << "error (" << tdn_status_name(status) << "): " << tdn_last_error() << "\n";
  return status == TDN_ERR_CONFIG_INVALID ? kExitConfig : kExitRuntime;
}

void add_experiment_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file (flat keys)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--algorithm", o.algorithms, "danse, ti-danse or ti-danse-plus (repeatable)")->delimiter(',');
  cmd->add_option("--pruning", o.pruning, "mst or mmut");
  cmd->add_option("--connectivity", o.connectivity, "Connectivity targets in [0, 1] (repeatable)")->delimiter(',');
  cmd->add_flag("--dynamic", o.dynamic, "Redraw the adjacency every iteration");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed node-specific signal estimation simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tdn_version());

  Overrides run_opts, sweep_opts;
  auto* run = app.add_subcommand("run", "Run one experiment configuration");
  add_experiment_flags(run, run_opts);
  auto* sweep = app.add_subcommand("sweep", "Both pruning strategies over a connectivity grid, all algorithms");
  add_experiment_flags(sweep, sweep_opts);

  std::string prune_config;
  std::optional<std::uint64_t> prune_seed;
  std::optional<std::string> prune_out;
  std::vector<std::size_t> prune_k;
  std::optional<std::size_t> prune_n;
  auto* prune = app.add_subcommand("prune-stats", "Tree statistics over random networks");
  prune->add_option("--config", prune_config, "JSON config file")->check(CLI::ExistingFile);
  prune->add_option("--seed", prune_seed, "Master seed");
  prune->add_option("--out", prune_out, "Output directory");
  prune->add_option("--k", prune_k, "Node counts")->delimiter(',');
  prune->add_option("--wasns", prune_n, "Networks per node count");

  std::string plot_csv, plot_kind = "mse_w", plot_svg;
  auto* plot = app.add_subcommand("plot", "Render a CSV as SVG");
  plot->add_option("csv", plot_csv, "Input CSV")->required();
  plot->add_option("--kind", plot_kind, "mse_w, snr or prune");
  plot->add_option("--out", plot_svg, "Output SVG (default: CSV path with .svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      double wall_ms = 0.0;
      const int rc = report(tdn_run_experiment(experiment_json(run_opts).c_str(), &wall_ms));
      if (rc == 0) std::cout << "done in " << wall_ms << " ms\n";
      return rc;
    }
    if (*sweep) return report(tdn_run_sweep(experiment_json(sweep_opts).c_str()));
    if (*prune) {
      nlohmann::json j = load_config(prune_config);
      if (prune_seed) j["seed"] = *prune_seed;
      if (prune_out) j["output_dir"] = *prune_out;
      if (!prune_k.empty()) j["k_values"] = prune_k;
      if (prune_n) j["n_wasns"] = *prune_n;
      return report(tdn_prune_stats(j.dump().c_str()));
    }
    if (*plot) {
      if (plot_svg.empty()) {
        const auto dot = plot_csv.rfind('.');
        plot_svg = (dot == std::string::npos ? plot_csv : plot_csv.substr(0, dot)) + ".svg";
      }
      return report(tdn_emit_plot(plot_csv.c_str(), plot_kind.c_str(), plot_svg.c_str()));
    }
  } catch (const ConfigError& e) {
    std::cerr << "error (ConfigInvalid): " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitRuntime;
}
