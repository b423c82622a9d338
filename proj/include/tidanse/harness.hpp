#pragma once

// Experiment runner: configuration, per-environment simulations, CSV/JSON
// outputs, pruning statistics and SVG plots.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tidanse/danse.hpp"
#include "tidanse/metrics.hpp"
#include "tidanse/scenario.hpp"
#include "tidanse/topology.hpp"

namespace tidanse {

struct ExperimentConfig {
  std::size_t k_nodes = 10;
  std::size_t sensors_per_node = 3;
  std::size_t q_dim = 1;
  std::size_t s_sources = 1;
  std::size_t n_noise_sources = 3;
  std::size_t n_bins = 4;
  std::size_t n_envs = 10;
  std::size_t n_iterations = 200;
  /// Connectivity targets; empty runs on each environment's own graph.
  std::vector<double> connectivity_targets;
  std::vector<Algorithm> algorithms{Algorithm::TiDansePlus};
  Pruning pruning = Pruning::Mmut;
  UpdateMode update;
  ScmMode scm_mode = ScmMode::Theoretical;
  bool dynamic = false;
  std::uint64_t seed = 1;
  std::string output_dir = "tidanse_out";

  SteeringMode steering = SteeringMode::RandomGaussian;
  double activity_duty = 0.5;
  double forgetting_factor = 0.99;
  std::size_t n_min = 16;
  bool compute_snr = false;
  std::size_t snr_frames = 128;
  std::size_t threads = 1;
};

/// Throws ConfigInvalid on inconsistent settings.
void validate(const ExperimentConfig& config);
std::string config_to_json(const ExperimentConfig& config);
/// Flat JSON object; absent keys keep their defaults, unknown keys are rejected.
ExperimentConfig config_from_json(std::string_view text);
/// Applies the keys present in `overrides` on top of `base`.
ExperimentConfig merge_config(const ExperimentConfig& base, std::string_view overrides);

ScenarioConfig scenario_for(const ExperimentConfig& config);

struct RunSpec {
  Algorithm algorithm = Algorithm::TiDansePlus;
  Pruning pruning = Pruning::Mmut;
  UpdateMode update;
  ScmMode scm_mode = ScmMode::Theoretical;
  OnlineParams online;
  double activity_duty = 0.5;
  /// Static topology; the environment's own graph when empty. DANSE always
  /// runs on the fully connected graph over the same positions.
  std::optional<WasnGraph> graph;
  /// Redraw the adjacency before every iteration.
  bool dynamic = false;
  /// Seeds the initial filters, topology redraws and signal streams; runs
  /// sharing a seed start from identical filters.
  std::uint64_t seed = 0;
  bool compute_snr = false;
  std::size_t snr_frames = 128;
};

/// One algorithm running on one environment.
class Simulation {
 public:
  /// `env` must outlive the simulation.
  Simulation(const SensingEnvironment& env, RunSpec spec);

  /// Metrics of the current state; before any step this is the initial state.
  MetricsRecord record() const;
  /// Runs the next round-robin iteration and returns the resulting record.
  MetricsRecord step();

  std::size_t iteration() const noexcept { return iteration_; }
  const NetworkState& state() const noexcept { return state_; }
  const FilterSet& centralized() const noexcept { return centralized_; }
  const ScmSet& scms() const noexcept { return scms_; }
  const Layout& layout() const noexcept { return layout_; }
  FilterSet filters() const;
  /// Nodes flagged by the transform guard during the last step.
  const std::vector<std::size_t>& degenerate_nodes() const noexcept { return degenerate_; }

 private:
  const WasnGraph& current_graph() const;

  const SensingEnvironment* env_;
  RunSpec spec_;
  ScmSet scms_;
  Layout layout_;
  FilterSet centralized_;
  NetworkState state_;
  WasnGraph graph_;
  Rng topology_rng_;
  std::vector<FrameStream> streams_;
  std::optional<SignalBlock> snr_block_;
  std::size_t iteration_ = 0;
  std::size_t last_root_ = 0;
  std::size_t last_signals_ = 0;
  std::vector<std::size_t> degenerate_;
};

/// Per-node time-domain filter outputs for the desired-only and noise-only
/// parts of a signal block, indexed [node][sample] (target channels appended).
struct OutputComponents {
  std::vector<std::vector<double>> desired;
  std::vector<std::vector<double>> noise;
};
OutputComponents filter_outputs(const FilterSet& filters, const SignalBlock& block);

struct RunSeries {
  std::size_t env = 0;
  std::uint64_t env_seed = 0;
  Algorithm algorithm = Algorithm::TiDansePlus;
  Pruning pruning = Pruning::Mmut;
  /// Requested connectivity; empty for the environment's own or a dynamic graph.
  std::optional<double> connectivity_target;
  std::vector<MetricsRecord> records;
};

struct ExperimentResult {
  std::vector<RunSeries> runs;
  std::vector<std::string> files;
  double wall_ms = 0.0;
};

/// Runs every (environment, algorithm, connectivity) combination and writes
/// metrics_env<N>.csv, summary.csv and manifest.json into the output
/// directory (created if needed). Identical configs give identical CSVs.
ExperimentResult run_experiment(const ExperimentConfig& config, bool write_files = true);

/// Both pruning strategies over the connectivity grid (default 0, 0.25, 0.5,
/// 0.75, 1) with all three algorithms, written to <out>/mst and <out>/mmut.
std::vector<ExperimentResult> run_sweep(const ExperimentConfig& config);

struct PruneStatsConfig {
  std::vector<std::size_t> k_values{6, 9, 12, 15};
  std::size_t n_wasns = 200;
  std::uint64_t seed = 1;
  std::string output_dir = "tidanse_out";
  GeometryParams geometry;
};

struct PruneStatsRow {
  std::size_t k_nodes = 0;
  std::size_t wasn = 0;
  double u_avg_mst = 0.0;
  double u_avg_mmut = 0.0;
  double e_avg_mst = 0.0;
  double e_avg_mmut = 0.0;
};

struct QuantileRow {
  std::size_t k_nodes = 0;
  std::string strategy;
  std::string metric;
  /// 5th, 25th, 50th, 75th and 95th percentiles.
  double q[5] = {};
};

struct PruneStatsResult {
  std::vector<PruneStatsRow> rows;
  std::vector<QuantileRow> quantiles;
};

/// Per random geometric WASN: average root degree and total tree length over
/// all roots, for both strategies; writes prune_stats.csv and
/// prune_quantiles.csv when `write_files` is set.
PruneStatsResult prune_stats(const PruneStatsConfig& config, bool write_files = true);

/// Linear-interpolation quantile of unsorted values, p in [0, 1].
double quantile(std::vector<double> values, double p);

enum class PlotKind { MseW, Snr, Prune };
PlotKind plot_kind_from_string(std::string_view name);

/// Renders a harness CSV as a standalone SVG document.
std::string render_plot(std::string_view csv_text, PlotKind kind);
/// Reads `csv_path`, writes the SVG to `svg_path`.
void emit_plot(const std::string& csv_path, PlotKind kind, const std::string& svg_path);

}  // namespace tidanse
