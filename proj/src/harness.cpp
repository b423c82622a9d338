#include "tidanse/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "tidanse/error.hpp"
#include "tidanse/version.hpp"

namespace tidanse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ConfigInvalid, what);
}

double measured_connectivity(const WasnGraph& g) { return g.size() > 3 ? connectivity(g) : kNaN; }

std::string pruning_label(const RunSpec& spec) {
  return spec.algorithm == Algorithm::Danse ? "none" : to_string(spec.pruning);
}

WasnGraph initial_graph(const SensingEnvironment& env, const RunSpec& spec) {
  if (spec.algorithm == Algorithm::Danse) return WasnGraph::fully_connected(env.graph().positions());
  return spec.graph ? *spec.graph : env.graph();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

// Runs `task(i)` for i in [0, n) on up to `threads` workers; the first
// exception is rethrown after all workers finish.
template <class Task>
void parallel_for(std::size_t n, std::size_t threads, Task&& task) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t count = std::max<std::size_t>(1, std::min(threads, n));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void validate(const ExperimentConfig& c) {
  require(c.k_nodes >= 1, "k_nodes must be positive");
  require(c.sensors_per_node >= 1, "sensors_per_node must be positive");
  require(c.q_dim >= 1 && c.q_dim <= c.sensors_per_node, "q_dim must be in [1, sensors_per_node]");
  require(c.s_sources >= 1, "s_sources must be positive");
  require(c.n_bins >= 1, "n_bins must be positive");
  require(c.n_envs >= 1, "n_envs must be positive");
  require(!c.algorithms.empty(), "at least one algorithm is required");
  for (double t : c.connectivity_targets) require(t >= 0.0 && t <= 1.0, "connectivity targets must lie in [0, 1]");
  require(c.connectivity_targets.empty() || c.k_nodes > 3, "connectivity targets need more than three nodes");
  if (c.update.is_gevd()) {
    const std::size_t min_obs = c.sensors_per_node + (c.k_nodes > 1 ? c.q_dim : 0);
    require(c.update.rank >= 1 && c.update.rank <= min_obs, "gevd rank must be in [1, smallest observation dimension]");
  }
  require(c.activity_duty > 0.0 && c.activity_duty < 1.0, "activity_duty must lie in (0, 1)");
  require(c.forgetting_factor >= 0.0 && c.forgetting_factor < 1.0, "forgetting_factor must lie in [0, 1)");
  require(c.n_min >= 1, "n_min must be positive");
  require(c.threads >= 1, "threads must be positive");
  require(!c.compute_snr || c.snr_frames >= 2, "snr_frames must be at least 2");
  require(!c.output_dir.empty(), "output_dir must not be empty");
}

std::string config_to_json(const ExperimentConfig& c) {
  json algs = json::array();
  for (Algorithm a : c.algorithms) algs.push_back(to_string(a));
  json j{{"k_nodes", c.k_nodes},
         {"sensors_per_node", c.sensors_per_node},
         {"q_dim", c.q_dim},
         {"s_sources", c.s_sources},
         {"n_noise_sources", c.n_noise_sources},
         {"n_bins", c.n_bins},
         {"n_envs", c.n_envs},
         {"n_iterations", c.n_iterations},
         {"connectivity", c.connectivity_targets},
         {"algorithms", algs},
         {"pruning", to_string(c.pruning)},
         {"update_mode", c.update.is_gevd() ? "gevd" : "plain"},
         {"gevd_rank", c.update.rank},
         {"scm_mode", to_string(c.scm_mode)},
         {"topology_mode", c.dynamic ? "dynamic" : "static"},
         {"seed", c.seed},
         {"output_dir", c.output_dir},
         {"steering", to_string(c.steering)},
         {"activity_duty", c.activity_duty},
         {"forgetting_factor", c.forgetting_factor},
         {"n_min", c.n_min},
         {"snr", c.compute_snr},
         {"snr_frames", c.snr_frames},
         {"threads", c.threads}};
  return j.dump(2);
}

ExperimentConfig merge_config(const ExperimentConfig& base, std::string_view overrides) {
  ExperimentConfig c = base;
  json j;
  try {
    j = json::parse(overrides);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("config JSON: ") + e.what());
  }
  require(j.is_object(), "config must be a JSON object");
  std::string update_mode = c.update.is_gevd() ? "gevd" : "plain";
  std::size_t rank = c.update.rank;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "k_nodes") c.k_nodes = v.get<std::size_t>();
      else if (key == "sensors_per_node") c.sensors_per_node = v.get<std::size_t>();
      else if (key == "q_dim") c.q_dim = v.get<std::size_t>();
      else if (key == "s_sources") c.s_sources = v.get<std::size_t>();
      else if (key == "n_noise_sources") c.n_noise_sources = v.get<std::size_t>();
      else if (key == "n_bins") c.n_bins = v.get<std::size_t>();
      else if (key == "n_envs") c.n_envs = v.get<std::size_t>();
      else if (key == "n_iterations") c.n_iterations = v.get<std::size_t>();
      else if (key == "connectivity") c.connectivity_targets = v.get<std::vector<double>>();
      else if (key == "algorithms") {
        c.algorithms.clear();
        for (const auto& a : v) c.algorithms.push_back(algorithm_from_string(a.get<std::string>()));
      } else if (key == "pruning") c.pruning = pruning_from_string(v.get<std::string>());
      else if (key == "update_mode") update_mode = v.get<std::string>();
      else if (key == "gevd_rank") rank = v.get<std::size_t>();
      else if (key == "scm_mode") c.scm_mode = scm_mode_from_string(v.get<std::string>());
      else if (key == "topology_mode") {
        const std::string mode = v.get<std::string>();
        require(mode == "static" || mode == "dynamic", "topology_mode must be static or dynamic");
        c.dynamic = mode == "dynamic";
      } else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "output_dir") c.output_dir = v.get<std::string>();
      else if (key == "steering") c.steering = steering_from_string(v.get<std::string>());
      else if (key == "activity_duty") c.activity_duty = v.get<double>();
      else if (key == "forgetting_factor") c.forgetting_factor = v.get<double>();
      else if (key == "n_min") c.n_min = v.get<std::size_t>();
      else if (key == "snr") c.compute_snr = v.get<bool>();
      else if (key == "snr_frames") c.snr_frames = v.get<std::size_t>();
      else if (key == "threads") c.threads = v.get<std::size_t>();
      else throw Error(ErrorCode::ConfigInvalid, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("config value: ") + e.what());
  }
  require(update_mode == "plain" || update_mode == "gevd", "update_mode must be plain or gevd");
  c.update = update_mode == "gevd" ? UpdateMode::gevd(rank) : UpdateMode::plain();
  return c;
}

ExperimentConfig config_from_json(std::string_view text) { return merge_config(ExperimentConfig{}, text); }

ScenarioConfig scenario_for(const ExperimentConfig& c) {
  ScenarioConfig s;
  s.k_nodes = c.k_nodes;
  s.sensors_per_node = c.sensors_per_node;
  s.q_dim = c.q_dim;
  s.s_sources = c.s_sources;
  s.n_noise_sources = c.n_noise_sources;
  s.n_bins = c.n_bins;
  s.steering = c.steering;
  return s;
}

// ---------------------------------------------------------------------------
// Simulation

Simulation::Simulation(const SensingEnvironment& env, RunSpec spec)
    : env_(&env),
      spec_(std::move(spec)),
      scms_(theoretical_scms(env)),
      layout_(Layout::of(env)),
      graph_(initial_graph(env, spec_)),
      topology_rng_(derive_seed(spec_.seed, {2})) {
  if (graph_.size() != env.k_nodes()) throw Error(ErrorCode::DimensionMismatch, "graph size differs from node count");
  centralized_ = centralized_filters(scms_, layout_, spec_.update);
  Rng init(derive_seed(spec_.seed, {1}));
  state_ = initialize_state(layout_, env.n_bins(), init);
  if (spec_.scm_mode == ScmMode::Online)
    for (std::size_t b = 0; b < env.n_bins(); ++b)
      streams_.emplace_back(env, b, spec_.activity_duty, derive_seed(spec_.seed, {3}));
  if (spec_.compute_snr)
    snr_block_ = synthesize_signals(env, spec_.snr_frames, spec_.activity_duty, derive_seed(spec_.seed, {4}));
}

const WasnGraph& Simulation::current_graph() const { return graph_; }

FilterSet Simulation::filters() const { return network_filters(state_, layout_); }

MetricsRecord Simulation::record() const {
  MetricsRecord r;
  r.iteration = iteration_;
  r.root = iteration_ == 0 ? 0 : last_root_;
  r.algorithm = to_string(spec_.algorithm);
  r.pruning = pruning_label(spec_);
  r.connectivity_c = measured_connectivity(current_graph());
  const FilterSet f = filters();
  r.mse_w = mse_w(f, centralized_);
  if (snr_block_) {
    const OutputComponents out = filter_outputs(f, *snr_block_);
    r.snr_db = snr_db(out.desired, out.noise);
  }
  r.signals_exchanged = iteration_ == 0 ? 0 : last_signals_;
  return r;
}

MetricsRecord Simulation::step() {
  if (spec_.dynamic && spec_.algorithm != Algorithm::Danse)
    graph_ = randomize_adjacency(graph_.positions(), topology_rng_);
  const IterationPlan plan = make_plan(iteration_, graph_, spec_.algorithm, spec_.pruning, spec_.update);
  const IterationReport rep = spec_.scm_mode == ScmMode::Online
                                  ? run_iteration(plan, layout_, streams_, spec_.online, state_)
                                  : run_iteration(plan, layout_, scms_, state_);
  ++iteration_;
  last_root_ = plan.root;
  last_signals_ = rep.signals_exchanged;
  degenerate_ = rep.degenerate_nodes;
  return record();
}

OutputComponents filter_outputs(const FilterSet& filters, const SignalBlock& block) {
  const std::size_t bins = filters.size();
  if (bins == 0 || block.desired_frames.size() != bins)
    throw Error(ErrorCode::DimensionMismatch, "filter_outputs: bin counts differ");
  const std::size_t k = filters[0].size();
  const std::size_t frames = block.frames();
  OutputComponents out;
  out.desired.resize(k);
  out.noise.resize(k);
  for (std::size_t q = 0; q < k; ++q) {
    const std::size_t q_dim = filters[0][q].cols();
    for (std::size_t j = 0; j < q_dim; ++j) {
      std::vector<std::vector<cplx>> des(bins, std::vector<cplx>(frames)), noi(bins, std::vector<cplx>(frames));
      for (std::size_t b = 0; b < bins; ++b) {
        const ComplexMat& w = filters[b][q];
        const ComplexMat& ds = block.desired_frames[b];
        const ComplexMat& ns = block.noise_frames[b];
        if (w.rows() != ds.rows()) throw Error(ErrorCode::DimensionMismatch, "filter_outputs: sensor counts differ");
        for (std::size_t t = 0; t < frames; ++t) {
          cplx sd = 0.0, sn = 0.0;
          for (std::size_t i = 0; i < w.rows(); ++i) {
            const cplx c = std::conj(w(i, j));
            sd += c * ds(i, t);
            sn += c * ns(i, t);
          }
          des[b][t] = sd;
          noi[b][t] = sn;
        }
      }
      const std::vector<double> td = interior_istft(des, block.frame_len);
      const std::vector<double> tn = interior_istft(noi, block.frame_len);
      out.desired[q].insert(out.desired[q].end(), td.begin(), td.end());
      out.noise[q].insert(out.noise[q].end(), tn.begin(), tn.end());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

struct Combination {
  Algorithm algorithm;
  std::optional<double> target;
};

std::vector<Combination> combinations(const ExperimentConfig& c) {
  std::vector<Combination> out;
  for (Algorithm a : c.algorithms) {
    if (a == Algorithm::Danse) {
      out.push_back({a, 1.0});
    } else if (c.dynamic || c.connectivity_targets.empty()) {
      out.push_back({a, std::nullopt});
    } else {
      for (double t : c.connectivity_targets) out.push_back({a, t});
    }
  }
  return out;
}

std::vector<RunSeries> run_environment(const ExperimentConfig& c, std::size_t env_index) {
  const std::uint64_t env_seed = derive_seed(c.seed, {env_index});
  const SensingEnvironment env = build_environment(scenario_for(c), env_seed);
  std::vector<RunSeries> out;
  for (const Combination& combo : combinations(c)) {
    RunSpec spec;
    spec.algorithm = combo.algorithm;
    spec.pruning = c.pruning;
    spec.update = c.update;
    spec.scm_mode = c.scm_mode;
    spec.online = {c.forgetting_factor, c.n_min};
    spec.activity_duty = c.activity_duty;
    spec.dynamic = c.dynamic;
    spec.seed = env_seed;
    spec.compute_snr = c.compute_snr;
    spec.snr_frames = c.snr_frames;
    if (combo.algorithm != Algorithm::Danse && combo.target) {
      const auto pos = std::find(c.connectivity_targets.begin(), c.connectivity_targets.end(), *combo.target);
      Rng rng(derive_seed(env_seed, {5, static_cast<std::uint64_t>(pos - c.connectivity_targets.begin())}));
      spec.graph = adjust_connectivity(env.graph(), *combo.target, rng);
    }
    Simulation sim(env, spec);
    RunSeries series{env_index, env_seed, combo.algorithm, c.pruning, combo.target, {}};
    series.records.push_back(sim.record());
    for (std::size_t i = 0; i < c.n_iterations; ++i) series.records.push_back(sim.step());
    out.push_back(std::move(series));
  }
  return out;
}

std::string target_label(const std::optional<double>& t) { return t ? fmt(*t) : std::string(); }

std::string pruning_label(const RunSeries& r) {
  return r.algorithm == Algorithm::Danse ? "none" : to_string(r.pruning);
}

void write_outputs(const ExperimentConfig& c, ExperimentResult& result) {
  const fs::path dir(c.output_dir);
  make_dir(dir);
  std::map<std::size_t, std::vector<const RunSeries*>> by_env;
  for (const RunSeries& r : result.runs) by_env[r.env].push_back(&r);

  json seeds = json::array(), combos = json::array();
  for (const auto& [env, runs] : by_env) {
    const std::string name = "metrics_env" + std::to_string(env) + ".csv";
    std::string text = metrics_csv_header() + "\n";
    for (const RunSeries* r : runs) {
      for (const MetricsRecord& rec : r->records) text += to_csv_row(rec) + "\n";
      combos.push_back({{"env", env},
                        {"algorithm", to_string(r->algorithm)},
                        {"pruning", pruning_label(*r)},
                        {"connectivity_target", r->connectivity_target ? json(*r->connectivity_target) : json(nullptr)},
                        {"connectivity_c", r->records.empty() || std::isnan(r->records[0].connectivity_c)
                                               ? json(nullptr)
                                               : json(r->records[0].connectivity_c)}});
    }
    write_text(dir / name, text);
    result.files.push_back((dir / name).string());
    seeds.push_back({{"env", env}, {"seed", runs.front()->env_seed}, {"file", name}});
  }

  // Geometric mean over environments per combination and iteration.
  std::string summary =
      "iteration,algorithm,pruning,connectivity_target,mse_w_geomean,snr_db_mean,signals_exchanged\n";
  const auto combos_list = combinations(c);
  for (std::size_t ci = 0; ci < combos_list.size(); ++ci) {
    std::vector<const RunSeries*> runs;
    for (const auto& [env, rs] : by_env) runs.push_back(rs[ci]);
    std::vector<std::vector<double>> mse;
    for (const RunSeries* r : runs) {
      std::vector<double> s;
      for (const MetricsRecord& rec : r->records) s.push_back(rec.mse_w);
      mse.push_back(std::move(s));
    }
    const std::vector<double> gm = geometric_mean_series(mse);
    for (std::size_t i = 0; i < gm.size(); ++i) {
      std::string snr;
      if (runs[0]->records[i].snr_db) {
        double sum = 0.0;
        for (const RunSeries* r : runs) sum += *r->records[i].snr_db;
        snr = fmt(sum / static_cast<double>(runs.size()));
      }
      summary += std::to_string(i) + "," + to_string(runs[0]->algorithm) + "," + pruning_label(*runs[0]) + "," +
                 target_label(runs[0]->connectivity_target) + "," + fmt(gm[i]) + "," + snr + "," +
                 std::to_string(runs[0]->records[i].signals_exchanged) + "\n";
    }
  }
  write_text(dir / "summary.csv", summary);
  result.files.push_back((dir / "summary.csv").string());

  const json manifest{{"config", json::parse(config_to_json(c))},
                      {"seeds", seeds},
                      {"combinations", combos},
                      {"versions",
                       {{"tidanse", kVersion},
                        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
                      {"wall_ms", result.wall_ms}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  result.files.push_back((dir / "manifest.json").string());
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, bool write_files) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::vector<RunSeries>> per_env(config.n_envs);
  parallel_for(config.n_envs, config.threads, [&](std::size_t e) { per_env[e] = run_environment(config, e); });
  ExperimentResult result;
  for (auto& runs : per_env)
    for (auto& r : runs) result.runs.push_back(std::move(r));
  result.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (write_files) write_outputs(config, result);
  return result;
}

std::vector<ExperimentResult> run_sweep(const ExperimentConfig& config) {
  std::vector<ExperimentResult> out;
  for (Pruning p : {Pruning::Mst, Pruning::Mmut}) {
    ExperimentConfig c = config;
    c.pruning = p;
    c.dynamic = false;
    if (c.connectivity_targets.empty()) c.connectivity_targets = {0.0, 0.25, 0.5, 0.75, 1.0};
    c.algorithms = {Algorithm::TiDansePlus, Algorithm::TiDanse, Algorithm::Danse};
    c.output_dir = (fs::path(config.output_dir) / to_string(p)).string();
    out.push_back(run_experiment(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pruning statistics

double quantile(std::vector<double> values, double p) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

PruneStatsResult prune_stats(const PruneStatsConfig& config, bool write_files) {
  require(config.n_wasns >= 1, "n_wasns must be positive");
  for (std::size_t k : config.k_values) require(k >= 2, "node counts must be at least 2");
  PruneStatsResult result;
  static constexpr double kLevels[5] = {0.05, 0.25, 0.5, 0.75, 0.95};
  for (std::size_t k : config.k_values) {
    std::vector<double> cols[4];
    for (std::size_t w = 0; w < config.n_wasns; ++w) {
      Rng rng(derive_seed(config.seed, {k, w}));
      const WasnGraph g = generate_geometric_wasn(k, config.geometry, rng);
      PruneStatsRow row{k, w, 0.0, 0.0, 0.0, 0.0};
      for (std::size_t root = 0; root < k; ++root) {
        const Tree mst = prune_mst(g, root);
        const Tree mmut = prune_mmut(g, root);
        row.u_avg_mst += static_cast<double>(mst.upstream[root].size());
        row.u_avg_mmut += static_cast<double>(mmut.upstream[root].size());
        row.e_avg_mst += mst.total_length();
        row.e_avg_mmut += mmut.total_length();
      }
      const double kk = static_cast<double>(k);
      row.u_avg_mst /= kk;
      row.u_avg_mmut /= kk;
      row.e_avg_mst /= kk;
      row.e_avg_mmut /= kk;
      cols[0].push_back(row.u_avg_mst);
      cols[1].push_back(row.u_avg_mmut);
      cols[2].push_back(row.e_avg_mst);
      cols[3].push_back(row.e_avg_mmut);
      result.rows.push_back(row);
    }
    const char* strategies[4] = {"mst", "mmut", "mst", "mmut"};
    const char* metrics[4] = {"u_avg", "u_avg", "e_avg", "e_avg"};
    for (int i = 0; i < 4; ++i) {
      QuantileRow q{k, strategies[i], metrics[i], {}};
      for (int l = 0; l < 5; ++l) q.q[l] = quantile(cols[i], kLevels[l]);
      result.quantiles.push_back(q);
    }
  }
  if (write_files) {
    const fs::path dir(config.output_dir);
    make_dir(dir);
    std::string rows = "k_nodes,wasn,u_avg_mst,u_avg_mmut,e_avg_mst,e_avg_mmut\n";
    for (const auto& r : result.rows)
      rows += std::to_string(r.k_nodes) + "," + std::to_string(r.wasn) + "," + fmt(r.u_avg_mst) + "," +
              fmt(r.u_avg_mmut) + "," + fmt(r.e_avg_mst) + "," + fmt(r.e_avg_mmut) + "\n";
    write_text(dir / "prune_stats.csv", rows);
    std::string qs = "k_nodes,strategy,metric,q05,q25,q50,q75,q95\n";
    for (const auto& q : result.quantiles) {
      qs += std::to_string(q.k_nodes) + "," + q.strategy + "," + q.metric;
      for (double v : q.q) qs += "," + fmt(v);
      qs += "\n";
    }
    write_text(dir / "prune_quantiles.csv", qs);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Plots

PlotKind plot_kind_from_string(std::string_view name) {
  if (name == "mse_w" || name == "mse") return PlotKind::MseW;
  if (name == "snr") return PlotKind::Snr;
  if (name == "prune") return PlotKind::Prune;
  throw Error(ErrorCode::ConfigInvalid, "unknown plot kind '" + std::string(name) + "'");
}

namespace {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::initializer_list<std::string_view> names) const {
    for (std::string_view n : names)
      for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == n) return i;
    return std::nullopt;
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream s(line);
  while (std::getline(s, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Csv parse_csv(std::string_view text) {
  Csv csv;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (csv.header.empty()) {
      csv.header = split(line);
      continue;
    }
    auto cells = split(line);
    if (cells.size() != csv.header.size())
      throw Error(ErrorCode::MalformedCsv, "row has " + std::to_string(cells.size()) + " fields, header has " +
                                               std::to_string(csv.header.size()));
    csv.rows.push_back(std::move(cells));
  }
  if (csv.header.empty()) throw Error(ErrorCode::MalformedCsv, "missing header");
  return csv;
}

double number(const std::string& cell) {
  if (cell == "nan") return kNaN;
  if (cell == "inf") return std::numeric_limits<double>::infinity();
  if (cell == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::MalformedCsv, "not a number: '" + cell + "'");
  }
}

std::size_t need(const Csv& csv, std::initializer_list<std::string_view> names) {
  if (auto c = csv.column(names)) return *c;
  throw Error(ErrorCode::MalformedCsv, "missing column '" + std::string(*names.begin()) + "'");
}

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

constexpr double kWidth = 720, kHeight = 440, kLeft = 70, kRight = 190, kTop = 30, kBottom = 50;

struct Frame {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

Frame fit(const std::vector<Series>& series) {
  Frame f{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      f.x0 = std::min(f.x0, x);
      f.x1 = std::max(f.x1, x);
      f.y0 = std::min(f.y0, y);
      f.y1 = std::max(f.y1, y);
    }
  if (!std::isfinite(f.x0)) return Frame{};
  if (f.x1 <= f.x0) f.x1 = f.x0 + 1;
  if (f.y1 <= f.y0) {
    f.y0 -= 0.5;
    f.y1 += 0.5;
  }
  return f;
}

std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel, bool log_y) {
  std::ostringstream s;
  s.precision(4);
  const double bottom = kHeight - kBottom, right = kWidth - kRight;
  s << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\"" << bottom << "\"/>\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << bottom << "\"/>\n"
    << "</g>\n<g class=\"ticks\" font-size=\"11\" font-family=\"sans-serif\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s << "<text x=\"" << f.px(x) << "\" y=\"" << bottom + 16 << "\" text-anchor=\"middle\">" << x << "</text>\n";
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.py(y) + 4 << "\" text-anchor=\"end\">";
    if (log_y)
      s << "1e" << std::lround(y);
    else
      s << y;
    s << "</text>\n";
  }
  s << "</g>\n<text x=\"" << (kLeft + right) / 2 << "\" y=\"" << kHeight - 12
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xlabel << "</text>\n"
    << "<text x=\"16\" y=\"" << (kTop + bottom) / 2 << "\" transform=\"rotate(-90 16 " << (kTop + bottom) / 2
    << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << ylabel << "</text>\n";
  return s.str();
}

std::string svg_open() {
  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return s.str();
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::string line_plot(std::vector<Series> series, const std::string& ylabel, bool log_y) {
  const Frame f = fit(series);
  std::ostringstream s;
  s.precision(6);
  s << svg_open() << axes(f, "iteration", ylabel, log_y);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    s << "<polyline class=\"series\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t p = 0; p < series[i].points.size(); ++p)
      s << (p ? " " : "") << f.px(series[i].points[p].first) << "," << f.py(series[i].points[p].second);
    s << "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(i);
    s << "<line x1=\"" << kWidth - kRight + 12 << "\" y1=\"" << ly << "\" x2=\"" << kWidth - kRight + 32 << "\" y2=\""
      << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
      << "<text class=\"legend\" x=\"" << kWidth - kRight + 36 << "\" y=\"" << ly + 4
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(series[i].label) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::vector<Series> collect_series(const Csv& csv, std::initializer_list<std::string_view> value_names, bool log_y) {
  const std::size_t it = need(csv, {"iteration"});
  const std::size_t val = need(csv, value_names);
  const std::size_t alg = need(csv, {"algorithm"});
  const auto pr = csv.column({"pruning"});
  const auto conn = csv.column({"connectivity_target", "connectivity_c"});

  std::vector<Series> out;
  std::vector<std::string> keys;
  double last_iter = std::numeric_limits<double>::infinity();
  std::string last_key;
  for (const auto& row : csv.rows) {
    const double x = number(row[it]);
    const std::string key = row[alg] + (pr ? " " + row[*pr] : std::string());
    // A new series starts whenever the key changes or the iteration restarts.
    if (out.empty() || key != last_key || !(x > last_iter)) {
      std::string ctag = conn && !row[*conn].empty() ? row[*conn] : std::string();
      out.push_back({row[alg], {}});
      keys.push_back(key + (ctag.empty() ? std::string() : " C=" + ctag));
    }
    last_key = key;
    last_iter = x;
    if (row[val].empty()) continue;
    double y = number(row[val]);
    if (log_y) y = std::log10(std::max(y, kMseFloor));
    if (std::isfinite(y)) out.back().points.push_back({x, y});
  }
  // Full keys only when the algorithm name alone is ambiguous.
  std::map<std::string, std::size_t> uses;
  for (const auto& s : out) ++uses[s.label];
  for (std::size_t i = 0; i < out.size(); ++i)
    if (uses[out[i].label] > 1) out[i].label = keys[i];
  return out;
}

std::string prune_plot(const Csv& csv) {
  const std::size_t kc = need(csv, {"k_nodes"}), sc = need(csv, {"strategy"}), mc = need(csv, {"metric"});
  const std::size_t qc[5] = {need(csv, {"q05"}), need(csv, {"q25"}), need(csv, {"q50"}), need(csv, {"q75"}),
                             need(csv, {"q95"})};
  std::ostringstream s;
  s.precision(6);
  s << svg_open();
  const double panel_w = (kWidth - 3 * kLeft) / 2.0;
  int panel = 0;
  for (const std::string metric : {"u_avg", "e_avg"}) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : csv.rows)
      if (r[mc] == metric) rows.push_back(r);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& r : rows) {
      lo = std::min(lo, number(r[qc[0]]));
      hi = std::max(hi, number(r[qc[4]]));
    }
    if (!std::isfinite(lo)) {
      lo = 0;
      hi = 1;
    }
    if (hi <= lo) hi = lo + 1;
    const double x0 = kLeft + panel * (panel_w + kLeft), bottom = kHeight - kBottom;
    auto py = [&](double v) { return bottom - (v - lo) / (hi - lo) * (bottom - kTop); };
    s << "<g class=\"panel\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<text x=\"" << x0 + panel_w / 2 << "\" y=\"" << kTop - 10 << "\" text-anchor=\"middle\">" << metric
      << "</text>\n<line x1=\"" << x0 << "\" y1=\"" << bottom << "\" x2=\"" << x0 + panel_w << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n<line x1=\"" << x0 << "\" y1=\"" << kTop << "\" x2=\"" << x0 << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double v = lo + (hi - lo) * i / 4.0;
      s << "<text x=\"" << x0 - 4 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
    }
    const double slot = rows.empty() ? panel_w : panel_w / static_cast<double>(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      const double cx = x0 + slot * (static_cast<double>(i) + 0.5), half = slot * 0.3;
      const char* color = r[sc] == "mst" ? kPalette[0] : kPalette[1];
      s << "<g class=\"box\" stroke=\"" << color << "\" fill=\"none\">"
        << "<line x1=\"" << cx << "\" y1=\"" << py(number(r[qc[0]])) << "\" x2=\"" << cx << "\" y2=\""
        << py(number(r[qc[4]])) << "\"/>"
        << "<rect x=\"" << cx - half << "\" y=\"" << py(number(r[qc[3]])) << "\" width=\"" << 2 * half
        << "\" height=\"" << py(number(r[qc[1]])) - py(number(r[qc[3]])) << "\" fill=\"white\"/>"
        << "<line x1=\"" << cx - half << "\" y1=\"" << py(number(r[qc[2]])) << "\" x2=\"" << cx + half << "\" y2=\""
        << py(number(r[qc[2]])) << "\"/></g>\n"
        << "<text x=\"" << cx << "\" y=\"" << bottom + 14 << "\" text-anchor=\"middle\" font-size=\"9\">"
        << r[kc] << (r[sc] == "mst" ? "s" : "m") << "</text>\n";
    }
    s << "</g>\n";
    ++panel;
  }
  s << "<text class=\"legend\" x=\"" << kWidth - 170 << "\" y=\"" << kHeight - 12
    << "\" font-family=\"sans-serif\" font-size=\"11\">K + s: mst, K + m: mmut</text>\n</svg>\n";
  return s.str();
}

}  // namespace

std::string render_plot(std::string_view csv_text, PlotKind kind) {
  const Csv csv = parse_csv(csv_text);
  switch (kind) {
    case PlotKind::MseW: return line_plot(collect_series(csv, {"mse_w", "mse_w_geomean"}, true), "MSE_W (log10)", true);
    case PlotKind::Snr: return line_plot(collect_series(csv, {"snr_db", "snr_db_mean"}, false), "SNR [dB]", false);
    case PlotKind::Prune: return prune_plot(csv);
  }
  return {};
}

void emit_plot(const std::string& csv_path, PlotKind kind, const std::string& svg_path) {
  write_text(svg_path, render_plot(read_text(csv_path), kind));
}

}  // namespace tidanse
