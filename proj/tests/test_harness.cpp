#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "tidanse/error.hpp"
#include "tidanse/harness.hpp"

using namespace tidanse;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tidanse_test_" + name);
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig small_config(const std::string& out) {
  ExperimentConfig c;
  c.k_nodes = 5;
  c.sensors_per_node = 2;
  c.n_noise_sources = 2;
  c.n_bins = 2;
  c.n_envs = 2;
  c.n_iterations = 6;
  c.output_dir = out;
  return c;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no exception");
  return ErrorCode::IoError;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("config JSON") {
  ExperimentConfig c;
  c.algorithms = {Algorithm::Danse, Algorithm::TiDanse};
  c.update = UpdateMode::gevd(1);
  c.connectivity_targets = {0.0, 0.5};
  c.dynamic = true;
  const ExperimentConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.update.is_gevd());
  CHECK(back.dynamic);

  CHECK(config_from_json(R"({"k_nodes": 7})").k_nodes == 7);
  CHECK(code_of([] { config_from_json(R"({"k_nodez": 7})"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { config_from_json(R"({"k_nodes": "x"})"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { config_from_json("{"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { config_from_json(R"({"pruning": "bfs"})"); }) != ErrorCode::IoError);
  CHECK(code_of([] { config_from_json(R"({"topology_mode": "sometimes"})"); }) == ErrorCode::ConfigInvalid);

  ExperimentConfig bad;
  bad.connectivity_targets = {1.5};
  CHECK(code_of([&] { validate(bad); }) == ErrorCode::ConfigInvalid);
  bad = ExperimentConfig{};
  bad.update = UpdateMode::gevd(9);
  CHECK(code_of([&] { validate(bad); }) == ErrorCode::ConfigInvalid);
  bad = ExperimentConfig{};
  bad.q_dim = 4;
  CHECK(code_of([&] { validate(bad); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("simulation records") {
  ExperimentConfig c = small_config("unused");
  const SensingEnvironment env = build_environment(scenario_for(c), 11);
  RunSpec spec;
  spec.seed = 3;
  Simulation sim(env, spec);
  const MetricsRecord r0 = sim.record();
  CHECK(r0.iteration == 0);
  CHECK(r0.signals_exchanged == 0);
  CHECK(r0.mse_w > 0.0);
  CHECK(r0.pruning == "mmut");
  for (std::size_t i = 0; i < 5; ++i) {
    const MetricsRecord r = sim.step();
    CHECK(r.iteration == i + 1);
    CHECK(r.root == i % 5);
    CHECK(r.signals_exchanged == comm_count(Algorithm::TiDansePlus, 5, 1));
  }

  // Same seed, same starting filters regardless of algorithm.
  RunSpec other = spec;
  other.algorithm = Algorithm::Danse;
  Simulation danse(env, other);
  CHECK(danse.record().mse_w == r0.mse_w);
  CHECK(danse.record().pruning == "none");
  CHECK(danse.record().connectivity_c == doctest::Approx(1.0));
}

TEST_CASE("filter outputs are linear in the filters") {
  ExperimentConfig c = small_config("unused");
  const SensingEnvironment env = build_environment(scenario_for(c), 5);
  RunSpec spec;
  spec.seed = 9;
  spec.compute_snr = true;
  spec.snr_frames = 32;
  Simulation sim(env, spec);
  CHECK(sim.record().snr_db.has_value());

  const SignalBlock block = synthesize_signals(env, 32, 0.5, 2);
  FilterSet f = sim.filters();
  const OutputComponents a = filter_outputs(f, block);
  for (auto& bin : f)
    for (auto& w : bin)
      for (cplx& v : w.entries()) v *= 2.0;
  const OutputComponents b = filter_outputs(f, block);
  REQUIRE(a.desired.size() == env.k_nodes());
  double err = 0.0, ref = 0.0;
  for (std::size_t q = 0; q < a.desired.size(); ++q)
    for (std::size_t t = 0; t < a.desired[q].size(); ++t) {
      err = std::max(err, std::abs(b.desired[q][t] - 2.0 * a.desired[q][t]));
      ref = std::max(ref, std::abs(a.desired[q][t]));
    }
  CHECK(ref > 0.0);
  CHECK(err <= 1e-12 * ref);
}

TEST_CASE("experiment outputs") {
  const fs::path dir = scratch("run");
  ExperimentConfig c = small_config(dir.string());
  c.algorithms = {Algorithm::TiDansePlus, Algorithm::Danse};

  SUBCASE("zero iterations gives the initial rows only") {
    c.n_iterations = 0;
    const ExperimentResult r = run_experiment(c);
    REQUIRE(r.runs.size() == 4);
    for (const auto& run : r.runs) CHECK(run.records.size() == 1);
    const std::string csv = slurp(dir / "metrics_env0.csv");
    CHECK(count(csv, "\n") == 3);
  }

  SUBCASE("files and determinism") {
    const ExperimentResult r = run_experiment(c);
    CHECK(r.files.size() == 4);
    const std::string first = slurp(dir / "metrics_env1.csv");
    const std::string summary = slurp(dir / "summary.csv");
    CHECK(first.rfind(metrics_csv_header() + "\n", 0) == 0);
    CHECK(count(first, "\n") == 1 + 2 * 7);
    CHECK(count(summary, "\n") == 1 + 2 * 7);

    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["versions"]["nlohmann_json"] == "3.11.3");
    CHECK(manifest["seeds"].size() == 2);
    CHECK(manifest["combinations"].size() == 4);
    CHECK(manifest["config"]["k_nodes"] == 5);

    c.threads = 3;
    run_experiment(c);
    CHECK(slurp(dir / "metrics_env1.csv") == first);
    CHECK(slurp(dir / "summary.csv") == summary);
  }

  SUBCASE("connectivity targets") {
    c.algorithms = {Algorithm::TiDanse};
    c.connectivity_targets = {0.0, 1.0};
    c.n_iterations = 1;
    const ExperimentResult r = run_experiment(c, false);
    REQUIRE(r.runs.size() == 4);
    CHECK(r.runs[0].records[0].connectivity_c == doctest::Approx(0.0));
    CHECK(r.runs[1].records[0].connectivity_c == doctest::Approx(1.0));
    CHECK(!fs::exists(dir / "summary.csv"));
  }

  SUBCASE("unwritable directory") {
    fs::create_directories(dir);
    std::ofstream(dir / "blocker") << "x";
    c.output_dir = (dir / "blocker" / "sub").string();
    CHECK(code_of([&] { run_experiment(c); }) == ErrorCode::IoError);
  }
  fs::remove_all(dir);
}

TEST_CASE("dynamic topology keeps converging") {
  ExperimentConfig c = small_config("unused");
  c.dynamic = true;
  c.n_envs = 1;
  c.n_iterations = 60;
  const ExperimentResult r = run_experiment(c, false);
  const auto& rec = r.runs[0].records;
  CHECK(rec.back().mse_w < 1e-2 * rec.front().mse_w);
}

TEST_CASE("prune statistics") {
  PruneStatsConfig cfg;
  cfg.k_values = {5, 8};
  cfg.n_wasns = 20;
  const PruneStatsResult r = prune_stats(cfg, false);
  REQUIRE(r.rows.size() == 40);
  REQUIRE(r.quantiles.size() == 8);
  for (const auto& row : r.rows) {
    CHECK(row.u_avg_mst >= 1.0);
    CHECK(row.u_avg_mst <= row.u_avg_mmut + 1e-12);
    CHECK(row.e_avg_mst <= row.e_avg_mmut + 1e-9);
    CHECK(row.u_avg_mmut <= static_cast<double>(row.k_nodes - 1));
  }
  for (const auto& q : r.quantiles)
    for (int i = 0; i < 4; ++i) CHECK(q.q[i] <= q.q[i + 1]);

  CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(quantile({0.0, 10.0}, 0.25) == 2.5);
  CHECK(std::isnan(quantile({}, 0.5)));

  const fs::path dir = scratch("prune");
  cfg.output_dir = dir.string();
  prune_stats(cfg);
  CHECK(slurp(dir / "prune_quantiles.csv").rfind("k_nodes,strategy,metric,q05,q25,q50,q75,q95\n", 0) == 0);
  CHECK(count(slurp(dir / "prune_stats.csv"), "\n") == 41);
  fs::remove_all(dir);
}

TEST_CASE("plots") {
  const std::string header = metrics_csv_header() + "\n";
  const std::string empty = render_plot(header, PlotKind::MseW);
  CHECK(empty.find("<svg") != std::string::npos);
  CHECK(count(empty, "class=\"series\"") == 0);

  std::string two = header;
  for (int i = 0; i < 4; ++i)
    two += std::to_string(i) + ",0,ti-danse-plus,mmut,0.5," + std::to_string(std::pow(10.0, -i)) + ",,4\n";
  for (int i = 0; i < 4; ++i)
    two += std::to_string(i) + ",0,danse,none,1," + std::to_string(std::pow(10.0, -2 * i)) + ",,20\n";
  const std::string svg = render_plot(two, PlotKind::MseW);
  CHECK(count(svg, "class=\"series\"") == 2);
  CHECK(svg.find(">ti-danse-plus<") != std::string::npos);
  CHECK(svg.find(">danse<") != std::string::npos);

  // Same algorithm twice: labels carry the pruning.
  std::string clash = header;
  for (const char* p : {"mst", "mmut"})
    for (int i = 0; i < 3; ++i) clash += std::to_string(i) + ",0,ti-danse," + p + ",0.5,1e-3,,4\n";
  const std::string svg2 = render_plot(clash, PlotKind::MseW);
  CHECK(svg2.find("ti-danse mst") != std::string::npos);
  CHECK(svg2.find("ti-danse mmut") != std::string::npos);

  CHECK(code_of([&] { render_plot(header + "1,2,3\n", PlotKind::MseW); }) == ErrorCode::MalformedCsv);
  CHECK(code_of([&] { render_plot(header + "0,0,danse,none,1,abc,,4\n", PlotKind::MseW); }) ==
        ErrorCode::MalformedCsv);
  CHECK(code_of([] { render_plot("", PlotKind::MseW); }) == ErrorCode::MalformedCsv);
  CHECK(code_of([] { render_plot("a,b\n1,2\n", PlotKind::Snr); }) == ErrorCode::MalformedCsv);
  CHECK(code_of([] { plot_kind_from_string("bar"); }) == ErrorCode::ConfigInvalid);

  const std::string q = "k_nodes,strategy,metric,q05,q25,q50,q75,q95\n6,mst,u_avg,1,1.5,2,2.5,3\n6,mmut,u_avg,2,2,3,4,5\n";
  CHECK(count(render_plot(q, PlotKind::Prune), "class=\"box\"") == 2);

  CHECK(code_of([] { emit_plot("/nonexistent/x.csv", PlotKind::MseW, "/tmp/x.svg"); }) == ErrorCode::IoError);
}

TEST_CASE("prune statistics on fully connected networks") {
  PruneStatsConfig cfg;
  cfg.k_values = {4, 7};
  cfg.n_wasns = 5;
  cfg.geometry.initial_radius = 100.0;
  for (const auto& row : prune_stats(cfg, false).rows)
    CHECK(row.u_avg_mmut == static_cast<double>(row.k_nodes - 1));
}

TEST_CASE("prune statistics trend") {
  PruneStatsConfig cfg;
  cfg.n_wasns = 50;
  const PruneStatsResult r = prune_stats(cfg, false);
  auto median = [&](std::size_t k, const std::string& strategy, const std::string& metric) {
    for (const auto& q : r.quantiles)
      if (q.k_nodes == k && q.strategy == strategy && q.metric == metric) return q.q[2];
    FAIL("missing quantile row");
    return 0.0;
  };
  double prev = 0.0;
  for (std::size_t k : cfg.k_values) {
    CHECK(median(k, "mmut", "u_avg") > prev);
    prev = median(k, "mmut", "u_avg");
    CHECK(median(k, "mmut", "u_avg") >= median(k, "mst", "u_avg"));
  }
}

TEST_CASE("monotone series plots monotone") {
  std::string csv = metrics_csv_header() + "\n";
  for (int i = 0; i < 8; ++i) csv += std::to_string(i) + ",0,ti-danse,mst,0.5," + std::to_string(std::exp(-i)) + ",,4\n";
  const std::string svg = render_plot(csv, PlotKind::MseW);
  const auto start = svg.find("points=\"") + 8;
  std::istringstream pts(svg.substr(start, svg.find('"', start) - start));
  std::string pair;
  double last_x = -1.0, last_y = -1.0;
  int n = 0;
  while (pts >> pair) {
    const double x = std::stod(pair.substr(0, pair.find(',')));
    const double y = std::stod(pair.substr(pair.find(',') + 1));
    CHECK(x > last_x);
    // Decreasing values sit lower on the page, i.e. at larger SVG y.
    CHECK(y > last_y);
    last_x = x;
    last_y = y;
    ++n;
  }
  CHECK(n == 8);
}
