// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "danse_oracles.hpp"
#include "property_suites.hpp"
#include "test_support.hpp"
#include "tidanse/harness.hpp"
#include "tidanse/linalg.hpp"
#include "tidanse/stft.hpp"

using namespace tidanse;
using namespace tidanse::testing;

namespace {

constexpr std::uint64_t kSeed = 20240611;

std::uint64_t env_seed(std::uint64_t criterion, std::size_t e) { return derive_seed(kSeed, {criterion, e}); }

struct Outcome {
  bool passed = false;
  std::string detail;
};

ScenarioConfig small_suite() {
  ScenarioConfig c;
  c.k_nodes = 6;
  c.sensors_per_node = 2;
  c.q_dim = 1;
  c.s_sources = 1;
  c.n_noise_sources = 1;
  c.n_bins = 2;
  return c;
}

// K=10, M_q=3, Q=S=1, 3 noise sources, 4 bins.
ScenarioConfig desk_suite() { return ScenarioConfig{}; }

RunSpec spec_for(Algorithm alg, Pruning pr, std::uint64_t seed) {
  RunSpec s;
  s.algorithm = alg;
  s.pruning = pr;
  s.seed = seed;
  return s;
}

std::string join(const std::vector<std::size_t>& v) {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? " " : "") << v[i];
  return s.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double relative_gap(const FilterSet& a, const FilterSet& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f)
    for (std::size_t q = 0; q < a[f].size(); ++q) {
      const double d = (a[f][q] - b[f][q]).frobenius_norm(), n = b[f][q].frobenius_norm();
      num += d * d;
      den += n * n;
    }
  return std::sqrt(num / den);
}

double worst_filter_change(const FilterSet& after, const FilterSet& before) {
  double worst = 0.0;
  for (std::size_t f = 0; f < after.size(); ++f)
    for (std::size_t q = 0; q < after[f].size(); ++q)
      worst = std::max(worst, (after[f][q] - before[f][q]).frobenius_norm() / before[f][q].frobenius_norm());
  return worst;
}

// ---------------------------------------------------------------------------

Outcome convergence_to_optimum() {
  const std::size_t cycles = 15;
  std::size_t good = 0;
  std::vector<std::size_t> hits;
  std::vector<double> ratios;
  for (std::size_t e = 0; e < 10; ++e) {
    const SensingEnvironment env = build_environment(small_suite(), env_seed(1, e));
    Simulation sim(env, spec_for(Algorithm::TiDansePlus, Pruning::Mmut, env_seed(1, e)));
    const double initial = sim.record().mse_w;
    std::size_t hit = 0;
    double last = initial;
    for (std::size_t i = 0; i < cycles * env.k_nodes(); ++i) {
      last = sim.step().mse_w;
      if (!hit && last <= 1e-10 * initial) hit = i + 1;
    }
    ratios.push_back(last / initial);
    hits.push_back(hit);
    good += hit ? 1 : 0;
  }
  std::ostringstream d;
  d << good << "/10 environments reach 1e-10 x initial within 15 cycles (need 9); iteration reached per env "
    << "(0 = not reached): " << join(hits) << "; worst final ratio " << sci(*std::max_element(ratios.begin(), ratios.end()));
  return {good >= 9, d.str()};
}

Outcome fc_equivalence() {
  double worst = 0.0;
  for (std::size_t e = 0; e < 10; ++e) {
    const SensingEnvironment env = build_environment(desk_suite(), env_seed(2, e));
    RunSpec plus = spec_for(Algorithm::TiDansePlus, Pruning::Mmut, env_seed(2, e));
    plus.graph = WasnGraph::fully_connected(env.graph().positions());
    const RunSpec danse = spec_for(Algorithm::Danse, Pruning::Mmut, env_seed(2, e));
    Simulation a(env, plus), b(env, danse);
    auto compare = [&](double x, double y) { worst = std::max(worst, std::abs(x - y) / std::max(std::abs(x), std::abs(y))); };
    compare(a.record().mse_w, b.record().mse_w);
    for (std::size_t i = 0; i < 20 * env.k_nodes(); ++i) compare(a.step().mse_w, b.step().mse_w);
  }
  return {worst <= 1e-10, "worst per-iteration relative mse_w difference " + sci(worst) + " over 10 environments x 200 iterations (limit 1e-10)"};
}

struct ReachStats {
  std::vector<std::size_t> its;  // cap + 1 when not reached
  std::optional<double> median;  // empty when the median is not reached
};

ReachStats reach(const std::vector<std::size_t>& its, std::size_t cap) {
  ReachStats r{its, std::nullopt};
  std::sort(r.its.begin(), r.its.end());
  const std::size_t a = r.its[r.its.size() / 2 - 1], b = r.its[r.its.size() / 2];
  if (a <= cap && b <= cap) r.median = 0.5 * static_cast<double>(a + b);
  return r;
}

std::string show(const ReachStats& r) {
  if (!r.median) return "not reached";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", *r.median);
  return buf;
}

Outcome speed_ordering() {
  const std::size_t cap = 600;
  const std::size_t n_env = 10;
  const std::vector<double> grid{0.0, 0.5, 1.0};
  // [pruning][C index] for TI-DANSE+, plus TI-DANSE (independent of the tree).
  std::vector<std::vector<std::vector<std::size_t>>> plus(2, std::vector<std::vector<std::size_t>>(grid.size()));
  std::vector<std::size_t> ti;
  auto iterations_to = [&](Simulation& sim) -> std::size_t {
    for (std::size_t i = 0; i < cap; ++i)
      if (sim.step().mse_w <= 1e-6) return i + 1;
    return cap + 1;
  };
  for (std::size_t e = 0; e < n_env; ++e) {
    const std::uint64_t seed = env_seed(3, e);
    const SensingEnvironment env = build_environment(desk_suite(), seed);
    std::vector<WasnGraph> graphs;
    for (std::size_t ci = 0; ci < grid.size(); ++ci) {
      Rng rng(derive_seed(seed, {5, ci}));
      graphs.push_back(adjust_connectivity(env.graph(), grid[ci], rng));
    }
    for (int p = 0; p < 2; ++p)
      for (std::size_t ci = 0; ci < grid.size(); ++ci) {
        RunSpec s = spec_for(Algorithm::TiDansePlus, p ? Pruning::Mmut : Pruning::Mst, seed);
        s.graph = graphs[ci];
        Simulation sim(env, s);
        plus[p][ci].push_back(iterations_to(sim));
      }
    RunSpec s = spec_for(Algorithm::TiDanse, Pruning::Mmut, seed);
    s.graph = graphs[0];
    Simulation sim(env, s);
    ti.push_back(iterations_to(sim));
  }
  const ReachStats ti_r = reach(ti, cap);
  const ReachStats mmut_c1 = reach(plus[1][2], cap), mmut_c0 = reach(plus[1][0], cap);
  std::ostringstream d;
  d << "median iterations to mse_w <= 1e-6 (cap " << cap << "): MMUT C=1 " << show(mmut_c1) << ", MMUT C=0 "
    << show(mmut_c0) << ", TI-DANSE " << show(ti_r) << "; MST C=0/0.5/1 ";
  std::vector<ReachStats> mst;
  for (std::size_t ci = 0; ci < grid.size(); ++ci) {
    mst.push_back(reach(plus[0][ci], cap));
    d << (ci ? "/" : "") << show(mst.back());
  }

  bool ok = true;
  std::vector<std::string> why;
  auto leq = [&](const ReachStats& a, const ReachStats& b, const std::string& what) {
    if (!a.median || !b.median) {
      ok = false;
      why.push_back(what + " undetermined (median not reached)");
    } else if (*a.median > *b.median) {
      ok = false;
      why.push_back(what + " violated");
    }
  };
  leq(mmut_c1, mmut_c0, "MMUT C=1 <= C=0");
  leq(mmut_c0, ti_r, "MMUT C=0 <= TI-DANSE");
  for (std::size_t ci = 0; ci < grid.size(); ++ci) leq(mst[ci], ti_r, "MST C=" + show({{}, grid[ci]}) + " <= TI-DANSE");
  bool all_reached = true;
  double lo = 1e300, hi = -1e300;
  for (const auto& r : mst) {
    if (!r.median) all_reached = false;
    else {
      lo = std::min(lo, *r.median);
      hi = std::max(hi, *r.median);
    }
  }
  if (!all_reached) {
    ok = false;
    why.push_back("MST spread within +-2 undetermined (median not reached)");
  } else if (hi - lo > 4.0) {
    ok = false;
    why.push_back("MST medians differ by more than +-2");
  }
  if (!why.empty()) {
    d << "; failing:";
    for (const auto& w : why) d << " [" << w << "]";
  }
  return {ok, d.str()};
}

Outcome fixed_point() {
  double worst_build = 0.0, worst_step = 0.0;
  for (std::size_t e = 0; e < 10; ++e) {
    const SensingEnvironment env = build_environment(desk_suite(), env_seed(4, e));
    const ScmSet scms = theoretical_scms(env);
    const Layout layout = Layout::of(env);
    const FilterSet centralized = centralized_filters(scms, layout, UpdateMode::plain());
    const std::size_t root = e % env.k_nodes();
    const NetworkState optimum = optimal_state(env, scms, root);
    const FilterSet built = network_filters(optimum, layout);
    worst_build = std::max(worst_build, relative_gap(built, centralized));
    const WasnGraph fc = WasnGraph::fully_connected(env.graph().positions());
    for (Algorithm alg : {Algorithm::TiDansePlus, Algorithm::TiDanse, Algorithm::Danse}) {
      NetworkState state = optimum;
      const WasnGraph& g = alg == Algorithm::Danse ? fc : env.graph();
      run_iteration(make_plan(root + 1, g, alg, Pruning::Mmut, UpdateMode::plain()), layout, scms, state);
      worst_step = std::max(worst_step, worst_filter_change(network_filters(state, layout), built));
    }
  }
  return {worst_build <= 1e-10 && worst_step <= 1e-9,
          "constructed state vs centralized " + sci(worst_build) + " (limit 1e-10); largest filter change after one "
          "further iteration " + sci(worst_step) + " (limit 1e-9); 10 environments, all three variants"};
}

Outcome transformation_oracle() {
  Rng rng(derive_seed(kSeed, {5}));
  const Algorithm algorithms[3] = {Algorithm::Danse, Algorithm::TiDanse, Algorithm::TiDansePlus};
  double worst = 0.0;
  for (std::size_t t = 0; t < 100; ++t) {
    const Algorithm alg = algorithms[t % 3];
    const std::size_t k = 2 + rng() % 7;
    const std::size_t qd = 1 + rng() % 2;
    Layout layout = Layout::uniform(k, qd, qd);
    for (auto& m : layout.sensors) m = qd + rng() % 3;
    std::vector<Point> pos(k);
    for (auto& p : pos) p = {std::uniform_real_distribution<double>(0, 5)(rng), std::uniform_real_distribution<double>(0, 5)(rng)};
    const WasnGraph g = alg == Algorithm::Danse ? WasnGraph::fully_connected(pos) : randomize_adjacency(pos, rng);
    const std::size_t root = rng() % k;
    const Tree tree = prune(g, root, rng() % 2 ? Pruning::Mst : Pruning::Mmut);
    const NetworkState state = initialize_state(layout, 1, rng);
    const ComplexMat r = random_pd(layout.total(), rng);
    const ComplexMat cmat = build_ck(state.bins[0], layout, alg, tree);
    const ComplexMat d = observation_operator(state.bins[0], layout, alg, tree);
    worst = std::max(worst, rel_diff(congruence(cmat, r), d * r * d.adjoint()));
  }
  return {worst <= 1e-12, "worst relative difference " + sci(worst) + " over 100 random states (limit 1e-12)"};
}

Outcome gevd_study() {
  const std::size_t cycles = 20;
  ScenarioConfig cfg = desk_suite();
  cfg.s_sources = 3;
  cfg.q_dim = 1;
  const Algorithm algorithms[3] = {Algorithm::Danse, Algorithm::TiDanse, Algorithm::TiDansePlus};
  std::size_t good[3] = {0, 0, 0};
  std::size_t monotone_envs = 0;
  double worst_rise = 0.0;
  for (std::size_t e = 0; e < 10; ++e) {
    const SensingEnvironment env = build_environment(cfg, env_seed(6, e));
    const std::size_t k = env.k_nodes();
    for (int a = 0; a < 3; ++a) {
      double final_mse[2];
      for (int g = 0; g < 2; ++g) {
        RunSpec s = spec_for(algorithms[a], Pruning::Mmut, env_seed(6, e));
        s.update = g ? UpdateMode::gevd(1) : UpdateMode::plain();
        Simulation sim(env, s);
        double prev = sim.record().mse_w, rise = 0.0;
        for (std::size_t i = 1; i <= cycles * k; ++i) {
          const double m = sim.step().mse_w;
          if (i % k == 0) {
            rise = std::max(rise, m / prev - 1.0);
            prev = m;
          }
        }
        final_mse[g] = prev;
        if (g == 1 && algorithms[a] == Algorithm::TiDansePlus) {
          worst_rise = std::max(worst_rise, rise);
          monotone_envs += rise <= 0.05 ? 1 : 0;
        }
      }
      good[a] += final_mse[1] * 100.0 <= final_mse[0] ? 1 : 0;
    }
  }
  std::ostringstream d;
  d << "GEVD at least 100x better than plain after 20 cycles: DANSE " << good[0] << "/10, TI-DANSE " << good[1]
    << "/10, TI-DANSE+ " << good[2] << "/10 (need 8); GEVD TI-DANSE+ monotone within 5% on " << monotone_envs
    << "/10 environments (largest cycle-to-cycle rise " << sci(std::max(0.0, worst_rise)) << ")";
  return {good[0] >= 8 && good[1] >= 8 && good[2] >= 8 && monotone_envs == 10, d.str()};
}

Outcome dynamic_topologies() {
  std::size_t good = 0;
  std::vector<std::size_t> hits;
  for (std::size_t e = 0; e < 10; ++e) {
    const SensingEnvironment env = build_environment(desk_suite(), env_seed(7, e));
    RunSpec s = spec_for(Algorithm::TiDansePlus, Pruning::Mmut, env_seed(7, e));
    s.dynamic = true;
    Simulation sim(env, s);
    const double initial = sim.record().mse_w;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < 25 * env.k_nodes() && !hit; ++i)
      if (sim.step().mse_w <= 1e-8 * initial) hit = i + 1;
    hits.push_back(hit);
    good += hit ? 1 : 0;
  }
  return {good >= 8, std::to_string(good) + "/10 environments reach 1e-8 x initial within 25 cycles (need 8); "
                     "iteration reached per env (0 = not reached): " + join(hits)};
}

Outcome pruning_statistics() {
  PruneStatsConfig cfg;
  cfg.n_wasns = 50;
  cfg.seed = derive_seed(kSeed, {8});
  const PruneStatsResult r = prune_stats(cfg, false);
  auto median = [&](std::size_t k, const char* strategy, const char* metric) {
    for (const auto& q : r.quantiles)
      if (q.k_nodes == k && q.strategy == strategy && q.metric == metric) return q.q[2];
    return std::nan("");
  };
  bool ok = true;
  std::ostringstream d;
  d << "median |U_avg| mst/mmut, E_avg mst/mmut:";
  double prev = -1.0;
  for (std::size_t k : cfg.k_values) {
    const double um = median(k, "mst", "u_avg"), uu = median(k, "mmut", "u_avg");
    const double em = median(k, "mst", "e_avg"), eu = median(k, "mmut", "e_avg");
    if (k >= 9 && !(uu > um)) ok = false;
    if (!(uu > prev)) ok = false;
    if (!(eu >= em)) ok = false;
    prev = uu;
    char buf[128];
    std::snprintf(buf, sizeof buf, " K=%zu %.2f/%.2f %.2f/%.2f;", k, um, uu, em, eu);
    d << buf;
  }
  return {ok, d.str()};
}

Outcome communication_accounting() {
  bool ok = true;
  std::ostringstream d;
  std::size_t checks = 0;
  for (std::size_t k : {2u, 5u, 10u})
    for (std::size_t q : {1u, 2u}) {
      ScenarioConfig cfg;
      cfg.k_nodes = k;
      cfg.sensors_per_node = 2;
      cfg.q_dim = q;
      cfg.s_sources = q;
      cfg.n_noise_sources = 2;
      cfg.n_bins = 1;
      const SensingEnvironment env = build_environment(cfg, env_seed(9, k * 10 + q));
      for (Algorithm alg : {Algorithm::Danse, Algorithm::TiDanse, Algorithm::TiDansePlus}) {
        const std::size_t expected = alg == Algorithm::Danse ? k * q * (k - 1) : 2 * q * (k - 1);
        for (Pruning pr : {Pruning::Mst, Pruning::Mmut}) {
          Simulation sim(env, spec_for(alg, pr, env_seed(9, k)));
          for (std::size_t i = 0; i < k; ++i) {
            ++checks;
            const std::size_t got = sim.step().signals_exchanged;
            if (got != expected) {
              ok = false;
              d << " mismatch K=" << k << " Q=" << q << " " << to_string(alg) << ": " << got << " vs " << expected << ";";
            }
          }
        }
      }
    }
  return {ok, std::to_string(checks) + " iterations checked over K in {2,5,10}, Q in {1,2}, all variants" + d.str()};
}

Outcome cost_monotonicity() {
  const std::size_t cycles = 15;
  std::size_t violations = 0, checks = 0, literal_violations = 0;
  double worst = 0.0;
  for (std::size_t e = 0; e < 10; ++e) {
    const SensingEnvironment env = build_environment(small_suite(), env_seed(1, e));
    const ScmSet scms = theoretical_scms(env);
    const Layout layout = Layout::of(env);
    const std::size_t k = env.k_nodes();
    Rng init(derive_seed(env_seed(1, e), {1}));
    NetworkState state = initialize_state(layout, env.n_bins(), init);
    std::vector<double> prev, prev_literal;
    for (std::size_t c = 0; c < cycles; ++c) {
      std::size_t root = 0;
      for (std::size_t i = c * k; i < (c + 1) * k; ++i) {
        const IterationPlan plan = make_plan(i, env.graph(), Algorithm::TiDansePlus, Pruning::Mmut, UpdateMode::plain());
        run_iteration(plan, layout, scms, state);
        root = plan.root;
      }
      const FilterSet filters = network_filters(state, layout);
      std::vector<double> cur, literal;
      for (std::size_t b = 0; b < env.n_bins(); ++b)
        for (std::size_t q = 0; q < k; ++q) {
          const ComplexMat sel = layout.network_selection(q);
          cur.push_back(transformed_cost(scms.ryy[b], scms.rnn[b], filters[b][root], sel));
          literal.push_back(lmmse_cost(scms.ryy[b], scms.rnn[b], filters[b][q], sel));
        }
      for (std::size_t j = 0; j < prev.size(); ++j) {
        ++checks;
        if (cur[j] > prev[j] + 1e-12) {
          ++violations;
          worst = std::max(worst, cur[j] - prev[j]);
        }
        literal_violations += literal[j] > prev_literal[j] + 1e-12 ? 1 : 0;
      }
      prev = cur;
      prev_literal = literal;
    }
  }
  std::ostringstream d;
  d << violations << " increases beyond 1e-12 in " << checks
    << " cycle-to-cycle comparisons of the per-node cost reachable from the updating node's filter";
  if (violations) d << " (worst " << sci(worst) << ")";
  d << "; for reference, the cost of each node's own network-wide filter rose in " << literal_violations << " of them";
  return {violations == 0, d.str()};
}

Outcome unit_layer() {
  bool ok = true;
  std::ostringstream d;

  Rng rng(derive_seed(kSeed, {11}));
  auto interior_error = [](const std::vector<double>& x, const std::vector<double>& y, std::size_t len) {
    double num = 0.0, den = 0.0;
    for (std::size_t n = len / 2; n + len / 2 < y.size(); ++n) {
      num += (x[n] - y[n]) * (x[n] - y[n]);
      den += x[n] * x[n];
    }
    return std::sqrt(num / den);
  };
  const std::vector<double> ones(64, 1.0);
  std::vector<double> noise(16 * 1024);
  std::normal_distribution<double> normal;
  for (double& v : noise) v = normal(rng);
  const double stft_err = std::max(interior_error(ones, istft(stft(ones, 8), 8), 8),
                                   interior_error(noise, istft(stft(noise, 1024), 1024), 1024));
  ok = ok && stft_err < 1e-10;
  d << "STFT round trip " << sci(stft_err);

  double gevd_err = 0.0;
  for (std::size_t t = 0; t < 200; ++t) {
    const std::size_t m = 1 + t % 40;
    const ComplexMat rnn = random_pd(m, rng, 0.5);
    ComplexMat ryy = random_pd(m, rng, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) ryy(i, j) += rnn(i, j);
    const GevdResult g = gevd(ryy, rnn);
    gevd_err = std::max({gevd_err, rel_diff(g.qmat * diagonal(g.sigmas) * g.qmat.adjoint(), ryy),
                         rel_diff(g.qmat * g.qmat.adjoint(), rnn)});
  }
  ok = ok && gevd_err < 1e-8;
  d << ", GEVD reconstruction " << sci(gevd_err) << " (200 pencils up to 40x40)";

  using Suite = std::vector<PropertyResult> (*)(std::size_t, std::uint64_t);
  const Suite suites[] = {linalg_properties, topology_properties, scenario_properties, danse_properties,
                          metrics_properties};
  std::size_t total = 0, failed = 0;
  for (std::size_t s = 0; s < std::size(suites); ++s)
    for (const PropertyResult& r : suites[s](1000, derive_seed(kSeed, {11, s}))) {
      ++total;
      if (!r.passed) {
        ++failed;
        d << "; property failed: " << r.name << " (" << r.detail << ")";
      }
    }
  ok = ok && failed == 0;
  d << ", " << total - failed << "/" << total << " properties hold at 1000 cases";
  return {ok, d.str()};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0 = no runtime limit
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "convergence to the centralized optimum", 10, convergence_to_optimum},
      {2, "fully connected equivalence with DANSE", 10, fc_equivalence},
      {3, "speed ordering", 60, speed_ordering},
      {4, "optimal fixed point", 5, fixed_point},
      {5, "transformation matrices vs data flows", 10, transformation_oracle},
      {6, "GEVD with fewer channels than sources", 60, gevd_study},
      {7, "dynamic topologies", 30, dynamic_topologies},
      {8, "pruning statistics", 20, pruning_statistics},
      {9, "communication accounting", 0, communication_accounting},
      {10, "cost monotonicity", 0, cost_monotonicity},
      {11, "unit layer", 60, unit_layer},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_s > 0 && secs > c.limit_s) {
      o.passed = false;
      o.detail += "; runtime limit exceeded";
    }
    if (!o.passed) ++failures;
    std::printf("%s criterion %d (%s): %s [%.2f s%s]\n", o.passed ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs, c.limit_s > 0 ? (" of " + std::to_string(static_cast<int>(c.limit_s)) + " s").c_str() : "");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures ? 1 : 0;
}
