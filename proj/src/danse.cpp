#include "tidanse/danse.hpp"

#include <algorithm>
#include <json.hpp>

#include "tidanse/error.hpp"

namespace tidanse {

namespace {

constexpr double kDegenerateCondition = 1e12;
constexpr std::size_t kMaxOnlineFrames = 1'000'000;

void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

ComplexMat random_gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  ComplexMat m(rows, cols);
  for (cplx& v : m.entries()) v = complex_normal(rng);
  return m;
}

bool full_column_rank(const ComplexMat& w) {
  return condition_number(adjoint_times(w, w)) < kDegenerateCondition;
}

ComplexMat random_invertible(std::size_t n, Rng& rng) {
  for (;;) {
    ComplexMat t = random_gaussian(n, n, rng);
    if (condition_number(t) < 1e6) return t;
  }
}

// Column block of the fused stream carried by node q's branch, or none for
// the root.
std::optional<std::size_t> stream_index(const Tree& tree, Algorithm algorithm, std::size_t q) {
  if (q == tree.root) return std::nullopt;
  if (algorithm == Algorithm::TiDanse) return 0;
  const auto& children = tree.upstream[tree.root];
  const auto it = std::lower_bound(children.begin(), children.end(), *tree.branch_of[q]);
  return static_cast<std::size_t>(it - children.begin());
}

std::size_t stream_count(const Tree& tree, Algorithm algorithm) {
  const std::size_t branches = tree.upstream[tree.root].size();
  if (algorithm == Algorithm::TiDanse) return branches > 0 ? 1 : 0;
  return branches;
}

void check_plan(const IterationPlan& plan, const Layout& layout) {
  const std::size_t k = layout.k_nodes();
  require(plan.tree.size() == k, ErrorCode::DimensionMismatch, "tree size differs from node count");
  require(plan.root == plan.tree.root, ErrorCode::ConfigInvalid, "plan root differs from tree root");
  if (plan.algorithm == Algorithm::Danse)
    require(plan.tree.upstream[plan.root].size() + 1 == k, ErrorCode::DanseRequiresFc,
            "DANSE needs every node linked to the updating node");
}

// Every DANSE node broadcasts its fused signals to all others.
std::size_t broadcast_signals(std::size_t k, std::size_t q_dim) {
  std::size_t n = 0;
  for (std::size_t q = 0; q < k; ++q) n += q_dim * (k - 1);
  return n;
}

ComplexMat tilde_selection(const Layout& layout, std::size_t root, std::size_t m_tilde) {
  ComplexMat e(m_tilde, layout.q_dim);
  e.set_block(0, 0, layout.local_selection(root));
  return e;
}

std::vector<cplx> local_slice(std::span<const cplx> y, const Layout& layout, std::size_t q) {
  const auto first = y.begin() + static_cast<std::ptrdiff_t>(layout.offset(q));
  return {first, first + static_cast<std::ptrdiff_t>(layout.sensors[q])};
}

void merge_flags(std::vector<std::size_t>& into, const std::vector<std::size_t>& from) {
  for (std::size_t q : from)
    if (std::find(into.begin(), into.end(), q) == into.end()) into.push_back(q);
  std::sort(into.begin(), into.end());
}

Rng guard_rng_for(const IterationPlan& plan, std::size_t bin) {
  return Rng(derive_seed(0x6a5d, {plan.iteration, bin}));
}

nlohmann::json matrix_to_json(const ComplexMat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

ComplexMat matrix_from_json(const nlohmann::json& j) {
  const std::size_t rows = j.size();
  const std::size_t cols = rows > 0 ? j.at(0).size() : 0;
  ComplexMat m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    require(j.at(r).size() == cols, ErrorCode::ConfigInvalid, "ragged matrix in state JSON");
    for (std::size_t c = 0; c < cols; ++c) {
      const auto& pair = j.at(r).at(c);
      require(pair.size() == 2, ErrorCode::ConfigInvalid, "matrix entry must be [re, im]");
      m(r, c) = {pair.at(0).get<double>(), pair.at(1).get<double>()};
    }
  }
  return m;
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Danse: return "danse";
    case Algorithm::TiDanse: return "ti-danse";
    case Algorithm::TiDansePlus: return "ti-danse-plus";
  }
  return "unknown";
}

Algorithm algorithm_from_string(std::string_view name) {
  if (name == "danse") return Algorithm::Danse;
  if (name == "ti-danse") return Algorithm::TiDanse;
  if (name == "ti-danse-plus") return Algorithm::TiDansePlus;
  throw Error(ErrorCode::ConfigInvalid, "unknown algorithm '" + std::string(name) + "'");
}

std::string to_string(ScmMode m) { return m == ScmMode::Theoretical ? "theoretical" : "online"; }

ScmMode scm_mode_from_string(std::string_view name) {
  if (name == "theoretical") return ScmMode::Theoretical;
  if (name == "online") return ScmMode::Online;
  throw Error(ErrorCode::ConfigInvalid, "unknown SCM mode '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Layout

Layout Layout::of(const SensingEnvironment& env) {
  Layout l;
  l.q_dim = env.q_dim();
  for (std::size_t q = 0; q < env.k_nodes(); ++q) {
    l.sensors.push_back(env.sensors(q));
    l.targets.push_back(env.target_channels(q));
  }
  return l;
}

Layout Layout::uniform(std::size_t k_nodes, std::size_t sensors_per_node, std::size_t q_dim) {
  require(q_dim >= 1 && q_dim <= sensors_per_node, ErrorCode::ConfigInvalid, "q_dim must be in [1, M_q]");
  Layout l;
  l.q_dim = q_dim;
  l.sensors.assign(k_nodes, sensors_per_node);
  std::vector<std::size_t> first(q_dim);
  for (std::size_t i = 0; i < q_dim; ++i) first[i] = i;
  l.targets.assign(k_nodes, first);
  return l;
}

std::size_t Layout::offset(std::size_t q) const {
  std::size_t o = 0;
  for (std::size_t m = 0; m < q; ++m) o += sensors[m];
  return o;
}

std::size_t Layout::total() const { return offset(sensors.size()); }

ComplexMat Layout::local_selection(std::size_t q) const {
  ComplexMat e(sensors[q], q_dim);
  for (std::size_t j = 0; j < q_dim; ++j) e(targets[q][j], j) = 1.0;
  return e;
}

ComplexMat Layout::network_selection(std::size_t q) const {
  ComplexMat e(total(), q_dim);
  e.set_block(offset(q), 0, local_selection(q));
  return e;
}

// ---------------------------------------------------------------------------
// Centralized reference

NetworkState initialize_state(const Layout& layout, std::size_t n_bins, Rng& rng) {
  NetworkState state;
  state.bins.resize(n_bins);
  for (BinState& bin : state.bins) {
    for (std::size_t q = 0; q < layout.k_nodes(); ++q) {
      ComplexMat w = random_gaussian(layout.sensors[q], layout.q_dim, rng);
      while (!full_column_rank(w)) w = random_gaussian(layout.sensors[q], layout.q_dim, rng);
      bin.push_back({w, ComplexMat::identity(layout.q_dim), w});
    }
  }
  return state;
}

ComplexMat centralized_mwf(const ComplexMat& ryy, const ComplexMat& rnn, const ComplexMat& e_sel) {
  require(ryy.is_square() && rnn.rows() == ryy.rows() && rnn.cols() == ryy.cols() && e_sel.rows() == ryy.rows(),
          ErrorCode::DimensionMismatch, "centralized_mwf: inconsistent shapes");
  return hermitian_solve(ryy, (ryy - rnn) * e_sel);
}

ComplexMat centralized_gevd_mwf(const ComplexMat& ryy, const ComplexMat& rnn, const ComplexMat& e_sel,
                                std::size_t rank) {
  require(ryy.is_square() && rnn.rows() == ryy.rows() && e_sel.rows() == ryy.rows(), ErrorCode::DimensionMismatch,
          "gevd filter: inconsistent shapes");
  require(rank >= 1, ErrorCode::ConfigInvalid, "gevd rank must be positive");
  require(rank <= ryy.rows(), ErrorCode::RankTooLarge, "gevd rank exceeds the observation dimension");
  const GevdResult g = gevd(ryy, rnn);
  std::vector<double> gains(ryy.rows(), 0.0);
  for (std::size_t i = 0; i < rank; ++i) gains[i] = 1.0 - 1.0 / g.sigmas[i];
  return g.eigvecs * diagonal(gains) * adjoint_times(g.qmat, e_sel);
}

std::vector<std::vector<ComplexMat>> centralized_filters(const ScmSet& scms, const Layout& layout,
                                                         UpdateMode mode) {
  std::vector<std::vector<ComplexMat>> out(scms.ryy.size());
  for (std::size_t b = 0; b < scms.ryy.size(); ++b) {
    require(scms.ryy[b].rows() == layout.total(), ErrorCode::DimensionMismatch, "SCM size differs from layout");
    for (std::size_t q = 0; q < layout.k_nodes(); ++q) {
      const ComplexMat e = layout.network_selection(q);
      out[b].push_back(mode.is_gevd() ? centralized_gevd_mwf(scms.ryy[b], scms.rnn[b], e, mode.rank)
                                      : centralized_mwf(scms.ryy[b], scms.rnn[b], e));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Data flows

std::vector<cplx> fuse(const ComplexMat& p_fusion, std::span<const cplx> y_local) {
  require(p_fusion.rows() == y_local.size(), ErrorCode::DimensionMismatch, "fuse: signal length differs from P");
  std::vector<cplx> z(p_fusion.cols(), 0.0);
  for (std::size_t r = 0; r < p_fusion.rows(); ++r)
    for (std::size_t c = 0; c < p_fusion.cols(); ++c) z[c] += std::conj(p_fusion(r, c)) * y_local[r];
  return z;
}

FusionFlowResult fusion_flow(const Tree& tree, const std::vector<std::vector<cplx>>& fused,
                             std::size_t root_sensors) {
  const std::size_t k = tree.size();
  require(fused.size() == k, ErrorCode::DimensionMismatch, "fusion_flow: one fused signal per node");
  const std::size_t q_dim = k > 0 ? fused[0].size() : 0;
  for (const auto& z : fused)
    require(z.size() == q_dim, ErrorCode::DimensionMismatch, "fusion_flow: fused signals differ in length");

  FusionFlowResult out;
  out.sent.assign(k, {});
  // Reverse breadth-first order visits every node after all its upstream nodes.
  for (auto it = tree.bfs_order.rbegin(); it != tree.bfs_order.rend(); ++it) {
    const std::size_t q = *it;
    if (q == tree.root) continue;
    std::vector<cplx> eta = fused[q];
    for (std::size_t m : tree.upstream[q])
      for (std::size_t i = 0; i < q_dim; ++i) eta[i] += out.sent[m][i];
    out.sent[q] = std::move(eta);
    out.signals_exchanged += q_dim;
  }
  for (std::size_t l : tree.upstream[tree.root]) out.partial_sums.push_back(out.sent[l]);
  out.obs_vector_dim = root_sensors + q_dim * out.partial_sums.size();
  return out;
}

std::vector<cplx> assemble_observation(std::span<const cplx> y_root,
                                       const std::vector<std::vector<cplx>>& partial_sums) {
  std::vector<cplx> obs(y_root.begin(), y_root.end());
  const std::size_t q_dim = partial_sums.empty() ? 0 : partial_sums[0].size();
  for (const auto& eta : partial_sums) {
    require(eta.size() == q_dim, ErrorCode::DimensionMismatch, "assemble_observation: partial sums differ in length");
    obs.insert(obs.end(), eta.begin(), eta.end());
  }
  return obs;
}

std::vector<cplx> global_sum(const std::vector<std::vector<cplx>>& partial_sums, std::size_t q_dim) {
  std::vector<cplx> sum(q_dim, 0.0);
  for (const auto& eta : partial_sums) {
    require(eta.size() == q_dim, ErrorCode::DimensionMismatch, "global_sum: partial sum length");
    for (std::size_t i = 0; i < q_dim; ++i) sum[i] += eta[i];
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Local update and diffusion

LocalUpdate local_update(const ComplexMat& ryy_t, const ComplexMat& rnn_t, const ComplexMat& e_tilde,
                         std::size_t m_local, UpdateMode mode) {
  const std::size_t m_tilde = ryy_t.rows();
  const std::size_t q_dim = e_tilde.cols();
  require(ryy_t.is_square() && rnn_t.rows() == m_tilde && rnn_t.cols() == m_tilde && e_tilde.rows() == m_tilde,
          ErrorCode::DimensionMismatch, "local_update: inconsistent shapes");
  require(m_local <= m_tilde && q_dim > 0 && (m_tilde - m_local) % q_dim == 0, ErrorCode::DimensionMismatch,
          "local_update: observation does not split into local part and Q-blocks");

  LocalUpdate out;
  out.w_tilde = mode.is_gevd() ? centralized_gevd_mwf(ryy_t, rnn_t, e_tilde, mode.rank)
                               : centralized_mwf(ryy_t, rnn_t, e_tilde);
  out.w_local = out.w_tilde.block(0, 0, m_local, q_dim);
  for (std::size_t r = m_local; r < m_tilde; r += q_dim) out.g_blocks.push_back(out.w_tilde.block(r, 0, q_dim, q_dim));
  return out;
}

DiffusionResult diffusion_flow(BinState& state, const Tree& tree, Algorithm algorithm, const LocalUpdate& update,
                               std::optional<std::span<const cplx>> d_hat_root, Rng* guard_rng) {
  const std::size_t k = tree.size();
  require(state.size() == k, ErrorCode::DimensionMismatch, "diffusion_flow: state size differs from tree");
  require(update.g_blocks.size() == stream_count(tree, algorithm), ErrorCode::DimensionMismatch,
          "diffusion_flow: one G block per received stream");
  const std::size_t root = tree.root;
  const std::size_t q_dim = state[root].t_mat.rows();

  DiffusionResult out;
  NodeState& r = state[root];
  require(update.w_local.rows() == r.w_local.rows() && update.w_local.cols() == q_dim, ErrorCode::DimensionMismatch,
          "diffusion_flow: root filter shape");
  r.w_local = update.w_local;
  r.t_mat = ComplexMat::identity(q_dim);
  r.p_fusion = r.w_local;

  for (std::size_t q = 0; q < k; ++q) {
    if (q == root) continue;
    NodeState& s = state[q];
    s.t_mat = s.t_mat * update.g_blocks[*stream_index(tree, algorithm, q)];
    if (!(condition_number(s.t_mat) < kDegenerateCondition)) {
      if (guard_rng == nullptr) throw Error(ErrorCode::SingularT, "transform of node " + std::to_string(q) + " is singular");
      s.t_mat = random_invertible(q_dim, *guard_rng);
      out.degenerate_nodes.push_back(q);
    }
    s.p_fusion = s.w_local * s.t_mat;
  }
  // DANSE nodes hear every broadcast directly; the tree variants relay the
  // root estimate once over every edge.
  if (algorithm != Algorithm::Danse) out.signals_exchanged = q_dim * (k - 1);

  if (d_hat_root) {
    require(d_hat_root->size() == q_dim, ErrorCode::DimensionMismatch, "diffusion_flow: root estimate length");
    const ComplexMat root_est = ComplexMat::column(*d_hat_root);
    out.d_hat.resize(k);
    for (std::size_t q = 0; q < k; ++q) {
      const ComplexMat d = q == root ? root_est : inv_hermitian_transpose(state[q].t_mat) * root_est;
      out.d_hat[q].assign(d.entries().begin(), d.entries().end());
    }
  }
  return out;
}

ComplexMat build_ck(const BinState& state, const Layout& layout, Algorithm algorithm, const Tree& tree) {
  const std::size_t k = layout.k_nodes();
  require(state.size() == k && tree.size() == k, ErrorCode::DimensionMismatch, "build_ck: sizes differ");
  const std::size_t root = tree.root;
  const std::size_t q_dim = layout.q_dim;
  const std::size_t m_root = layout.sensors[root];
  const std::size_t streams = algorithm == Algorithm::Danse ? k - 1 : stream_count(tree, algorithm);

  ComplexMat c(layout.total(), m_root + q_dim * streams);
  c.set_block(layout.offset(root), 0, ComplexMat::identity(m_root));
  std::size_t next = 0;
  for (std::size_t q = 0; q < k; ++q) {
    if (q == root) continue;
    // DANSE: one block per other node, in node order.
    const std::size_t col = algorithm == Algorithm::Danse ? next++ : *stream_index(tree, algorithm, q);
    c.set_block(layout.offset(q), m_root + q_dim * col, state[q].p_fusion);
  }
  return c;
}

ComplexMat network_wide_filter(const BinState& state, const Layout& layout, std::size_t q) {
  const std::size_t k = layout.k_nodes();
  require(state.size() == k && q < k, ErrorCode::DimensionMismatch, "network_wide_filter: node out of range");
  ComplexMat t_inv;
  try {
    t_inv = inverse(state[q].t_mat);
  } catch (const Error&) {
    throw Error(ErrorCode::SingularT, "transform of node " + std::to_string(q) + " is singular");
  }
  ComplexMat w(layout.total(), layout.q_dim);
  for (std::size_t m = 0; m < k; ++m)
    w.set_block(layout.offset(m), 0, m == q ? state[q].w_local : state[m].p_fusion * t_inv);
  return w;
}

std::vector<std::vector<ComplexMat>> network_filters(const NetworkState& state, const Layout& layout) {
  std::vector<std::vector<ComplexMat>> out(state.bins.size());
  for (std::size_t b = 0; b < state.bins.size(); ++b)
    for (std::size_t q = 0; q < layout.k_nodes(); ++q) out[b].push_back(network_wide_filter(state.bins[b], layout, q));
  return out;
}

double lmmse_cost(const ComplexMat& ryy, const ComplexMat& rnn, const ComplexMat& w, const ComplexMat& e_sel) {
  require(w.rows() == ryy.rows() && e_sel.rows() == ryy.rows() && w.cols() == e_sel.cols(),
          ErrorCode::DimensionMismatch, "lmmse_cost: inconsistent shapes");
  const ComplexMat rss = ryy - rnn;
  const ComplexMat cross = adjoint_times(w, rss * e_sel);
  return adjoint_times(e_sel, rss * e_sel).trace().real() - 2.0 * cross.trace().real() +
         adjoint_times(w, ryy * w).trace().real();
}

double transformed_cost(const ComplexMat& ryy, const ComplexMat& rnn, const ComplexMat& w, const ComplexMat& e_sel) {
  require(w.rows() == ryy.rows() && e_sel.rows() == ryy.rows(), ErrorCode::DimensionMismatch,
          "transformed_cost: inconsistent shapes");
  const ComplexMat rss = ryy - rnn;
  const ComplexMat rxx = hermitian_part(adjoint_times(w, ryy * w));
  const ComplexMat rxd = adjoint_times(w, rss * e_sel);
  return adjoint_times(e_sel, rss * e_sel).trace().real() - adjoint_times(rxd, hermitian_solve(rxx, rxd)).trace().real();
}

// ---------------------------------------------------------------------------
// Iterations

IterationPlan make_plan(std::size_t iteration, const WasnGraph& graph, Algorithm algorithm, Pruning pruning,
                        UpdateMode update) {
  IterationPlan plan;
  plan.iteration = iteration;
  plan.root = iteration % graph.size();
  plan.algorithm = algorithm;
  plan.update = update;
  if (algorithm == Algorithm::Danse) {
    if (!graph.is_fully_connected()) throw Error(ErrorCode::DanseRequiresFc, "DANSE requires a fully connected graph");
    plan.tree = prune_mmut(graph, plan.root);
  } else {
    plan.tree = prune(graph, plan.root, pruning);
  }
  return plan;
}

IterationReport run_iteration(const IterationPlan& plan, const Layout& layout, const ScmSet& scms,
                              NetworkState& state) {
  check_plan(plan, layout);
  require(scms.ryy.size() == state.bins.size() && scms.rnn.size() == state.bins.size(), ErrorCode::DimensionMismatch,
          "run_iteration: bin counts differ");
  IterationReport report;
  const std::size_t m_root = layout.sensors[plan.root];
  for (std::size_t b = 0; b < state.bins.size(); ++b) {
    const ComplexMat c = build_ck(state.bins[b], layout, plan.algorithm, plan.tree);
    const ComplexMat ryy_t = hermitian_part(congruence(c, scms.ryy[b]));
    const ComplexMat rnn_t = hermitian_part(congruence(c, scms.rnn[b]));
    const LocalUpdate upd =
        local_update(ryy_t, rnn_t, tilde_selection(layout, plan.root, c.cols()), m_root, plan.update);
    Rng guard = guard_rng_for(plan, b);
    const DiffusionResult d = diffusion_flow(state.bins[b], plan.tree, plan.algorithm, upd, std::nullopt, &guard);
    merge_flags(report.degenerate_nodes, d.degenerate_nodes);
    if (b == 0) {
      // Fusion: one Q-stream per tree edge towards the root.
      const std::size_t k = layout.k_nodes();
      report.signals_exchanged = plan.algorithm == Algorithm::Danse ? broadcast_signals(k, layout.q_dim)
                                                                    : layout.q_dim * (k - 1) + d.signals_exchanged;
    }
  }
  return report;
}

IterationReport run_iteration(const IterationPlan& plan, const Layout& layout, std::vector<FrameStream>& streams,
                              const OnlineParams& params, NetworkState& state) {
  check_plan(plan, layout);
  require(streams.size() == state.bins.size(), ErrorCode::DimensionMismatch, "run_iteration: one stream per bin");
  require(params.n_min >= 1, ErrorCode::ConfigInvalid, "n_min must be positive");
  const std::size_t k = layout.k_nodes();
  const std::size_t root = plan.root;
  const std::size_t m_root = layout.sensors[root];
  const std::size_t m_tilde = m_root + layout.q_dim * (plan.algorithm == Algorithm::Danse
                                                           ? k - 1
                                                           : stream_count(plan.tree, plan.algorithm));
  IterationReport report;
  for (std::size_t b = 0; b < state.bins.size(); ++b) {
    BinState& bin = state.bins[b];
    OnlineScmEstimator est(m_tilde, params.forgetting_factor);
    std::size_t fusion_signals = 0;
    while (est.count_yy() < params.n_min || est.count_nn() < params.n_min) {
      require(report.frames_used < kMaxOnlineFrames * state.bins.size(), ErrorCode::NoConvergence,
              "online estimation never reached the activity thresholds");
      const SensorFrame frame = streams[b].next();
      const std::vector<cplx> y = frame.mixture();
      require(y.size() == layout.total(), ErrorCode::DimensionMismatch, "frame size differs from layout");
      std::vector<std::vector<cplx>> fused(k);
      for (std::size_t q = 0; q < k; ++q) fused[q] = fuse(bin[q].p_fusion, local_slice(y, layout, q));
      const FusionFlowResult flow = fusion_flow(plan.tree, fused, m_root);
      fusion_signals = flow.signals_exchanged;
      const std::vector<cplx> y_root = local_slice(y, layout, root);
      const std::vector<cplx> obs =
          plan.algorithm == Algorithm::TiDanse && !flow.partial_sums.empty()
              ? assemble_observation(y_root, {global_sum(flow.partial_sums, layout.q_dim)})
              : assemble_observation(y_root, flow.partial_sums);
      est.update(obs, frame.vad);
      ++report.frames_used;
    }
    const LocalUpdate upd = local_update(est.ryy_unbiased(), est.rnn_unbiased(),
                                         tilde_selection(layout, root, m_tilde), m_root, plan.update);
    Rng guard = guard_rng_for(plan, b);
    const DiffusionResult d = diffusion_flow(bin, plan.tree, plan.algorithm, upd, std::nullopt, &guard);
    merge_flags(report.degenerate_nodes, d.degenerate_nodes);
    if (b == 0)
      report.signals_exchanged = plan.algorithm == Algorithm::Danse ? broadcast_signals(k, layout.q_dim)
                                                                    : fusion_signals + d.signals_exchanged;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Optimal state and checkpoints

NetworkState optimal_state(const SensingEnvironment& env, const ScmSet& scms, std::size_t root) {
  require(env.q_dim() == env.config().s_sources, ErrorCode::ConfigInvalid,
          "optimal state construction needs as many targets as desired sources");
  require(root < env.k_nodes(), ErrorCode::ConfigInvalid, "root out of range");
  const Layout layout = Layout::of(env);
  const auto filters = centralized_filters(scms, layout, UpdateMode::plain());
  NetworkState state;
  state.bins.resize(env.n_bins());
  for (std::size_t b = 0; b < env.n_bins(); ++b) {
    const ComplexMat root_ref_h = env.reference_steering(root, b).adjoint();
    for (std::size_t q = 0; q < env.k_nodes(); ++q) {
      const ComplexMat w = filters[b][q].block(env.offset(q), 0, env.sensors(q), env.q_dim());
      const ComplexMat t = q == root ? ComplexMat::identity(env.q_dim())
                                     : inv_hermitian_transpose(env.reference_steering(q, b)) * root_ref_h;
      state.bins[b].push_back({w, t, w * t});
    }
  }
  return state;
}

std::string state_to_json(const NetworkState& state) {
  nlohmann::json bins = nlohmann::json::array();
  for (const BinState& bin : state.bins) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const NodeState& s : bin)
      nodes.push_back({{"w_local", matrix_to_json(s.w_local)},
                       {"t_mat", matrix_to_json(s.t_mat)},
                       {"p_fusion", matrix_to_json(s.p_fusion)}});
    bins.push_back(std::move(nodes));
  }
  return nlohmann::json{{"bins", std::move(bins)}}.dump();
}

NetworkState state_from_json(std::string_view text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    NetworkState state;
    for (const auto& nodes : j.at("bins")) {
      BinState bin;
      for (const auto& n : nodes)
        bin.push_back({matrix_from_json(n.at("w_local")), matrix_from_json(n.at("t_mat")),
                       matrix_from_json(n.at("p_fusion"))});
      state.bins.push_back(std::move(bin));
    }
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("state JSON: ") + e.what());
  }
}

}  // namespace tidanse
