#pragma once

// Distributed node-specific signal estimation over sensor networks: the
// centralized multichannel Wiener filter reference and three distributed
// variants sharing one per-node state (local filter W, transform T, fusion
// matrix P = W T).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tidanse/linalg.hpp"
#include "tidanse/random.hpp"
#include "tidanse/scenario.hpp"
#include "tidanse/topology.hpp"

namespace tidanse {

enum class Algorithm { Danse, TiDanse, TiDansePlus };
std::string to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view name);

struct UpdateMode {
  enum class Kind { Plain, Gevd };
  Kind kind = Kind::Plain;
  std::size_t rank = 0;

  static UpdateMode plain() { return {}; }
  static UpdateMode gevd(std::size_t rank) { return {Kind::Gevd, rank}; }
  bool is_gevd() const noexcept { return kind == Kind::Gevd; }
};

enum class ScmMode { Theoretical, Online };
std::string to_string(ScmMode m);
ScmMode scm_mode_from_string(std::string_view name);

/// Sensor counts, target dimension and reference channels of a network.
struct Layout {
  std::vector<std::size_t> sensors;
  std::size_t q_dim = 1;
  /// Local reference sensor indices per node (q_dim each).
  std::vector<std::vector<std::size_t>> targets;

  static Layout of(const SensingEnvironment& env);
  /// Uniform layout whose reference sensors are the first q_dim of each node.
  static Layout uniform(std::size_t k_nodes, std::size_t sensors_per_node, std::size_t q_dim);

  std::size_t k_nodes() const noexcept { return sensors.size(); }
  std::size_t offset(std::size_t q) const;
  std::size_t total() const;
  ComplexMat local_selection(std::size_t q) const;
  ComplexMat network_selection(std::size_t q) const;
};

struct NodeState {
  ComplexMat w_local;   // M_q x Q
  ComplexMat t_mat;     // Q x Q
  ComplexMat p_fusion;  // M_q x Q
};

/// Per-node state of one frequency bin.
using BinState = std::vector<NodeState>;

struct NetworkState {
  std::vector<BinState> bins;
};

/// Random local filters (i.i.d. unit complex Gaussian, redrawn if not of full
/// column rank), identity transforms, P = W.
NetworkState initialize_state(const Layout& layout, std::size_t n_bins, Rng& rng);

/// W = ryy^{-1} (ryy - rnn) e_sel.
ComplexMat centralized_mwf(const ComplexMat& ryy, const ComplexMat& rnn, const ComplexMat& e_sel);

/// Rank-constrained counterpart: X diag(1 - 1/sigma_1..R, 0, ...) Q^H e_sel
/// from the generalized eigendecomposition of {ryy, rnn}.
ComplexMat centralized_gevd_mwf(const ComplexMat& ryy, const ComplexMat& rnn, const ComplexMat& e_sel,
                                std::size_t rank);

/// Centralized reference filters, indexed [bin][node].
std::vector<std::vector<ComplexMat>> centralized_filters(const ScmSet& scms, const Layout& layout,
                                                         UpdateMode mode);

/// z = P^H y.
std::vector<cplx> fuse(const ComplexMat& p_fusion, std::span<const cplx> y_local);

struct FusionFlowResult {
  /// Partial sum received by the root from each upstream neighbour, in
  /// ascending neighbour order.
  std::vector<std::vector<cplx>> partial_sums;
  /// Partial sum each non-root node sends towards the root (empty for root).
  std::vector<std::vector<cplx>> sent;
  std::size_t obs_vector_dim = 0;
  std::size_t signals_exchanged = 0;
};

/// Leaf-to-root sum-and-send of the fused signals (one Q-vector per node).
FusionFlowResult fusion_flow(const Tree& tree, const std::vector<std::vector<cplx>>& fused,
                             std::size_t root_sensors);

/// [y_root; partial sums in order].
std::vector<cplx> assemble_observation(std::span<const cplx> y_root,
                                       const std::vector<std::vector<cplx>>& partial_sums);

/// Sum of all partial sums: the single in-network sum used by TI-DANSE.
std::vector<cplx> global_sum(const std::vector<std::vector<cplx>>& partial_sums, std::size_t q_dim);

struct LocalUpdate {
  ComplexMat w_tilde;                 // M~ x Q
  ComplexMat w_local;                 // first m_local rows of w_tilde
  std::vector<ComplexMat> g_blocks;   // remaining rows, Q x Q each
};

/// Local MWF (or rank-R GEVD filter) at the updating node, partitioned into
/// its local-sensor part and one Q x Q block per received fused stream.
LocalUpdate local_update(const ComplexMat& ryy_t, const ComplexMat& rnn_t, const ComplexMat& e_tilde,
                         std::size_t m_local, UpdateMode mode);

struct DiffusionResult {
  /// Per-node target estimates (present when a root estimate was given).
  std::vector<std::vector<cplx>> d_hat;
  std::size_t signals_exchanged = 0;
  /// Nodes whose transform became ill-conditioned and was re-randomized.
  std::vector<std::size_t> degenerate_nodes;
};

/// Root-to-leaf distribution of the update: the root takes the new local
/// filter and T = I, every other node right-multiplies its T by the block of
/// its branch (the single block for TI-DANSE), and all P are refreshed.
/// When `guard_rng` is given, transforms with condition number above 1e12
/// are redrawn instead of raising SingularT.
DiffusionResult diffusion_flow(BinState& state, const Tree& tree, Algorithm algorithm, const LocalUpdate& update,
                               std::optional<std::span<const cplx>> d_hat_root = std::nullopt,
                               Rng* guard_rng = nullptr);

/// Maps the centralized covariance to the updating node's observation
/// covariance: R~ = C^H R C.
ComplexMat build_ck(const BinState& state, const Layout& layout, Algorithm algorithm, const Tree& tree);

/// Network-wide filter of node q: blocks P_m T_q^{-1}, with W_qq at block q.
ComplexMat network_wide_filter(const BinState& state, const Layout& layout, std::size_t q);

/// Network-wide filters indexed [bin][node].
std::vector<std::vector<ComplexMat>> network_filters(const NetworkState& state, const Layout& layout);

/// E||d - W^H y||^2 with d = E^H s, from the centralized covariances.
double lmmse_cost(const ComplexMat& ryy, const ComplexMat& rnn, const ComplexMat& w, const ComplexMat& e_sel);

/// min over Q x Q matrices A of E||d - A^H w^H y||^2: the cost reachable by a
/// node that re-mixes the output of filter w optimally.
double transformed_cost(const ComplexMat& ryy, const ComplexMat& rnn, const ComplexMat& w, const ComplexMat& e_sel);

struct IterationPlan {
  std::size_t iteration = 0;
  std::size_t root = 0;
  Tree tree;
  Algorithm algorithm = Algorithm::TiDansePlus;
  UpdateMode update;
};

/// Prunes the graph at the round-robin root for `iteration`. DANSE always uses
/// the star at the root and requires a fully connected graph.
IterationPlan make_plan(std::size_t iteration, const WasnGraph& graph, Algorithm algorithm, Pruning pruning,
                        UpdateMode update);

struct OnlineParams {
  double forgetting_factor = 0.99;
  std::size_t n_min = 16;
};

struct IterationReport {
  std::size_t signals_exchanged = 0;
  std::size_t frames_used = 0;
  std::vector<std::size_t> degenerate_nodes;
};

/// One iteration with covariances taken from the centralized SCMs.
IterationReport run_iteration(const IterationPlan& plan, const Layout& layout, const ScmSet& scms,
                              NetworkState& state);

/// One iteration with covariances estimated from streamed frames (one stream
/// per bin); the estimate restarts every iteration.
IterationReport run_iteration(const IterationPlan& plan, const Layout& layout, std::vector<FrameStream>& streams,
                              const OnlineParams& params, NetworkState& state);

/// State realizing the centralized filters with `root` as last updater:
/// W_qq = centralized block, T_q = Psi_q^{-H} Psi_root^H. Requires Q = S.
NetworkState optimal_state(const SensingEnvironment& env, const ScmSet& scms, std::size_t root);

std::string state_to_json(const NetworkState& state);
NetworkState state_from_json(std::string_view text);

}  // namespace tidanse
