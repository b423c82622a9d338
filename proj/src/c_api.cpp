#include "tidanse/tidanse.h"

#include <exception>
#include <json.hpp>
#include <memory>
#include <new>
#include <string>

#include "tidanse/error.hpp"
#include "tidanse/harness.hpp"
#include "tidanse/version.hpp"

using namespace tidanse;

struct tdn_environment {
  std::shared_ptr<const SensingEnvironment> env;
};

struct tdn_simulation {
  std::shared_ptr<const SensingEnvironment> env;
  std::unique_ptr<Simulation> sim;
};

namespace {

thread_local std::string last_error;

tdn_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return TDN_ERR_DIMENSION_MISMATCH;
    case ErrorCode::NotPositiveDefinite: return TDN_ERR_NOT_POSITIVE_DEFINITE;
    case ErrorCode::NoConvergence: return TDN_ERR_NO_CONVERGENCE;
    case ErrorCode::Singular: return TDN_ERR_SINGULAR;
    case ErrorCode::SingularT: return TDN_ERR_SINGULAR_T;
    case ErrorCode::RankTooLarge: return TDN_ERR_RANK_TOO_LARGE;
    case ErrorCode::PlacementFailed: return TDN_ERR_PLACEMENT_FAILED;
    case ErrorCode::DegenerateK: return TDN_ERR_DEGENERATE_K;
    case ErrorCode::Unreachable: return TDN_ERR_UNREACHABLE;
    case ErrorCode::ConfigInvalid: return TDN_ERR_CONFIG_INVALID;
    case ErrorCode::SignalTooShort: return TDN_ERR_SIGNAL_TOO_SHORT;
    case ErrorCode::DanseRequiresFc: return TDN_ERR_DANSE_REQUIRES_FC;
    case ErrorCode::NonPositiveValue: return TDN_ERR_NON_POSITIVE_VALUE;
    case ErrorCode::MalformedCsv: return TDN_ERR_MALFORMED_CSV;
    case ErrorCode::IoError: return TDN_ERR_IO;
  }
  return TDN_ERR_INTERNAL;
}

template <class Fn>
tdn_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return TDN_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return TDN_ERR_INTERNAL;
}

tdn_status null_argument(const char* name) {
  last_error = std::string(name) + " is null";
  return TDN_ERR_NULL_ARGUMENT;
}

void copy_record(const MetricsRecord& r, tdn_record* out) {
  out->iteration = r.iteration;
  out->root = r.root;
  out->connectivity_c = r.connectivity_c;
  out->mse_w = r.mse_w;
  out->signals_exchanged = r.signals_exchanged;
}

}  // namespace

extern "C" {

const char* tdn_version(void) { return kVersion; }

const char* tdn_status_name(tdn_status status) {
  switch (status) {
    case TDN_OK: return "Ok";
    case TDN_ERR_NULL_ARGUMENT: return "NullArgument";
    case TDN_ERR_INTERNAL: return "Internal";
    default: break;
  }
  for (int c = 0; c <= static_cast<int>(ErrorCode::IoError); ++c)
    if (status_of(static_cast<ErrorCode>(c)) == status) return to_string(static_cast<ErrorCode>(c));
  return "Unknown";
}

const char* tdn_last_error(void) { return last_error.c_str(); }

tdn_status tdn_validate_config(const char* config_json) {
  if (!config_json) return null_argument("config_json");
  return guarded([&] { validate(config_from_json(config_json)); });
}

tdn_status tdn_run_experiment(const char* config_json, double* wall_ms) {
  if (!config_json) return null_argument("config_json");
  return guarded([&] {
    const ExperimentResult r = run_experiment(config_from_json(config_json));
    if (wall_ms) *wall_ms = r.wall_ms;
  });
}

tdn_status tdn_run_sweep(const char* config_json) {
  if (!config_json) return null_argument("config_json");
  return guarded([&] { run_sweep(config_from_json(config_json)); });
}

tdn_status tdn_prune_stats(const char* config_json) {
  if (!config_json) return null_argument("config_json");
  return guarded([&] {
    PruneStatsConfig cfg;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(config_json);
      if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "prune-stats config must be a JSON object");
      for (const auto& [key, v] : j.items()) {
        if (key == "k_values") cfg.k_values = v.get<std::vector<std::size_t>>();
        else if (key == "n_wasns") cfg.n_wasns = v.get<std::size_t>();
        else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
        else if (key == "output_dir") cfg.output_dir = v.get<std::string>();
        else throw Error(ErrorCode::ConfigInvalid, "unknown prune-stats key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ConfigInvalid, std::string("prune-stats config: ") + e.what());
    }
    prune_stats(cfg);
  });
}

tdn_status tdn_emit_plot(const char* csv_path, const char* kind, const char* svg_path) {
  if (!csv_path || !kind || !svg_path) return null_argument("argument");
  return guarded([&] { emit_plot(csv_path, plot_kind_from_string(kind), svg_path); });
}

tdn_status tdn_environment_create(const char* scenario_json, uint64_t seed, tdn_environment** out) {
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    const ScenarioConfig cfg = scenario_json ? scenario_config_from_json(scenario_json) : ScenarioConfig{};
    auto handle = std::make_unique<tdn_environment>();
    handle->env = std::make_shared<const SensingEnvironment>(build_environment(cfg, seed));
    *out = handle.release();
  });
}

void tdn_environment_destroy(tdn_environment* env) { delete env; }

size_t tdn_environment_nodes(const tdn_environment* env) { return env ? env->env->k_nodes() : 0; }

size_t tdn_environment_bins(const tdn_environment* env) { return env ? env->env->n_bins() : 0; }

tdn_status tdn_simulation_create(const tdn_environment* env, const char* algorithm, const char* pruning,
                                 size_t gevd_rank, uint64_t seed, tdn_simulation** out) {
  if (!env || !algorithm || !pruning || !out) return null_argument("argument");
  *out = nullptr;
  return guarded([&] {
    RunSpec spec;
    spec.algorithm = algorithm_from_string(algorithm);
    spec.pruning = pruning_from_string(pruning);
    spec.update = gevd_rank == 0 ? UpdateMode::plain() : UpdateMode::gevd(gevd_rank);
    spec.seed = seed;
    auto handle = std::make_unique<tdn_simulation>();
    handle->env = env->env;
    handle->sim = std::make_unique<Simulation>(*handle->env, spec);
    *out = handle.release();
  });
}

void tdn_simulation_destroy(tdn_simulation* sim) { delete sim; }

tdn_status tdn_simulation_record(const tdn_simulation* sim, tdn_record* out) {
  if (!sim || !out) return null_argument("argument");
  return guarded([&] { copy_record(sim->sim->record(), out); });
}

tdn_status tdn_simulation_step(tdn_simulation* sim, tdn_record* out) {
  if (!sim || !out) return null_argument("argument");
  return guarded([&] { copy_record(sim->sim->step(), out); });
}

}  // extern "C"
