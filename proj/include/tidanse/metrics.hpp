#pragma once

// Evaluation of distributed filters: distance to the centralized solution,
// geometric averaging over environments, output SNR and exchanged signals.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tidanse/danse.hpp"
#include "tidanse/linalg.hpp"

namespace tidanse {

/// Filters indexed [bin][node].
using FilterSet = std::vector<std::vector<ComplexMat>>;

/// Squared Frobenius distance averaged over nodes, then over bins.
double mse_w(const FilterSet& network, const FilterSet& centralized);

inline constexpr double kMseFloor = 1e-300;

/// Per-iteration geometric mean over environments (exp of mean log). Values
/// below kMseFloor are raised to it; negative or NaN values are rejected.
std::vector<double> geometric_mean_series(const std::vector<std::vector<double>>& per_env);

/// Mean over nodes of 10 log10(desired energy / noise energy); +inf when any
/// node has zero noise energy.
double snr_db(const std::vector<std::vector<double>>& desired, const std::vector<std::vector<double>>& noise);

/// Signals exchanged per iteration.
std::size_t comm_count(Algorithm algorithm, std::size_t k_nodes, std::size_t q_dim);
/// Signals sent to a fusion centre: every sensor once.
std::size_t centralized_comm_count(std::span<const std::size_t> sensors_per_node);

struct MetricsRecord {
  std::size_t iteration = 0;
  std::size_t root = 0;
  std::string algorithm;
  std::string pruning;
  double connectivity_c = 0.0;
  double mse_w = 0.0;
  std::optional<double> snr_db;
  std::size_t signals_exchanged = 0;
};

std::string metrics_csv_header();
/// One CSV line (no newline); reals printed with 17 significant digits, a
/// missing SNR as an empty field.
std::string to_csv_row(const MetricsRecord& record);

}  // namespace tidanse
