#include "tidanse/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "tidanse/error.hpp"

namespace tidanse {

namespace {

std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

double energy(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0, [](double acc, double v) { return acc + v * v; });
}

}  // namespace

double mse_w(const FilterSet& network, const FilterSet& centralized) {
  if (network.size() != centralized.size() || network.empty())
    throw Error(ErrorCode::DimensionMismatch, "mse_w: bin counts differ or are zero");
  double total = 0.0;
  for (std::size_t b = 0; b < network.size(); ++b) {
    const auto& nw = network[b];
    const auto& ce = centralized[b];
    if (nw.size() != ce.size() || nw.empty()) throw Error(ErrorCode::DimensionMismatch, "mse_w: node counts differ");
    double bin = 0.0;
    for (std::size_t q = 0; q < nw.size(); ++q) {
      if (nw[q].rows() != ce[q].rows() || nw[q].cols() != ce[q].cols())
        throw Error(ErrorCode::DimensionMismatch, "mse_w: filter shapes differ");
      const double d = (nw[q] - ce[q]).frobenius_norm();
      bin += d * d;
    }
    total += bin / static_cast<double>(nw.size());
  }
  return total / static_cast<double>(network.size());
}

std::vector<double> geometric_mean_series(const std::vector<std::vector<double>>& per_env) {
  if (per_env.empty()) return {};
  const std::size_t n = per_env[0].size();
  std::vector<double> log_sum(n, 0.0);
  for (const auto& series : per_env) {
    if (series.size() != n) throw Error(ErrorCode::DimensionMismatch, "geometric mean: series lengths differ");
    for (std::size_t i = 0; i < n; ++i) {
      const double v = series[i];
      if (!(v >= 0.0)) throw Error(ErrorCode::NonPositiveValue, "geometric mean: negative or NaN value");
      log_sum[i] += std::log(std::max(v, kMseFloor));
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(log_sum[i] / static_cast<double>(per_env.size()));
  return out;
}

double snr_db(const std::vector<std::vector<double>>& desired, const std::vector<std::vector<double>>& noise) {
  if (desired.size() != noise.size() || desired.empty())
    throw Error(ErrorCode::DimensionMismatch, "snr_db: node counts differ or are zero");
  double sum = 0.0;
  for (std::size_t k = 0; k < desired.size(); ++k) {
    const double en = energy(noise[k]);
    if (en == 0.0) return std::numeric_limits<double>::infinity();
    sum += 10.0 * std::log10(energy(desired[k]) / en);
  }
  return sum / static_cast<double>(desired.size());
}

std::size_t comm_count(Algorithm algorithm, std::size_t k_nodes, std::size_t q_dim) {
  if (k_nodes == 0) return 0;
  if (algorithm == Algorithm::Danse) return k_nodes * q_dim * (k_nodes - 1);
  return 2 * q_dim * (k_nodes - 1);
}

std::size_t centralized_comm_count(std::span<const std::size_t> sensors_per_node) {
  return std::accumulate(sensors_per_node.begin(), sensors_per_node.end(), std::size_t{0});
}

std::string metrics_csv_header() {
  return "iteration,root,algorithm,pruning,connectivity_c,mse_w,snr_db,signals_exchanged";
}

std::string to_csv_row(const MetricsRecord& r) {
  std::ostringstream s;
  s << r.iteration << ',' << r.root << ',' << r.algorithm << ',' << r.pruning << ',' << format_real(r.connectivity_c)
    << ',' << format_real(r.mse_w) << ',' << (r.snr_db ? format_real(*r.snr_db) : std::string()) << ','
    << r.signals_exchanged;
  return s.str();
}

}  // namespace tidanse
