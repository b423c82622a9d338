#pragma once

// Synthetic acoustic sensing environments: per-bin steering, theoretical
// covariances, gated signal synthesis and recursive covariance estimation.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tidanse/linalg.hpp"
#include "tidanse/random.hpp"
#include "tidanse/topology.hpp"

namespace tidanse {

enum class SteeringMode { RandomGaussian, FreeField };
std::string to_string(SteeringMode m);
SteeringMode steering_from_string(std::string_view name);

struct ScenarioConfig {
  std::size_t k_nodes = 10;
  std::size_t sensors_per_node = 3;
  std::size_t q_dim = 1;
  std::size_t s_sources = 1;
  std::size_t n_noise_sources = 3;
  std::size_t n_bins = 4;
  SteeringMode steering = SteeringMode::RandomGaussian;
  /// Latent source variances; empty means all ones.
  std::vector<double> desired_powers;
  std::vector<double> noise_powers;
  /// Per-sensor self-noise variance; defaults to 1e-2 x mean desired power.
  std::optional<double> self_noise_power;
  double sample_rate = 16000.0;
  /// Explicit bin centre frequencies (Hz); empty means b * fs / L for b = 1..F.
  std::vector<double> bin_frequencies;
  double sensor_radius = 0.05;
  double min_source_distance = 0.5;
  GeometryParams geometry;
  /// Fixed node / source positions (free-field layouts); empty means random.
  std::vector<Point> node_positions;
  std::vector<Point> desired_positions;
  std::vector<Point> noise_positions;
};

/// Frame length whose interior bins 1..F are the simulated bins.
std::size_t frame_length_for_bins(std::size_t n_bins);

class SensingEnvironment {
 public:
  const ScenarioConfig& config() const noexcept { return config_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::size_t k_nodes() const noexcept { return sensors_.size(); }
  std::size_t n_bins() const noexcept { return desired_steering_.size(); }
  std::size_t q_dim() const noexcept { return config_.q_dim; }
  std::size_t total_sensors() const noexcept { return total_sensors_; }
  std::size_t sensors(std::size_t q) const { return sensors_[q]; }
  /// Row of node q's first sensor in the stacked network signal.
  std::size_t offset(std::size_t q) const { return offsets_[q]; }

  const WasnGraph& graph() const noexcept { return *graph_; }
  const std::vector<double>& bin_frequencies() const noexcept { return frequencies_; }
  const ComplexMat& desired_steering(std::size_t bin) const { return desired_steering_[bin]; }
  const ComplexMat& noise_steering(std::size_t bin) const { return noise_steering_[bin]; }
  const std::vector<double>& desired_powers() const noexcept { return desired_powers_; }
  const std::vector<double>& noise_powers() const noexcept { return noise_powers_; }
  double self_noise_power() const noexcept { return self_noise_power_; }

  const std::vector<Point>& sensor_positions() const noexcept { return sensor_positions_; }
  const std::vector<Point>& desired_positions() const noexcept { return desired_positions_; }
  const std::vector<Point>& noise_positions() const noexcept { return noise_positions_; }

  /// Local indices of node q's reference sensors (one per target channel).
  const std::vector<std::size_t>& target_channels(std::size_t q) const { return targets_[q]; }
  /// M_q x Q selection of node q's reference sensors.
  ComplexMat local_selection(std::size_t q) const;
  /// M x Q selection of node q's reference sensors in the stacked signal.
  ComplexMat network_selection(std::size_t q) const;
  /// Q x S steering from the sources to node q's reference sensors.
  ComplexMat reference_steering(std::size_t q, std::size_t bin) const;

 private:
  friend SensingEnvironment build_environment(const ScenarioConfig&, std::uint64_t);

  ScenarioConfig config_;
  std::uint64_t seed_ = 0;
  std::vector<std::size_t> sensors_;
  std::vector<std::size_t> offsets_;
  std::size_t total_sensors_ = 0;
  std::optional<WasnGraph> graph_;
  std::vector<double> frequencies_;
  std::vector<ComplexMat> desired_steering_;
  std::vector<ComplexMat> noise_steering_;
  std::vector<double> desired_powers_;
  std::vector<double> noise_powers_;
  double self_noise_power_ = 0.0;
  std::vector<std::vector<std::size_t>> targets_;
  std::vector<Point> sensor_positions_;
  std::vector<Point> desired_positions_;
  std::vector<Point> noise_positions_;
};

/// Deterministic in (config, seed). Node positions and the initial graph come
/// from generate_geometric_wasn unless positions are given.
SensingEnvironment build_environment(const ScenarioConfig& config, std::uint64_t seed);

struct ScmSet {
  std::vector<ComplexMat> ryy;
  std::vector<ComplexMat> rnn;
  std::vector<ComplexMat> rss;
};

ScmSet theoretical_scms(const SensingEnvironment& env);

/// One STFT-domain frame of every sensor in one bin, split by component.
struct SensorFrame {
  std::vector<cplx> desired;
  std::vector<cplx> noise;
  bool vad = false;

  std::vector<cplx> mixture() const;
};

/// Gate pattern with a 20-frame period: the first round(duty * 20) frames of
/// each period are active.
bool gate_active(std::size_t frame, double activity_duty);

/// Endless stream of synthesized frames for one bin.
class FrameStream {
 public:
  FrameStream(const SensingEnvironment& env, std::size_t bin, double activity_duty, std::uint64_t seed);
  SensorFrame next();
  /// Latent desired source values of the most recent frame (zero when gated off).
  const std::vector<cplx>& last_latent() const noexcept { return latent_; }

 private:
  const SensingEnvironment* env_;
  std::size_t bin_;
  double duty_;
  Rng rng_;
  std::size_t index_ = 0;
  std::vector<cplx> latent_;
};

struct SignalBlock {
  std::size_t frame_len = 0;
  /// Per bin, M x frames STFT-domain frames by component.
  std::vector<ComplexMat> desired_frames;
  std::vector<ComplexMat> noise_frames;
  /// Per bin, S x frames latent desired source frames.
  std::vector<ComplexMat> latent_frames;
  /// Per sensor time-domain mixture.
  std::vector<std::vector<double>> samples;
  std::vector<bool> vad;

  std::size_t frames() const noexcept { return vad.size(); }
};

SignalBlock synthesize_signals(const SensingEnvironment& env, std::size_t duration_frames,
                               double activity_duty, std::uint64_t seed);

/// Converts per-bin interior frames (rows = bins 1..F) to a time signal;
/// DC and Nyquist are zero.
std::vector<double> interior_istft(std::span<const std::vector<cplx>> bin_frames, std::size_t frame_len);

/// Exponentially weighted covariance pair updated according to a VAD flag.
class OnlineScmEstimator {
 public:
  OnlineScmEstimator(std::size_t dim, double beta);

  void update(std::span<const cplx> frame, bool vad_on);
  void reset();

  std::size_t dim() const noexcept { return ryy_.rows(); }
  double beta() const noexcept { return beta_; }
  const ComplexMat& ryy() const noexcept { return ryy_; }
  const ComplexMat& rnn() const noexcept { return rnn_; }
  std::size_t count_yy() const noexcept { return count_yy_; }
  std::size_t count_nn() const noexcept { return count_nn_; }
  /// Estimates divided by 1 - beta^count, removing the zero-start bias.
  ComplexMat ryy_unbiased() const;
  ComplexMat rnn_unbiased() const;

 private:
  ComplexMat ryy_;
  ComplexMat rnn_;
  double beta_;
  std::size_t count_yy_ = 0;
  std::size_t count_nn_ = 0;
};

std::string environment_to_json(const SensingEnvironment& env);
SensingEnvironment environment_from_json(std::string_view text);

std::string scenario_config_to_json(const ScenarioConfig& config);
ScenarioConfig scenario_config_from_json(std::string_view text);

}  // namespace tidanse
