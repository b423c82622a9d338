#include "tidanse/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "tidanse/error.hpp"
#include "tidanse/stft.hpp"

namespace tidanse {

namespace {

constexpr double kSpeedOfSound = 343.0;
constexpr double kMinPropagationDistance = 0.1;
constexpr double kMaxSteeringCondition = 1e6;
constexpr int kMaxSteeringRedraws = 1000;
constexpr int kMaxSourceAttempts = 10000;
constexpr std::size_t kGatePeriod = 20;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ConfigInvalid, what);
}

void check_powers(const std::vector<double>& p, std::size_t expected, const char* name) {
  require(p.size() == expected, std::string(name) + " must have one entry per source");
  for (double v : p) require(v > 0.0 && std::isfinite(v), std::string(name) + " must be positive");
}

// Ratio of extreme singular values of a (possibly non-square) matrix.
double singular_condition(const ComplexMat& m) {
  const ComplexMat gram = m.rows() <= m.cols() ? hermitian_part(m * m.adjoint())
                                               : hermitian_part(adjoint_times(m, m));
  const HermitianEig e = hermitian_eig(gram);
  if (!(e.values.back() > 0.0)) return std::numeric_limits<double>::infinity();
  return std::sqrt(e.values.front() / e.values.back());
}

std::vector<Point> place_sources(std::size_t count, const std::vector<Point>& sensors,
                                 const ScenarioConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> coord(0.0, cfg.geometry.area_side);
  std::vector<Point> out;
  for (std::size_t s = 0; s < count; ++s) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxSourceAttempts && !placed; ++attempt) {
      const double x = coord(rng);
      const Point p{x, coord(rng)};
      placed = std::all_of(sensors.begin(), sensors.end(), [&](const Point& m) {
        return distance(m, p) >= cfg.min_source_distance;
      });
      if (placed) out.push_back(p);
    }
    if (!placed) throw Error(ErrorCode::PlacementFailed, "could not place source " + std::to_string(s));
  }
  return out;
}

ComplexMat free_field_steering(const std::vector<Point>& sensors, const std::vector<Point>& sources,
                               double freq) {
  ComplexMat psi(sensors.size(), sources.size());
  for (std::size_t m = 0; m < sensors.size(); ++m)
    for (std::size_t s = 0; s < sources.size(); ++s) {
      const double d = distance(sensors[m], sources[s]);
      const double phase = -2.0 * std::numbers::pi * freq * d / kSpeedOfSound;
      psi(m, s) = std::polar(1.0 / std::max(d, kMinPropagationDistance), phase);
    }
  return psi;
}

nlohmann::json points_json(const std::vector<Point>& pts) {
  nlohmann::json a = nlohmann::json::array();
  for (const Point& p : pts) a.push_back({p.x, p.y});
  return a;
}

std::vector<Point> points_from(const nlohmann::json& a) {
  std::vector<Point> out;
  for (const auto& p : a) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return out;
}

nlohmann::json config_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["k_nodes"] = c.k_nodes;
  j["sensors_per_node"] = c.sensors_per_node;
  j["q_dim"] = c.q_dim;
  j["s_sources"] = c.s_sources;
  j["n_noise_sources"] = c.n_noise_sources;
  j["n_bins"] = c.n_bins;
  j["steering"] = to_string(c.steering);
  j["desired_powers"] = c.desired_powers;
  j["noise_powers"] = c.noise_powers;
  j["self_noise_power"] = c.self_noise_power ? nlohmann::json(*c.self_noise_power) : nlohmann::json();
  j["sample_rate"] = c.sample_rate;
  j["bin_frequencies"] = c.bin_frequencies;
  j["sensor_radius"] = c.sensor_radius;
  j["min_source_distance"] = c.min_source_distance;
  j["area_side"] = c.geometry.area_side;
  j["min_node_distance"] = c.geometry.min_distance;
  j["initial_radius"] = c.geometry.initial_radius;
  j["radius_step"] = c.geometry.radius_step;
  j["node_positions"] = points_json(c.node_positions);
  j["desired_positions"] = points_json(c.desired_positions);
  j["noise_positions"] = points_json(c.noise_positions);
  return j;
}

ScenarioConfig config_from(const nlohmann::json& j) {
  ScenarioConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  get("k_nodes", c.k_nodes);
  get("sensors_per_node", c.sensors_per_node);
  get("q_dim", c.q_dim);
  get("s_sources", c.s_sources);
  get("n_noise_sources", c.n_noise_sources);
  get("n_bins", c.n_bins);
  if (j.contains("steering")) c.steering = steering_from_string(j.at("steering").get<std::string>());
  get("desired_powers", c.desired_powers);
  get("noise_powers", c.noise_powers);
  if (j.contains("self_noise_power") && !j.at("self_noise_power").is_null())
    c.self_noise_power = j.at("self_noise_power").get<double>();
  get("sample_rate", c.sample_rate);
  get("bin_frequencies", c.bin_frequencies);
  get("sensor_radius", c.sensor_radius);
  get("min_source_distance", c.min_source_distance);
  get("area_side", c.geometry.area_side);
  get("min_node_distance", c.geometry.min_distance);
  get("initial_radius", c.geometry.initial_radius);
  get("radius_step", c.geometry.radius_step);
  if (j.contains("node_positions")) c.node_positions = points_from(j.at("node_positions"));
  if (j.contains("desired_positions")) c.desired_positions = points_from(j.at("desired_positions"));
  if (j.contains("noise_positions")) c.noise_positions = points_from(j.at("noise_positions"));
  return c;
}

template <class Fn>
auto parse_json(std::string_view text, const char* what, Fn&& fn) {
  try {
    return fn(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string to_string(SteeringMode m) {
  return m == SteeringMode::RandomGaussian ? "random-gaussian" : "free-field";
}

SteeringMode steering_from_string(std::string_view name) {
  if (name == "random-gaussian") return SteeringMode::RandomGaussian;
  if (name == "free-field") return SteeringMode::FreeField;
  throw Error(ErrorCode::ConfigInvalid, "unknown steering mode '" + std::string(name) + "'");
}

std::size_t frame_length_for_bins(std::size_t n_bins) { return 2 * (n_bins + 1); }

ComplexMat SensingEnvironment::local_selection(std::size_t q) const {
  ComplexMat e(sensors_[q], config_.q_dim);
  for (std::size_t c = 0; c < config_.q_dim; ++c) e(targets_[q][c], c) = 1.0;
  return e;
}

ComplexMat SensingEnvironment::network_selection(std::size_t q) const {
  ComplexMat e(total_sensors_, config_.q_dim);
  for (std::size_t c = 0; c < config_.q_dim; ++c) e(offsets_[q] + targets_[q][c], c) = 1.0;
  return e;
}

ComplexMat SensingEnvironment::reference_steering(std::size_t q, std::size_t bin) const {
  std::vector<std::size_t> rows;
  for (std::size_t t : targets_[q]) rows.push_back(offsets_[q] + t);
  return desired_steering_[bin].select_rows(rows);
}

SensingEnvironment build_environment(const ScenarioConfig& cfg, std::uint64_t seed) {
  require(cfg.k_nodes >= 1, "k_nodes must be positive");
  require(cfg.sensors_per_node >= 1, "sensors_per_node must be positive");
  require(cfg.q_dim >= 1 && cfg.q_dim <= cfg.sensors_per_node, "q_dim must lie in [1, sensors_per_node]");
  require(cfg.s_sources >= 1, "at least one desired source is required");
  require(cfg.n_bins >= 1, "n_bins must be positive");
  require(cfg.sample_rate > 0.0, "sample_rate must be positive");
  require(cfg.bin_frequencies.empty() || cfg.bin_frequencies.size() == cfg.n_bins,
          "bin_frequencies must list one frequency per bin");
  require(cfg.node_positions.empty() || cfg.node_positions.size() == cfg.k_nodes,
          "node_positions must list one position per node");
  require(cfg.desired_positions.empty() || cfg.desired_positions.size() == cfg.s_sources,
          "desired_positions must list one position per source");
  require(cfg.noise_positions.empty() || cfg.noise_positions.size() == cfg.n_noise_sources,
          "noise_positions must list one position per noise source");

  SensingEnvironment env;
  env.config_ = cfg;
  env.seed_ = seed;
  Rng rng(seed);

  env.desired_powers_ = cfg.desired_powers.empty() ? std::vector<double>(cfg.s_sources, 1.0) : cfg.desired_powers;
  env.noise_powers_ = cfg.noise_powers.empty() ? std::vector<double>(cfg.n_noise_sources, 1.0) : cfg.noise_powers;
  check_powers(env.desired_powers_, cfg.s_sources, "desired_powers");
  check_powers(env.noise_powers_, cfg.n_noise_sources, "noise_powers");
  const double mean_desired =
      std::accumulate(env.desired_powers_.begin(), env.desired_powers_.end(), 0.0) / static_cast<double>(cfg.s_sources);
  env.self_noise_power_ = cfg.self_noise_power.value_or(1e-2 * mean_desired);
  require(env.self_noise_power_ > 0.0, "self_noise_power must be positive");

  env.graph_ = cfg.node_positions.empty() ? generate_geometric_wasn(cfg.k_nodes, cfg.geometry, rng)
                                          : geometric_graph(cfg.node_positions, cfg.geometry);

  env.sensors_.assign(cfg.k_nodes, cfg.sensors_per_node);
  for (std::size_t q = 0; q < cfg.k_nodes; ++q) {
    env.offsets_.push_back(env.total_sensors_);
    env.total_sensors_ += env.sensors_[q];
    std::vector<std::size_t> t(cfg.q_dim);
    std::iota(t.begin(), t.end(), 0);
    env.targets_.push_back(std::move(t));
    const Point centre = env.graph_->positions()[q];
    const std::size_t mq = env.sensors_[q];
    for (std::size_t m = 0; m < mq; ++m) {
      if (mq == 1) {
        env.sensor_positions_.push_back(centre);
        continue;
      }
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(mq);
      env.sensor_positions_.push_back(
          {centre.x + cfg.sensor_radius * std::cos(angle), centre.y + cfg.sensor_radius * std::sin(angle)});
    }
  }
  require(cfg.s_sources <= env.total_sensors_, "more desired sources than sensors");

  const std::size_t frame_len = frame_length_for_bins(cfg.n_bins);
  env.frequencies_ = cfg.bin_frequencies;
  if (env.frequencies_.empty())
    for (std::size_t b = 1; b <= cfg.n_bins; ++b)
      env.frequencies_.push_back(static_cast<double>(b) * cfg.sample_rate / static_cast<double>(frame_len));

  if (cfg.steering == SteeringMode::FreeField) {
    env.desired_positions_ = cfg.desired_positions.empty()
                                 ? place_sources(cfg.s_sources, env.sensor_positions_, cfg, rng)
                                 : cfg.desired_positions;
    env.noise_positions_ = cfg.noise_positions.empty()
                               ? place_sources(cfg.n_noise_sources, env.sensor_positions_, cfg, rng)
                               : cfg.noise_positions;
    for (double f : env.frequencies_) {
      env.desired_steering_.push_back(free_field_steering(env.sensor_positions_, env.desired_positions_, f));
      env.noise_steering_.push_back(free_field_steering(env.sensor_positions_, env.noise_positions_, f));
    }
    return env;
  }

  for (std::size_t b = 0; b < cfg.n_bins; ++b) {
    ComplexMat psi(env.total_sensors_, cfg.s_sources);
    for (std::size_t q = 0; q < cfg.k_nodes; ++q) {
      for (int draw = 0;; ++draw) {
        if (draw == kMaxSteeringRedraws)
          throw Error(ErrorCode::Singular, "could not draw full-rank reference steering");
        for (std::size_t m = 0; m < env.sensors_[q]; ++m)
          for (std::size_t s = 0; s < cfg.s_sources; ++s) psi(env.offsets_[q] + m, s) = complex_normal(rng);
        std::vector<std::size_t> rows;
        for (std::size_t t : env.targets_[q]) rows.push_back(env.offsets_[q] + t);
        if (singular_condition(psi.select_rows(rows)) <= kMaxSteeringCondition) break;
      }
    }
    ComplexMat noise(env.total_sensors_, cfg.n_noise_sources);
    for (auto& v : noise.entries()) v = complex_normal(rng);
    env.desired_steering_.push_back(std::move(psi));
    env.noise_steering_.push_back(std::move(noise));
  }
  return env;
}

ScmSet theoretical_scms(const SensingEnvironment& env) {
  ScmSet out;
  const std::size_t m = env.total_sensors();
  for (std::size_t b = 0; b < env.n_bins(); ++b) {
    const ComplexMat& psi = env.desired_steering(b);
    const ComplexMat& psn = env.noise_steering(b);
    ComplexMat rss = hermitian_part(psi * diagonal(env.desired_powers()) * psi.adjoint());
    ComplexMat rnn(m, m);
    if (psn.cols() > 0) rnn = psn * diagonal(env.noise_powers()) * psn.adjoint();
    for (std::size_t i = 0; i < m; ++i) rnn(i, i) += env.self_noise_power();
    rnn = hermitian_part(rnn);
    out.ryy.push_back(rss + rnn);
    out.rss.push_back(std::move(rss));
    out.rnn.push_back(std::move(rnn));
  }
  return out;
}

std::vector<cplx> SensorFrame::mixture() const {
  std::vector<cplx> y(desired.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = desired[i] + noise[i];
  return y;
}

bool gate_active(std::size_t frame, double activity_duty) {
  const auto on = static_cast<std::size_t>(std::lround(activity_duty * static_cast<double>(kGatePeriod)));
  return frame % kGatePeriod < on;
}

FrameStream::FrameStream(const SensingEnvironment& env, std::size_t bin, double activity_duty, std::uint64_t seed)
    : env_(&env), bin_(bin), duty_(activity_duty), rng_(derive_seed(seed, {bin})) {
  if (bin >= env.n_bins()) throw Error(ErrorCode::DimensionMismatch, "bin index out of range");
  require(activity_duty > 0.0 && activity_duty < 1.0, "activity_duty must lie in (0, 1)");
}

SensorFrame FrameStream::next() {
  const ComplexMat& psi = env_->desired_steering(bin_);
  const ComplexMat& psn = env_->noise_steering(bin_);
  const std::size_t m = env_->total_sensors();
  SensorFrame f;
  f.vad = gate_active(index_++, duty_);
  // Every draw happens regardless of the gate so streams stay aligned.
  latent_.assign(psi.cols(), 0.0);
  for (std::size_t s = 0; s < psi.cols(); ++s) {
    const cplx v = std::sqrt(env_->desired_powers()[s]) * complex_normal(rng_);
    if (f.vad) latent_[s] = v;
  }
  std::vector<cplx> noise_latent(psn.cols());
  for (std::size_t j = 0; j < psn.cols(); ++j) noise_latent[j] = std::sqrt(env_->noise_powers()[j]) * complex_normal(rng_);
  f.desired.assign(m, 0.0);
  f.noise.assign(m, 0.0);
  const double self_std = std::sqrt(env_->self_noise_power());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t s = 0; s < psi.cols(); ++s) f.desired[i] += psi(i, s) * latent_[s];
    for (std::size_t j = 0; j < psn.cols(); ++j) f.noise[i] += psn(i, j) * noise_latent[j];
    f.noise[i] += self_std * complex_normal(rng_);
  }
  return f;
}

std::vector<double> interior_istft(std::span<const std::vector<cplx>> bin_frames, std::size_t frame_len) {
  const std::size_t frames = bin_frames.empty() ? 0 : bin_frames.front().size();
  if (bin_frames.size() + 2 != frame_len / 2 + 1)
    throw Error(ErrorCode::DimensionMismatch, "interior bin count does not match the frame length");
  ComplexMat spectra(frame_len / 2 + 1, frames);
  for (std::size_t b = 0; b < bin_frames.size(); ++b) {
    if (bin_frames[b].size() != frames) throw Error(ErrorCode::DimensionMismatch, "ragged bin frames");
    for (std::size_t t = 0; t < frames; ++t) spectra(b + 1, t) = bin_frames[b][t];
  }
  return istft(spectra, frame_len);
}

SignalBlock synthesize_signals(const SensingEnvironment& env, std::size_t duration_frames,
                               double activity_duty, std::uint64_t seed) {
  SignalBlock block;
  block.frame_len = frame_length_for_bins(env.n_bins());
  const std::size_t m = env.total_sensors();
  const std::size_t s = env.desired_powers().size();
  for (std::size_t t = 0; t < duration_frames; ++t) block.vad.push_back(gate_active(t, activity_duty));
  for (std::size_t b = 0; b < env.n_bins(); ++b) {
    FrameStream stream(env, b, activity_duty, seed);
    ComplexMat des(m, duration_frames), noi(m, duration_frames), lat(s, duration_frames);
    for (std::size_t t = 0; t < duration_frames; ++t) {
      const SensorFrame f = stream.next();
      for (std::size_t i = 0; i < m; ++i) {
        des(i, t) = f.desired[i];
        noi(i, t) = f.noise[i];
      }
      for (std::size_t k = 0; k < s; ++k) lat(k, t) = stream.last_latent()[k];
    }
    block.desired_frames.push_back(std::move(des));
    block.noise_frames.push_back(std::move(noi));
    block.latent_frames.push_back(std::move(lat));
  }
  if (duration_frames == 0) {
    block.samples.assign(m, {});
    return block;
  }
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<std::vector<cplx>> per_bin(env.n_bins(), std::vector<cplx>(duration_frames));
    for (std::size_t b = 0; b < env.n_bins(); ++b)
      for (std::size_t t = 0; t < duration_frames; ++t)
        per_bin[b][t] = block.desired_frames[b](i, t) + block.noise_frames[b](i, t);
    block.samples.push_back(interior_istft(per_bin, block.frame_len));
  }
  return block;
}

OnlineScmEstimator::OnlineScmEstimator(std::size_t dim, double beta) : ryy_(dim, dim), rnn_(dim, dim), beta_(beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "forgetting factor must lie in [0, 1]");
}

void OnlineScmEstimator::update(std::span<const cplx> frame, bool vad_on) {
  const std::size_t n = dim();
  if (frame.size() != n) throw Error(ErrorCode::DimensionMismatch, "frame length does not match estimator");
  ComplexMat& r = vad_on ? ryy_ : rnn_;
  const double keep = beta_, add = 1.0 - beta_;
  for (std::size_t i = 0; i < n; ++i) {
    r(i, i) = keep * r(i, i).real() + add * std::norm(frame[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      r(i, j) = keep * r(i, j) + add * frame[i] * std::conj(frame[j]);
      r(j, i) = std::conj(r(i, j));
    }
  }
  ++(vad_on ? count_yy_ : count_nn_);
}

void OnlineScmEstimator::reset() {
  ryy_ = ComplexMat(dim(), dim());
  rnn_ = ComplexMat(dim(), dim());
  count_yy_ = count_nn_ = 0;
}

namespace {
ComplexMat unbias(const ComplexMat& r, double beta, std::size_t count) {
  const double mass = 1.0 - std::pow(beta, static_cast<double>(count));
  if (!(mass > 0.0)) return r;
  return (1.0 / mass) * r;
}
}  // namespace

ComplexMat OnlineScmEstimator::ryy_unbiased() const { return unbias(ryy_, beta_, count_yy_); }
ComplexMat OnlineScmEstimator::rnn_unbiased() const { return unbias(rnn_, beta_, count_nn_); }

std::string environment_to_json(const SensingEnvironment& env) {
  nlohmann::json j;
  j["seed"] = env.seed();
  j["config"] = config_json(env.config());
  j["geometry"] = {{"nodes", points_json(env.graph().positions())},
                   {"sensors", points_json(env.sensor_positions())},
                   {"desired_sources", points_json(env.desired_positions())},
                   {"noise_sources", points_json(env.noise_positions())}};
  j["desired_powers"] = env.desired_powers();
  j["noise_powers"] = env.noise_powers();
  j["self_noise_power"] = env.self_noise_power();
  j["bin_frequencies"] = env.bin_frequencies();
  return j.dump();
}

SensingEnvironment environment_from_json(std::string_view text) {
  return parse_json(text, "environment json", [](const nlohmann::json& j) {
    return build_environment(config_from(j.at("config")), j.at("seed").get<std::uint64_t>());
  });
}

std::string scenario_config_to_json(const ScenarioConfig& config) { return config_json(config).dump(); }

ScenarioConfig scenario_config_from_json(std::string_view text) {
  return parse_json(text, "scenario json", [](const nlohmann::json& j) { return config_from(j); });
}

}  // namespace tidanse
