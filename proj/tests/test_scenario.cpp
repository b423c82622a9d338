#include <doctest.h>

#include <cmath>
#include <numbers>

#include "property_suites.hpp"
#include "test_support.hpp"
#include "tidanse/error.hpp"
#include "tidanse/scenario.hpp"
#include "tidanse/stft.hpp"

using namespace tidanse;
using namespace tidanse::testing;

namespace {

double interior_error(const std::vector<double>& x, const std::vector<double>& y, std::size_t frame_len) {
  const std::size_t hop = frame_len / 2;
  double num = 0.0, den = 0.0;
  for (std::size_t n = hop; n + hop < y.size(); ++n) {
    num += (x[n] - y[n]) * (x[n] - y[n]);
    den += x[n] * x[n];
  }
  return std::sqrt(num / den);
}

ScenarioConfig small_config() {
  ScenarioConfig c;
  c.k_nodes = 4;
  c.sensors_per_node = 2;
  c.n_noise_sources = 2;
  c.n_bins = 3;
  return c;
}

}  // namespace

TEST_CASE("stft round trip and Parseval") {
  const std::vector<double> ones(64, 1.0);
  CHECK(interior_error(ones, istft(stft(ones, 8), 8), 8) < 1e-10);

  Rng rng(1);
  std::normal_distribution<double> n01;
  std::vector<double> x(1024 * 20);
  for (double& v : x) v = n01(rng);
  const ComplexMat spec = stft(x, 1024);
  CHECK(spec.rows() == 513);
  CHECK(spec.cols() == frame_count(x.size(), 1024));
  CHECK(interior_error(x, istft(spec, 1024), 1024) < 1e-10);

  // Per frame, one-sided spectrum energy (doubled interior bins) over L equals
  // the windowed frame energy.
  const std::vector<double> w = sqrt_hann(1024);
  double freq_energy = 0.0, time_energy = 0.0;
  for (std::size_t t = 0; t < spec.cols(); ++t) {
    for (std::size_t b = 0; b < spec.rows(); ++b)
      freq_energy += (b == 0 || b == 512 ? 1.0 : 2.0) * std::norm(spec(b, t)) / 1024.0;
    for (std::size_t k = 0; k < 1024; ++k) time_energy += std::pow(w[k] * x[t * 512 + k], 2);
  }
  CHECK(std::abs(freq_energy - time_energy) < 1e-8 * time_energy);

  try {
    stft(std::vector<double>(7, 0.0), 8);
    FAIL("expected SignalTooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SignalTooShort);
  }
}

TEST_CASE("free-field steering: unit gain at 1 m and 0 Hz") {
  ScenarioConfig c;
  c.k_nodes = 1;
  c.sensors_per_node = 1;
  c.s_sources = 1;
  c.n_noise_sources = 0;
  c.n_bins = 1;
  c.steering = SteeringMode::FreeField;
  c.bin_frequencies = {0.0};
  c.node_positions = {{1.0, 1.0}};
  c.desired_positions = {{2.0, 1.0}};
  const SensingEnvironment env = build_environment(c, 3);
  CHECK(std::abs(env.desired_steering(0)(0, 0) - cplx(1.0, 0.0)) < 1e-15);

  c.bin_frequencies = {343.0};
  c.desired_positions = {{1.5, 1.0}};
  const SensingEnvironment half = build_environment(c, 3);
  // Half a wavelength away: gain 2 and phase pi.
  CHECK(std::abs(half.desired_steering(0)(0, 0) - cplx(-2.0, 0.0)) < 1e-12);
}

TEST_CASE("random-gaussian environments") {
  ScenarioConfig c;
  c.k_nodes = 10;
  c.sensors_per_node = 3;
  const SensingEnvironment env = build_environment(c, 7);
  CHECK(env.total_sensors() == 30);
  for (std::size_t b = 0; b < env.n_bins(); ++b)
    for (std::size_t q = 0; q < 10; ++q) CHECK(std::abs(env.reference_steering(q, b)(0, 0)) > 0.0);

  const SensingEnvironment again = build_environment(c, 7);
  for (std::size_t b = 0; b < env.n_bins(); ++b) {
    CHECK(env.desired_steering(b) == again.desired_steering(b));
    CHECK(env.noise_steering(b) == again.noise_steering(b));
  }
  CHECK(env.self_noise_power() == doctest::Approx(1e-2));

  ScenarioConfig bad = c;
  bad.q_dim = 4;
  CHECK_THROWS_AS(build_environment(bad, 1), Error);
  bad = c;
  bad.desired_powers = {-1.0};
  CHECK_THROWS_AS(build_environment(bad, 1), Error);
}

TEST_CASE("theoretical SCMs") {
  ScenarioConfig c;
  c.k_nodes = 1;
  c.sensors_per_node = 3;
  c.s_sources = 1;
  c.n_noise_sources = 0;
  c.n_bins = 1;
  c.self_noise_power = 0.1;
  c.steering = SteeringMode::FreeField;
  c.node_positions = {{0.0, 0.0}};
  c.desired_positions = {{3.0, 0.0}};
  const ScmSet scms = theoretical_scms(build_environment(c, 0));
  CHECK(rel_diff(scms.rnn[0], 0.1 * ComplexMat::identity(3)) < 1e-15);

  const SensingEnvironment env = build_environment(small_config(), 9);
  const ScmSet r = theoretical_scms(env);
  for (std::size_t b = 0; b < env.n_bins(); ++b) {
    CHECK(rel_diff(r.ryy[b], r.rss[b] + r.rnn[b]) < 1e-12);
    const GevdResult g = gevd(r.rss[b], ComplexMat::identity(env.total_sensors()));
    const double tr = r.rss[b].trace().real();
    std::size_t rank = 0;
    for (double s : g.sigmas) rank += s > 1e-10 * tr ? 1 : 0;
    CHECK(rank == 1);
  }
}

TEST_CASE("signal synthesis") {
  ScenarioConfig c = small_config();
  const SensingEnvironment env = build_environment(c, 4);
  const SignalBlock block = synthesize_signals(env, 100, 0.5, 5);
  std::size_t on = 0;
  for (bool v : block.vad) on += v ? 1 : 0;
  CHECK(on == 50);
  CHECK(block.samples.size() == env.total_sensors());
  CHECK(frame_count(block.samples[0].size(), block.frame_len) == block.frames());

  const SignalBlock longer = synthesize_signals(env, 10000, 0.5, 6);
  double power = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < longer.frames(); ++t)
    if (longer.vad[t]) {
      power += std::norm(longer.latent_frames[0](0, t));
      ++count;
    }
  CHECK(std::abs(power / static_cast<double>(count) - 1.0) < 0.1);

  c.desired_powers = {1e-300};
  c.noise_powers = {1e-300, 1e-300};
  c.self_noise_power = 1.0;
  const SensingEnvironment quiet = build_environment(c, 4);
  const SignalBlock q = synthesize_signals(quiet, 10000, 0.5, 7);
  for (std::size_t i = 0; i < quiet.total_sensors(); ++i) {
    double var = 0.0;
    for (std::size_t t = 0; t < q.frames(); ++t) var += std::norm(q.noise_frames[1](i, t) + q.desired_frames[1](i, t));
    CHECK(std::abs(var / static_cast<double>(q.frames()) - 1.0) < 0.1);
  }
}

TEST_CASE("online SCM estimator") {
  const std::vector<cplx> f{cplx(1, 2), cplx(-0.5, 0.25)};
  OnlineScmEstimator memoryless(2, 0.0);
  memoryless.update(f, true);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(memoryless.ryy()(i, j) == f[i] * std::conj(f[j]));
  CHECK(memoryless.count_yy() == 1);
  CHECK(memoryless.count_nn() == 0);
  CHECK(memoryless.rnn().frobenius_norm() == 0.0);

  OnlineScmEstimator frozen(2, 1.0);
  for (int i = 0; i < 5; ++i) frozen.update(f, i % 2 == 0);
  CHECK(frozen.ryy().frobenius_norm() == 0.0);
  CHECK(frozen.rnn().frobenius_norm() == 0.0);

  CHECK_THROWS_AS(frozen.update(std::vector<cplx>(3), true), Error);

  Rng rng(12);
  const ComplexMat truth = random_pd(4, rng);
  const ComplexMat l = cholesky(truth);
  OnlineScmEstimator est(4, 0.99);
  for (int t = 0; t < 10000; ++t) {
    const ComplexMat y = l * random_matrix(4, 1, rng);
    est.update(y.entries(), true);
  }
  CHECK(rel_diff(est.ryy(), truth) < 0.15);
  CHECK(is_hermitian(est.ryy()));
}

TEST_CASE("environment json regenerates steering") {
  const SensingEnvironment env = build_environment(small_config(), 21);
  const SensingEnvironment back = environment_from_json(environment_to_json(env));
  CHECK(back.seed() == 21);
  for (std::size_t b = 0; b < env.n_bins(); ++b) CHECK(back.desired_steering(b) == env.desired_steering(b));
  CHECK_THROWS_AS(environment_from_json("{}"), Error);
}

TEST_CASE("scenario property suites") {
  for (const auto& r : scenario_properties(20, 3)) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.passed);
  }
}
