#include "tidanse/stft.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "tidanse/error.hpp"

namespace tidanse {

namespace {

// FFTW's planner is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n),
        time_(fftw_alloc_real(n)),
        freq_(fftw_alloc_complex(n / 2 + 1)) {
    std::lock_guard lock(planner_mutex());
    const int len = static_cast<int>(n);
    forward_ = fftw_plan_dft_r2c_1d(len, time_, freq_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(len, freq_, time_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(forward_);
      fftw_destroy_plan(inverse_);
    }
    fftw_free(time_);
    fftw_free(freq_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* time() { return time_; }
  fftw_complex* freq() { return freq_; }
  void forward() { fftw_execute(forward_); }
  // Unnormalized: the caller divides by n.
  void inverse() { fftw_execute(inverse_); }

 private:
  std::size_t n_;
  double* time_;
  fftw_complex* freq_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

void check_frame_len(std::size_t frame_len) {
  if (frame_len < 2 || frame_len % 2 != 0)
    throw Error(ErrorCode::ConfigInvalid, "frame length must be even and at least 2");
}

}  // namespace

std::vector<double> sqrt_hann(std::size_t frame_len) {
  std::vector<double> w(frame_len);
  for (std::size_t n = 0; n < frame_len; ++n)
    w[n] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                          static_cast<double>(frame_len)));
  return w;
}

std::size_t frame_count(std::size_t samples, std::size_t frame_len) {
  check_frame_len(frame_len);
  if (samples < frame_len) return 0;
  return (samples - frame_len) / (frame_len / 2) + 1;
}

ComplexMat stft(std::span<const double> signal, std::size_t frame_len) {
  check_frame_len(frame_len);
  if (signal.size() < frame_len)
    throw Error(ErrorCode::SignalTooShort, "signal shorter than one frame");
  const std::size_t hop = frame_len / 2;
  const std::size_t frames = frame_count(signal.size(), frame_len);
  const std::size_t bins = frame_len / 2 + 1;
  const std::vector<double> w = sqrt_hann(frame_len);
  RealFft fft(frame_len);
  ComplexMat out(bins, frames);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t n = 0; n < frame_len; ++n) fft.time()[n] = w[n] * signal[t * hop + n];
    fft.forward();
    for (std::size_t b = 0; b < bins; ++b) out(b, t) = cplx(fft.freq()[b][0], fft.freq()[b][1]);
  }
  return out;
}

std::vector<double> istft(const ComplexMat& spectra, std::size_t frame_len) {
  check_frame_len(frame_len);
  const std::size_t bins = frame_len / 2 + 1;
  if (spectra.rows() != bins)
    throw Error(ErrorCode::DimensionMismatch, "spectrum rows must equal frame_len/2 + 1");
  const std::size_t frames = spectra.cols();
  if (frames == 0) return {};
  const std::size_t hop = frame_len / 2;
  const std::vector<double> w = sqrt_hann(frame_len);
  RealFft fft(frame_len);
  std::vector<double> out((frames - 1) * hop + frame_len, 0.0);
  const double scale = 1.0 / static_cast<double>(frame_len);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t b = 0; b < bins; ++b) {
      fft.freq()[b][0] = spectra(b, t).real();
      fft.freq()[b][1] = spectra(b, t).imag();
    }
    fft.inverse();
    for (std::size_t n = 0; n < frame_len; ++n) out[t * hop + n] += scale * w[n] * fft.time()[n];
  }
  return out;
}

}  // namespace tidanse
