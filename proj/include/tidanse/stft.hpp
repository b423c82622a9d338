#pragma once

// Short-time Fourier transform with a sqrt-Hann analysis/synthesis window
// pair and 50% overlap (weighted overlap-add).

#include <cstddef>
#include <span>
#include <vector>

#include "tidanse/linalg.hpp"

namespace tidanse {

/// Periodic sqrt-Hann window of length frame_len.
std::vector<double> sqrt_hann(std::size_t frame_len);

/// Number of frames produced for `samples` input samples.
std::size_t frame_count(std::size_t samples, std::size_t frame_len);

/// Returns a (frame_len/2 + 1) x frames matrix of one-sided spectra.
/// Throws SignalTooShort when fewer than frame_len samples are given.
ComplexMat stft(std::span<const double> signal, std::size_t frame_len);

/// Inverse of stft: (frames - 1) * hop + frame_len samples.
std::vector<double> istft(const ComplexMat& spectra, std::size_t frame_len);

}  // namespace tidanse
