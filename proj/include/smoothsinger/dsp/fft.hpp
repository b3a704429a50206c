#pragma once

#include <complex>
#include <span>

namespace smoothsinger::dsp {

// Unnormalized real DFT of length n: spectrum has n/2 + 1 bins.
void real_fft(std::span<const double> input, std::span<std::complex<double>> spectrum);
// Inverse of real_fft including the 1/n factor.
void inverse_real_fft(std::span<const std::complex<double>> spectrum, std::span<double> output);

}  // namespace smoothsinger::dsp
