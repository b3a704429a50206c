#include "smoothsinger/dsp/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "smoothsinger/errors.hpp"

namespace smoothsinger::dsp {

namespace {

struct Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

// Planning is not thread-safe in FFTW; execution with the new-array API is.
const Plans& plans_for(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, Plans> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> real(n);
  std::vector<fftw_complex> spec(n / 2 + 1);
  const int size = static_cast<int>(n);
  Plans p;
  p.forward = fftw_plan_dft_r2c_1d(size, real.data(), spec.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.inverse = fftw_plan_dft_c2r_1d(size, spec.data(), real.data(),
                                   FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
  if (!p.forward || !p.inverse) throw RuntimeError("FFTW planning failed for size " + std::to_string(n));
  return cache.emplace(n, p).first->second;
}

}  // namespace

void real_fft(std::span<const double> input, std::span<std::complex<double>> spectrum) {
  const std::size_t n = input.size();
  if (n == 0 || spectrum.size() != n / 2 + 1) throw ValidationError("real_fft: spectrum must have n/2+1 bins");
  std::vector<double> buffer(input.begin(), input.end());
  fftw_execute_dft_r2c(plans_for(n).forward, buffer.data(), reinterpret_cast<fftw_complex*>(spectrum.data()));
}

void inverse_real_fft(std::span<const std::complex<double>> spectrum, std::span<double> output) {
  const std::size_t n = output.size();
  if (n == 0 || spectrum.size() != n / 2 + 1)
    throw ValidationError("inverse_real_fft: spectrum must have n/2+1 bins");
  std::vector<std::complex<double>> buffer(spectrum.begin(), spectrum.end());
  fftw_execute_dft_c2r(plans_for(n).inverse, reinterpret_cast<fftw_complex*>(buffer.data()), output.data());
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& v : output) v *= inv;
}

}  // namespace smoothsinger::dsp
