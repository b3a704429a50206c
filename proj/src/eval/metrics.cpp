#include "smoothsinger/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include "smoothsinger/dsp/fft.hpp"
#include "smoothsinger/errors.hpp"

namespace smoothsinger::eval {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_equal_lengths(const Waveform& a, const Waveform& b, const char* what) {
  if (a.size() != b.size())
    throw ValidationError(std::string(what) + ": lengths differ (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
}

// Symmetric Hann without its zero end points (length n + 2 window, trimmed).
std::vector<double> inner_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i + 1) / static_cast<double>(n + 1));
  return w;
}

double norm2(const double* x, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return std::sqrt(s);
}

}  // namespace

double snr(const Waveform& reference, const Waveform& test) {
  require_equal_lengths(reference, test, "snr");
  double signal = 0, error = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    signal += reference.samples[i] * reference.samples[i];
    const double d = reference.samples[i] - test.samples[i];
    error += d * d;
  }
  if (signal == 0) throw ValidationError("snr: reference has zero energy");
  if (error == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / error);
}

double log_spectral_distance(const Waveform& x, const Waveform& y, const dsp::MelConfig& mel) {
  require_equal_lengths(x, y, "log_spectral_distance");
  const auto a = dsp::mel_spectrogram(x, mel), b = dsp::mel_spectrogram(y, mel);
  double acc = 0;
  for (std::size_t i = 0; i < a.magnitudes.size(); ++i) {
    const double d = 20.0 * std::log10(std::max(a.magnitudes[i], 1e-5)) - 20.0 * std::log10(std::max(b.magnitudes[i], 1e-5));
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.magnitudes.size()));
}

std::vector<double> resample_poly(const std::vector<double>& x, std::size_t up, std::size_t down) {
  if (up == 0 || down == 0) throw ValidationError("resample_poly: rates must be positive");
  const std::size_t g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1) return x;
  const std::size_t m = std::max(up, down), half = 10 * m, taps = 2 * half + 1;
  const double fc = 1.0 / static_cast<double>(m), beta = 5.0;
  std::vector<double> h(taps);
  double sum = 0;
  for (std::size_t n = 0; n < taps; ++n) {
    const double t = static_cast<double>(n) - static_cast<double>(half);
    const double arg = fc * t;
    const double sinc = arg == 0 ? 1.0 : std::sin(M_PI * arg) / (M_PI * arg);
    const double r = t / static_cast<double>(half);
    const double kaiser = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / std::cyl_bessel_i(0.0, beta);
    h[n] = fc * sinc * kaiser;
    sum += h[n];
  }
  for (auto& v : h) v *= static_cast<double>(up) / sum;

  const std::size_t out_len = (x.size() * up + down - 1) / down;
  std::vector<double> y(out_len, 0.0);
  const auto upsampled = static_cast<long>(x.size() * up);
  for (std::size_t o = 0; o < out_len; ++o) {
    // y[o] = sum_k h[k] * xu[o * down + half - k], xu nonzero only at multiples of up.
    const long centre = static_cast<long>(o * down + half);
    const long k_lo = std::max(0L, centre - upsampled + 1), k_hi = std::min(static_cast<long>(taps) - 1, centre);
    long k = k_lo + ((centre - k_lo) % static_cast<long>(up));
    double acc = 0;
    for (; k <= k_hi; k += static_cast<long>(up)) acc += h[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>((centre - k) / static_cast<long>(up))];
    y[o] = acc;
  }
  return y;
}

double stoi(const Waveform& clean, const Waveform& processed) {
  require_equal_lengths(clean, processed, "stoi");
  dsp::validate(clean);
  dsp::validate(processed);
  constexpr double fs = 10000.0;
  constexpr std::size_t frame = 256, hop = 128, nfft = 512, bands = 15, seg = 30;
  constexpr double min_freq = 150.0, beta = -15.0, dyn_range = 40.0;
  const auto rate = static_cast<std::size_t>(std::lround(clean.sample_rate));
  if (static_cast<double>(rate) != clean.sample_rate || clean.sample_rate != processed.sample_rate)
    throw ValidationError("stoi: sample rates must be equal integers");
  const std::vector<double> x = resample_poly(clean.samples, 10000, rate);
  const std::vector<double> y = resample_poly(processed.samples, 10000, rate);

  // Drop frames of the clean signal more than dyn_range below its loudest frame.
  const auto w = inner_hann(frame);
  std::vector<std::vector<double>> xf, yf;
  std::vector<double> energy;
  for (std::size_t i = 0; i + frame < x.size(); i += hop) {
    std::vector<double> a(frame), b(frame);
    for (std::size_t k = 0; k < frame; ++k) {
      a[k] = w[k] * x[i + k];
      b[k] = w[k] * y[i + k];
    }
    energy.push_back(20.0 * std::log10(norm2(a.data(), frame) + kEps));
    xf.push_back(std::move(a));
    yf.push_back(std::move(b));
  }
  const std::string need = "stoi needs at least 384 ms of non-silent audio (" + std::to_string(seg) +
                           " frames of 12.8 ms at 10 kHz)";
  if (energy.empty()) throw ValidationError(need);
  const double loudest = *std::max_element(energy.begin(), energy.end());
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < energy.size(); ++i)
    if (loudest - dyn_range - energy[i] < 0) keep.push_back(i);
  const std::size_t sil_len = keep.empty() ? 0 : (keep.size() - 1) * hop + frame;
  std::vector<double> xs(sil_len, 0.0), ys(sil_len, 0.0);
  for (std::size_t j = 0; j < keep.size(); ++j)
    for (std::size_t k = 0; k < frame; ++k) {
      xs[j * hop + k] += xf[keep[j]][k];
      ys[j * hop + k] += yf[keep[j]][k];
    }

  // Third-octave band energies per STFT frame.
  const std::size_t bins = nfft / 2 + 1;
  std::vector<std::pair<std::size_t, std::size_t>> band_bins(bands);
  for (std::size_t b = 0; b < bands; ++b) {
    const double lo = min_freq * std::pow(2.0, (2.0 * static_cast<double>(b) - 1.0) / 6.0);
    const double hi = min_freq * std::pow(2.0, (2.0 * static_cast<double>(b) + 1.0) / 6.0);
    auto nearest = [&](double f) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < bins; ++k)
        if (std::abs(static_cast<double>(k) * fs / nfft - f) < std::abs(static_cast<double>(best) * fs / nfft - f)) best = k;
      return best;
    };
    band_bins[b] = {nearest(lo), nearest(hi)};
  }
  auto band_envelopes = [&](const std::vector<double>& s) {
    std::vector<std::vector<double>> tob(bands);
    std::vector<double> buf(nfft);
    std::vector<std::complex<double>> spec(bins);
    for (std::size_t i = 0; i + frame < s.size(); i += hop) {
      std::fill(buf.begin(), buf.end(), 0.0);
      for (std::size_t k = 0; k < frame; ++k) buf[k] = w[k] * s[i + k];
      dsp::real_fft(buf, spec);
      for (std::size_t b = 0; b < bands; ++b) {
        double e = 0;
        for (std::size_t k = band_bins[b].first; k < band_bins[b].second; ++k) e += std::norm(spec[k]);
        tob[b].push_back(std::sqrt(e));
      }
    }
    return tob;
  };
  const auto xt = band_envelopes(xs), yt = band_envelopes(ys);
  const std::size_t frames = xt[0].size();
  if (frames < seg) throw ValidationError(need + "; got " + std::to_string(frames) + " frames");

  const double clip = std::pow(10.0, -beta / 20.0);
  double total = 0;
  std::size_t count = 0;
  std::vector<double> xv(seg), yv(seg);
  for (std::size_t m = seg; m <= frames; ++m) {
    for (std::size_t b = 0; b < bands; ++b) {
      for (std::size_t n = 0; n < seg; ++n) {
        xv[n] = xt[b][m - seg + n];
        yv[n] = yt[b][m - seg + n];
      }
      const double scale = norm2(xv.data(), seg) / (norm2(yv.data(), seg) + kEps);
      for (std::size_t n = 0; n < seg; ++n) yv[n] = std::min(yv[n] * scale, xv[n] * (1.0 + clip));
      const double mx = std::accumulate(xv.begin(), xv.end(), 0.0) / seg;
      const double my = std::accumulate(yv.begin(), yv.end(), 0.0) / seg;
      for (std::size_t n = 0; n < seg; ++n) {
        xv[n] -= mx;
        yv[n] -= my;
      }
      const double nx = norm2(xv.data(), seg) + kEps, ny = norm2(yv.data(), seg) + kEps;
      double c = 0;
      for (std::size_t n = 0; n < seg; ++n) c += (xv[n] / nx) * (yv[n] / ny);
      total += c;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

std::vector<double> estimate_f0(const Waveform& x, const F0Options& o) {
  const double sr = x.sample_rate;
  if (o.hop == 0 || !(o.min_hz > 0) || !(o.max_hz > o.min_hz)) throw ValidationError("estimate_f0: bad options");
  const auto lag_min = static_cast<std::size_t>(std::floor(sr / o.max_hz));
  const auto lag_max = static_cast<std::size_t>(std::ceil(sr / o.min_hz));
  if (o.frame < 2 * lag_max)
    throw ValidationError("estimate_f0: frame of " + std::to_string(o.frame) + " samples is shorter than two periods of " +
                          std::to_string(o.min_hz) + " Hz");
  std::vector<double> out;
  if (x.size() < o.frame) return out;
  std::vector<double> r(lag_max + 2, 0.0);
  for (std::size_t start = 0; start + o.frame <= x.size(); start += o.hop) {
    const double* s = x.samples.data() + start;
    // Prefix energies make the per-lag normalisation O(1).
    std::vector<double> prefix(o.frame + 1, 0.0);
    for (std::size_t n = 0; n < o.frame; ++n) prefix[n + 1] = prefix[n] + s[n] * s[n];
    for (std::size_t lag = lag_min > 0 ? lag_min - 1 : 0; lag <= lag_max + 1 && lag < o.frame; ++lag) {
      const std::size_t n = o.frame - lag;
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) acc += s[i] * s[i + lag];
      const double e = std::sqrt(prefix[n] * (prefix[o.frame] - prefix[lag]));
      r[lag] = e > 0 ? acc / e : 0.0;
    }
    double best = -1;
    std::vector<std::size_t> peaks;
    for (std::size_t lag = std::max<std::size_t>(lag_min, 1); lag <= lag_max; ++lag)
      if (r[lag] >= r[lag - 1] && r[lag] > r[lag + 1]) {
        peaks.push_back(lag);
        best = std::max(best, r[lag]);
      }
    if (peaks.empty() || best < o.voicing_threshold) {
      out.push_back(0.0);
      continue;
    }
    std::size_t lag = peaks.front();
    for (std::size_t p : peaks)
      if (r[p] >= 0.9 * best) {
        lag = p;
        break;
      }
    const double a = r[lag - 1], b = r[lag], c = r[lag + 1];
    const double denom = a - 2 * b + c;
    const double shift = denom != 0 ? std::clamp(0.5 * (a - c) / denom, -0.5, 0.5) : 0.0;
    out.push_back(sr / (static_cast<double>(lag) + shift));
  }
  return out;
}

}  // namespace smoothsinger::eval
