#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "udase/metrics.hpp"

namespace udase {

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;

  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> y(x.size());
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double yi = b0 * x[i] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = x[i];
      y2 = y1;
      y1 = yi;
      y[i] = yi;
    }
    return y;
  }
};

// K-weighting stage 1: +4 dB high shelf at 1500 Hz, Q = 1/sqrt(2),
// re-derived for the working sample rate from the analog prototype.
Biquad k_high_shelf(double fs) {
  const double G = 4.0, Q = 1.0 / std::sqrt(2.0), fc = 1500.0;
  const double A = std::pow(10.0, G / 40.0);
  const double w0 = 2.0 * std::numbers::pi * fc / fs;
  const double alpha = std::sin(w0) / (2.0 * Q);
  const double c = std::cos(w0), sA = std::sqrt(A);
  const double a0 = (A + 1) - (A - 1) * c + 2 * sA * alpha;
  return {A * ((A + 1) + (A - 1) * c + 2 * sA * alpha) / a0,
          -2 * A * ((A - 1) + (A + 1) * c) / a0,
          A * ((A + 1) + (A - 1) * c - 2 * sA * alpha) / a0,
          2 * ((A - 1) - (A + 1) * c) / a0,
          ((A + 1) - (A - 1) * c - 2 * sA * alpha) / a0};
}

// K-weighting stage 2: high pass at 38 Hz, Q = 0.5.
Biquad k_high_pass(double fs) {
  const double Q = 0.5, fc = 38.0;
  const double w0 = 2.0 * std::numbers::pi * fc / fs;
  const double alpha = std::sin(w0) / (2.0 * Q);
  const double c = std::cos(w0);
  const double a0 = 1 + alpha;
  return {(1 + c) / 2 / a0, -(1 + c) / a0, (1 + c) / 2 / a0,
          -2 * c / a0, (1 - alpha) / a0};
}

constexpr double kLoudnessOffset = -0.691;
constexpr double kAbsoluteGate = -70.0;

double block_loudness(double mean_square) {
  if (mean_square <= 0.0) return -std::numeric_limits<double>::infinity();
  return kLoudnessOffset + 10.0 * std::log10(mean_square);
}

}  // namespace

LoudnessMeasurement integrated_loudness(const Waveform& w) {
  const double fs = w.sample_rate;
  const std::size_t block = static_cast<std::size_t>(std::lround(0.400 * fs));
  const std::size_t step = block / 4;  // 75% overlap
  if (w.size() < block)
    throw AudioError("integrated_loudness: input shorter than 400 ms");

  auto y = k_high_pass(fs).apply(k_high_shelf(fs).apply(w.samples));

  std::vector<double> z;  // per-block mean square
  for (std::size_t i = 0; i + block <= y.size(); i += step) {
    double acc = 0.0;
    for (std::size_t k = i; k < i + block; ++k) acc += y[k] * y[k];
    z.push_back(acc / static_cast<double>(block));
  }

  double sum = 0.0;
  std::size_t n = 0;
  for (double zi : z)
    if (block_loudness(zi) > kAbsoluteGate) {
      sum += zi;
      ++n;
    }
  LoudnessMeasurement out;
  if (n == 0) return out;

  const double relative_gate = block_loudness(sum / n) - 10.0;
  sum = 0.0;
  n = 0;
  for (double zi : z) {
    const double l = block_loudness(zi);
    if (l > kAbsoluteGate && l > relative_gate) {
      sum += zi;
      ++n;
    }
  }
  if (n == 0) return out;
  out.lufs = block_loudness(sum / n);
  out.gated_blocks = static_cast<int>(n);
  return out;
}

Waveform normalize_loudness(const Waveform& w, double target_lufs) {
  LoudnessMeasurement m = integrated_loudness(w);
  if (m.silent())
    throw AudioError("normalize_loudness: silent input (no gated blocks)");
  Waveform out = w;
  for (int pass = 0; pass < 3; ++pass) {
    const double gain = std::pow(10.0, (target_lufs - m.lufs) / 20.0);
    for (double& s : out.samples) s *= gain;
    m = integrated_loudness(out);
    if (m.silent())
      throw AudioError("normalize_loudness: signal vanished under gating");
    if (std::abs(m.lufs - target_lufs) <= 0.1) break;
  }
  return out;
}

}  // namespace udase
