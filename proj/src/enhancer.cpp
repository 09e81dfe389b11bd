#include "udase/enhancer.hpp"

#include <cmath>
#include <stdexcept>

#include "udase/fft.hpp"
#include "udase/metrics.hpp"

namespace udase {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Band index for FFT bin k of an N-point spectrum (N even), symmetric in
// k <-> N-k so masked spectra stay conjugate-symmetric.
int band_of_bin(std::size_t k, std::size_t n, int bands) {
  std::size_t half = n / 2;
  if (k > half) k = n - k;
  if (k == 0) return 0;
  int b = static_cast<int>((k - 1) * static_cast<std::size_t>(bands) / half);
  return std::min(b, bands - 1);
}

// d si_sdr(est, ref) / d est; zero when the value is clipped.
std::vector<double> si_sdr_grad(const Waveform& est, const Waveform& ref) {
  const std::size_t n = est.size();
  std::vector<double> g(n, 0.0);
  const double ref_energy = energy(ref);
  double dot = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    dot += est.samples[i] * ref.samples[i];
  const double alpha = dot / ref_energy;
  const double target_energy = alpha * alpha * ref_energy;
  double err_energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double e = est.samples[i] - alpha * ref.samples[i];
    err_energy += e * e;
  }
  if (err_energy < 1e-12 * target_energy ||
      target_energy < 1e-12 * err_energy)
    return g;  // value sits at a cap
  const double value = 10.0 * std::log10(target_energy / err_energy);
  if (value >= kSiSdrCapDb || value <= -kSiSdrCapDb) return g;

  const double c = 20.0 / std::log(10.0);
  for (std::size_t i = 0; i < n; ++i) {
    double e = est.samples[i] - alpha * ref.samples[i];
    g[i] = c * (ref.samples[i] / (alpha * ref_energy) - e / err_energy);
  }
  return g;
}

}  // namespace

GainEnhancer::GainEnhancer(int bands, double initial_logit)
    : bands_(bands), theta_(static_cast<std::size_t>(bands), initial_logit) {
  if (bands < 1) throw std::invalid_argument("GainEnhancer: bands < 1");
}

void GainEnhancer::set_params(const std::vector<double>& theta) {
  if (theta.size() != theta_.size())
    throw std::invalid_argument("GainEnhancer: parameter dimension mismatch");
  theta_ = theta;
}

std::vector<double> GainEnhancer::gains() const {
  std::vector<double> g(theta_.size());
  for (std::size_t b = 0; b < theta_.size(); ++b) g[b] = logistic(theta_[b]);
  return g;
}

std::pair<Waveform, Waveform> GainEnhancer::enhance(
    const Waveform& mix) const {
  const std::size_t len = mix.size();
  if (len == 0) throw AudioError("GainEnhancer: empty input");
  const std::size_t n2 = next_pow2(len);
  std::vector<std::complex<double>> spec(n2, 0.0);
  for (std::size_t i = 0; i < len; ++i) spec[i] = mix.samples[i];
  fft(spec, false);

  const std::vector<double> g = gains();
  for (std::size_t k = 0; k < n2; ++k)
    spec[k] *= g[static_cast<std::size_t>(band_of_bin(k, n2, bands_))];
  fft(spec, true);

  Waveform speech;
  speech.sample_rate = mix.sample_rate;
  speech.samples.resize(len);
  for (std::size_t i = 0; i < len; ++i) speech.samples[i] = spec[i].real();

  Waveform noise;
  noise.sample_rate = mix.sample_rate;
  noise.samples.resize(len);
  for (std::size_t i = 0; i < len; ++i)
    noise.samples[i] = mix.samples[i] - speech.samples[i];
  return {std::move(speech), std::move(noise)};
}

std::optional<std::vector<double>> GainEnhancer::loss_gradient(
    const Waveform& mix, const Waveform& speech_target,
    const Waveform& noise_target) const {
  const std::size_t len = mix.size();
  auto [speech_est, noise_est] = enhance(mix);

  // Loss = -0.5 (V_s + V_n) with n_est = mix - s_est, so
  // dLoss/ds_est = -0.5 (dV_s/ds_est - dV_n/dn_est).
  std::vector<double> gs = si_sdr_grad(speech_est, speech_target);
  std::vector<double> gn = si_sdr_grad(noise_est, noise_target);
  std::vector<double> g(len);
  for (std::size_t i = 0; i < len; ++i) g[i] = -0.5 * (gs[i] - gn[i]);

  // ds_est/d gain_b is the band-restricted component of the mixture; the
  // inner products <g, x_b> are accumulated per band in the frequency
  // domain (Parseval).
  const std::size_t n2 = next_pow2(len);
  std::vector<std::complex<double>> X(n2, 0.0), G(n2, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    X[i] = mix.samples[i];
    G[i] = g[i];
  }
  fft(X, false);
  fft(G, false);

  std::vector<double> band_dot(static_cast<std::size_t>(bands_), 0.0);
  for (std::size_t k = 0; k < n2; ++k) {
    const int b = band_of_bin(k, n2, bands_);
    band_dot[static_cast<std::size_t>(b)] +=
        (std::conj(G[k]) * X[k]).real();
  }
  const std::vector<double> m = gains();
  std::vector<double> grad(static_cast<std::size_t>(bands_));
  for (std::size_t b = 0; b < grad.size(); ++b)
    grad[b] = m[b] * (1.0 - m[b]) * band_dot[b] / static_cast<double>(n2);
  return grad;
}

}  // namespace udase
