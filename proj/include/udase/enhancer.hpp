// Pluggable enhancer interface and the band-gain reference implementation.

#ifndef UDASE_ENHANCER_HPP
#define UDASE_ENHANCER_HPP

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "udase/audio.hpp"

namespace udase {

// An enhancer maps a noisy mixture to (speech estimate, noise estimate),
// deterministically given its parameter vector.
class Enhancer {
 public:
  virtual ~Enhancer() = default;

  virtual std::string kind() const = 0;
  virtual std::vector<double> params() const = 0;
  virtual void set_params(const std::vector<double>& theta) = 0;
  virtual std::unique_ptr<Enhancer> clone() const = 0;

  virtual std::pair<Waveform, Waveform> enhance(const Waveform& mix) const = 0;

  // Analytic gradient of neg_si_sdr_loss(enhance(mix), targets) w.r.t. the
  // parameters. Enhancers without one return nullopt and training falls
  // back to finite differences.
  virtual std::optional<std::vector<double>> loss_gradient(
      const Waveform& mix, const Waveform& speech_target,
      const Waveform& noise_target) const {
    (void)mix;
    (void)speech_target;
    (void)noise_target;
    return std::nullopt;
  }
};

// Complementary per-band spectral gain: the padded FFT spectrum is split
// into `bands` contiguous bands, each scaled by logistic(theta_b); the
// noise estimate is the masking residual, so speech + noise == mixture
// exactly.
class GainEnhancer : public Enhancer {
 public:
  explicit GainEnhancer(int bands = 32, double initial_logit = 0.0);

  std::string kind() const override { return "gain"; }
  int bands() const { return bands_; }
  std::vector<double> params() const override { return theta_; }
  void set_params(const std::vector<double>& theta) override;
  std::unique_ptr<Enhancer> clone() const override {
    return std::make_unique<GainEnhancer>(*this);
  }

  std::pair<Waveform, Waveform> enhance(const Waveform& mix) const override;

  std::optional<std::vector<double>> loss_gradient(
      const Waveform& mix, const Waveform& speech_target,
      const Waveform& noise_target) const override;

  // Band gains in (0, 1).
  std::vector<double> gains() const;

 private:
  int bands_;
  std::vector<double> theta_;
};

}  // namespace udase

#endif  // UDASE_ENHANCER_HPP
