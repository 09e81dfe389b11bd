// RemixIT self-supervised domain adaptation: teacher pseudo-labels,
// noise-permutation remixing, student SI-SDR training, EMA teacher updates
// and the energy-VAD data filter.

#ifndef UDASE_REMIXIT_HPP
#define UDASE_REMIXIT_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "udase/audio.hpp"
#include "udase/enhancer.hpp"

namespace udase {

struct EmaConfig {
  double gamma = 0.99;
  int update_every = 1;  // batches
};

struct VadConfig {
  double frame_ms = 50.0;
  double threshold_db = 12.0;
  double min_quiet_fraction = 0.25;
};

struct AdaptConfig {
  int batch_size = 8;  // >= 2, so a derangement exists
  int epochs = 10;
  double learning_rate = 0.5;
  EmaConfig ema;
  bool vad_filter = false;
  VadConfig vad;
  uint64_t seed = 0;
};

using PseudoLabels = std::vector<std::pair<Waveform, Waveform>>;

// Frozen-teacher inference over a batch of mixtures.
PseudoLabels teacher_infer(const Enhancer& teacher,
                           const std::vector<Waveform>& batch);

// Cyclic shift by one: a derangement for any n >= 2.
std::vector<std::size_t> cyclic_permutation(std::size_t n);

// bootstrapped[i] = speech_pl[i] + noise_pl[perm[i]]; inputs must share a
// common length and the permutation must have no fixed point.
std::vector<Waveform> remix(const PseudoLabels& pseudo,
                            const std::vector<std::size_t>& permutation);

// Crops every waveform (and pseudo-label pair) to the batch minimum length.
void crop_to_common_length(PseudoLabels& pseudo);

// One gradient-descent step on the mean pair loss over the batch; returns
// the pre-update loss. Analytic gradients are used when the enhancer
// provides them, otherwise central finite differences (step 1e-4).
double student_step(Enhancer& student,
                    const std::vector<Waveform>& bootstrapped,
                    const PseudoLabels& targets, double learning_rate);

double batch_loss(const Enhancer& enhancer,
                  const std::vector<Waveform>& bootstrapped,
                  const PseudoLabels& targets);

// theta_T <- gamma * theta_T + (1 - gamma) * theta_S.
void ema_update(std::vector<double>& teacher_params,
                const std::vector<double>& student_params, double gamma);

// Energy VAD: a segment is kept when at least min_quiet_fraction of its
// frames sit more than threshold_db below the peak frame energy, i.e. the
// segment is modulated the way speech is. Steady noise and digital silence
// are dropped.
bool vad_keep(const Waveform& w, const VadConfig& cfg);
std::vector<std::size_t> vad_filter_indices(const std::vector<Waveform>& segs,
                                            const VadConfig& cfg);

// A labeled example used for supervised pre-training and dev scoring.
struct LabeledExample {
  Waveform mixture;
  Waveform speech_ref;
  Waveform noise_ref;
};

// Loads {mixture, speech_sum, noise} triples from a simulator manifest.
std::vector<LabeledExample> load_labeled_manifest(
    const std::string& manifest_path);

// Mean SI-SDR of the enhancer's speech estimate against the speech-sum
// reference over a labeled set.
double dev_si_sdr(const Enhancer& enhancer,
                  const std::vector<LabeledExample>& dev);

// Supervised training on labeled data (used to build the OOD teacher);
// reuses student_step with the true references as targets.
std::vector<double> pretrain(Enhancer& enhancer,
                             const std::vector<LabeledExample>& data,
                             int epochs, double learning_rate, int batch_size,
                             uint64_t seed);

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double dev_si_sdr = 0.0;
  double teacher_student_distance = 0.0;
};

struct AdaptResult {
  std::vector<double> best_params;
  int best_epoch = -1;  // -1 means initialization was never beaten / no epochs
  double best_dev_si_sdr = 0.0;
  std::size_t training_segments = 0;  // after optional VAD filtering
  std::size_t filtered_out = 0;
  std::vector<EpochLog> log;
};

// The full loop: epochs of {teacher_infer -> remix -> student_step ->
// ema_update}, with per-epoch dev scoring and best-epoch selection.
AdaptResult adapt(const AdaptConfig& config, const Enhancer& teacher_init,
                  const std::vector<Waveform>& unlabeled,
                  const std::vector<LabeledExample>& dev);

}  // namespace udase

#endif  // UDASE_REMIXIT_HPP
