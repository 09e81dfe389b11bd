// SI-SDR, the equal-weight speech+noise loss, BS.1770 integrated loudness
// and batch evaluation reports.

#ifndef UDASE_METRICS_HPP
#define UDASE_METRICS_HPP

#include <limits>
#include <string>
#include <vector>

#include "udase/audio.hpp"

namespace udase {

inline constexpr double kSiSdrCapDb = 100.0;

struct SiSdrResult {
  double value_db = 0.0;
  bool capped = false;
};

// Scale-invariant SDR of estimate against reference. Capped at +/-100 dB
// when the error (resp. target) energy underflows.
SiSdrResult si_sdr(const Waveform& estimate, const Waveform& reference);

// -0.5 * (si_sdr(speech) + si_sdr(noise)), each term clipped to
// [-100, 100] dB.
double neg_si_sdr_loss(const Waveform& speech_est, const Waveform& noise_est,
                       const Waveform& speech_ref, const Waveform& noise_ref);

struct LoudnessMeasurement {
  double lufs = -std::numeric_limits<double>::infinity();
  int gated_blocks = 0;

  bool silent() const { return gated_blocks == 0; }
};

// Mono integrated loudness per ITU-R BS.1770-4: K-weighting, 400 ms blocks
// with 75% overlap, -70 LKFS absolute gate and a relative gate 10 LU below
// the absolute-gated mean. Returns the -inf sentinel when every block is
// gated out.
LoudnessMeasurement integrated_loudness(const Waveform& w);

// Scales w so its integrated loudness lands on target_lufs (+-0.1 LU),
// iterating up to 3 times to absorb gating drift.
Waveform normalize_loudness(const Waveform& w, double target_lufs = -30.0);

struct ScoreRow {
  std::string file_id;
  std::string metric;
  double value = 0.0;
  int speaker_count = 0;
};

struct ScoreReport {
  std::vector<ScoreRow> rows;
  std::vector<std::string> missing_files;

  double mean(const std::string& metric) const;
  double mean_for_count(const std::string& metric, int n) const;
  std::string to_csv() const;
  std::string to_jsonl() const;
};

// Scores one estimate WAV per manifest row (estimates_dir/<id>.wav) against
// the speech-sum reference. Missing estimates are recorded and skipped.
ScoreReport evaluate_dataset(const std::string& estimates_dir,
                             const std::string& manifest_path, int jobs = 1);

}  // namespace udase

#endif  // UDASE_METRICS_HPP
