// Reverberant multi-speaker noisy mixture generation: speaker-count prior,
// hierarchical RIR selection, activity-pattern placement and two-level
// Gaussian per-speaker SNR calibration.

#ifndef UDASE_SIMULATOR_HPP
#define UDASE_SIMULATOR_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "udase/audio.hpp"
#include "udase/rng.hpp"

namespace udase {

// --- asset banks -----------------------------------------------------------

struct SpeechEntry {
  std::string speaker;
  std::string path;
  std::size_t frames = 0;
};

struct NoiseEntry {
  std::string path;
  std::size_t frames = 0;
};

struct RirPosition {
  std::string name;
  std::vector<std::string> channel_paths;
};
struct RirArrayConfig {
  std::string name;
  std::vector<RirPosition> positions;
};
struct RirRoom {
  std::string name;
  std::vector<RirArrayConfig> arrays;
};
struct RirHome {
  std::string name;
  std::vector<RirRoom> rooms;
};
struct RirBank {
  std::vector<RirHome> homes;
};

struct Banks {
  std::vector<SpeechEntry> speech;
  std::vector<NoiseEntry> noise;
  RirBank rirs;
  std::string root;  // paths in the index are relative to this
};

// Loads a bank index JSON ({speech:[{speaker,path}], noise:[{path}],
// rirs:{homes:[...]}}) and caches signal lengths from the WAV headers.
Banks load_banks(const std::string& index_path);

// --- sampling --------------------------------------------------------------

struct SpeakerCountPrior {
  double p1 = 0.60, p2 = 0.35, p3 = 0.05;
};
inline SpeakerCountPrior eval_prior() { return {0.60, 0.35, 0.05}; }
inline SpeakerCountPrior train_prior() { return {0.50, 0.25, 0.25}; }

struct SnrSamplerConfig {
  double mean_db = 5.0;
  double sigma1_db = 6.7082;
  double sigma2_db = 2.0;
};

struct RirSelection {
  std::size_t home = 0, room = 0, array_config = 0, channel = 0;
  std::vector<std::size_t> positions;  // n entries, pairwise distinct
};

struct ActivityInterval {
  std::size_t onset = 0, offset = 0;  // samples from segment start
};

struct SpeakerSpec {
  std::string speaker_id;
  std::vector<std::size_t> utterances;  // indices into Banks::speech
  std::vector<ActivityInterval> activity;
  double snr_db = 0.0;  // local target y_i
};

struct MixtureSpec {
  std::string id;
  uint64_t seed = 0;
  int n = 1;
  RirSelection rir;
  std::vector<SpeakerSpec> speakers;
  std::size_t noise_index = 0;
  double global_snr_db = 0.0;  // x
};

struct MixtureExample {
  Waveform mixture;
  std::vector<Waveform> speech_refs;  // per speaker, reverberant and scaled
  Waveform speech_sum_ref;
  Waveform noise_ref;
  MixtureSpec spec;
};

// A library of activity patterns (e.g. derived from transcripts via
// activity_pattern); patterns are matched by speaker count and cropped to
// the noise segment length.
struct ActivityPattern {
  int n = 1;
  std::vector<std::vector<ActivityInterval>> speakers;
};
std::vector<ActivityPattern> load_activity_patterns(const std::string& path);

int sample_speaker_count(const SpeakerCountPrior& prior, Rng& rng);

RirSelection sample_rirs(const RirBank& bank, int n, Rng& rng);

// Global SNR x ~ N(mean, sigma1^2), then y_i ~ N(x, sigma2^2).
std::pair<double, std::vector<double>> sample_snrs(const SnrSamplerConfig& cfg,
                                                   int n, Rng& rng);

// 10*log10(energy(speech)/energy(noise)); -inf for zero-energy speech.
double measure_snr(const Waveform& speech, const Waveform& noise);

// --- generation ------------------------------------------------------------

struct SimConfig {
  std::string banks_index;
  std::string out_dir;
  std::size_t count = 0;
  uint64_t master_seed = 0;
  SpeakerCountPrior prior = eval_prior();
  SnrSamplerConfig snr;
  std::optional<std::string> patterns_file;
  bool write_audio = true;
  int jobs = 1;
};

// Samples every random choice for example `index` from the stream derived
// from (master_seed, index).
MixtureSpec sample_mixture_spec(const SimConfig& cfg, const Banks& banks,
                                const std::vector<ActivityPattern>& patterns,
                                std::size_t index);

MixtureExample assemble_mixture(const MixtureSpec& spec, const Banks& banks);

struct SimSummary {
  std::size_t count = 0;
  std::vector<std::size_t> count_per_n;  // index 0 unused
  double snr_mean_db = 0.0;
  double snr_std_db = 0.0;
  std::string manifest_path;
};

// Writes per-example WAVs and a JSON-lines manifest; byte-identical across
// reruns with the same seed. An optional observer sees every assembled
// example (used by tests to re-measure without touching the filesystem).
SimSummary simulate_dataset(
    const SimConfig& cfg,
    const std::function<void(const MixtureExample&)>& observer = {});

}  // namespace udase

#endif  // UDASE_SIMULATOR_HPP
