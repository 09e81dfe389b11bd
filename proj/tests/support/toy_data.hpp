// Shared fixtures for the test suites: toy signals, asset banks, random
// transcripts and independent brute-force oracles.

#ifndef UDASE_TESTS_TOY_DATA_HPP
#define UDASE_TESTS_TOY_DATA_HPP

#include <string>
#include <vector>

#include "udase/audio.hpp"
#include "udase/rng.hpp"
#include "udase/segmenter.hpp"

namespace udase::testsupport {

// Speech-like signal: pitch-modulated harmonic bursts separated by pauses,
// energy concentrated in 300-3000 Hz.
Waveform speech_like(Rng& rng, std::size_t len, int sample_rate = 16000);

Waveform white_noise(Rng& rng, std::size_t len, double amplitude = 0.1,
                     int sample_rate = 16000);

// 1/f-shaped noise (three-pole filtered white noise).
Waveform pink_noise(Rng& rng, std::size_t len, double amplitude = 0.1,
                    int sample_rate = 16000);

// Exponentially decaying random impulse response with a unit direct path.
Waveform toy_rir(Rng& rng, std::size_t taps, int sample_rate = 16000);

struct BankOptions {
  int speakers = 4;
  int utterances_per_speaker = 3;
  double utterance_s = 0.6;
  int noise_files = 8;
  double noise_s = 0.5;
  bool pink = false;  // white otherwise
  int homes = 2;
  int rooms_per_home = 2;
  int arrays_per_room = 2;
  int positions_per_array = 3;
  int channels = 2;
  std::size_t rir_taps = 32;
};

// Writes speech/noise/RIR WAVs plus index.json under dir; returns the
// index path.
std::string write_toy_banks(const std::string& dir, Rng& rng,
                            const BankOptions& opts = {});

// Random millisecond-quantized transcript.
Transcript random_transcript(Rng& rng, int max_speakers = 4,
                             int64_t duration_ms = 60000,
                             bool with_excluded = false);

// --- independent oracles ---------------------------------------------------

// Dense per-millisecond view of a transcript, computed directly from the
// utterance list (no CountTimeline involved).
struct DenseTimeline {
  std::vector<int> count;       // per millisecond
  std::vector<uint8_t> excluded;
};
DenseTimeline densify(const Transcript& t);

struct OracleSegment {
  int64_t start_ms, end_ms;
  int max_speakers;
};

// Naive four-pass extraction over the dense arrays.
std::vector<OracleSegment> oracle_extract_segments(const DenseTimeline& d,
                                                   int64_t min_ms);

}  // namespace udase::testsupport

#endif  // UDASE_TESTS_TOY_DATA_HPP
