// Audio sample containers, WAV I/O and elementary signal operations.

#ifndef UDASE_AUDIO_HPP
#define UDASE_AUDIO_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace udase {

inline constexpr int kDefaultSampleRate = 16000;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

class AudioError : public std::runtime_error {
 public:
  explicit AudioError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class WavEncoding { pcm16, float32 };

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  std::size_t frames = 0;
  WavEncoding encoding = WavEncoding::pcm16;
};

// Parses the header only; does not read sample data.
WavInfo wav_info(const std::string& path);

// Reads one channel (default 0) of a PCM16 or float32 RIFF WAV file.
// Sample values are scaled to [-1, 1].
Waveform read_wav(const std::string& path, int channel = 0);

// Writes a mono WAV file. Under pcm16, samples outside [-1, 1] are clipped;
// the return value is the number of clipped samples (0 for float32).
std::size_t write_wav(const std::string& path, const Waveform& w,
                      WavEncoding encoding = WavEncoding::float32);

// Sum of squared samples.
double energy(const Waveform& w);

// Full linear convolution; output length = len(x) + len(h) - 1.
Waveform convolve(const Waveform& x, const Waveform& h);

// Sample-wise sum of signals placed at the given non-negative sample
// offsets, zero-padded outside each signal's support.
Waveform mix_add(const std::vector<Waveform>& signals,
                 const std::vector<std::size_t>& offsets);

}  // namespace udase

#endif  // UDASE_AUDIO_HPP
