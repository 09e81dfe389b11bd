#include "udase/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace udase {

double energy(const Waveform& w) {
  double e = 0.0;
  for (double s : w.samples) e += s * s;
  return e;
}

Waveform convolve(const Waveform& x, const Waveform& h) {
  if (x.sample_rate != h.sample_rate)
    throw AudioError("convolve: sample-rate mismatch");
  if (h.samples.empty()) throw AudioError("convolve: empty impulse response");
  Waveform out;
  out.sample_rate = x.sample_rate;
  if (x.samples.empty()) return out;
  out.samples.assign(x.size() + h.size() - 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x.samples[i];
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < h.size(); ++j)
      out.samples[i + j] += xi * h.samples[j];
  }
  return out;
}

Waveform mix_add(const std::vector<Waveform>& signals,
                 const std::vector<std::size_t>& offsets) {
  if (signals.size() != offsets.size())
    throw AudioError("mix_add: signals/offsets size mismatch");
  Waveform out;
  out.sample_rate = signals.empty() ? kDefaultSampleRate
                                    : signals.front().sample_rate;
  std::size_t total = 0;
  for (std::size_t i = 0; i < signals.size(); ++i) {
    if (signals[i].sample_rate != out.sample_rate)
      throw AudioError("mix_add: sample-rate mismatch");
    total = std::max(total, offsets[i] + signals[i].size());
  }
  out.samples.assign(total, 0.0);
  for (std::size_t i = 0; i < signals.size(); ++i)
    for (std::size_t k = 0; k < signals[i].size(); ++k)
      out.samples[offsets[i] + k] += signals[i].samples[k];
  return out;
}

// ---------------------------------------------------------------------------
// RIFF WAV I/O (PCM16 little-endian and IEEE float32 only)

namespace {

struct ChunkInfo {
  WavInfo info;
  std::streamoff data_pos = 0;
  std::size_t data_bytes = 0;
};

uint32_t read_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (uint32_t(b[3]) << 24);
}

uint16_t read_u16(std::ifstream& f) {
  unsigned char b[2];
  f.read(reinterpret_cast<char*>(b), 2);
  return b[0] | (b[1] << 8);
}

ChunkInfo parse_wav(std::ifstream& f, const std::string& path) {
  char tag[4];
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "RIFF", 4) != 0)
    throw AudioError(path + ": not a RIFF file");
  read_u32(f);
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "WAVE", 4) != 0)
    throw AudioError(path + ": not a WAVE file");

  ChunkInfo out;
  uint16_t format = 0, bits = 0;
  bool have_fmt = false, have_data = false;
  while (f.read(tag, 4)) {
    uint32_t size = read_u32(f);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      std::streamoff next = f.tellg() + std::streamoff(size + (size & 1));
      format = read_u16(f);
      out.info.channels = read_u16(f);
      out.info.sample_rate = static_cast<int>(read_u32(f));
      read_u32(f);  // byte rate
      read_u16(f);  // block align
      bits = read_u16(f);
      have_fmt = true;
      f.seekg(next);
    } else if (std::memcmp(tag, "data", 4) == 0) {
      out.data_pos = f.tellg();
      out.data_bytes = size;
      have_data = true;
      f.seekg(std::streamoff(size + (size & 1)), std::ios::cur);
    } else {
      f.seekg(std::streamoff(size + (size & 1)), std::ios::cur);
    }
  }
  f.clear();
  if (!have_fmt || !have_data)
    throw AudioError(path + ": missing fmt or data chunk");
  if (format == 1 && bits == 16) {
    out.info.encoding = WavEncoding::pcm16;
  } else if (format == 3 && bits == 32) {
    out.info.encoding = WavEncoding::float32;
  } else {
    throw AudioError(path + ": unsupported encoding (format=" +
                     std::to_string(format) + ", bits=" + std::to_string(bits) +
                     ")");
  }
  if (out.info.channels <= 0) throw AudioError(path + ": zero channels");
  std::size_t bytes_per_frame = (bits / 8) * out.info.channels;
  out.info.frames = out.data_bytes / bytes_per_frame;
  return out;
}

void write_u32(std::ofstream& f, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  f.write(reinterpret_cast<char*>(b), 4);
}

void write_u16(std::ofstream& f, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8)};
  f.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

WavInfo wav_info(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw AudioError(path + ": cannot open file");
  return parse_wav(f, path).info;
}

Waveform read_wav(const std::string& path, int channel) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw AudioError(path + ": cannot open file");
  ChunkInfo ck = parse_wav(f, path);
  if (channel < 0 || channel >= ck.info.channels)
    throw AudioError(path + ": channel " + std::to_string(channel) +
                     " out of range (file has " +
                     std::to_string(ck.info.channels) + ")");
  Waveform w;
  w.sample_rate = ck.info.sample_rate;
  w.samples.resize(ck.info.frames);
  f.seekg(ck.data_pos);
  if (ck.info.encoding == WavEncoding::pcm16) {
    std::vector<int16_t> frame(ck.info.channels);
    for (std::size_t i = 0; i < ck.info.frames; ++i) {
      f.read(reinterpret_cast<char*>(frame.data()),
             std::streamsize(2 * frame.size()));
      w.samples[i] = frame[channel] / 32768.0;
    }
  } else {
    std::vector<float> frame(ck.info.channels);
    for (std::size_t i = 0; i < ck.info.frames; ++i) {
      f.read(reinterpret_cast<char*>(frame.data()),
             std::streamsize(4 * frame.size()));
      w.samples[i] = frame[channel];
    }
  }
  if (!f) throw AudioError(path + ": truncated data chunk");
  return w;
}

std::size_t write_wav(const std::string& path, const Waveform& w,
                      WavEncoding encoding) {
  for (double s : w.samples)
    if (!std::isfinite(s))
      throw AudioError(path + ": refusing to write non-finite samples");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw AudioError(path + ": cannot open for writing");

  const int bytes = encoding == WavEncoding::pcm16 ? 2 : 4;
  const uint32_t data_bytes = static_cast<uint32_t>(w.size() * bytes);
  f.write("RIFF", 4);
  write_u32(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  write_u32(f, 16);
  write_u16(f, encoding == WavEncoding::pcm16 ? 1 : 3);
  write_u16(f, 1);  // mono
  write_u32(f, static_cast<uint32_t>(w.sample_rate));
  write_u32(f, static_cast<uint32_t>(w.sample_rate * bytes));
  write_u16(f, static_cast<uint16_t>(bytes));
  write_u16(f, static_cast<uint16_t>(bytes * 8));
  f.write("data", 4);
  write_u32(f, data_bytes);

  std::size_t clipped = 0;
  if (encoding == WavEncoding::pcm16) {
    for (double s : w.samples) {
      double v = s;
      if (v > 1.0) {
        v = 1.0;
        ++clipped;
      } else if (v < -1.0) {
        v = -1.0;
        ++clipped;
      }
      long q = std::lround(v * 32768.0);
      q = std::clamp(q, -32768L, 32767L);
      int16_t i16 = static_cast<int16_t>(q);
      f.write(reinterpret_cast<char*>(&i16), 2);
    }
  } else {
    for (double s : w.samples) {
      float v = static_cast<float>(s);
      f.write(reinterpret_cast<char*>(&v), 4);
    }
  }
  if (!f) throw AudioError(path + ": write failed");
  return clipped;
}

}  // namespace udase
