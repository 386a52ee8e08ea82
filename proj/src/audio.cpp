#include "sfc/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sfc/errors.hpp"

namespace sfc {

const char* const kResampleMethod = "windowed-sinc-polyphase-16tap";

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
};

float decode_sample(const unsigned char* p, std::uint16_t format, int bytes) {
  if (format == kFormatFloat) {
    float f;
    std::memcpy(&f, p, 4);
    return f;
  }
  switch (bytes) {
    case 1:
      // 8-bit WAV is unsigned with midpoint 128.
      return (static_cast<int>(p[0]) - 128) / 128.0f;
    case 2: {
      std::int16_t v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
      return static_cast<float>(v) / 32768.0f;
    }
    case 3: {
      const std::uint32_t u = (static_cast<std::uint32_t>(p[0]) << 8) |
                              (static_cast<std::uint32_t>(p[1]) << 16) |
                              (static_cast<std::uint32_t>(p[2]) << 24);
      return static_cast<float>(static_cast<std::int32_t>(u) >> 8) / 8388608.0f;
    }
    case 4: {
      std::int32_t v;
      std::memcpy(&v, p, 4);
      return static_cast<float>(v) / 2147483648.0f;
    }
    default:
      return 0.0f;
  }
}

}  // namespace

AudioClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  unsigned char riff[12];
  if (!in.read(reinterpret_cast<char*>(riff), 12)) throw ParseError(path + ": truncated RIFF header");
  if (std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(riff + 8, "WAVE", 4) != 0)
    throw ParseError(path + ": not a RIFF/WAVE file");

  FmtChunk fmt;
  bool have_fmt = false;
  std::vector<unsigned char> data;
  bool have_data = false;

  unsigned char chunk_hdr[8];
  while (in.read(reinterpret_cast<char*>(chunk_hdr), 8)) {
    const std::uint32_t size = read_u32(chunk_hdr + 4);
    if (std::memcmp(chunk_hdr, "fmt ", 4) == 0) {
      if (size < 16) throw ParseError(path + ": fmt chunk too small");
      std::vector<unsigned char> buf(size);
      if (!in.read(reinterpret_cast<char*>(buf.data()), size)) throw ParseError(path + ": truncated fmt chunk");
      fmt.format = read_u16(buf.data());
      fmt.channels = read_u16(buf.data() + 2);
      fmt.sample_rate = read_u32(buf.data() + 4);
      fmt.bits_per_sample = read_u16(buf.data() + 14);
      if (fmt.format == kFormatExtensible && size >= 40) {
        // Sub-format GUID starts with the ordinary format code.
        fmt.format = read_u16(buf.data() + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk_hdr, "data", 4) == 0) {
      data.resize(size);
      if (!in.read(reinterpret_cast<char*>(data.data()), size)) throw ParseError(path + ": truncated data chunk");
      have_data = true;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);  // chunks are word-aligned
      continue;
    }
    if (size & 1) in.seekg(1, std::ios::cur);
  }

  if (!have_fmt) throw ParseError(path + ": missing fmt chunk");
  if (!have_data) throw ParseError(path + ": missing data chunk");
  if (fmt.channels == 0 || fmt.sample_rate == 0) throw ParseError(path + ": bad fmt fields");

  if (fmt.format == kFormatFloat) {
    if (fmt.bits_per_sample != 32)
      throw UnsupportedFormatError(path + ": only 32-bit IEEE float is supported");
  } else if (fmt.format == kFormatPcm) {
    if (fmt.bits_per_sample != 8 && fmt.bits_per_sample != 16 && fmt.bits_per_sample != 24 &&
        fmt.bits_per_sample != 32)
      throw UnsupportedFormatError(path + ": unsupported PCM depth " + std::to_string(fmt.bits_per_sample));
  } else {
    throw UnsupportedFormatError(path + ": unsupported codec " + std::to_string(fmt.format));
  }

  const int bytes_per_sample = fmt.bits_per_sample / 8;
  const std::size_t frame_bytes = static_cast<std::size_t>(bytes_per_sample) * fmt.channels;
  const std::size_t frames = frame_bytes > 0 ? data.size() / frame_bytes : 0;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt.sample_rate);
  clip.samples.resize(frames);
  const double inv_channels = fmt.channels > 0 ? 1.0 / fmt.channels : 0.0;
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    const unsigned char* frame = data.data() + i * frame_bytes;
    for (unsigned ch = 0; ch < fmt.channels; ++ch)
      acc += decode_sample(frame + ch * bytes_per_sample, fmt.format, bytes_per_sample);
    const float sample = static_cast<float>(acc * inv_channels);
    if (!std::isfinite(sample)) throw ParseError(path + ": non-finite sample data");
    clip.samples[i] = sample;
  }
  return clip;
}

void write_wav(const AudioClip& clip, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");

  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 4);
  const std::uint32_t riff_size = 36 + data_bytes;
  const std::uint32_t rate = static_cast<std::uint32_t>(clip.sample_rate);
  const std::uint32_t byte_rate = rate * 4;

  unsigned char hdr[44];
  std::memcpy(hdr, "RIFF", 4);
  std::memcpy(hdr + 8, "WAVE", 4);
  std::memcpy(hdr + 12, "fmt ", 4);
  std::memcpy(hdr + 36, "data", 4);
  auto put_u32 = [&hdr](int off, std::uint32_t v) {
    hdr[off] = v & 0xFF;
    hdr[off + 1] = (v >> 8) & 0xFF;
    hdr[off + 2] = (v >> 16) & 0xFF;
    hdr[off + 3] = (v >> 24) & 0xFF;
  };
  auto put_u16 = [&hdr](int off, std::uint16_t v) {
    hdr[off] = v & 0xFF;
    hdr[off + 1] = (v >> 8) & 0xFF;
  };
  put_u32(4, riff_size);
  put_u32(16, 16);             // fmt chunk size
  put_u16(20, kFormatFloat);   // IEEE float
  put_u16(22, 1);              // mono
  put_u32(24, rate);
  put_u32(28, byte_rate);
  put_u16(32, 4);              // block align
  put_u16(34, 32);             // bits per sample
  put_u32(40, data_bytes);
  out.write(reinterpret_cast<const char*>(hdr), 44);
  if (!clip.samples.empty())
    out.write(reinterpret_cast<const char*>(clip.samples.data()), data_bytes);
  if (!out) throw IoError("failed writing " + path);
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw ConfigError("target_rate must be positive");
  if (clip.sample_rate <= 0) throw ConfigError("clip sample_rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
  const std::size_t in_len = clip.samples.size();
  const std::size_t out_len = static_cast<std::size_t>(
      std::floor(static_cast<double>(in_len) * target_rate / clip.sample_rate));

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  if (out_len == 0) return out;

  // Anti-aliasing cutoff at the lower of the two Nyquist limits, expressed as
  // a fraction of the source Nyquist.
  const double cutoff = std::min(1.0, ratio);
  constexpr int kHalfTaps = 8;  // 16 taps per output phase

  for (std::size_t n = 0; n < out_len; ++n) {
    const double pos = static_cast<double>(n) / ratio;
    const long base = static_cast<long>(std::floor(pos));
    double acc = 0.0;
    double norm = 0.0;
    for (int k = -kHalfTaps + 1; k <= kHalfTaps; ++k) {
      const long idx = base + k;
      const double x = static_cast<double>(idx) - pos;
      double w;
      if (std::abs(x) < 1e-12) {
        w = cutoff;
      } else {
        const double px = 3.141592653589793 * x;
        w = cutoff * std::sin(cutoff * px) / (cutoff * px);
      }
      // Hann taper over the +-kHalfTaps span.
      const double u = x / kHalfTaps;
      w *= 0.5 + 0.5 * std::cos(3.141592653589793 * std::clamp(u, -1.0, 1.0));
      norm += w;
      if (idx >= 0 && idx < static_cast<long>(in_len)) acc += w * clip.samples[idx];
    }
    // Per-phase DC normalization keeps in-band tones at unity gain.
    out.samples[n] = static_cast<float>(norm != 0.0 ? acc / norm : 0.0);
  }
  return out;
}

std::size_t window_sample_count(double window_seconds, int sample_rate) {
  return static_cast<std::size_t>(std::llround(window_seconds * sample_rate));
}

std::vector<AudioClip> segment(const AudioClip& clip, const SegmentationPolicy& policy) {
  if (policy.overlap_fraction < 0.0 || policy.overlap_fraction >= 1.0)
    throw ConfigError("overlap_fraction must be in [0, 1)");
  if (clip.sample_rate <= 0) throw ConfigError("clip sample_rate must be positive");

  const std::size_t win = window_sample_count(policy.window_seconds, clip.sample_rate);
  if (win == 0) throw ConfigError("window must be at least one sample");
  const std::size_t hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(win) * (1.0 - policy.overlap_fraction))));

  std::vector<AudioClip> windows;
  if (clip.samples.size() < win) return windows;
  for (std::size_t start = 0; start + win <= clip.samples.size(); start += hop) {
    AudioClip w;
    w.sample_rate = clip.sample_rate;
    w.samples.assign(clip.samples.begin() + start, clip.samples.begin() + start + win);
    windows.push_back(std::move(w));
  }
  return windows;
}

}  // namespace sfc
