#pragma once

#include <string>
#include <vector>

namespace sfc {

// Mono audio. Samples are dimensionless amplitudes, nominally in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

struct SegmentationPolicy {
  double window_seconds = 2.0;
  double overlap_fraction = 0.0;  // in [0, 1)
};

// Name of the resampling scheme, echoed into run metadata.
extern const char* const kResampleMethod;

// Reads a RIFF/WAV file and downmixes to mono (arithmetic mean of channels).
// Accepts PCM 8/16/24/32-bit integer and 32-bit IEEE float data. Integer PCM
// is scaled to [-1, 1] by the type's max magnitude.
// Throws ParseError on malformed RIFF, UnsupportedFormatError on other codecs.
AudioClip read_wav(const std::string& path);

// Writes a mono 32-bit IEEE float WAV; read_wav(write_wav(x)) == x bit-exactly.
void write_wav(const AudioClip& clip, const std::string& path);

// Rate conversion with a 16-tap windowed-sinc polyphase kernel. A ratio of 1
// returns the clip unchanged. Output length is floor(len * target / source).
AudioClip resample(const AudioClip& clip, int target_rate);

// Cuts the clip into fixed windows of policy.window_seconds with hop
// window * (1 - overlap). The trailing remainder shorter than a window is
// discarded; a clip shorter than one window yields an empty list.
std::vector<AudioClip> segment(const AudioClip& clip, const SegmentationPolicy& policy);

// Window length in samples: round(window_seconds * sample_rate).
std::size_t window_sample_count(double window_seconds, int sample_rate);

}  // namespace sfc
