#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sfc/audio.hpp"

namespace sfc {

struct StftParams {
  int n_fft = 512;
  int window_length = 480;  // 30 ms at 16 kHz
  int hop_length = 240;     // 15 ms
  std::string window_function = "hann";
};

enum class PlaneKind { SP, MS, MFCC, V, A };

const char* plane_kind_name(PlaneKind kind);

// One H x W feature image. H indexes frequency/coefficient bins, W indexes
// time frames. SP/MS hold dB power, MFCC holds cepstral coefficients, V/A
// hold per-frame differences of their base plane.
struct FeaturePlane {
  PlaneKind kind = PlaneKind::SP;
  PlaneKind base = PlaneKind::SP;  // meaningful for V/A only
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;  // row-major, height x width

  float& at(std::size_t h, std::size_t w) { return data[h * width + w]; }
  float at(std::size_t h, std::size_t w) const { return data[h * width + w]; }
};

// Per-channel normalization statistics.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;       // population
  std::vector<bool> degenerate;     // stddev == 0
  std::size_t channels() const { return mean.size(); }
};

// C x H x W stack of planes, in the channel order named by `spec`
// (e.g. "MFCC-V-A", "SP-MS"). channel_stats records the statistics applied
// by normalize(), when any.
struct FeatureTensor {
  std::vector<FeaturePlane> planes;
  std::string spec;
  std::optional<ChannelStats> channel_stats;

  std::size_t channels() const { return planes.size(); }
  std::size_t height() const { return planes.empty() ? 0 : planes[0].height; }
  std::size_t width() const { return planes.empty() ? 0 : planes[0].width; }
};

inline constexpr std::size_t kFeatureSize = 128;   // output H and W
inline constexpr int kModelSampleRate = 16000;
inline constexpr double kDbFloorPower = 1e-10;     // 10*log10 -> -100 dB

// Raw frame count of the STFT before time cropping.
std::size_t stft_frame_count(std::size_t num_samples, const StftParams& params);

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Orthonormal DCT-II and its inverse, as used per frame by mfcc().
std::vector<double> dct2_orthonormal(const std::vector<double>& x);
std::vector<double> idct2_orthonormal(const std::vector<double>& coeffs);

// Power spectrogram in dB, cropped to the lowest 128 frequency bins and the
// first 128 frames. Requires a 16 kHz clip spanning at least one window.
FeaturePlane spectrogram(const AudioClip& clip, const StftParams& params = {});

// Mel-scaled power spectrogram in dB: 128 triangular HTK bands over
// 0..Nyquist applied to the power spectrum, then 10*log10.
FeaturePlane mel_spectrogram(const AudioClip& clip, const StftParams& params = {},
                             std::size_t n_mels = kFeatureSize);

// Orthonormal DCT-II over the per-frame log-mel energies, all 128
// coefficients retained.
FeaturePlane mfcc(const AudioClip& clip, const StftParams& params = {},
                  std::size_t n_coeffs = kFeatureSize);

// First time difference: forward at the first frame, central inside,
// backward at the last frame. Requires at least two frames.
FeaturePlane velocity_map(const FeaturePlane& base);

// Second time difference: the velocity stencil applied to the V plane.
FeaturePlane acceleration_map(const FeaturePlane& base);

// Parses a feature-spec string and builds the channel stack. Accepted specs:
// a single base (SP, MS, MFCC) optionally followed by -V or -V-A, or a dash
// list of two/three distinct bases (SP-MS, SP-MFCC, MS-MFCC, SP-MS-MFCC).
FeatureTensor assemble(const AudioClip& clip, const std::string& spec,
                       const StftParams& params = {});

// Channel count implied by a feature-spec string; throws SpecError when the
// spec is not in the accepted vocabulary.
std::size_t spec_channel_count(const std::string& spec);

// Streaming single-pass mean / population-std per channel over every H x W
// entry of the batch. Throws on an empty batch or uneven channel counts.
ChannelStats compute_channel_stats(const std::vector<FeatureTensor>& batch);

// Merge of two partial stats accumulations (exact, order-insensitive).
struct StatsAccumulator {
  std::vector<std::size_t> count;
  std::vector<double> mean;
  std::vector<double> m2;

  void init(std::size_t channels);
  void add(std::size_t channel, double value);
  void merge(const StatsAccumulator& other);
  ChannelStats finalize() const;
};

// x -> (x - mean_c) / std_c per channel. Throws DegenerateStatsError when a
// std entry is <= 0 and ShapeError on channel-count mismatch.
FeatureTensor normalize(const FeatureTensor& tensor, const ChannelStats& stats);
std::vector<FeatureTensor> normalize(const std::vector<FeatureTensor>& batch,
                                     const ChannelStats& stats);

// Binary feature container: "SFLW" magic, version, C/H/W, spec string, then
// C*H*W little-endian f32 in channel-major row-major order.
void save_feature_tensor(const FeatureTensor& tensor, const std::string& path);
FeatureTensor load_feature_tensor(const std::string& path);

// Debug CSV: one row per (channel, height) pair.
void export_feature_csv(const FeatureTensor& tensor, const std::string& path);

// Stats JSON helpers ({"mean": [...], "std": [...]}).
void save_channel_stats(const ChannelStats& stats, const std::string& path);
ChannelStats load_channel_stats(const std::string& path);

}  // namespace sfc
