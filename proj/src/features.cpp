#include "sfc/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>

#include "json.hpp"
#include "sfc/errors.hpp"

namespace sfc {

namespace {

constexpr double kPi = 3.141592653589793;

// FFTW planning/destruction is not thread-safe; execution is.
std::mutex g_fftw_plan_mutex;

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::fill(in_, in_ + n, 0.0);
    std::lock_guard<std::mutex> lock(g_fftw_plan_mutex);
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard<std::mutex> lock(g_fftw_plan_mutex);
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  // Power spectrum |X_k|^2 for k in [0, n/2].
  void power_spectrum(const double* frame, int frame_len, std::vector<double>& power) {
    std::copy(frame, frame + frame_len, in_);
    std::fill(in_ + frame_len, in_ + n_, 0.0);
    fftw_execute(plan_);
    power.resize(n_ / 2 + 1);
    for (int k = 0; k <= n_ / 2; ++k)
      power[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

double to_db(double power) { return 10.0 * std::log10(std::max(power, kDbFloorPower)); }

// Periodic Hann taper.
std::vector<double> hann_window(int length) {
  std::vector<double> w(length);
  for (int i = 0; i < length; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / length);
  return w;
}

void check_stft_input(const AudioClip& clip, const StftParams& params) {
  if (clip.sample_rate != kModelSampleRate)
    throw ConfigError("feature extraction expects " + std::to_string(kModelSampleRate) +
                      " Hz input, got " + std::to_string(clip.sample_rate));
  if (params.window_length > params.n_fft) throw ConfigError("window_length > n_fft");
  if (params.hop_length < 1) throw ConfigError("hop_length must be >= 1");
  if (params.window_function != "hann")
    throw ConfigError("unknown window function '" + params.window_function + "'");
  if (clip.samples.size() < static_cast<std::size_t>(params.window_length))
    throw ShapeError("clip shorter than one analysis window");
}

// Per-frame power spectra, frames x (n_fft/2 + 1).
std::vector<std::vector<double>> stft_power(const AudioClip& clip, const StftParams& params) {
  check_stft_input(clip, params);
  const std::size_t frames = stft_frame_count(clip.samples.size(), params);
  const auto window = hann_window(params.window_length);

  thread_local std::unique_ptr<RealFft> fft;
  thread_local int fft_size = 0;
  if (!fft || fft_size != params.n_fft) {
    fft = std::make_unique<RealFft>(params.n_fft);
    fft_size = params.n_fft;
  }

  std::vector<std::vector<double>> power(frames);
  std::vector<double> frame(params.window_length);
  for (std::size_t t = 0; t < frames; ++t) {
    const float* src = clip.samples.data() + t * params.hop_length;
    for (int i = 0; i < params.window_length; ++i) frame[i] = src[i] * window[i];
    fft->power_spectrum(frame.data(), params.window_length, power[t]);
  }
  return power;
}

// Triangular mel filterbank sampled at FFT bin centers; rows are bands.
std::vector<std::vector<double>> mel_filterbank(std::size_t n_mels, int n_fft, int sample_rate) {
  const int n_bins = n_fft / 2 + 1;
  const double nyquist = sample_rate / 2.0;
  const double mel_max = hz_to_mel(nyquist);

  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / (n_mels + 1));

  std::vector<std::vector<double>> bank(n_mels, std::vector<double>(n_bins, 0.0));
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      if (f <= lo || f >= hi) continue;
      bank[m][k] = f <= center ? (f - lo) / (center - lo) : (hi - f) / (hi - center);
    }
  }
  return bank;
}

FeaturePlane crop_to_feature(PlaneKind kind, const std::vector<std::vector<double>>& columns,
                             std::size_t height) {
  // columns[t][h]; keep the first kFeatureSize frames and the lowest bins.
  FeaturePlane plane;
  plane.kind = kind;
  plane.base = kind;
  plane.height = height;
  plane.width = std::min<std::size_t>(kFeatureSize, columns.size());
  plane.data.resize(plane.height * plane.width);
  for (std::size_t t = 0; t < plane.width; ++t)
    for (std::size_t h = 0; h < plane.height; ++h) plane.at(h, t) = static_cast<float>(columns[t][h]);
  return plane;
}

// The difference stencil shared by V and A maps.
FeaturePlane difference_map(const FeaturePlane& base, PlaneKind kind) {
  if (base.width < 2) throw ShapeError("difference map needs at least 2 frames");
  FeaturePlane out;
  out.kind = kind;
  out.base = (base.kind == PlaneKind::V || base.kind == PlaneKind::A) ? base.base : base.kind;
  out.height = base.height;
  out.width = base.width;
  out.data.resize(base.data.size());
  const std::size_t last = base.width - 1;
  for (std::size_t h = 0; h < base.height; ++h) {
    out.at(h, 0) = base.at(h, 1) - base.at(h, 0);
    for (std::size_t t = 1; t < last; ++t)
      out.at(h, t) = (base.at(h, t + 1) - base.at(h, t - 1)) / 2.0f;
    out.at(h, last) = base.at(h, last) - base.at(h, last - 1);
  }
  return out;
}

PlaneKind base_kind_from_token(const std::string& token) {
  if (token == "SP") return PlaneKind::SP;
  if (token == "MS") return PlaneKind::MS;
  if (token == "MFCC") return PlaneKind::MFCC;
  throw SpecError("unknown feature token '" + token + "'");
}

std::vector<std::string> split_spec(const std::string& spec) {
  std::vector<std::string> tokens;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, '-')) tokens.push_back(item);
  return tokens;
}

struct ParsedSpec {
  std::vector<PlaneKind> bases;  // in order
  bool velocity = false;
  bool acceleration = false;
};

ParsedSpec parse_spec(const std::string& spec) {
  const auto tokens = split_spec(spec);
  if (tokens.empty()) throw SpecError("empty feature spec");

  ParsedSpec parsed;
  parsed.bases.push_back(base_kind_from_token(tokens[0]));

  std::size_t i = 1;
  if (i < tokens.size() && tokens[i] == "V") {
    parsed.velocity = true;
    ++i;
    if (i < tokens.size() && tokens[i] == "A") {
      parsed.acceleration = true;
      ++i;
    }
  } else {
    while (i < tokens.size()) {
      const PlaneKind kind = base_kind_from_token(tokens[i]);
      for (PlaneKind prev : parsed.bases)
        if (prev == kind) throw SpecError("duplicate feature token in '" + spec + "'");
      parsed.bases.push_back(kind);
      ++i;
    }
  }
  if (i != tokens.size()) throw SpecError("unknown feature spec '" + spec + "'");
  if (parsed.bases.size() > 3) throw SpecError("feature spec '" + spec + "' exceeds 3 channels");
  return parsed;
}

FeaturePlane base_plane(const AudioClip& clip, PlaneKind kind, const StftParams& params) {
  switch (kind) {
    case PlaneKind::SP: return spectrogram(clip, params);
    case PlaneKind::MS: return mel_spectrogram(clip, params);
    case PlaneKind::MFCC: return mfcc(clip, params);
    default: throw SpecError("not a base feature kind");
  }
}

void write_u16(std::ostream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xFF;
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

constexpr std::uint16_t kFeatureFileVersion = 1;

}  // namespace

const char* plane_kind_name(PlaneKind kind) {
  switch (kind) {
    case PlaneKind::SP: return "SP";
    case PlaneKind::MS: return "MS";
    case PlaneKind::MFCC: return "MFCC";
    case PlaneKind::V: return "V";
    case PlaneKind::A: return "A";
  }
  return "?";
}

std::size_t stft_frame_count(std::size_t num_samples, const StftParams& params) {
  if (num_samples < static_cast<std::size_t>(params.window_length)) return 0;
  return (num_samples - params.window_length) / params.hop_length + 1;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

FeaturePlane spectrogram(const AudioClip& clip, const StftParams& params) {
  const auto power = stft_power(clip, params);
  std::vector<std::vector<double>> db(power.size(), std::vector<double>(kFeatureSize));
  for (std::size_t t = 0; t < power.size(); ++t)
    for (std::size_t h = 0; h < kFeatureSize; ++h) db[t][h] = to_db(power[t][h]);
  return crop_to_feature(PlaneKind::SP, db, kFeatureSize);
}

FeaturePlane mel_spectrogram(const AudioClip& clip, const StftParams& params, std::size_t n_mels) {
  const auto power = stft_power(clip, params);
  const auto bank = mel_filterbank(n_mels, params.n_fft, clip.sample_rate);
  std::vector<std::vector<double>> db(power.size(), std::vector<double>(n_mels));
  for (std::size_t t = 0; t < power.size(); ++t) {
    for (std::size_t m = 0; m < n_mels; ++m) {
      double acc = 0.0;
      const auto& row = bank[m];
      for (std::size_t k = 0; k < row.size(); ++k) acc += row[k] * power[t][k];
      db[t][m] = to_db(acc);
    }
  }
  auto plane = crop_to_feature(PlaneKind::MS, db, n_mels);
  plane.kind = PlaneKind::MS;
  plane.base = PlaneKind::MS;
  return plane;
}

std::vector<double> dct2_orthonormal(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += x[i] * std::cos(kPi * (2.0 * i + 1.0) * k / (2.0 * n));
    out[k] = scale * acc;
  }
  return out;
}

std::vector<double> idct2_orthonormal(const std::vector<double>& coeffs) {
  const std::size_t n = coeffs.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      acc += scale * coeffs[k] * std::cos(kPi * (2.0 * i + 1.0) * k / (2.0 * n));
    }
    out[i] = acc;
  }
  return out;
}

FeaturePlane mfcc(const AudioClip& clip, const StftParams& params, std::size_t n_coeffs) {
  auto mel = mel_spectrogram(clip, params, kFeatureSize);
  if (n_coeffs > mel.height) throw ConfigError("n_coeffs exceeds mel band count");
  const std::size_t n = mel.height;

  // Cached orthonormal DCT-II basis (same transform as dct2_orthonormal).
  static std::vector<double> basis;
  static std::size_t basis_n = 0;
  static std::mutex basis_mutex;
  {
    std::lock_guard<std::mutex> lock(basis_mutex);
    if (basis_n != n) {
      basis.assign(n * n, 0.0);
      for (std::size_t k = 0; k < n; ++k) {
        const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        for (std::size_t i = 0; i < n; ++i)
          basis[k * n + i] = scale * std::cos(kPi * (2.0 * i + 1.0) * k / (2.0 * n));
      }
      basis_n = n;
    }
  }

  FeaturePlane out;
  out.kind = PlaneKind::MFCC;
  out.base = PlaneKind::MFCC;
  out.height = n_coeffs;
  out.width = mel.width;
  out.data.resize(out.height * out.width);
  std::vector<double> column(n);
  for (std::size_t t = 0; t < mel.width; ++t) {
    for (std::size_t i = 0; i < n; ++i) column[i] = mel.at(i, t);
    for (std::size_t k = 0; k < n_coeffs; ++k) {
      double acc = 0.0;
      const double* row = basis.data() + k * n;
      for (std::size_t i = 0; i < n; ++i) acc += row[i] * column[i];
      out.at(k, t) = static_cast<float>(acc);
    }
  }
  return out;
}

FeaturePlane velocity_map(const FeaturePlane& base) {
  auto out = difference_map(base, PlaneKind::V);
  return out;
}

FeaturePlane acceleration_map(const FeaturePlane& base) {
  auto v = difference_map(base, PlaneKind::V);
  auto out = difference_map(v, PlaneKind::A);
  return out;
}

std::size_t spec_channel_count(const std::string& spec) {
  const auto parsed = parse_spec(spec);
  return parsed.bases.size() + (parsed.velocity ? 1 : 0) + (parsed.acceleration ? 1 : 0);
}

FeatureTensor assemble(const AudioClip& clip, const std::string& spec, const StftParams& params) {
  const auto parsed = parse_spec(spec);
  FeatureTensor tensor;
  tensor.spec = spec;
  for (PlaneKind kind : parsed.bases) tensor.planes.push_back(base_plane(clip, kind, params));
  if (parsed.velocity) tensor.planes.push_back(velocity_map(tensor.planes[0]));
  if (parsed.acceleration) tensor.planes.push_back(acceleration_map(tensor.planes[0]));
  return tensor;
}

void StatsAccumulator::init(std::size_t channels) {
  count.assign(channels, 0);
  mean.assign(channels, 0.0);
  m2.assign(channels, 0.0);
}

void StatsAccumulator::add(std::size_t channel, double value) {
  // Welford update.
  ++count[channel];
  const double delta = value - mean[channel];
  mean[channel] += delta / static_cast<double>(count[channel]);
  m2[channel] += delta * (value - mean[channel]);
}

void StatsAccumulator::merge(const StatsAccumulator& other) {
  for (std::size_t c = 0; c < mean.size(); ++c) {
    if (other.count[c] == 0) continue;
    if (count[c] == 0) {
      count[c] = other.count[c];
      mean[c] = other.mean[c];
      m2[c] = other.m2[c];
      continue;
    }
    const double na = static_cast<double>(count[c]);
    const double nb = static_cast<double>(other.count[c]);
    const double delta = other.mean[c] - mean[c];
    const double total = na + nb;
    mean[c] += delta * nb / total;
    m2[c] += other.m2[c] + delta * delta * na * nb / total;
    count[c] += other.count[c];
  }
}

ChannelStats StatsAccumulator::finalize() const {
  ChannelStats stats;
  stats.mean.resize(mean.size());
  stats.stddev.resize(mean.size());
  stats.degenerate.resize(mean.size());
  for (std::size_t c = 0; c < mean.size(); ++c) {
    stats.mean[c] = mean[c];
    const double var = count[c] > 0 ? m2[c] / static_cast<double>(count[c]) : 0.0;
    stats.stddev[c] = std::sqrt(std::max(var, 0.0));
    stats.degenerate[c] = stats.stddev[c] <= 0.0;
  }
  return stats;
}

ChannelStats compute_channel_stats(const std::vector<FeatureTensor>& batch) {
  if (batch.empty()) throw ConfigError("compute_channel_stats on empty batch");
  const std::size_t channels = batch[0].channels();
  StatsAccumulator acc;
  acc.init(channels);
  for (const auto& tensor : batch) {
    if (tensor.channels() != channels) throw ShapeError("uneven channel counts in stats batch");
    for (std::size_t c = 0; c < channels; ++c)
      for (float v : tensor.planes[c].data) acc.add(c, v);
  }
  return acc.finalize();
}

FeatureTensor normalize(const FeatureTensor& tensor, const ChannelStats& stats) {
  if (stats.channels() != tensor.channels())
    throw ShapeError("stats channel count does not match tensor");
  for (std::size_t c = 0; c < stats.channels(); ++c)
    if (stats.stddev[c] <= 0.0)
      throw DegenerateStatsError("std <= 0 for channel " + std::to_string(c));

  FeatureTensor out = tensor;
  for (std::size_t c = 0; c < out.channels(); ++c) {
    const double mean = stats.mean[c];
    const double inv = 1.0 / stats.stddev[c];
    for (float& v : out.planes[c].data) v = static_cast<float>((v - mean) * inv);
  }
  out.channel_stats = stats;
  return out;
}

std::vector<FeatureTensor> normalize(const std::vector<FeatureTensor>& batch,
                                     const ChannelStats& stats) {
  std::vector<FeatureTensor> out;
  out.reserve(batch.size());
  for (const auto& tensor : batch) out.push_back(normalize(tensor, stats));
  return out;
}

void save_feature_tensor(const FeatureTensor& tensor, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write("SFLW", 4);
  write_u16(out, kFeatureFileVersion);
  write_u32(out, static_cast<std::uint32_t>(tensor.channels()));
  write_u32(out, static_cast<std::uint32_t>(tensor.height()));
  write_u32(out, static_cast<std::uint32_t>(tensor.width()));
  write_u32(out, static_cast<std::uint32_t>(tensor.spec.size()));
  out.write(tensor.spec.data(), static_cast<std::streamsize>(tensor.spec.size()));
  for (const auto& plane : tensor.planes)
    out.write(reinterpret_cast<const char*>(plane.data.data()),
              static_cast<std::streamsize>(plane.data.size() * sizeof(float)));
  if (!out) throw IoError("failed writing " + path);
}

FeatureTensor load_feature_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SFLW", 4) != 0)
    throw ParseError(path + ": bad feature file magic");
  const std::uint16_t version = read_u16(in);
  if (version != kFeatureFileVersion)
    throw UnsupportedFormatError(path + ": unsupported feature file version");
  const std::uint32_t channels = read_u32(in);
  const std::uint32_t height = read_u32(in);
  const std::uint32_t width = read_u32(in);
  const std::uint32_t spec_len = read_u32(in);
  if (!in) throw ParseError(path + ": truncated feature header");
  std::string spec(spec_len, '\0');
  in.read(spec.data(), spec_len);

  FeatureTensor tensor;
  tensor.spec = spec;
  std::vector<PlaneKind> kinds;
  try {
    const auto parsed = parse_spec(spec);
    kinds = parsed.bases;
    if (parsed.velocity) kinds.push_back(PlaneKind::V);
    if (parsed.acceleration) kinds.push_back(PlaneKind::A);
  } catch (const SpecError&) {
    kinds.assign(channels, PlaneKind::SP);  // tolerate foreign spec labels
  }
  if (kinds.size() != channels) kinds.assign(channels, PlaneKind::SP);

  for (std::uint32_t c = 0; c < channels; ++c) {
    FeaturePlane plane;
    plane.kind = kinds[c];
    plane.base = kinds[c];
    plane.height = height;
    plane.width = width;
    plane.data.resize(static_cast<std::size_t>(height) * width);
    in.read(reinterpret_cast<char*>(plane.data.data()),
            static_cast<std::streamsize>(plane.data.size() * sizeof(float)));
    if (!in) throw ParseError(path + ": truncated feature data");
    tensor.planes.push_back(std::move(plane));
  }
  return tensor;
}

void export_feature_csv(const FeatureTensor& tensor, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (std::size_t c = 0; c < tensor.channels(); ++c) {
    const auto& plane = tensor.planes[c];
    for (std::size_t h = 0; h < plane.height; ++h) {
      out << c << ',' << h;
      for (std::size_t w = 0; w < plane.width; ++w) out << ',' << plane.at(h, w);
      out << '\n';
    }
  }
  if (!out) throw IoError("failed writing " + path);
}

void save_channel_stats(const ChannelStats& stats, const std::string& path) {
  nlohmann::json j;
  j["mean"] = stats.mean;
  j["std"] = stats.stddev;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

ChannelStats load_channel_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  in >> j;
  ChannelStats stats;
  stats.mean = j.at("mean").get<std::vector<double>>();
  stats.stddev = j.at("std").get<std::vector<double>>();
  if (stats.mean.size() != stats.stddev.size()) throw ParseError(path + ": mean/std size mismatch");
  stats.degenerate.resize(stats.mean.size());
  for (std::size_t c = 0; c < stats.mean.size(); ++c) stats.degenerate[c] = stats.stddev[c] <= 0.0;
  return stats;
}

}  // namespace sfc
