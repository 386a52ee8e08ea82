#include "sfc/features.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "sfc/errors.hpp"
#include "sfc/rng.hpp"

using namespace sfc;

namespace {

AudioClip silence_2s() {
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.assign(32000, 0.0f);
  return clip;
}

AudioClip sine_2s(double hz, double amplitude = 0.5) {
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.resize(32000);
  for (std::size_t i = 0; i < clip.samples.size(); ++i)
    clip.samples[i] =
        static_cast<float>(amplitude * std::sin(2.0 * 3.141592653589793 * hz * i / 16000.0));
  return clip;
}

AudioClip white_noise_2s(std::uint64_t seed) {
  const Rng rng(seed);
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.resize(32000);
  for (std::size_t i = 0; i < clip.samples.size(); ++i)
    clip.samples[i] = static_cast<float>(rng.uniform(0, i, -1.0, 1.0));
  return clip;
}

FeaturePlane plane_from(std::vector<std::vector<float>> rows) {
  FeaturePlane plane;
  plane.height = rows.size();
  plane.width = rows[0].size();
  for (const auto& row : rows) plane.data.insert(plane.data.end(), row.begin(), row.end());
  return plane;
}

// Independent stencil: forward at the first frame, central inside, backward
// at the last.
std::vector<float> stencil_row(const std::vector<float>& x) {
  const std::size_t w = x.size();
  std::vector<float> out(w);
  out[0] = x[1] - x[0];
  for (std::size_t t = 1; t + 1 < w; ++t) out[t] = (x[t + 1] - x[t - 1]) / 2.0f;
  out[w - 1] = x[w - 1] - x[w - 2];
  return out;
}

}  // namespace

TEST_CASE("stft frame count: 2 s at 16 kHz gives 132 raw frames") {
  CHECK(stft_frame_count(32000, StftParams{}) == 132);
  // floor((L - 480)/240) + 1 on random lengths
  const Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const std::size_t len = 480 + rng.below(0, i, 100000);
    CHECK(stft_frame_count(len, StftParams{}) == (len - 480) / 240 + 1);
  }
}

TEST_CASE("spectrogram of silence sits at the dB floor") {
  const auto plane = spectrogram(silence_2s());
  CHECK(plane.height == 128);
  CHECK(plane.width == 128);
  for (float v : plane.data) CHECK(v == -100.0f);
}

TEST_CASE("spectrogram puts a 1 kHz tone in bin 32 of every frame") {
  const auto plane = spectrogram(sine_2s(1000.0));
  for (std::size_t t = 0; t < plane.width; ++t) {
    std::size_t argmax = 0;
    for (std::size_t h = 1; h < plane.height; ++h)
      if (plane.at(h, t) > plane.at(argmax, t)) argmax = h;
    CHECK(argmax == 32);
  }
}

TEST_CASE("spectrogram rejects too-short input") {
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.assign(100, 0.0f);
  CHECK_THROWS_AS(spectrogram(clip), ShapeError);
}

TEST_CASE("mel scale closed-form points") {
  CHECK(hz_to_mel(0.0) == 0.0);
  CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-12));
  CHECK(mel_to_hz(hz_to_mel(1234.5)) == doctest::Approx(1234.5).epsilon(1e-9));
}

TEST_CASE("mel spectrogram of silence sits at the dB floor") {
  const auto plane = mel_spectrogram(silence_2s());
  CHECK(plane.height == 128);
  CHECK(plane.width == 128);
  for (float v : plane.data) CHECK(v == -100.0f);
}

TEST_CASE("white noise yields a smooth mel band profile") {
  // Mean band level over 100 seeded clips; adjacent bands whose triangles
  // are at least two FFT bins wide must stay within 3 dB of each other.
  std::vector<double> band_sum(128, 0.0);
  std::size_t frames_total = 0;
  for (int clip_idx = 0; clip_idx < 100; ++clip_idx) {
    const auto plane = mel_spectrogram(white_noise_2s(1000 + clip_idx));
    for (std::size_t h = 0; h < plane.height; ++h)
      for (std::size_t t = 0; t < plane.width; ++t) band_sum[h] += plane.at(h, t);
    frames_total += plane.width;
  }
  for (auto& v : band_sum) v /= static_cast<double>(frames_total);

  // Independent derivation of the band widths from the HTK formulas.
  const double mel_max = hz_to_mel(8000.0);
  auto edge_hz = [&](int i) { return mel_to_hz(mel_max * i / 129.0); };
  const double bin_hz = 16000.0 / 512.0;
  int checked = 0;
  for (int m = 0; m + 1 < 128; ++m) {
    const double width_a = edge_hz(m + 2) - edge_hz(m);
    const double width_b = edge_hz(m + 3) - edge_hz(m + 1);
    if (width_a < 2.0 * bin_hz || width_b < 2.0 * bin_hz) continue;
    CHECK(std::abs(band_sum[m] - band_sum[m + 1]) < 3.0);
    ++checked;
  }
  CHECK(checked > 60);
}

TEST_CASE("mel spectrogram reaches bands the linear crop cannot") {
  // A 6 kHz tone lies above the SP crop (4 kHz) but lands in the upper mel
  // bands: hz_to_mel(6000)/band spacing ~ band 115.
  const auto plane = mel_spectrogram(sine_2s(6000.0));
  const double band_spacing = hz_to_mel(8000.0) / 129.0;
  const int expected = static_cast<int>(hz_to_mel(6000.0) / band_spacing) - 1;
  for (std::size_t t = 0; t < plane.width; ++t) {
    std::size_t argmax = 0;
    for (std::size_t h = 1; h < plane.height; ++h)
      if (plane.at(h, t) > plane.at(argmax, t)) argmax = h;
    CHECK(std::abs(static_cast<int>(argmax) - expected) <= 1);
  }
}

TEST_CASE("stft rejects unknown window functions") {
  StftParams params;
  params.window_function = "blackman";
  CHECK_THROWS_AS(spectrogram(silence_2s(), params), ConfigError);
}

TEST_CASE("mfcc of silence: sqrt(128) energy in coefficient 0, constant over time") {
  const auto plane = mfcc(silence_2s());
  CHECK(plane.height == 128);
  CHECK(plane.width == 128);
  const double expected0 = -100.0 * std::sqrt(128.0);
  for (std::size_t t = 0; t < plane.width; ++t) {
    CHECK(plane.at(0, t) == doctest::Approx(expected0).epsilon(1e-6));
    for (std::size_t k = 1; k < plane.height; ++k) CHECK(std::abs(plane.at(k, t)) < 1e-3);
    CHECK(plane.at(0, t) == plane.at(0, 0));  // time invariance
  }
}

TEST_CASE("DCT-II round trip is orthonormal") {
  const Rng rng(42);
  std::vector<double> x(128);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(0, i, -50.0, 50.0);
  const auto back = idct2_orthonormal(dct2_orthonormal(x));
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(std::abs(back[i] - x[i]) / std::max(1.0, std::abs(x[i])) < 1e-9);

  const auto c = dct2_orthonormal(std::vector<double>(128, 3.0));
  CHECK(c[0] == doctest::Approx(3.0 * std::sqrt(128.0)).epsilon(1e-12));
  for (std::size_t k = 1; k < c.size(); ++k) CHECK(std::abs(c[k]) < 1e-10);
}

TEST_CASE("velocity map hand case") {
  const auto v = velocity_map(plane_from({{1, 3, 6, 10}}));
  CHECK(v.data == std::vector<float>({2.0f, 2.5f, 3.5f, 4.0f}));
  CHECK(v.kind == PlaneKind::V);

  const auto a = acceleration_map(plane_from({{1, 3, 6, 10}}));
  CHECK(a.data == std::vector<float>({0.5f, 0.75f, 0.75f, 0.5f}));
  CHECK(a.kind == PlaneKind::A);
}

TEST_CASE("velocity of a constant is zero; of a ramp is the slope everywhere") {
  const auto flat = velocity_map(plane_from({{7, 7, 7, 7, 7}}));
  for (float v : flat.data) CHECK(v == 0.0f);

  std::vector<float> ramp(10);
  for (std::size_t t = 0; t < ramp.size(); ++t) ramp[t] = 2.5f * static_cast<float>(t);
  const auto v = velocity_map(plane_from({ramp}));
  for (float x : v.data) CHECK(x == 2.5f);

  const auto a = acceleration_map(plane_from({ramp}));
  for (float x : a.data) CHECK(x == 0.0f);
}

TEST_CASE("acceleration of a quadratic is exactly 2 inside") {
  std::vector<float> quad(12);
  for (std::size_t t = 0; t < quad.size(); ++t) quad[t] = static_cast<float>(t * t);
  const auto a = acceleration_map(plane_from({quad}));
  for (std::size_t t = 2; t + 2 < quad.size(); ++t) CHECK(a.data[t] == 2.0f);
}

TEST_CASE("difference maps match the brute-force stencil on 1000 random matrices") {
  const Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t h = 1 + rng.below(0, trial * 3, 16);
    const std::size_t w = 2 + rng.below(0, trial * 3 + 1, 15);
    FeaturePlane plane;
    plane.height = h;
    plane.width = w;
    plane.data.resize(h * w);
    for (std::size_t i = 0; i < plane.data.size(); ++i)
      plane.data[i] = static_cast<float>(rng.uniform(1, trial * 1000 + i, -10.0, 10.0));

    const auto v = velocity_map(plane);
    const auto a = acceleration_map(plane);
    for (std::size_t row = 0; row < h; ++row) {
      std::vector<float> x(w);
      for (std::size_t t = 0; t < w; ++t) x[t] = plane.at(row, t);
      const auto v_ref = stencil_row(x);
      const auto a_ref = stencil_row(v_ref);
      for (std::size_t t = 0; t < w; ++t) {
        CHECK(v.at(row, t) == v_ref[t]);
        CHECK(a.at(row, t) == a_ref[t]);
      }
    }
  }
}

TEST_CASE("velocity is linear") {
  const Rng rng(7);
  FeaturePlane x, y;
  x.height = y.height = 4;
  x.width = y.width = 9;
  x.data.resize(36);
  y.data.resize(36);
  for (std::size_t i = 0; i < 36; ++i) {
    x.data[i] = static_cast<float>(rng.below(0, i, 64)) - 32.0f;
    y.data[i] = static_cast<float>(rng.below(1, i, 64)) - 32.0f;
  }
  FeaturePlane combo = x;
  for (std::size_t i = 0; i < 36; ++i) combo.data[i] = 2.0f * x.data[i] + 3.0f * y.data[i];

  const auto vx = velocity_map(x), vy = velocity_map(y), vc = velocity_map(combo);
  for (std::size_t i = 0; i < 36; ++i)
    CHECK(std::abs(vc.data[i] - (2.0f * vx.data[i] + 3.0f * vy.data[i])) < 1e-12);
}

TEST_CASE("difference maps require two frames") {
  CHECK_THROWS_AS(velocity_map(plane_from({{1}})), ShapeError);
}

TEST_CASE("assemble covers the full feature-spec vocabulary") {
  const auto clip = sine_2s(500.0);
  const struct {
    const char* spec;
    std::size_t channels;
  } cases[] = {{"SP", 1},      {"MS", 1},      {"MFCC", 1},   {"SP-V", 2},      {"MS-V", 2},
               {"MFCC-V", 2},  {"SP-V-A", 3},  {"MS-V-A", 3}, {"MFCC-V-A", 3},  {"SP-MS", 2},
               {"SP-MFCC", 2}, {"MS-MFCC", 2}, {"SP-MS-MFCC", 3}};
  for (const auto& c : cases) {
    CAPTURE(c.spec);
    CHECK(spec_channel_count(c.spec) == c.channels);
    const auto tensor = assemble(clip, c.spec);
    CHECK(tensor.channels() == c.channels);
    CHECK(tensor.height() == 128);
    CHECK(tensor.width() == 128);
    CHECK(tensor.spec == c.spec);
  }
}

TEST_CASE("assemble orders channels as base, V, A") {
  const auto tensor = assemble(sine_2s(800.0), "MFCC-V-A");
  REQUIRE(tensor.channels() == 3);
  CHECK(tensor.planes[0].kind == PlaneKind::MFCC);
  CHECK(tensor.planes[1].kind == PlaneKind::V);
  CHECK(tensor.planes[1].base == PlaneKind::MFCC);
  CHECK(tensor.planes[2].kind == PlaneKind::A);
  CHECK(tensor.planes[2].base == PlaneKind::MFCC);

  // V channel equals velocity_map of the base channel.
  const auto v = velocity_map(tensor.planes[0]);
  CHECK(tensor.planes[1].data == v.data);
}

TEST_CASE("assemble rejects malformed specs") {
  const auto clip = silence_2s();
  for (const char* bad : {"SP-A", "V-A", "SP-SP", "XX", "", "SP-MS-MFCC-SP", "MFCC-A-V"})
    CHECK_THROWS_AS(assemble(clip, bad), SpecError);
}

TEST_CASE("channel stats over a two-tensor batch") {
  FeatureTensor ones, threes;
  for (auto* t : {&ones, &threes}) {
    FeaturePlane plane;
    plane.height = 4;
    plane.width = 4;
    plane.data.assign(16, t == &ones ? 1.0f : 3.0f);
    t->planes.push_back(plane);
    t->spec = "SP";
  }
  const auto stats = compute_channel_stats({ones, threes});
  REQUIRE(stats.channels() == 1);
  CHECK(stats.mean[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(stats.stddev[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(stats.degenerate[0]);
}

TEST_CASE("all-zero batch flags degenerate stats") {
  FeatureTensor zero;
  FeaturePlane plane;
  plane.height = 2;
  plane.width = 2;
  plane.data.assign(4, 0.0f);
  zero.planes.push_back(plane);
  const auto stats = compute_channel_stats({zero});
  CHECK(stats.mean[0] == 0.0);
  CHECK(stats.stddev[0] == 0.0);
  CHECK(stats.degenerate[0]);
  CHECK_THROWS_AS(normalize(zero, stats), DegenerateStatsError);
}

TEST_CASE("stats are independent of batch order") {
  const Rng rng(31);
  std::vector<FeatureTensor> batch;
  for (int i = 0; i < 8; ++i) {
    FeatureTensor t;
    for (int c = 0; c < 2; ++c) {
      FeaturePlane plane;
      plane.height = 8;
      plane.width = 8;
      plane.data.resize(64);
      for (std::size_t k = 0; k < 64; ++k)
        plane.data[k] = static_cast<float>(rng.uniform(i * 2 + c, k, -5.0, 5.0));
      t.planes.push_back(std::move(plane));
    }
    batch.push_back(std::move(t));
  }
  const auto forward_stats = compute_channel_stats(batch);
  std::reverse(batch.begin(), batch.end());
  const auto reverse_stats = compute_channel_stats(batch);
  for (int c = 0; c < 2; ++c) {
    CHECK(std::abs(forward_stats.mean[c] - reverse_stats.mean[c]) < 1e-9);
    CHECK(std::abs(forward_stats.stddev[c] - reverse_stats.stddev[c]) < 1e-9);
  }
}

TEST_CASE("accumulator merge equals one-pass accumulation") {
  const Rng rng(57);
  std::vector<double> values(1000);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = rng.uniform(0, i, -100.0, 100.0);

  StatsAccumulator whole, left, right;
  whole.init(1);
  left.init(1);
  right.init(1);
  for (std::size_t i = 0; i < values.size(); ++i) {
    whole.add(0, values[i]);
    (i < 400 ? left : right).add(0, values[i]);
  }
  left.merge(right);
  CHECK(left.finalize().mean[0] == doctest::Approx(whole.finalize().mean[0]).epsilon(1e-12));
  CHECK(left.finalize().stddev[0] == doctest::Approx(whole.finalize().stddev[0]).epsilon(1e-12));
}

TEST_CASE("normalization: identity stats, self stats, constant channel") {
  const auto tensor = assemble(sine_2s(600.0), "SP-V");

  ChannelStats identity;
  identity.mean = {0.0, 0.0};
  identity.stddev = {1.0, 1.0};
  identity.degenerate = {false, false};
  CHECK(normalize(tensor, identity).planes[0].data == tensor.planes[0].data);

  const auto self = compute_channel_stats({tensor});
  const auto normed = normalize(tensor, self);
  const auto post = compute_channel_stats({normed});
  for (int c = 0; c < 2; ++c) {
    CHECK(std::abs(post.mean[c]) <= 1e-6);
    CHECK(std::abs(post.stddev[c] - 1.0) <= 1e-4);
  }
  // The tensor remembers the statistics that produced it.
  REQUIRE(normed.channel_stats.has_value());
  CHECK(normed.channel_stats->mean == self.mean);

  FeatureTensor constant;
  FeaturePlane plane;
  plane.height = 3;
  plane.width = 3;
  plane.data.assign(9, 5.0f);
  constant.planes.push_back(plane);
  ChannelStats external;
  external.mean = {5.0};
  external.stddev = {2.0};
  external.degenerate = {false};
  const auto centered = normalize(constant, external);
  for (float v : centered.planes[0].data) CHECK(v == 0.0f);
}

TEST_CASE("normalize validates channel counts") {
  const auto tensor = assemble(silence_2s(), "SP");
  ChannelStats stats;
  stats.mean = {0.0, 0.0};
  stats.stddev = {1.0, 1.0};
  stats.degenerate = {false, false};
  CHECK_THROWS_AS(normalize(tensor, stats), ShapeError);
}

TEST_CASE("feature file round trip and CSV export") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "sfc_tests";
  fs::create_directories(dir);

  const auto tensor = assemble(sine_2s(250.0), "MS-V");
  const auto path = (dir / "feature.sflw").string();
  save_feature_tensor(tensor, path);
  const auto back = load_feature_tensor(path);
  CHECK(back.spec == tensor.spec);
  REQUIRE(back.channels() == tensor.channels());
  for (std::size_t c = 0; c < tensor.channels(); ++c)
    CHECK(back.planes[c].data == tensor.planes[c].data);

  const auto csv_path = (dir / "feature.csv").string();
  export_feature_csv(tensor, csv_path);
  std::ifstream csv(csv_path);
  std::size_t rows = 0;
  std::string line;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == tensor.channels() * tensor.height());

  // Truncated file fails the load.
  const auto trunc_path = (dir / "trunc.sflw").string();
  {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream out(trunc_path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_feature_tensor(trunc_path), ParseError);
}
