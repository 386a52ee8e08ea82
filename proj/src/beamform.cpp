#include "sfc/beamform.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sfc/errors.hpp"
#include "sfc/parallel.hpp"
#include "sfc/rng.hpp"

namespace sfc {

namespace {

// Linear interpolation read with zero outside [0, len).
double read_delayed(const float* samples, std::size_t len, double pos) {
  if (pos < 0.0) return 0.0;
  const double floor_pos = std::floor(pos);
  const std::size_t i0 = static_cast<std::size_t>(floor_pos);
  if (i0 + 1 >= len) {
    return (i0 < len && pos == floor_pos) ? samples[i0] : 0.0;
  }
  const double frac = pos - floor_pos;
  return samples[i0] + frac * (samples[i0 + 1] - samples[i0]);
}

void check_channels(const std::vector<AudioClip>& channels) {
  if (channels.empty()) throw ShapeError("no channels");
  for (const auto& ch : channels) {
    if (ch.samples.size() != channels[0].samples.size())
      throw ShapeError("channel lengths differ");
    if (ch.sample_rate != channels[0].sample_rate) throw ShapeError("channel rates differ");
  }
}

}  // namespace

double norm(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

Vec3 InspectionPlane::pixel_center(int ix, int iy) const {
  return {-width / 2.0 + (ix + 0.5) * width / res_x,
          -height / 2.0 + (iy + 0.5) * height / res_y, distance};
}

std::vector<std::vector<double>> compute_delays(const InspectionPlane& plane,
                                                const MicArray& array, double c) {
  if (c <= 0.0) throw ConfigError("speed of sound must be positive");
  if (array.size() == 0) throw ConfigError("empty microphone array");
  if (plane.distance <= 0.0) throw ConfigError("inspection plane distance must be positive");
  if (plane.res_x < 1 || plane.res_y < 1) throw ConfigError("plane resolution must be >= 1x1");
  std::vector<std::vector<double>> delays(plane.pixel_count(),
                                          std::vector<double>(array.size()));
  for (int iy = 0; iy < plane.res_y; ++iy) {
    for (int ix = 0; ix < plane.res_x; ++ix) {
      const Vec3 xp = plane.pixel_center(ix, iy);
      const double xp_norm = norm(xp);
      auto& row = delays[static_cast<std::size_t>(iy) * plane.res_x + ix];
      for (std::size_t n = 0; n < array.size(); ++n)
        row[n] = (xp_norm - norm(xp - array.positions[n])) / c;
    }
  }
  return delays;
}

std::vector<float> das_beamform_pixel(const std::vector<AudioClip>& channels,
                                      const std::vector<double>& delays,
                                      const std::vector<double>& weights) {
  check_channels(channels);
  if (delays.size() != channels.size()) throw ShapeError("delay count does not match channels");
  if (!weights.empty() && weights.size() != channels.size())
    throw ShapeError("weight count does not match channels");

  const std::size_t len = channels[0].samples.size();
  const int rate = channels[0].sample_rate;
  std::vector<double> acc(len, 0.0);
  for (std::size_t n = 0; n < channels.size(); ++n) {
    const double shift = delays[n] * rate;  // s_n[t - tau_n]
    const double a = weights.empty() ? 1.0 : weights[n];
    const float* src = channels[n].samples.data();
    for (std::size_t t = 0; t < len; ++t)
      acc[t] += a * read_delayed(src, len, static_cast<double>(t) - shift);
  }
  std::vector<float> out(len);
  for (std::size_t t = 0; t < len; ++t) out[t] = static_cast<float>(acc[t]);
  return out;
}

std::vector<std::vector<float>> das_beamform(const std::vector<AudioClip>& channels,
                                             const std::vector<std::vector<double>>& delays,
                                             const std::vector<double>& weights) {
  std::vector<std::vector<float>> out(delays.size());
  parallel_for(delays.size(),
               [&](std::size_t p) { out[p] = das_beamform_pixel(channels, delays[p], weights); });
  return out;
}

double mean_square_power(const std::vector<float>& series, int sample_rate, double t0, double t1) {
  const std::size_t lo = static_cast<std::size_t>(std::llround(t0 * sample_rate));
  const std::size_t hi = static_cast<std::size_t>(std::llround(t1 * sample_rate));
  if (lo >= hi || hi > series.size()) throw ConfigError("power window out of series bounds");
  double acc = 0.0;
  for (std::size_t t = lo; t < hi; ++t) acc += static_cast<double>(series[t]) * series[t];
  return acc / static_cast<double>(hi - lo);
}

PowerMap power_map(const std::vector<AudioClip>& channels,
                   const std::vector<std::vector<double>>& delays, const InspectionPlane& plane,
                   double t0, double t1, const std::vector<double>& weights) {
  check_channels(channels);
  if (delays.size() != static_cast<std::size_t>(plane.pixel_count()))
    throw ShapeError("delay table does not match plane resolution");

  PowerMap map;
  map.plane = plane;
  map.window_start = t0;
  map.window_end = t1;
  map.values.assign(delays.size(), 0.0);
  parallel_for(delays.size(), [&](std::size_t p) {
    const auto series = das_beamform_pixel(channels, delays[p], weights);
    map.values[p] = mean_square_power(series, channels[0].sample_rate, t0, t1);
  });
  return map;
}

std::vector<AudioClip> simulate_scene(const Scene& scene, const MicArray& array, double duration,
                                      int sample_rate) {
  if (array.size() == 0) throw ConfigError("empty microphone array");
  for (const auto& source : scene.sources) {
    if (source.position.z <= 0.0) throw ConfigError("scene sources must be in front of the array");
    if (source.signal.sample_rate != sample_rate)
      throw ConfigError("scene source rate differs from simulation rate");
  }

  const std::size_t len = static_cast<std::size_t>(std::llround(duration * sample_rate));
  const Rng rng(scene.seed);
  std::vector<AudioClip> channels(array.size());
  parallel_for(array.size(), [&](std::size_t n) {
    AudioClip ch;
    ch.sample_rate = sample_rate;
    std::vector<double> acc(len, 0.0);
    for (const auto& source : scene.sources) {
      const double distance = norm(source.position - array.positions[n]);
      const double delay_samples = distance / scene.speed_of_sound * sample_rate;
      const double amplitude = source.gain / std::max(distance, 0.1);
      const float* src = source.signal.samples.data();
      const std::size_t src_len = source.signal.samples.size();
      for (std::size_t t = 0; t < len; ++t)
        acc[t] += amplitude * read_delayed(src, src_len, static_cast<double>(t) - delay_samples);
    }
    if (scene.noise_floor > 0.0) {
      for (std::size_t t = 0; t < len; ++t) acc[t] += scene.noise_floor * rng.gaussian(n, t);
    }
    ch.samples.resize(len);
    for (std::size_t t = 0; t < len; ++t) ch.samples[t] = static_cast<float>(acc[t]);
    channels[n] = std::move(ch);
  });
  return channels;
}

std::vector<Peak> locate_peaks(const PowerMap& map, int count, int min_separation_pixels) {
  if (count < 1) throw ConfigError("peak count must be >= 1");
  std::vector<double> values = map.values;
  std::vector<Peak> peaks;
  const double sep_sq =
      static_cast<double>(min_separation_pixels) * static_cast<double>(min_separation_pixels);
  for (int k = 0; k < count; ++k) {
    const auto it = std::max_element(values.begin(), values.end());
    if (it == values.end() || *it <= 0.0) break;
    const int idx = static_cast<int>(it - values.begin());
    const int iy = idx / map.plane.res_x;
    const int ix = idx % map.plane.res_x;
    peaks.push_back({ix, iy, map.plane.pixel_center(ix, iy), *it});
    for (int y = 0; y < map.plane.res_y; ++y) {
      for (int x = 0; x < map.plane.res_x; ++x) {
        const double dx = x - ix, dy = y - iy;
        if (dx * dx + dy * dy <= sep_sq)
          values[static_cast<std::size_t>(y) * map.plane.res_x + x] = 0.0;
      }
    }
  }
  return peaks;
}

MicArray default_mic_array(int count, double radius) {
  if (count < 1) throw ConfigError("array needs at least one microphone");
  MicArray array;
  array.positions.reserve(count);
  // Archimedean spiral r = a * theta sampled roughly uniformly in arc length.
  const double turns = 3.5;
  const double theta_max = turns * 2.0 * 3.141592653589793;
  for (int k = 0; k < count; ++k) {
    const double u = std::sqrt((k + 1.0) / count);
    const double theta = theta_max * u;
    const double r = radius * u;
    array.positions.push_back({r * std::cos(theta), r * std::sin(theta), 0.0});
  }
  return array;
}

MicArray load_mic_array_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  MicArray array;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    Vec3 p;
    char c1 = 0, c2 = 0;
    if (!(ss >> p.x >> c1 >> p.y >> c2 >> p.z) || c1 != ',' || c2 != ',')
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 'x,y,z'");
    array.positions.push_back(p);
  }
  if (array.positions.empty()) throw ParseError(path + ": no microphone rows");
  for (std::size_t i = 0; i < array.positions.size(); ++i)
    for (std::size_t j = i + 1; j < array.positions.size(); ++j)
      if (norm(array.positions[i] - array.positions[j]) <= 0.0)
        throw ParseError(path + ": duplicate microphone positions (rows " + std::to_string(i) +
                         ", " + std::to_string(j) + ")");
  return array;
}

void save_mic_array_csv(const MicArray& array, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.precision(12);
  for (const auto& p : array.positions) out << p.x << ',' << p.y << ',' << p.z << '\n';
}

Scene load_scene_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }

  Scene scene;
  scene.noise_floor = j.value("noise_floor", 0.0);
  scene.speed_of_sound = j.value("c", kSpeedOfSound);
  scene.seed = j.value("seed", 0ULL);
  for (const auto& s : j.at("sources")) {
    SceneSource source;
    const auto pos = s.at("position").get<std::vector<double>>();
    if (pos.size() != 3) throw ParseError(path + ": source position must be [x, y, z]");
    source.position = {pos[0], pos[1], pos[2]};
    source.gain = s.value("gain", 1.0);
    source.signal = read_wav(s.at("wav_path").get<std::string>());
    scene.sources.push_back(std::move(source));
  }
  return scene;
}

void save_power_map_csv(const PowerMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.precision(12);
  for (int iy = 0; iy < map.plane.res_y; ++iy) {
    for (int ix = 0; ix < map.plane.res_x; ++ix) {
      if (ix) out << ',';
      out << map.at(ix, iy);
    }
    out << '\n';
  }
}

void save_power_map_pgm(const PowerMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const auto [lo_it, hi_it] = std::minmax_element(map.values.begin(), map.values.end());
  const double lo = map.values.empty() ? 0.0 : *lo_it;
  const double hi = map.values.empty() ? 0.0 : *hi_it;
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  out << "P5\n" << map.plane.res_x << ' ' << map.plane.res_y << "\n255\n";
  for (int iy = 0; iy < map.plane.res_y; ++iy) {
    for (int ix = 0; ix < map.plane.res_x; ++ix) {
      const unsigned char v =
          static_cast<unsigned char>(std::lround((map.at(ix, iy) - lo) * scale));
      out.put(static_cast<char>(v));
    }
  }
}

}  // namespace sfc
