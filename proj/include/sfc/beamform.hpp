#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sfc/audio.hpp"

namespace sfc {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
double norm(const Vec3& v);

inline constexpr double kSpeedOfSound = 343.0;  // m/s at 20 C
inline constexpr int kDefaultMicCount = 112;

// Microphone positions in meters, array-plane coordinates with the origin at
// the array center (z = 0 plane).
struct MicArray {
  std::vector<Vec3> positions;
  std::size_t size() const { return positions.size(); }
};

// Virtual plane facing the array at `distance`, discretized into
// res_x x res_y pixels over width x height meters, centered on boresight.
struct InspectionPlane {
  double distance = 1.0;
  double width = 1.0;
  double height = 1.0;
  int res_x = 32;
  int res_y = 32;

  int pixel_count() const { return res_x * res_y; }
  // Pixel (ix, iy) -> world position of its cell center. iy increases with +y.
  Vec3 pixel_center(int ix, int iy) const;
};

struct SceneSource {
  Vec3 position;
  AudioClip signal;
  double gain = 1.0;
};

struct Scene {
  std::vector<SceneSource> sources;
  double noise_floor = 0.0;
  double speed_of_sound = kSpeedOfSound;
  std::uint64_t seed = 0;
};

// Mean-square beamformer output per pixel, row-major (iy * res_x + ix).
struct PowerMap {
  std::vector<double> values;
  InspectionPlane plane;
  double window_start = 0.0;
  double window_end = 0.0;

  double at(int ix, int iy) const { return values[static_cast<std::size_t>(iy) * plane.res_x + ix]; }
};

struct Peak {
  int ix = 0;
  int iy = 0;
  Vec3 world;
  double power = 0.0;
};

// Steering delays tau[pixel][mic] = (|X_p| - |X_p - M_n|) / c.
std::vector<std::vector<double>> compute_delays(const InspectionPlane& plane,
                                                const MicArray& array, double c = kSpeedOfSound);

// Delay-and-sum for one pixel: B(t) = sum_n a_n * s_n[t - tau_n], fractional
// delays by linear interpolation, out-of-range reads as zero. Channels must
// share length; weights default to unity.
std::vector<float> das_beamform_pixel(const std::vector<AudioClip>& channels,
                                      const std::vector<double>& delays,
                                      const std::vector<double>& weights = {});

// Full per-pixel time series (pixel-major). Intended for small grids; the
// power path below fuses the reduction instead of materializing this.
std::vector<std::vector<float>> das_beamform(const std::vector<AudioClip>& channels,
                                             const std::vector<std::vector<double>>& delays,
                                             const std::vector<double>& weights = {});

// Mean of B^2 over [t0, t1) seconds for one precomputed series.
double mean_square_power(const std::vector<float>& series, int sample_rate, double t0, double t1);

// Power map over the plane: per pixel, beamform then mean-square over the
// window. Pixels are independent so evaluation order does not matter.
PowerMap power_map(const std::vector<AudioClip>& channels,
                   const std::vector<std::vector<double>>& delays, const InspectionPlane& plane,
                   double t0, double t1, const std::vector<double>& weights = {});

// Spherical-spreading propagation: each mic hears each source delayed by
// distance / c and scaled by gain / max(distance, 0.1), plus seeded white
// noise at scene.noise_floor.
std::vector<AudioClip> simulate_scene(const Scene& scene, const MicArray& array, double duration,
                                      int sample_rate);

// Greedy non-maximum suppression: repeatedly take the global argmax and
// suppress a min_separation_pixels neighborhood (Euclidean, in pixels).
std::vector<Peak> locate_peaks(const PowerMap& map, int count, int min_separation_pixels);

// 112-element Archimedean spiral of 0.1 m radius unless overridden.
MicArray default_mic_array(int count = kDefaultMicCount, double radius = 0.1);

// Geometry file: CSV rows "x,y,z" in meters; '#' comments allowed.
MicArray load_mic_array_csv(const std::string& path);
void save_mic_array_csv(const MicArray& array, const std::string& path);

// Scene config: JSON {sources: [{position, wav_path, gain}], noise_floor, c}.
Scene load_scene_json(const std::string& path);

void save_power_map_csv(const PowerMap& map, const std::string& path);
// 8-bit binary PGM, min-max scaled.
void save_power_map_pgm(const PowerMap& map, const std::string& path);

}  // namespace sfc
