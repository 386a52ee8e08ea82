#include "sfc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "sfc/errors.hpp"
#include "sfc/parallel.hpp"
#include "sfc/rng.hpp"

namespace sfc {

namespace {

// Draw-order within one output clip's random stream.
enum DrawCounter : std::uint64_t {
  kDrawNoiseId = 0,
  kDrawNoiseOffset = 1,
  kDrawMixRatio = 2,
  kDrawVolume = 3,
};

// 2 s view of the noise pool entry: tile short clips, crop long ones.
AudioClip noise_view(const AudioClip& noise, std::size_t length, std::size_t offset) {
  AudioClip out;
  out.sample_rate = noise.sample_rate;
  out.samples.resize(length);
  if (noise.samples.empty()) return out;
  if (noise.samples.size() >= length) {
    std::copy_n(noise.samples.begin() + offset, length, out.samples.begin());
  } else {
    for (std::size_t i = 0; i < length; ++i)
      out.samples[i] = noise.samples[i % noise.samples.size()];
  }
  return out;
}

}  // namespace

const char* label_name(Label label) { return label == Label::kCough ? "Cough" : "Others"; }

Label label_from_name(const std::string& name) {
  if (name == "Cough" || name == "cough") return Label::kCough;
  if (name == "Others" || name == "others") return Label::kOthers;
  throw ParseError("unknown label '" + name + "'");
}

bool is_zero_energy(const AudioClip& clip, double epsilon) {
  double energy = 0.0;
  for (float s : clip.samples) energy += static_cast<double>(s) * s;
  return energy <= epsilon;
}

AudioClip mix(const AudioClip& event, const AudioClip& noise, double r, double v) {
  if (event.samples.size() != noise.samples.size())
    throw ShapeError("mix operands differ in length");
  if (event.sample_rate != noise.sample_rate)
    throw ShapeError("mix operands differ in sample rate");

  AudioClip out;
  out.sample_rate = event.sample_rate;
  out.samples.resize(event.samples.size());
  const double we = v * (1.0 - r);
  const double wn = v * r;
  for (std::size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] = static_cast<float>(we * event.samples[i] + wn * noise.samples[i]);
  return out;
}

AudioClip peak_normalize(const AudioClip& clip) {
  float peak = 0.0f;
  for (float s : clip.samples) peak = std::max(peak, std::abs(s));
  if (peak <= 0.0f) return clip;
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(clip.samples.size());
  const float inv = 1.0f / peak;
  for (std::size_t i = 0; i < clip.samples.size(); ++i) out.samples[i] = clip.samples[i] * inv;
  return out;
}

std::vector<LabeledClip> augment_dataset(const std::vector<LabeledClip>& events,
                                         const std::vector<AudioClip>& noises,
                                         const AugmentPolicy& policy) {
  if (policy.cough_replications < 1 || policy.others_replications < 1)
    throw ConfigError("replication counts must be >= 1");
  if (policy.mix_ratio_lo < 0 || policy.mix_ratio_hi > 1 || policy.mix_ratio_lo > policy.mix_ratio_hi)
    throw ConfigError("mix ratio range must satisfy 0 <= lo <= hi <= 1");
  if (policy.volume_lo <= 0 || policy.volume_hi > 1 || policy.volume_lo > policy.volume_hi)
    throw ConfigError("volume range must satisfy 0 < lo <= hi <= 1");

  // Pool entries keep their index into `noises` for provenance.
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < noises.size(); ++i)
    if (!is_zero_energy(noises[i])) pool.push_back(i);
  if (pool.empty() && !events.empty())
    throw ConfigError("noise pool is empty after zero-energy filtering");

  // Flat output index -> (event, replica) so each output owns one RNG stream.
  std::vector<std::size_t> event_of_output;
  for (std::size_t e = 0; e < events.size(); ++e) {
    const int reps = events[e].label == Label::kCough ? policy.cough_replications
                                                      : policy.others_replications;
    for (int k = 0; k < reps; ++k) event_of_output.push_back(e);
  }

  const Rng rng(policy.seed);
  std::vector<LabeledClip> out(event_of_output.size());
  parallel_for(out.size(), [&](std::size_t i) {
    const LabeledClip& source = events[event_of_output[i]];
    const std::size_t length = source.clip.samples.size();

    const std::size_t noise_id = pool[rng.below(i, kDrawNoiseId, pool.size())];
    const AudioClip& noise = noises[noise_id];
    std::size_t offset = 0;
    if (noise.samples.size() > length)
      offset = rng.below(i, kDrawNoiseOffset, noise.samples.size() - length + 1);
    const double r = rng.uniform(i, kDrawMixRatio, policy.mix_ratio_lo, policy.mix_ratio_hi);
    const double v = rng.uniform(i, kDrawVolume, policy.volume_lo, policy.volume_hi);

    LabeledClip result;
    result.label = source.label;
    result.clip = mix(peak_normalize(source.clip),
                      peak_normalize(noise_view(noise, length, offset)), r, v);
    result.provenance.source_id = source.provenance.source_id;
    result.provenance.noise_id = static_cast<int>(noise_id);
    result.provenance.noise_offset = offset;
    result.provenance.mix_ratio = r;
    result.provenance.volume = v;
    result.provenance.seed = policy.seed;
    out[i] = std::move(result);
  });
  return out;
}

std::pair<std::vector<LabeledClip>, std::vector<LabeledClip>> split_train_valid(
    const std::vector<LabeledClip>& data, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0) throw ConfigError("fraction must be in (0, 1)");

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const Rng rng(seed);
  // Fisher-Yates with counter-based draws.
  for (std::size_t i = data.size(); i > 1; --i) {
    const std::size_t j = rng.below(0, i, i);
    std::swap(order[i - 1], order[j]);
  }

  const std::size_t train_count =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size())));
  std::pair<std::vector<LabeledClip>, std::vector<LabeledClip>> result;
  result.first.reserve(train_count);
  result.second.reserve(data.size() - train_count);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < train_count)
      result.first.push_back(data[order[i]]);
    else
      result.second.push_back(data[order[i]]);
  }
  return result;
}

std::string manifest_record(const LabeledClip& clip, const std::string& output_path) {
  nlohmann::json j;
  j["source_id"] = clip.provenance.source_id;
  j["label"] = label_name(clip.label);
  j["noise_id"] = clip.provenance.noise_id;
  j["noise_offset"] = clip.provenance.noise_offset;
  j["r"] = clip.provenance.mix_ratio;
  j["v"] = clip.provenance.volume;
  j["seed"] = clip.provenance.seed;
  j["output_path"] = output_path;
  return j.dump();
}

}  // namespace sfc
