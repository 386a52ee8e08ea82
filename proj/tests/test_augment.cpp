#include "sfc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "sfc/errors.hpp"
#include "sfc/parallel.hpp"
#include "sfc/rng.hpp"

using namespace sfc;

namespace {

AudioClip constant_clip(float value, std::size_t len = 32000, int rate = 16000) {
  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.assign(len, value);
  return clip;
}

AudioClip random_clip(std::uint64_t seed, std::size_t len = 32000, int rate = 16000) {
  const Rng rng(seed);
  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(len);
  for (std::size_t i = 0; i < len; ++i)
    clip.samples[i] = static_cast<float>(rng.uniform(0, i, -0.8, 0.8));
  return clip;
}

LabeledClip labeled(AudioClip clip, Label label, const std::string& id) {
  LabeledClip lc;
  lc.clip = std::move(clip);
  lc.label = label;
  lc.provenance.source_id = id;
  return lc;
}

bool same_samples(const std::vector<LabeledClip>& a, const std::vector<LabeledClip>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].clip.samples != b[i].clip.samples) return false;
  return true;
}

}  // namespace

TEST_CASE("zero-energy gate") {
  CHECK(is_zero_energy(constant_clip(0.0f)));
  AudioClip one;
  one.sample_rate = 16000;
  one.samples = {0.5f};
  CHECK_FALSE(is_zero_energy(one));

  // 32,000 samples of 1e-9: energy 3.2e-14 <= 1e-12.
  CHECK(is_zero_energy(constant_clip(1e-9f)));
}

TEST_CASE("mix endpoints and hand values") {
  const auto event = constant_clip(1.0f, 100);
  const auto noise = constant_clip(-1.0f, 100);

  const auto identity = mix(event, noise, 0.0, 1.0);
  CHECK(identity.samples == event.samples);

  const auto mixed = mix(event, noise, 0.4, 1.0);
  for (float s : mixed.samples) CHECK(s == doctest::Approx(0.2).epsilon(1e-6));

  // r = 0, v = 0.6 simulates a longer distance: pure scaling.
  const auto far = mix(event, noise, 0.0, 0.6);
  for (std::size_t i = 0; i < far.samples.size(); ++i)
    CHECK(far.samples[i] == doctest::Approx(0.6f * event.samples[i]));
}

TEST_CASE("mix validates shapes") {
  CHECK_THROWS_AS(mix(constant_clip(1.0f, 10), constant_clip(1.0f, 20), 0.1, 1.0), ShapeError);
  CHECK_THROWS_AS(mix(constant_clip(1.0f, 10, 16000), constant_clip(1.0f, 10, 8000), 0.1, 1.0),
                  ShapeError);
}

TEST_CASE("mix is bounded by the convex law") {
  const auto event = random_clip(1, 500);
  const auto noise = random_clip(2, 500);
  float event_peak = 0.0f, noise_peak = 0.0f;
  for (float s : event.samples) event_peak = std::max(event_peak, std::abs(s));
  for (float s : noise.samples) noise_peak = std::max(noise_peak, std::abs(s));

  const Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const double r = rng.uniform(0, trial * 2, 0.0, 1.0);
    const double v = rng.uniform(0, trial * 2 + 1, 0.1, 1.0);
    const auto out = mix(event, noise, r, v);
    const float bound = static_cast<float>(v * std::max(event_peak, noise_peak)) + 1e-6f;
    for (float s : out.samples) CHECK(std::abs(s) <= bound);
  }
}

TEST_CASE("mix is monotone in volume") {
  const auto event = random_clip(4, 200);
  const auto noise = random_clip(5, 200);
  const auto low = mix(event, noise, 0.3, 0.6);
  const auto high = mix(event, noise, 0.3, 0.9);
  for (std::size_t i = 0; i < low.samples.size(); ++i)
    CHECK(std::abs(high.samples[i]) >= std::abs(low.samples[i]) - 1e-7f);
}

TEST_CASE("peak_normalize scales to unit peak and keeps silence intact") {
  auto clip = random_clip(6, 100);
  const auto normed = peak_normalize(clip);
  float peak = 0.0f;
  for (float s : normed.samples) peak = std::max(peak, std::abs(s));
  CHECK(peak == doctest::Approx(1.0f));

  const auto silent = peak_normalize(constant_clip(0.0f, 10));
  CHECK(silent.samples == std::vector<float>(10, 0.0f));
}

TEST_CASE("augment_dataset replication counts") {
  std::vector<LabeledClip> events;
  for (int i = 0; i < 10; ++i)
    events.push_back(labeled(random_clip(100 + i), Label::kCough, "c" + std::to_string(i)));
  std::vector<AudioClip> noises = {random_clip(200), random_clip(201), random_clip(202)};

  AugmentPolicy policy;
  policy.seed = 42;
  const auto out = augment_dataset(events, noises, policy);
  CHECK(out.size() == 450);  // 10 x 45

  // Mixed labels: 2 cough + 3 others -> 2*45 + 3*9.
  events.push_back(labeled(random_clip(110), Label::kOthers, "o0"));
  events.push_back(labeled(random_clip(111), Label::kOthers, "o1"));
  events.push_back(labeled(random_clip(112), Label::kOthers, "o2"));
  const auto mixed = augment_dataset(events, noises, policy);
  CHECK(mixed.size() == 10 * 45 + 3 * 9);

  CHECK(augment_dataset({}, noises, policy).empty());
}

TEST_CASE("augment_dataset draws stay in policy ranges and land in provenance") {
  std::vector<LabeledClip> events = {labeled(random_clip(300), Label::kCough, "src")};
  std::vector<AudioClip> noises = {random_clip(301), random_clip(302, 64000),
                                   random_clip(303, 8000)};
  AugmentPolicy policy;
  policy.seed = 7;
  const auto out = augment_dataset(events, noises, policy);
  REQUIRE(out.size() == 45);

  std::map<int, int> noise_usage;
  for (const auto& clip : out) {
    CHECK(clip.provenance.source_id == "src");
    CHECK(clip.provenance.seed == 7);
    CHECK(clip.provenance.noise_id >= 0);
    CHECK(clip.provenance.noise_id < 3);
    CHECK(clip.provenance.mix_ratio >= 0.0);
    CHECK(clip.provenance.mix_ratio <= 0.4);
    CHECK(clip.provenance.volume >= 0.6);
    CHECK(clip.provenance.volume <= 1.0);
    CHECK(clip.clip.samples.size() == 32000);
    ++noise_usage[clip.provenance.noise_id];
  }
  CHECK(noise_usage.size() > 1);  // the pool is actually sampled
}

TEST_CASE("augment_dataset excludes zero-energy noise and rejects an empty pool") {
  std::vector<LabeledClip> events = {labeled(random_clip(400), Label::kCough, "e")};
  std::vector<AudioClip> noises = {constant_clip(0.0f), random_clip(401)};

  AugmentPolicy policy;
  const auto out = augment_dataset(events, noises, policy);
  for (const auto& clip : out) CHECK(clip.provenance.noise_id == 1);  // the silent one is skipped

  CHECK_THROWS_AS(augment_dataset(events, {constant_clip(0.0f)}, policy), ConfigError);
}

TEST_CASE("augmentation is deterministic per seed and across thread counts") {
  std::vector<LabeledClip> events;
  for (int i = 0; i < 4; ++i)
    events.push_back(labeled(random_clip(500 + i), i % 2 ? Label::kCough : Label::kOthers,
                             "s" + std::to_string(i)));
  std::vector<AudioClip> noises = {random_clip(600), random_clip(601)};

  AugmentPolicy policy;
  policy.seed = 11;
  const auto first = augment_dataset(events, noises, policy);
  const auto second = augment_dataset(events, noises, policy);
  CHECK(same_samples(first, second));

  set_thread_cap(1);
  const auto serial = augment_dataset(events, noises, policy);
  set_thread_cap(2);
  const auto threaded = augment_dataset(events, noises, policy);
  set_thread_cap(0);
  CHECK(same_samples(serial, threaded));

  policy.seed = 12;
  const auto reseeded = augment_dataset(events, noises, policy);
  CHECK_FALSE(same_samples(first, reseeded));
}

TEST_CASE("r = 0, v = 1 reproduces the peak-normalized event bit-exactly") {
  std::vector<LabeledClip> events = {labeled(random_clip(700), Label::kCough, "e")};
  std::vector<AudioClip> noises = {random_clip(701)};
  AugmentPolicy policy;
  policy.mix_ratio_lo = policy.mix_ratio_hi = 0.0;
  policy.volume_lo = policy.volume_hi = 1.0;
  policy.cough_replications = 1;
  const auto out = augment_dataset(events, noises, policy);
  REQUIRE(out.size() == 1);
  CHECK(out[0].clip.samples == peak_normalize(events[0].clip).samples);
}

TEST_CASE("manifest record carries the full provenance") {
  LabeledClip clip = labeled(constant_clip(0.5f, 4), Label::kCough, "file.wav#3");
  clip.provenance.noise_id = 2;
  clip.provenance.mix_ratio = 0.25;
  clip.provenance.volume = 0.75;
  clip.provenance.seed = 9;
  const std::string record = manifest_record(clip, "out/aug_0.wav");
  CHECK(record.find("\"source_id\":\"file.wav#3\"") != std::string::npos);
  CHECK(record.find("\"label\":\"Cough\"") != std::string::npos);
  CHECK(record.find("\"noise_id\":2") != std::string::npos);
  CHECK(record.find("\"r\":0.25") != std::string::npos);
  CHECK(record.find("\"v\":0.75") != std::string::npos);
  CHECK(record.find("\"seed\":9") != std::string::npos);
  CHECK(record.find("\"output_path\":\"out/aug_0.wav\"") != std::string::npos);
}

TEST_CASE("split_train_valid partitions exactly") {
  std::vector<LabeledClip> data;
  for (int i = 0; i < 100; ++i)
    data.push_back(labeled(constant_clip(static_cast<float>(i), 1), Label::kOthers,
                           "x" + std::to_string(i)));

  const auto [train, valid] = split_train_valid(data, 0.9, 21);
  CHECK(train.size() == 90);
  CHECK(valid.size() == 10);

  std::vector<std::string> all_ids;
  for (const auto& c : train) all_ids.push_back(c.provenance.source_id);
  for (const auto& c : valid) all_ids.push_back(c.provenance.source_id);
  std::sort(all_ids.begin(), all_ids.end());
  CHECK(std::unique(all_ids.begin(), all_ids.end()) == all_ids.end());
  CHECK(all_ids.size() == 100);

  // Same seed, same partition; the shuffle actually moves things.
  const auto [train2, valid2] = split_train_valid(data, 0.9, 21);
  CHECK(same_samples(train, train2));
}

TEST_CASE("split at dataset scale keeps the 9:1 ratio") {
  std::vector<LabeledClip> data(555837);
  const auto [train, valid] = split_train_valid(data, 0.9, 1);
  CHECK(train.size() == 500253);  // round(0.9 * 555837)
  CHECK(valid.size() == 55584);

  const double ratio = static_cast<double>(train.size()) / static_cast<double>(valid.size());
  const double reference = 499509.0 / 55500.0;
  CHECK(std::abs(ratio - reference) / reference < 2e-3);
}
