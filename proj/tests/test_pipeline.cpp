#include "sfc/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "doctest.h"
#include "sfc/errors.hpp"
#include "sfc/rng.hpp"

using namespace sfc;

namespace {

// Blows the real-time budget on purpose.
class SlowStub : public WindowClassifier {
 public:
  double cough_probability(const AudioClip&) override {
    std::this_thread::sleep_for(std::chrono::milliseconds(550));
    return 0.0;
  }
  std::string name() const override { return "stub/slow"; }
};

AudioClip seconds_of(double seconds, float value = 0.0f, int rate = 16000) {
  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.assign(static_cast<std::size_t>(seconds * rate), value);
  return clip;
}

AudioClip counting_clip(std::size_t len, int rate = 16000) {
  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(len);
  for (std::size_t i = 0; i < len; ++i) clip.samples[i] = static_cast<float>(i % 1000) / 1000.0f;
  return clip;
}

}  // namespace

TEST_CASE("windower emits on exact hop boundaries") {
  StreamWindower windower(32000, 8000);

  CHECK(windower.push(seconds_of(1.9).samples).empty());       // 1.9 s: nothing yet
  const auto first = windower.push(seconds_of(0.1).samples);   // now exactly 2.0 s
  REQUIRE(first.size() == 1);
  CHECK(first[0].end_sample == 32000);
  CHECK(first[0].samples.size() == 32000);

  const auto second = windower.push(seconds_of(0.5).samples);  // 2.5 s
  REQUIRE(second.size() == 1);
  CHECK(second[0].end_sample == 40000);
}

TEST_CASE("window contents are the last two seconds, in order") {
  StreamWindower windower(8, 4);
  std::vector<float> feed(20);
  for (std::size_t i = 0; i < feed.size(); ++i) feed[i] = static_cast<float>(i);
  const auto ready = windower.push(feed);
  REQUIRE(ready.size() == 4);  // ends at 8, 12, 16, 20
  for (std::size_t k = 0; k < ready.size(); ++k) {
    const std::size_t start = ready[k].end_sample - 8;
    for (std::size_t i = 0; i < 8; ++i)
      CHECK(ready[k].samples[i] == static_cast<float>(start + i));
  }
}

TEST_CASE("windower is chunk-size independent") {
  const auto clip = counting_clip(160000);
  for (const std::size_t chunk : {std::size_t(1), std::size_t(160), std::size_t(32000),
                                  std::size_t(160000)}) {
    CAPTURE(chunk);
    StreamWindower windower(32000, 8000);
    std::vector<StreamWindower::ReadyWindow> all;
    for (std::size_t off = 0; off < clip.samples.size(); off += chunk) {
      const std::size_t n = std::min(chunk, clip.samples.size() - off);
      auto ready = windower.push(clip.samples.data() + off, n);
      for (auto& w : ready) all.push_back(std::move(w));
    }
    REQUIRE(all.size() == 17);
    // Reference: direct slicing.
    for (std::size_t k = 0; k < all.size(); ++k) {
      CHECK(all[k].end_sample == 32000 + k * 8000);
      const std::size_t start = all[k].end_sample - 32000;
      bool equal = true;
      for (std::size_t i = 0; i < 32000; ++i)
        equal = equal && all[k].samples[i] == clip.samples[start + i];
      CHECK(equal);
    }
  }
}

TEST_CASE("stub classifiers drive the decision rule") {
  const auto window = seconds_of(2.0);
  StreamConfig config;

  StubClassifier cough(Label::kCough, 1.0);
  const auto yes = classify_window(window, cough, config);
  CHECK(yes.label == Label::kCough);
  CHECK(yes.confidence == 1.0);

  StubClassifier others(Label::kOthers, 0.0);
  const auto no = classify_window(window, others, config);
  CHECK(no.label == Label::kOthers);

  // A tie at the threshold goes to Others (strict inequality).
  StubClassifier tie(Label::kCough, 0.5);
  CHECK(classify_window(window, tie, config).label == Label::kOthers);

  CHECK(StubClassifier::from_name("always-cough")->cough_probability(window) == 1.0);
  CHECK(StubClassifier::from_name("always-others")->cough_probability(window) == 0.0);
  CHECK_THROWS_AS(StubClassifier::from_name("nope"), ConfigError);
}

TEST_CASE("classify_window enforces the window length") {
  StubClassifier stub(Label::kOthers, 0.0);
  CHECK_THROWS_AS(classify_window(seconds_of(1.0), stub, StreamConfig{}), ShapeError);
}

TEST_CASE("zero-weight model classifies everything as Others at 0.5") {
  auto model = build_network(NetworkKind::VNet, 3);  // zero weights
  CnnClassifier classifier(std::move(model), "MFCC-V-A");
  const auto decision = classify_window(seconds_of(2.0, 0.1f), classifier, StreamConfig{});
  CHECK(decision.confidence == doctest::Approx(0.5));
  CHECK(decision.label == Label::kOthers);
}

TEST_CASE("CnnClassifier validates spec/model channel agreement") {
  auto model = build_network(NetworkKind::VNet, 3);
  CHECK_THROWS_AS(CnnClassifier(std::move(model), "SP"), ConfigError);
}

TEST_CASE("10 s of audio yields 17 events at the 0.5 s cadence") {
  const auto clip = seconds_of(10.0);
  StubClassifier stub(Label::kOthers, 0.0);
  const auto events = run_stream(clip, stub, StreamConfig{});
  REQUIRE(events.size() == 17);
  for (std::size_t k = 0; k < events.size(); ++k) {
    CHECK(events[k].window_end == doctest::Approx(2.0 + 0.5 * k).epsilon(1e-12));
    CHECK(events[k].window_end - events[k].window_start == doctest::Approx(2.0));
    CHECK(events[k].label == Label::kOthers);
    CHECK_FALSE(events[k].localized);
  }

  const auto summary = summarize(events);
  CHECK(summary.total_windows == 17);
  CHECK(summary.cough_count == 0);
}

TEST_CASE("events are identical for any push-chunk size") {
  const auto clip = counting_clip(160000);
  StubClassifier stub(Label::kCough, 1.0);
  StreamConfig config;

  const auto baseline = run_stream({clip}, stub, config, nullptr, 32000);
  for (const std::size_t chunk : {std::size_t(1), std::size_t(160)}) {
    const auto events = run_stream({clip}, stub, config, nullptr, chunk);
    REQUIRE(events.size() == baseline.size());
    for (std::size_t k = 0; k < events.size(); ++k) {
      CHECK(events[k].window_start == baseline[k].window_start);
      CHECK(events[k].window_end == baseline[k].window_end);
      CHECK(events[k].label == baseline[k].label);
      CHECK(events[k].confidence == baseline[k].confidence);
    }
  }
}

TEST_CASE("short or empty input produces no events") {
  StubClassifier stub(Label::kCough, 1.0);
  CHECK(run_stream(seconds_of(1.9), stub, StreamConfig{}).empty());
  CHECK(run_stream(seconds_of(0.0), stub, StreamConfig{}).empty());
  const auto one = run_stream(seconds_of(2.0), stub, StreamConfig{});
  CHECK(one.size() == 1);
}

TEST_CASE("cough events carry the beamformed source location") {
  const int rate = 16000;
  MicArray array = default_mic_array(24, 0.1);
  InspectionPlane plane{1.0, 1.0, 1.0, 16, 16};

  const int true_ix = 11, true_iy = 5;
  AudioClip tone;
  tone.sample_rate = rate;
  tone.samples.resize(rate * 4);
  for (std::size_t i = 0; i < tone.samples.size(); ++i)
    tone.samples[i] = static_cast<float>(0.7 * std::sin(2.0 * 3.141592653589793 * 800.0 * i / rate));

  Scene scene;
  scene.sources.push_back({plane.pixel_center(true_ix, true_iy), tone, 1.0});
  const auto channels = simulate_scene(scene, array, 4.0, rate);

  StreamConfig config;
  config.localize = true;
  const auto localization = LocalizationContext::create(array, plane);
  StubClassifier stub(Label::kCough, 1.0);
  const auto events = run_stream(channels, stub, config, &localization, 32000);

  REQUIRE(events.size() == 5);  // 4 s -> ends at 2.0 .. 4.0
  const double px = plane.width / plane.res_x;
  for (const auto& event : events) {
    REQUIRE(event.localized);
    const Vec3 truth = plane.pixel_center(true_ix, true_iy);
    CHECK(std::abs(event.location.x - truth.x) <= px + 1e-9);
    CHECK(std::abs(event.location.y - truth.y) <= px + 1e-9);
    CHECK(event.location_power > 0.0);
  }

  // Others events skip localization even when enabled.
  StubClassifier others(Label::kOthers, 0.0);
  const auto quiet = run_stream(channels, others, config, &localization, 32000);
  for (const auto& event : quiet) CHECK_FALSE(event.localized);
}

TEST_CASE("a blown deadline is diagnosed, not fatal") {
  SlowStub slow;
  const auto events = run_stream(seconds_of(2.0), slow, StreamConfig{});
  REQUIRE(events.size() == 1);
  CHECK(events[0].deadline_miss);
  CHECK(events[0].latency_seconds >= 0.5);

  StubClassifier fast(Label::kOthers, 0.0);
  const auto quick = run_stream(seconds_of(2.0), fast, StreamConfig{});
  REQUIRE(quick.size() == 1);
  CHECK_FALSE(quick[0].deadline_miss);
}

TEST_CASE("run_stream validates its configuration") {
  StubClassifier stub(Label::kCough, 1.0);
  StreamConfig config;
  config.localize = true;
  CHECK_THROWS_AS(run_stream(seconds_of(3.0), stub, config), ConfigError);

  StreamConfig bad_hop;
  bad_hop.hop_seconds = 3.0;
  CHECK_THROWS_AS(run_stream(seconds_of(3.0), stub, bad_hop), ConfigError);

  AudioClip wrong_rate;
  wrong_rate.sample_rate = 8000;
  wrong_rate.samples.assign(32000, 0.0f);
  CHECK_THROWS_AS(run_stream(wrong_rate, stub, StreamConfig{}), ConfigError);
}

TEST_CASE("event JSON carries the record fields") {
  DetectionEvent event;
  event.window_start = 1.5;
  event.window_end = 3.5;
  event.label = Label::kCough;
  event.confidence = 0.875;
  event.localized = true;
  event.location = {0.25, -0.125, 1.0};
  event.location_power = 2.5;
  event.latency_seconds = 0.012;
  const auto json = event_json(event);
  CHECK(json.find("\"t_start\":1.5") != std::string::npos);
  CHECK(json.find("\"t_end\":3.5") != std::string::npos);
  CHECK(json.find("\"label\":\"Cough\"") != std::string::npos);
  CHECK(json.find("\"confidence\":0.875") != std::string::npos);
  CHECK(json.find("\"x\":0.25") != std::string::npos);
  CHECK(json.find("\"latency_s\":") != std::string::npos);

  DetectionEvent plain;
  CHECK(event_json(plain).find("\"location\":null") != std::string::npos);
}

TEST_CASE("summary aggregates cough counts and latency") {
  std::vector<DetectionEvent> events(4);
  events[0].label = Label::kCough;
  events[2].label = Label::kCough;
  for (auto& e : events) e.latency_seconds = 0.01;
  const auto summary = summarize(events);
  CHECK(summary.total_windows == 4);
  CHECK(summary.cough_count == 2);
  CHECK(summary.mean_latency_seconds == doctest::Approx(0.01));
}
