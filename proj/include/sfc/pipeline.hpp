#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sfc/audio.hpp"
#include "sfc/augment.hpp"  // Label
#include "sfc/beamform.hpp"
#include "sfc/cnn.hpp"
#include "sfc/features.hpp"

namespace sfc {

// Cough probability sits at index 0 of every 2-way output.
inline constexpr int kCoughIndex = 0;

struct StreamConfig {
  double window_seconds = 2.0;
  double hop_seconds = 0.5;  // 75% overlap at defaults
  std::string feature_spec = "MFCC-V-A";
  double decision_threshold = 0.5;
  bool localize = false;
  int sample_rate = kModelSampleRate;
};

struct DetectionEvent {
  double window_start = 0.0;
  double window_end = 0.0;
  Label label = Label::kOthers;
  double confidence = 0.0;  // cough-class probability
  bool localized = false;
  Vec3 location;
  double location_power = 0.0;
  double latency_seconds = 0.0;
  bool deadline_miss = false;
};

// Fixed-window reassembly over a stream: one window of memory, a window
// emitted every hop once the first full window has arrived. Chunk boundaries
// never affect the emitted windows.
class StreamWindower {
 public:
  struct ReadyWindow {
    std::uint64_t end_sample = 0;  // absolute stream position just past the window
    std::vector<float> samples;
  };

  StreamWindower(std::size_t window_samples, std::size_t hop_samples);

  // Feeds samples; returns every window completed by this push, in order.
  std::vector<ReadyWindow> push(const float* samples, std::size_t count);
  std::vector<ReadyWindow> push(const std::vector<float>& samples) {
    return push(samples.data(), samples.size());
  }

  std::uint64_t total_pushed() const { return total_; }
  // End time (in samples) of the next window to be emitted.
  std::uint64_t next_window_end() const { return next_end_; }

 private:
  std::vector<float> ring_;
  std::size_t window_ = 0;
  std::size_t hop_ = 0;
  std::uint64_t total_ = 0;
  std::uint64_t next_end_ = 0;
};

// Anything that maps a 2 s window to a cough probability. Lets pipeline
// tests run with stubs instead of trained weights.
class WindowClassifier {
 public:
  virtual ~WindowClassifier() = default;
  virtual double cough_probability(const AudioClip& window) = 0;
  virtual std::string name() const = 0;
};

class CnnClassifier : public WindowClassifier {
 public:
  CnnClassifier(NetworkModel model, std::string feature_spec,
                std::optional<ChannelStats> stats = std::nullopt);
  double cough_probability(const AudioClip& window) override;
  std::string name() const override;

 private:
  NetworkModel model_;
  std::string feature_spec_;
  std::optional<ChannelStats> stats_;
};

class StubClassifier : public WindowClassifier {
 public:
  StubClassifier(Label fixed_label, double confidence);
  // "always-cough" / "always-others"
  static std::unique_ptr<StubClassifier> from_name(const std::string& name);
  double cough_probability(const AudioClip&) override { return confidence_; }
  std::string name() const override;

 private:
  Label label_;
  double confidence_;
};

struct WindowDecision {
  Label label = Label::kOthers;
  double confidence = 0.0;
  double latency_seconds = 0.0;
};

// Classifies one exact-length window; label is Cough iff the probability
// strictly exceeds the threshold (a tie goes to Others).
WindowDecision classify_window(const AudioClip& window, WindowClassifier& classifier,
                               const StreamConfig& config);

// Array + plane geometry for in-stream localization; delays are computed
// once up front.
struct LocalizationContext {
  MicArray array;
  InspectionPlane plane;
  double speed_of_sound = kSpeedOfSound;
  std::vector<std::vector<double>> delays;

  static LocalizationContext create(MicArray array, InspectionPlane plane,
                                    double c = kSpeedOfSound);
};

// Runs the detection loop over prerecorded channels (channel 0 feeds the
// classifier; all channels feed the beamformer when localizing). Emits one
// event per window at the hop cadence; Cough events carry the power-map peak
// over the same window when localization is enabled.
std::vector<DetectionEvent> run_stream(const std::vector<AudioClip>& channels,
                                       WindowClassifier& classifier, const StreamConfig& config,
                                       const LocalizationContext* localization = nullptr,
                                       std::size_t push_chunk = 1600);

inline std::vector<DetectionEvent> run_stream(const AudioClip& mono,
                                              WindowClassifier& classifier,
                                              const StreamConfig& config,
                                              std::size_t push_chunk = 1600) {
  return run_stream(std::vector<AudioClip>{mono}, classifier, config, nullptr, push_chunk);
}

// One JSONL record per event.
std::string event_json(const DetectionEvent& event);

struct StreamSummary {
  std::size_t total_windows = 0;
  std::size_t cough_count = 0;
  double mean_latency_seconds = 0.0;
};
StreamSummary summarize(const std::vector<DetectionEvent>& events);

}  // namespace sfc
