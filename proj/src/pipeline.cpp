#include "sfc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "json.hpp"
#include "sfc/errors.hpp"
#include "sfc/logging.hpp"

namespace sfc {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

StreamWindower::StreamWindower(std::size_t window_samples, std::size_t hop_samples)
    : ring_(window_samples, 0.0f), window_(window_samples), hop_(hop_samples),
      next_end_(window_samples) {
  if (window_samples == 0) throw ConfigError("window must be at least one sample");
  if (hop_samples == 0 || hop_samples > window_samples)
    throw ConfigError("hop must be in [1, window]");
}

std::vector<StreamWindower::ReadyWindow> StreamWindower::push(const float* samples,
                                                              std::size_t count) {
  std::vector<ReadyWindow> ready;
  for (std::size_t i = 0; i < count; ++i) {
    ring_[total_ % window_] = samples[i];
    ++total_;
    if (total_ == next_end_) {
      ReadyWindow window;
      window.end_sample = next_end_;
      window.samples.resize(window_);
      const std::uint64_t start = next_end_ - window_;
      for (std::size_t k = 0; k < window_; ++k) window.samples[k] = ring_[(start + k) % window_];
      ready.push_back(std::move(window));
      next_end_ += hop_;
    }
  }
  return ready;
}

CnnClassifier::CnnClassifier(NetworkModel model, std::string feature_spec,
                             std::optional<ChannelStats> stats)
    : model_(std::move(model)), feature_spec_(std::move(feature_spec)), stats_(std::move(stats)) {
  const std::size_t channels = spec_channel_count(feature_spec_);
  if (channels != static_cast<std::size_t>(model_.in_channels))
    throw ConfigError("feature spec '" + feature_spec_ + "' has " + std::to_string(channels) +
                      " channels but the model expects " + std::to_string(model_.in_channels));
  if (stats_ && stats_->channels() != channels)
    throw ConfigError("channel stats do not match feature spec '" + feature_spec_ + "'");
}

double CnnClassifier::cough_probability(const AudioClip& window) {
  FeatureTensor tensor = assemble(window, feature_spec_);
  if (stats_) tensor = normalize(tensor, *stats_);

  Tensor4 input = Tensor4::zeros(1, tensor.channels(), tensor.height(), tensor.width());
  for (std::size_t c = 0; c < tensor.channels(); ++c)
    std::copy(tensor.planes[c].data.begin(), tensor.planes[c].data.end(), input.plane(0, c));

  const ForwardResult result = forward(model_, input);
  return result.probabilities[kCoughIndex];
}

std::string CnnClassifier::name() const {
  return std::string(network_kind_name(model_.kind)) + "/" + feature_spec_;
}

StubClassifier::StubClassifier(Label fixed_label, double confidence)
    : label_(fixed_label), confidence_(confidence) {}

std::unique_ptr<StubClassifier> StubClassifier::from_name(const std::string& name) {
  if (name == "always-cough") return std::make_unique<StubClassifier>(Label::kCough, 1.0);
  if (name == "always-others") return std::make_unique<StubClassifier>(Label::kOthers, 0.0);
  throw ConfigError("unknown stub '" + name + "' (use always-cough or always-others)");
}

std::string StubClassifier::name() const {
  return std::string("stub/") + label_name(label_);
}

WindowDecision classify_window(const AudioClip& window, WindowClassifier& classifier,
                               const StreamConfig& config) {
  const std::size_t expected = window_sample_count(config.window_seconds, config.sample_rate);
  if (window.samples.size() != expected)
    throw ShapeError("window has " + std::to_string(window.samples.size()) + " samples, expected " +
                     std::to_string(expected));

  const auto start = std::chrono::steady_clock::now();
  const double p = classifier.cough_probability(window);
  WindowDecision decision;
  decision.confidence = p;
  decision.label = p > config.decision_threshold ? Label::kCough : Label::kOthers;
  decision.latency_seconds = seconds_since(start);
  return decision;
}

LocalizationContext LocalizationContext::create(MicArray array, InspectionPlane plane, double c) {
  LocalizationContext ctx;
  ctx.array = std::move(array);
  ctx.plane = plane;
  ctx.speed_of_sound = c;
  ctx.delays = compute_delays(ctx.plane, ctx.array, c);
  return ctx;
}

std::vector<DetectionEvent> run_stream(const std::vector<AudioClip>& channels,
                                       WindowClassifier& classifier, const StreamConfig& config,
                                       const LocalizationContext* localization,
                                       std::size_t push_chunk) {
  if (channels.empty()) return {};
  if (config.hop_seconds <= 0.0 || config.hop_seconds > config.window_seconds)
    throw ConfigError("hop must be in (0, window]");
  if (config.localize && localization == nullptr)
    throw ConfigError("localization requested but no array/plane provided");
  if (config.localize && localization->delays.size() !=
                             static_cast<std::size_t>(localization->plane.pixel_count()))
    throw ConfigError("localization context has stale delay table");
  if (push_chunk == 0) push_chunk = 1;

  const int rate = config.sample_rate;
  const std::size_t window = window_sample_count(config.window_seconds, rate);
  const std::size_t hop = window_sample_count(config.hop_seconds, rate);
  const AudioClip& reference = channels[0];
  if (reference.sample_rate != rate)
    throw ConfigError("stream input rate " + std::to_string(reference.sample_rate) +
                      " differs from configured " + std::to_string(rate));

  StreamWindower windower(window, hop);
  std::vector<DetectionEvent> events;

  // Reads beyond the window by more than the worst steering delay are zero;
  // pad the beamformed slice accordingly.
  std::size_t margin = 0;
  if (config.localize) {
    double max_delay = 0.0;
    for (const auto& row : localization->delays)
      for (double d : row) max_delay = std::max(max_delay, std::abs(d));
    margin = static_cast<std::size_t>(std::ceil(max_delay * rate)) + 2;
  }

  for (std::size_t offset = 0; offset < reference.samples.size(); offset += push_chunk) {
    const std::size_t count = std::min(push_chunk, reference.samples.size() - offset);
    const auto ready = windower.push(reference.samples.data() + offset, count);
    for (const auto& ready_window : ready) {
      const auto wall_start = std::chrono::steady_clock::now();
      const std::uint64_t end_sample = ready_window.end_sample;
      const std::uint64_t start_sample = end_sample - window;

      AudioClip clip;
      clip.sample_rate = rate;
      clip.samples = ready_window.samples;

      DetectionEvent event;
      event.window_start = static_cast<double>(start_sample) / rate;
      event.window_end = static_cast<double>(end_sample) / rate;
      const WindowDecision decision = classify_window(clip, classifier, config);
      event.label = decision.label;
      event.confidence = decision.confidence;

      if (event.label == Label::kCough && config.localize) {
        const std::size_t slice_begin = start_sample > margin ? start_sample - margin : 0;
        const std::size_t lead = start_sample - slice_begin;
        const std::size_t slice_end =
            std::min<std::size_t>(channels[0].samples.size(), end_sample + margin);
        std::vector<AudioClip> slice(channels.size());
        for (std::size_t ch = 0; ch < channels.size(); ++ch) {
          slice[ch].sample_rate = rate;
          slice[ch].samples.assign(channels[ch].samples.begin() + slice_begin,
                                   channels[ch].samples.begin() + slice_end);
        }
        const double t0 = static_cast<double>(lead) / rate;
        const double t1 = t0 + config.window_seconds;
        const PowerMap map =
            power_map(slice, localization->delays, localization->plane, t0, t1);
        const auto peaks = locate_peaks(map, 1, 1);
        if (!peaks.empty()) {
          event.localized = true;
          event.location = peaks[0].world;
          event.location_power = peaks[0].power;
        }
      }

      event.latency_seconds = seconds_since(wall_start);
      if (event.latency_seconds >= config.hop_seconds) {
        event.deadline_miss = true;
        log_warn("window ending at " + std::to_string(event.window_end) +
                 " s missed the real-time deadline (" + std::to_string(event.latency_seconds) +
                 " s)");
      }
      events.push_back(std::move(event));
    }
  }
  return events;
}

std::string event_json(const DetectionEvent& event) {
  nlohmann::json j;
  j["t_start"] = event.window_start;
  j["t_end"] = event.window_end;
  j["label"] = label_name(event.label);
  j["confidence"] = event.confidence;
  if (event.localized) {
    j["location"] = {{"x", event.location.x},
                     {"y", event.location.y},
                     {"z", event.location.z},
                     {"power", event.location_power}};
  } else {
    j["location"] = nullptr;
  }
  j["latency_s"] = event.latency_seconds;
  if (event.deadline_miss) j["deadline_miss"] = true;
  return j.dump();
}

StreamSummary summarize(const std::vector<DetectionEvent>& events) {
  StreamSummary summary;
  summary.total_windows = events.size();
  double latency = 0.0;
  for (const auto& event : events) {
    if (event.label == Label::kCough) ++summary.cough_count;
    latency += event.latency_seconds;
  }
  summary.mean_latency_seconds = events.empty() ? 0.0 : latency / events.size();
  return summary;
}

}  // namespace sfc
