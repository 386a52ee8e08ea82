// sfc: acoustic cough-detection toolkit. One binary, file-in/file-out
// subcommands; every seeded run is reproducible from its flags.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sfc/audio.hpp"
#include "sfc/augment.hpp"
#include "sfc/beamform.hpp"
#include "sfc/cnn.hpp"
#include "sfc/errors.hpp"
#include "sfc/features.hpp"
#include "sfc/logging.hpp"
#include "sfc/metrics.hpp"
#include "sfc/parallel.hpp"
#include "sfc/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct PlaneFlags {
  double distance = 1.0;
  double width = 1.0;
  double height = 1.0;
  int grid_x = 32;
  int grid_y = 32;

  sfc::InspectionPlane plane() const { return {distance, width, height, grid_x, grid_y}; }

  void attach(CLI::App* cmd) {
    cmd->add_option("--distance", distance, "Inspection plane distance, m");
    cmd->add_option("--plane-width", width, "Inspection plane width, m");
    cmd->add_option("--plane-height", height, "Inspection plane height, m");
    cmd->add_option("--grid-x", grid_x, "Pixel columns");
    cmd->add_option("--grid-y", grid_y, "Pixel rows");
  }
};

void echo_run_metadata(json meta) {
  meta["tool"] = "sfc";
  std::cout << meta.dump() << std::endl;
}

// Reads a wav and brings it to the model rate.
sfc::AudioClip load_model_rate(const std::string& path, bool* resampled = nullptr) {
  sfc::AudioClip clip = sfc::read_wav(path);
  if (clip.sample_rate != sfc::kModelSampleRate) {
    clip = sfc::resample(clip, sfc::kModelSampleRate);
    if (resampled) *resampled = true;
  }
  return clip;
}

// First full 2 s window of the clip.
sfc::AudioClip leading_window(const sfc::AudioClip& clip) {
  const std::size_t win = sfc::window_sample_count(2.0, clip.sample_rate);
  if (clip.samples.size() < win)
    throw sfc::ConfigError("input shorter than 2 s (" + std::to_string(clip.samples.size()) +
                           " samples)");
  sfc::AudioClip window;
  window.sample_rate = clip.sample_rate;
  window.samples.assign(clip.samples.begin(), clip.samples.begin() + win);
  return window;
}

std::vector<std::string> wav_files_in(const std::string& dir) {
  std::vector<std::string> files;
  if (!fs::is_directory(dir)) throw sfc::IoError(dir + " is not a directory");
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

sfc::MicArray load_or_default_array(const std::string& geometry_path) {
  if (geometry_path.empty()) return sfc::default_mic_array();
  return sfc::load_mic_array_csv(geometry_path);
}

std::string sibling_blob_path(const std::string& manifest_path) {
  fs::path p(manifest_path);
  p.replace_extension(".bin");
  return p.string();
}

// --- subcommand bodies -------------------------------------------------------

int run_features(const std::string& input, const std::string& spec, const std::string& out,
                 const std::string& csv) {
  bool resampled = false;
  const sfc::AudioClip clip = load_model_rate(input, &resampled);
  const sfc::AudioClip window = leading_window(clip);
  const sfc::FeatureTensor tensor = sfc::assemble(window, spec);
  sfc::save_feature_tensor(tensor, out);
  if (!csv.empty()) sfc::export_feature_csv(tensor, csv);

  json meta{{"command", "features"},
            {"input", input},
            {"spec", spec},
            {"shape", {tensor.channels(), tensor.height(), tensor.width()}},
            {"out", out}};
  if (resampled) meta["resample_method"] = sfc::kResampleMethod;
  echo_run_metadata(meta);
  return 0;
}

int run_augment(const std::string& events_dir, const std::string& noises_dir,
                const std::string& out_dir, int cough_reps, int others_reps,
                std::uint64_t seed, std::string manifest_path) {
  sfc::AugmentPolicy policy;
  policy.cough_replications = cough_reps;
  policy.others_replications = others_reps;
  policy.seed = seed;

  // Events live under <events>/cough and <events>/others; each file is
  // resampled to 16 kHz and cut into 2 s windows (50% overlap for cough,
  // none for others) before mixing.
  std::vector<sfc::LabeledClip> events;
  for (const auto& [sub, label, overlap] :
       {std::tuple{"cough", sfc::Label::kCough, 0.5}, std::tuple{"others", sfc::Label::kOthers, 0.0}}) {
    const fs::path dir = fs::path(events_dir) / sub;
    if (!fs::is_directory(dir)) continue;
    for (const auto& file : wav_files_in(dir.string())) {
      const sfc::AudioClip clip = load_model_rate(file);
      const auto windows = sfc::segment(clip, {2.0, overlap});
      for (std::size_t k = 0; k < windows.size(); ++k) {
        sfc::LabeledClip lc;
        lc.clip = windows[k];
        lc.label = label;
        lc.provenance.source_id = fs::path(file).filename().string() + "#" + std::to_string(k);
        events.push_back(std::move(lc));
      }
    }
  }
  if (events.empty()) throw sfc::ConfigError("no 2 s events found under " + events_dir);

  std::vector<sfc::AudioClip> noises;
  for (const auto& file : wav_files_in(noises_dir)) noises.push_back(load_model_rate(file));

  const auto augmented = sfc::augment_dataset(events, noises, policy);

  fs::create_directories(out_dir);
  if (manifest_path.empty()) manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
  std::ofstream manifest(manifest_path);
  if (!manifest) throw sfc::IoError("cannot open " + manifest_path + " for writing");
  for (std::size_t i = 0; i < augmented.size(); ++i) {
    const std::string name = "aug_" + std::to_string(i) + ".wav";
    const std::string path = (fs::path(out_dir) / name).string();
    sfc::write_wav(augmented[i].clip, path);
    manifest << sfc::manifest_record(augmented[i], path) << '\n';
  }

  echo_run_metadata(json{{"command", "augment"},
                         {"events", events.size()},
                         {"noises", noises.size()},
                         {"outputs", augmented.size()},
                         {"seed", seed},
                         {"resample_method", sfc::kResampleMethod},
                         {"manifest", manifest_path}});
  return 0;
}

int run_infer(const std::string& input, const std::string& manifest, std::string blob,
              const std::string& spec, const std::string& stats_path) {
  if (blob.empty()) blob = sibling_blob_path(manifest);
  const sfc::NetworkModel model = sfc::load_weights_any(manifest, blob);

  sfc::FeatureTensor tensor;
  if (fs::path(input).extension() == ".wav") {
    tensor = sfc::assemble(leading_window(load_model_rate(input)), spec);
  } else {
    tensor = sfc::load_feature_tensor(input);
  }
  if (!stats_path.empty()) tensor = sfc::normalize(tensor, sfc::load_channel_stats(stats_path));

  if (tensor.channels() != static_cast<std::size_t>(model.in_channels))
    throw sfc::ConfigError("feature has " + std::to_string(tensor.channels()) +
                           " channels, model expects " + std::to_string(model.in_channels));

  sfc::Tensor4 x = sfc::Tensor4::zeros(1, tensor.channels(), tensor.height(), tensor.width());
  for (std::size_t c = 0; c < tensor.channels(); ++c)
    std::copy(tensor.planes[c].data.begin(), tensor.planes[c].data.end(), x.plane(0, c));

  const sfc::ForwardResult result = sfc::forward(model, x);
  const double p_cough = result.probabilities[sfc::kCoughIndex];
  std::cout << json{{"cough", p_cough},
                    {"others", result.probabilities[1 - sfc::kCoughIndex]},
                    {"label", p_cough > 0.5 ? "Cough" : "Others"}}
                   .dump()
            << std::endl;

  echo_run_metadata(json{{"command", "infer"},
                         {"input", input},
                         {"network", sfc::network_kind_name(model.kind)},
                         {"spec", tensor.spec}});
  return 0;
}

int run_beamform(const std::string& scene_path, const std::string& geometry, PlaneFlags& flags,
                 double duration, int peaks_count, int min_separation,
                 const std::string& out_csv, const std::string& out_pgm) {
  const sfc::Scene scene = sfc::load_scene_json(scene_path);
  const sfc::MicArray array = load_or_default_array(geometry);
  const sfc::InspectionPlane plane = flags.plane();

  const auto channels = sfc::simulate_scene(scene, array, duration, sfc::kModelSampleRate);
  const auto delays = sfc::compute_delays(plane, array, scene.speed_of_sound);
  const sfc::PowerMap map = sfc::power_map(channels, delays, plane, 0.0, duration);

  if (!out_csv.empty()) sfc::save_power_map_csv(map, out_csv);
  if (!out_pgm.empty()) sfc::save_power_map_pgm(map, out_pgm);

  json peaks_json = json::array();
  for (const auto& peak : sfc::locate_peaks(map, peaks_count, min_separation)) {
    peaks_json.push_back(json{{"pixel", {peak.ix, peak.iy}},
                              {"position", {peak.world.x, peak.world.y, peak.world.z}},
                              {"power", peak.power}});
  }
  std::cout << json{{"peaks", peaks_json}}.dump() << std::endl;

  echo_run_metadata(json{{"command", "beamform"},
                         {"scene", scene_path},
                         {"mics", array.size()},
                         {"grid", {plane.res_x, plane.res_y}},
                         {"seed", scene.seed},
                         {"out_csv", out_csv},
                         {"out_pgm", out_pgm}});
  return 0;
}

int run_detect(const std::string& input_wav, const std::string& scene_path,
               const std::string& manifest, std::string blob, const std::string& stats_path,
               const std::string& stub, const std::string& spec, double threshold, bool localize,
               const std::string& geometry, PlaneFlags& flags, double duration,
               std::size_t chunk, const std::string& out_path) {
  sfc::StreamConfig config;
  config.feature_spec = spec;
  config.decision_threshold = threshold;
  config.localize = localize;

  std::unique_ptr<sfc::WindowClassifier> classifier;
  if (!stub.empty()) {
    classifier = sfc::StubClassifier::from_name(stub);
  } else {
    if (manifest.empty()) throw sfc::ConfigError("need --weights or --stub");
    if (blob.empty()) blob = sibling_blob_path(manifest);
    sfc::NetworkModel model = sfc::load_weights_any(manifest, blob);
    std::optional<sfc::ChannelStats> stats;
    if (!stats_path.empty()) stats = sfc::load_channel_stats(stats_path);
    classifier = std::make_unique<sfc::CnnClassifier>(std::move(model), spec, std::move(stats));
  }

  std::vector<sfc::AudioClip> channels;
  std::unique_ptr<sfc::LocalizationContext> localization;
  std::uint64_t seed = 0;
  if (!scene_path.empty()) {
    const sfc::Scene scene = sfc::load_scene_json(scene_path);
    seed = scene.seed;
    const sfc::MicArray array = load_or_default_array(geometry);
    channels = sfc::simulate_scene(scene, array, duration, sfc::kModelSampleRate);
    if (localize) {
      localization = std::make_unique<sfc::LocalizationContext>(
          sfc::LocalizationContext::create(array, flags.plane(), scene.speed_of_sound));
    }
  } else {
    if (input_wav.empty()) throw sfc::ConfigError("need --input or --scene");
    if (localize) throw sfc::ConfigError("--localize needs a multichannel --scene");
    channels.push_back(load_model_rate(input_wav));
  }

  const auto events = sfc::run_stream(channels, *classifier, config, localization.get(), chunk);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw sfc::IoError("cannot open " + out_path + " for writing");
    out = &file;
  }
  for (const auto& event : events) (*out) << sfc::event_json(event) << '\n';

  const sfc::StreamSummary summary = sfc::summarize(events);
  echo_run_metadata(json{{"command", "detect"},
                         {"classifier", classifier->name()},
                         {"total_windows", summary.total_windows},
                         {"cough_count", summary.cough_count},
                         {"mean_latency_s", summary.mean_latency_seconds},
                         {"seed", seed},
                         {"out", out_path}});
  return 0;
}

int run_metrics(const std::string& input, const std::string& out_path) {
  std::ifstream in(input);
  if (!in) throw sfc::IoError("cannot open " + input);
  std::vector<std::pair<sfc::Label, sfc::Label>> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw sfc::ParseError(input + ":" + std::to_string(line_no) + ": expected 'predicted,truth'");
    pairs.emplace_back(sfc::label_from_name(line.substr(0, comma)),
                       sfc::label_from_name(line.substr(comma + 1)));
  }

  const sfc::ConfusionMatrix cm = sfc::accumulate(pairs);
  const sfc::MetricsReport report = sfc::compute(cm);
  const std::string report_json = sfc::metrics_report_json(cm, report);
  std::cout << report_json << std::endl;
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw sfc::IoError("cannot open " + out_path + " for writing");
    out << report_json << '\n';
  }
  return 0;
}

int run_init_weights(const std::string& kind_name, int channels, std::uint64_t seed,
                     const std::string& out_prefix) {
  sfc::NetworkModel model =
      sfc::build_network(sfc::network_kind_from_name(kind_name), channels);
  sfc::init_weights(model, seed);
  const std::string manifest = out_prefix + ".json";
  const std::string blob = out_prefix + ".bin";
  if (!fs::path(out_prefix).parent_path().empty())
    fs::create_directories(fs::path(out_prefix).parent_path());
  sfc::save_weights(model, manifest, blob);
  echo_run_metadata(json{{"command", "init-weights"},
                         {"kind", sfc::network_kind_name(model.kind)},
                         {"in_channels", channels},
                         {"params", model.params.all().size()},
                         {"seed", seed},
                         {"manifest", manifest},
                         {"blob", blob}});
  return 0;
}

// Quick hand-example oracles across the modules; exits nonzero on the first
// failure. Heavier randomized suites live in the test binaries.
int run_selftest() {
  int failures = 0;
  auto check = [&failures](const char* name, bool ok) {
    std::cout << (ok ? "pass" : "FAIL") << "  " << name << '\n';
    if (!ok) ++failures;
  };
  auto near = [](double a, double b, double tol) { return std::abs(a - b) <= tol; };

  // audio: segmentation arithmetic
  {
    sfc::AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.assign(16000 * 5, 0.0f);
    check("segment 5s/2s/50% -> 4 windows", sfc::segment(clip, {2.0, 0.5}).size() == 4);
    check("segment 5s/2s/0% -> 2 windows", sfc::segment(clip, {2.0, 0.0}).size() == 2);
    sfc::AudioClip x48;
    x48.sample_rate = 48000;
    x48.samples.assign(48000, 0.5f);
    check("resample 48k->16k length", sfc::resample(x48, 16000).samples.size() == 16000);
  }
  // features: difference stencils and mel point values
  {
    sfc::FeaturePlane plane;
    plane.height = 1;
    plane.width = 4;
    plane.data = {1, 3, 6, 10};
    const auto v = sfc::velocity_map(plane);
    const auto a = sfc::acceleration_map(plane);
    check("velocity {1,3,6,10} -> {2,2.5,3.5,4}",
          v.data == std::vector<float>({2.0f, 2.5f, 3.5f, 4.0f}));
    check("acceleration -> {0.5,0.75,0.75,0.5}",
          a.data == std::vector<float>({0.5f, 0.75f, 0.75f, 0.5f}));
    check("hz_to_mel(700) = 2595*log10(2)",
          near(sfc::hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-9));
    check("hz_to_mel(0) = 0", sfc::hz_to_mel(0.0) == 0.0);
  }
  // augmentation: mixing law endpoints
  {
    sfc::AudioClip event, noise;
    event.sample_rate = noise.sample_rate = 16000;
    event.samples.assign(100, 1.0f);
    noise.samples.assign(100, -1.0f);
    const auto mixed = sfc::mix(event, noise, 0.4, 1.0);
    bool ok = true;
    for (float s : mixed.samples) ok = ok && near(s, 0.2, 1e-7);
    check("mix r=0.4 v=1 on (1,-1) -> 0.2", ok);
    const auto ident = sfc::mix(event, noise, 0.0, 1.0);
    check("mix r=0 v=1 identity", ident.samples == event.samples);
  }
  // cnn: hand convolution and softmax
  {
    sfc::Tensor4 x = sfc::Tensor4::zeros(1, 1, 3, 3);
    std::fill(x.data.begin(), x.data.end(), 1.0f);
    const auto y = sfc::conv2d(x, std::vector<float>(9, 1.0f), {0.0f}, 1, 3, 3, 1, 1);
    check("conv 3x3 ones pad 1",
          y.data == std::vector<float>({4, 6, 4, 6, 9, 6, 4, 6, 4}));
    const auto s = sfc::softmax({std::log(2.0f), 0.0f}, 1, 2);
    check("softmax (ln2, 0) -> (2/3, 1/3)",
          near(s[0], 2.0 / 3.0, 1e-6) && near(s[1], 1.0 / 3.0, 1e-6));
  }
  // metrics: pilot-test confusion counts
  {
    const auto report = sfc::compute({36, 4, 4, 156});
    check("metrics 36/4/4/156 -> 96/90/90/90",
          near(report.accuracy, 0.96, 1e-9) && near(report.recall, 0.90, 1e-9) &&
              near(report.precision, 0.90, 1e-9) && near(report.f1, 0.90, 1e-9));
  }
  // beamforming: steering delay closed form and propagation delay
  {
    sfc::MicArray array;
    array.positions = {{0.1, 0.0, 0.0}};
    sfc::InspectionPlane plane{1.0, 0.0, 0.0, 1, 1};
    const auto delays = sfc::compute_delays(plane, array, 343.0);
    const double expected = (1.0 - std::sqrt(1.01)) / 343.0;
    check("steering delay (0,0,1)/(0.1,0,0)", near(delays[0][0], expected, 1e-12));
    check("propagation delay 1 m = 2.915 ms", near(1.0 / 343.0, 2.915e-3, 1e-5));
  }
  // pipeline: cadence with a stub classifier
  {
    sfc::AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.assign(16000 * 10, 0.0f);
    sfc::StubClassifier stub(sfc::Label::kOthers, 0.0);
    const auto events = sfc::run_stream(clip, stub, sfc::StreamConfig{});
    check("10 s stream -> 17 windows", events.size() == 17);
  }

  std::cout << (failures == 0 ? "selftest ok" : "selftest FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acoustic cough detection, localization, and evaluation toolkit"};
  app.require_subcommand(1);

  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (0 = hardware)");

  // features
  auto* features_cmd = app.add_subcommand("features", "Extract a feature tensor from a wav");
  std::string f_input, f_spec = "MFCC-V-A", f_out, f_csv;
  features_cmd->add_option("input", f_input, "Input wav")->required();
  features_cmd->add_option("--spec", f_spec, "Feature spec (e.g. MFCC-V-A, SP-MS)");
  features_cmd->add_option("--out", f_out, "Output feature file")->required();
  features_cmd->add_option("--csv", f_csv, "Optional CSV export");

  // augment
  auto* augment_cmd = app.add_subcommand("augment", "Background-noise augmentation of a dataset");
  std::string a_events, a_noises, a_out, a_manifest;
  int a_cough_reps = 45, a_others_reps = 9;
  std::uint64_t a_seed = 0;
  augment_cmd->add_option("--events", a_events, "Directory with cough/ and others/ wavs")->required();
  augment_cmd->add_option("--noises", a_noises, "Directory with background-noise wavs")->required();
  augment_cmd->add_option("--out", a_out, "Output directory")->required();
  augment_cmd->add_option("--cough-reps", a_cough_reps, "Copies per Cough clip");
  augment_cmd->add_option("--others-reps", a_others_reps, "Copies per Others clip");
  augment_cmd->add_option("--seed", a_seed, "Random seed");
  augment_cmd->add_option("--manifest", a_manifest, "Manifest JSONL path");

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "Classify a feature file or wav");
  std::string i_input, i_weights, i_blob, i_spec = "MFCC-V-A", i_stats;
  infer_cmd->add_option("input", i_input, "Feature file or wav")->required();
  infer_cmd->add_option("--weights", i_weights, "Weight manifest JSON")->required();
  infer_cmd->add_option("--blob", i_blob, "Weight blob (default: manifest with .bin)");
  infer_cmd->add_option("--spec", i_spec, "Feature spec when the input is a wav");
  infer_cmd->add_option("--stats", i_stats, "Channel stats JSON for normalization");

  // beamform
  auto* beamform_cmd = app.add_subcommand("beamform", "Simulate a scene and render its power map");
  std::string b_scene, b_geometry, b_csv, b_pgm;
  double b_duration = 0.5;
  int b_peaks = 1, b_min_sep = 4;
  PlaneFlags b_plane;
  beamform_cmd->add_option("--scene", b_scene, "Scene JSON")->required();
  beamform_cmd->add_option("--geometry", b_geometry, "Mic geometry CSV (default: 112-mic spiral)");
  beamform_cmd->add_option("--duration", b_duration, "Simulated duration, s");
  beamform_cmd->add_option("--peaks", b_peaks, "Number of peaks to report");
  beamform_cmd->add_option("--min-separation", b_min_sep, "Peak suppression radius, px");
  beamform_cmd->add_option("--out-csv", b_csv, "Power map CSV");
  beamform_cmd->add_option("--out-pgm", b_pgm, "Power map PGM");
  b_plane.attach(beamform_cmd);

  // detect
  auto* detect_cmd = app.add_subcommand("detect", "Streaming detection over a wav or scene");
  std::string d_input, d_scene, d_weights, d_blob, d_stats, d_stub, d_spec = "MFCC-V-A", d_geometry,
              d_out;
  double d_threshold = 0.5, d_duration = 10.0;
  bool d_localize = false;
  std::size_t d_chunk = 1600;
  PlaneFlags d_plane;
  detect_cmd->add_option("--input", d_input, "Mono wav input");
  detect_cmd->add_option("--scene", d_scene, "Scene JSON (multichannel simulation)");
  detect_cmd->add_option("--weights", d_weights, "Weight manifest JSON");
  detect_cmd->add_option("--blob", d_blob, "Weight blob");
  detect_cmd->add_option("--stats", d_stats, "Channel stats JSON");
  detect_cmd->add_option("--stub", d_stub, "Stub classifier: always-cough | always-others");
  detect_cmd->add_option("--spec", d_spec, "Feature spec");
  detect_cmd->add_option("--threshold", d_threshold, "Cough decision threshold");
  detect_cmd->add_flag("--localize", d_localize, "Attach beamformed source locations");
  detect_cmd->add_option("--geometry", d_geometry, "Mic geometry CSV");
  detect_cmd->add_option("--duration", d_duration, "Scene simulation length, s");
  detect_cmd->add_option("--chunk", d_chunk, "Push chunk size, samples");
  detect_cmd->add_option("--out", d_out, "Events JSONL path (default: stdout)");
  d_plane.attach(detect_cmd);

  // metrics
  auto* metrics_cmd = app.add_subcommand("metrics", "Score a predicted/truth CSV");
  std::string m_input, m_out;
  metrics_cmd->add_option("input", m_input, "CSV of 'predicted,truth' labels")->required();
  metrics_cmd->add_option("--out", m_out, "Report JSON path");

  // init-weights
  auto* init_cmd = app.add_subcommand("init-weights", "Write seeded random weights");
  std::string w_kind, w_out;
  int w_channels = 3;
  std::uint64_t w_seed = 0;
  init_cmd->add_option("--kind", w_kind, "vnet | gnet | rnet")->required();
  init_cmd->add_option("--channels", w_channels, "Input channels");
  init_cmd->add_option("--seed", w_seed, "Random seed");
  init_cmd->add_option("--out", w_out, "Output prefix (writes .json and .bin)")->required();

  auto* selftest_cmd = app.add_subcommand("selftest", "Run the built-in hand-example oracles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << std::endl;
    return 2;
  }

  sfc::set_thread_cap(threads);

  try {
    if (features_cmd->parsed()) return run_features(f_input, f_spec, f_out, f_csv);
    if (augment_cmd->parsed())
      return run_augment(a_events, a_noises, a_out, a_cough_reps, a_others_reps, a_seed, a_manifest);
    if (infer_cmd->parsed()) return run_infer(i_input, i_weights, i_blob, i_spec, i_stats);
    if (beamform_cmd->parsed())
      return run_beamform(b_scene, b_geometry, b_plane, b_duration, b_peaks, b_min_sep, b_csv, b_pgm);
    if (detect_cmd->parsed())
      return run_detect(d_input, d_scene, d_weights, d_blob, d_stats, d_stub, d_spec, d_threshold,
                        d_localize, d_geometry, d_plane, d_duration, d_chunk, d_out);
    if (metrics_cmd->parsed()) return run_metrics(m_input, m_out);
    if (init_cmd->parsed()) return run_init_weights(w_kind, w_channels, w_seed, w_out);
    if (selftest_cmd->parsed()) return run_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
