#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfc/audio.hpp"

namespace sfc {

enum class Label { kCough, kOthers };

const char* label_name(Label label);
Label label_from_name(const std::string& name);

struct AugmentPolicy {
  double mix_ratio_lo = 0.0;
  double mix_ratio_hi = 0.4;
  double volume_lo = 0.6;
  double volume_hi = 1.0;
  int cough_replications = 45;
  int others_replications = 9;
  std::uint64_t seed = 0;
};

// Parameters actually drawn for one augmented clip; together with the policy
// seed they reproduce that clip in isolation.
struct Provenance {
  std::string source_id;
  int noise_id = -1;          // index into the filtered noise pool, -1 if unmixed
  std::size_t noise_offset = 0;  // crop offset into the noise clip, samples
  double mix_ratio = 0.0;
  double volume = 1.0;
  std::uint64_t seed = 0;
};

struct LabeledClip {
  AudioClip clip;
  Label label = Label::kOthers;
  Provenance provenance;
};

// Total-energy silence gate: sum of squared samples <= epsilon.
bool is_zero_energy(const AudioClip& clip, double epsilon = 1e-12);

// out = v * ((1 - r) * event + r * noise), sample-wise. Operands must share
// length and sample rate. r = 0, v = 1 is an exact identity.
AudioClip mix(const AudioClip& event, const AudioClip& noise, double r, double v);

// Scales so that max |sample| = 1; silent clips are returned unchanged.
AudioClip peak_normalize(const AudioClip& clip);

// Background-noise augmentation: every Cough clip is replicated
// cough_replications times and every Others clip others_replications times.
// Each copy mixes the peak-normalized event with a peak-normalized 2 s view
// of a noise clip drawn uniformly from the zero-energy-filtered pool, with
// r ~ U[mix_ratio range] and v ~ U[volume range]. Noise shorter than the
// event is tiled; longer noise takes a seeded random crop. All randomness is
// a pure function of (policy.seed, output index), so results are
// deterministic and independent of scheduling.
std::vector<LabeledClip> augment_dataset(const std::vector<LabeledClip>& events,
                                         const std::vector<AudioClip>& noises,
                                         const AugmentPolicy& policy);

// Seeded shuffle then split at round(fraction * N). The two halves partition
// the input exactly.
std::pair<std::vector<LabeledClip>, std::vector<LabeledClip>> split_train_valid(
    const std::vector<LabeledClip>& data, double fraction, std::uint64_t seed);

// One JSONL manifest record per augmented clip.
std::string manifest_record(const LabeledClip& clip, const std::string& output_path);

}  // namespace sfc
