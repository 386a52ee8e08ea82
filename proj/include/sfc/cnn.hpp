#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "sfc/tensor.hpp"

namespace sfc {

enum class NetworkKind { VNet, GNet, RNet };

const char* network_kind_name(NetworkKind kind);
NetworkKind network_kind_from_name(const std::string& name);

// --- layer specs -----------------------------------------------------------

// Conv + group norm + ReLU, the basic convolution unit of all three
// networks.
struct ConvBlockSpec {
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 1;
};

struct PoolSpec {
  bool is_max = true;
  int kernel = 2;
  int stride = 2;
  int padding = 0;
};

struct LinearSpec {
  int out_features = 0;
  bool relu = false;
};

struct SoftmaxSpec {};

// Branch widths in branch order: 1x1, 3x3 reduce, 3x3, 5x5 reduce, 5x5,
// pool projection. Output channels are the concatenation c1 + c3 + c5 + pool_proj.
struct InceptionSpec {
  int c1 = 0;
  int c3_reduce = 0;
  int c3 = 0;
  int c5_reduce = 0;
  int c5 = 0;
  int pool_proj = 0;

  int out_channels() const { return c1 + c3 + c5 + pool_proj; }
};

// A run of residual bottleneck blocks sharing one width triple
// [1x1 w, 3x3 w, 1x1 out]; the first block carries first_stride and the
// projection shortcut when geometry changes.
struct BottleneckSetSpec {
  int width = 0;
  int out_channels = 0;
  int count = 0;
  int first_stride = 1;
};

struct LayerSpec {
  std::string name;
  std::variant<ConvBlockSpec, PoolSpec, LinearSpec, SoftmaxSpec, InceptionSpec,
               BottleneckSetSpec>
      op;
};

// --- parameters -------------------------------------------------------------

struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> values;

  std::size_t count() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }
};

// Named parameter store; iteration order is creation order and defines the
// blob layout.
class ParamStore {
 public:
  Param& add(const std::string& name, std::vector<std::size_t> shape);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  const std::vector<Param>& all() const { return params_; }
  std::vector<Param>& all() { return params_; }
  std::size_t total_values() const;

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct NetworkModel {
  NetworkKind kind = NetworkKind::VNet;
  int in_channels = 3;
  std::vector<LayerSpec> layers;
  ParamStore params;
};

// --- primitive ops ----------------------------------------------------------

inline constexpr int kGroupNormGroups = 8;
inline constexpr double kGroupNormEps = 1e-5;

// Cross-correlation with per-output-channel bias.
// kernels laid out [out][in][kh][kw]; H_out = floor((H + 2p - kh)/stride) + 1.
Tensor4 conv2d(const Tensor4& input, const std::vector<float>& kernels,
               const std::vector<float>& bias, int out_channels, int kh, int kw,
               int stride, int padding);

// Per (sample, group) normalization with affine gamma/beta per channel.
Tensor4 group_norm(const Tensor4& input, int groups, const std::vector<float>& gamma,
                   const std::vector<float>& beta, double eps = kGroupNormEps);

void relu_inplace(Tensor4& t);

enum class PoolMode { kMax, kAvg };

// Max ignores padded cells; avg divides by the full kernel area, padding
// included.
Tensor4 pool2d(const Tensor4& input, PoolMode mode, int kernel, int stride, int padding);

// y = W x + b for each row of a flattened batch.
std::vector<float> linear(const std::vector<float>& input, std::size_t batch,
                          const std::vector<float>& weights, const std::vector<float>& bias,
                          std::size_t out_features, std::size_t in_features);

// Numerically-stable softmax over the trailing dimension.
std::vector<float> softmax(const std::vector<float>& logits, std::size_t batch,
                           std::size_t classes);

// Inception block: 1x1 / reduce+3x3 / reduce+5x5 / maxpool+proj branches,
// each conv a ConvBlock, concatenated along channels in that order.
Tensor4 inception_forward(const Tensor4& input, const InceptionSpec& spec,
                          const ParamStore& params, const std::string& prefix);

// One residual bottleneck: 1x1 reduce, 3x3 (stride), 1x1 expand, shortcut
// added before the final ReLU. A projection shortcut kicks in when channels
// or stride differ.
Tensor4 bottleneck_forward(const Tensor4& input, int width, int out_channels, int stride,
                           const ParamStore& params, const std::string& prefix);

// --- model ------------------------------------------------------------------

// Instantiates the layer list and zeroed parameters for one of the three
// classifier tables.
NetworkModel build_network(NetworkKind kind, int in_channels = 3);

// Uniform +-sqrt(1/fan_in) for conv/linear weights and biases; GN gamma = 1,
// beta = 0. Deterministic in (seed, parameter order).
void init_weights(NetworkModel& model, std::uint64_t seed);

struct TraceEntry {
  std::string name;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

struct ForwardResult {
  std::vector<float> probabilities;  // batch x 2, row-major
  std::vector<TraceEntry> trace;     // one entry per layer
};

// Runs the network on a batch x in_channels x 128 x 128 input.
ForwardResult forward(const NetworkModel& model, const Tensor4& input);

// Mean over the batch of -log p[label], p clamped to >= 1e-12.
double cross_entropy(const std::vector<float>& probabilities, std::size_t batch,
                     const std::vector<int>& labels);

// --- weight serialization ----------------------------------------------------

// Manifest JSON ({kind, in_channels, params[{name, shape, offset}], crc32})
// plus a little-endian f32 blob in manifest order.
void save_weights(const NetworkModel& model, const std::string& manifest_path,
                  const std::string& blob_path);

// Loads and validates; throws ConfigError when the manifest kind does not
// match `expected`, CorruptWeightsError on checksum/shape problems.
NetworkModel load_weights(NetworkKind expected, const std::string& manifest_path,
                          const std::string& blob_path);

// Reads the kind from the manifest and loads whatever it declares.
NetworkModel load_weights_any(const std::string& manifest_path, const std::string& blob_path);

}  // namespace sfc
