#include "sfc/cnn.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "sfc/errors.hpp"
#include "sfc/parallel.hpp"
#include "sfc/rng.hpp"

namespace sfc {

namespace {

std::string shape_str(const Tensor4& t) {
  return std::to_string(t.batch) + "x" + std::to_string(t.channels) + "x" +
         std::to_string(t.height) + "x" + std::to_string(t.width);
}

int out_extent(int in, int kernel, int stride, int padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

}  // namespace

const char* network_kind_name(NetworkKind kind) {
  switch (kind) {
    case NetworkKind::VNet: return "VNet";
    case NetworkKind::GNet: return "GNet";
    case NetworkKind::RNet: return "RNet";
  }
  return "?";
}

NetworkKind network_kind_from_name(const std::string& name) {
  if (name == "VNet" || name == "vnet") return NetworkKind::VNet;
  if (name == "GNet" || name == "gnet") return NetworkKind::GNet;
  if (name == "RNet" || name == "rnet") return NetworkKind::RNet;
  throw ParseError("unknown network kind '" + name + "'");
}

Param& ParamStore::add(const std::string& name, std::vector<std::size_t> shape) {
  if (index_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
  Param p;
  p.name = name;
  p.shape = std::move(shape);
  p.values.assign(p.count(), 0.0f);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return params_.back();
}

Param& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("missing parameter '" + name + "'");
  return params_[it->second];
}

const Param& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("missing parameter '" + name + "'");
  return params_[it->second];
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.count();
  return n;
}

Tensor4 conv2d(const Tensor4& input, const std::vector<float>& kernels,
               const std::vector<float>& bias, int out_channels, int kh, int kw,
               int stride, int padding) {
  if (stride < 1) throw ConfigError("conv2d stride must be >= 1");
  if (padding < 0) throw ConfigError("conv2d padding must be >= 0");
  const std::size_t in_c = input.channels;
  if (kernels.size() != static_cast<std::size_t>(out_channels) * in_c * kh * kw)
    throw ShapeError("conv2d kernel count does not match channels (input " + shape_str(input) + ")");
  if (bias.size() != static_cast<std::size_t>(out_channels))
    throw ShapeError("conv2d bias length mismatch");

  const int in_h = static_cast<int>(input.height);
  const int in_w = static_cast<int>(input.width);
  const int out_h = out_extent(in_h, kh, stride, padding);
  const int out_w = out_extent(in_w, kw, stride, padding);
  if (out_h <= 0 || out_w <= 0) throw ShapeError("conv2d output would be empty");

  Tensor4 out = Tensor4::zeros(input.batch, out_channels, out_h, out_w);
  const std::size_t jobs = input.batch * static_cast<std::size_t>(out_channels);

  if (stride == 1) {
    // Zero-pad once so every tap sweeps the full output row, then accumulate
    // four taps per pass to cut accumulator traffic. Per output pixel the
    // taps still sum in (ci, dh, dw) order, in 64-bit.
    const int pw = in_w + 2 * padding;  // == out_w + kw - 1
    const int ph = in_h + 2 * padding;
    std::vector<float> padded(input.batch * in_c * static_cast<std::size_t>(ph) * pw, 0.0f);
    for (std::size_t n = 0; n < input.batch; ++n)
      for (std::size_t ci = 0; ci < in_c; ++ci) {
        const float* src = input.plane(n, ci);
        float* dst = padded.data() + ((n * in_c + ci) * ph + padding) * pw + padding;
        for (int ih = 0; ih < in_h; ++ih)
          std::copy_n(src + static_cast<std::size_t>(ih) * in_w, in_w,
                      dst + static_cast<std::size_t>(ih) * pw);
      }

    parallel_for(jobs, [&](std::size_t job) {
      const std::size_t n = job / out_channels;
      const std::size_t co = job % out_channels;
      const float* kernel_base = kernels.data() + co * in_c * kh * kw;
      float* out_plane = out.plane(n, co);

      const std::size_t tap_count = in_c * static_cast<std::size_t>(kh) * kw;
      std::vector<const float*> tap_src(tap_count);
      std::vector<double> tap_w(tap_count);
      std::vector<double> acc(out_w);

      for (int oh = 0; oh < out_h; ++oh) {
        std::size_t taps = 0;
        for (std::size_t ci = 0; ci < in_c; ++ci) {
          const float* plane_rows = padded.data() + (n * in_c + ci) * ph * static_cast<std::size_t>(pw);
          const float* kernel = kernel_base + ci * kh * kw;
          for (int dh = 0; dh < kh; ++dh) {
            const float* row = plane_rows + static_cast<std::size_t>(oh + dh) * pw;
            for (int dw = 0; dw < kw; ++dw) {
              const double w = kernel[dh * kw + dw];
              if (w == 0.0) continue;
              tap_w[taps] = w;
              tap_src[taps] = row + dw;
              ++taps;
            }
          }
        }

        std::fill(acc.begin(), acc.end(), static_cast<double>(bias[co]));
        std::size_t t = 0;
        for (; t + 4 <= taps; t += 4) {
          const double w0 = tap_w[t], w1 = tap_w[t + 1], w2 = tap_w[t + 2], w3 = tap_w[t + 3];
          const float *s0 = tap_src[t], *s1 = tap_src[t + 1], *s2 = tap_src[t + 2],
                      *s3 = tap_src[t + 3];
          for (int ow = 0; ow < out_w; ++ow)
            acc[ow] += w0 * s0[ow] + w1 * s1[ow] + w2 * s2[ow] + w3 * s3[ow];
        }
        for (; t < taps; ++t) {
          const double w = tap_w[t];
          const float* s = tap_src[t];
          for (int ow = 0; ow < out_w; ++ow) acc[ow] += w * s[ow];
        }
        float* out_row = out_plane + static_cast<std::size_t>(oh) * out_w;
        for (int ow = 0; ow < out_w; ++ow) out_row[ow] = static_cast<float>(acc[ow]);
      }
    });
    return out;
  }

  // Strided path: plain per-plane sweep.
  parallel_for(jobs, [&](std::size_t job) {
    const std::size_t n = job / out_channels;
    const std::size_t co = job % out_channels;

    std::vector<double> acc(static_cast<std::size_t>(out_h) * out_w, bias[co]);
    for (std::size_t ci = 0; ci < in_c; ++ci) {
      const float* in_plane = input.plane(n, ci);
      const float* kernel = kernels.data() + ((co * in_c + ci) * kh) * kw;
      for (int dh = 0; dh < kh; ++dh) {
        for (int dw = 0; dw < kw; ++dw) {
          const double w = kernel[dh * kw + dw];
          if (w == 0.0) continue;
          int ow_lo = 0;
          while (ow_lo < out_w && ow_lo * stride + dw - padding < 0) ++ow_lo;
          int ow_hi = out_w;
          while (ow_hi > ow_lo && (ow_hi - 1) * stride + dw - padding >= in_w) --ow_hi;
          for (int oh = 0; oh < out_h; ++oh) {
            const int ih = oh * stride + dh - padding;
            if (ih < 0 || ih >= in_h) continue;
            const float* in_row = in_plane + static_cast<std::size_t>(ih) * in_w;
            double* acc_row = acc.data() + static_cast<std::size_t>(oh) * out_w;
            const int base = dw - padding;
            for (int ow = ow_lo; ow < ow_hi; ++ow) acc_row[ow] += w * in_row[ow * stride + base];
          }
        }
      }
    }
    float* out_plane = out.plane(n, co);
    for (std::size_t i = 0; i < acc.size(); ++i) out_plane[i] = static_cast<float>(acc[i]);
  });
  return out;
}

Tensor4 group_norm(const Tensor4& input, int groups, const std::vector<float>& gamma,
                   const std::vector<float>& beta, double eps) {
  if (groups < 1 || input.channels % groups != 0)
    throw ConfigError("group_norm: channel count " + std::to_string(input.channels) +
                      " not divisible by " + std::to_string(groups) + " groups");
  if (gamma.size() != input.channels || beta.size() != input.channels)
    throw ShapeError("group_norm affine parameter length mismatch");

  const std::size_t group_channels = input.channels / groups;
  const std::size_t group_size = group_channels * input.plane_size();

  Tensor4 out = input;
  for (std::size_t n = 0; n < input.batch; ++n) {
    for (int g = 0; g < groups; ++g) {
      const float* src = input.plane(n, g * group_channels);
      double sum = 0.0, sum_sq = 0.0;
      for (std::size_t i = 0; i < group_size; ++i) {
        sum += src[i];
        sum_sq += static_cast<double>(src[i]) * src[i];
      }
      const double mean = sum / static_cast<double>(group_size);
      const double var = std::max(0.0, sum_sq / static_cast<double>(group_size) - mean * mean);
      const double inv_std = 1.0 / std::sqrt(var + eps);

      float* dst = out.plane(n, g * group_channels);
      for (std::size_t c = 0; c < group_channels; ++c) {
        const std::size_t channel = g * group_channels + c;
        const double scale = gamma[channel] * inv_std;
        const double shift = beta[channel] - mean * scale;
        float* row = dst + c * input.plane_size();
        for (std::size_t i = 0; i < input.plane_size(); ++i)
          row[i] = static_cast<float>(row[i] * scale + shift);
      }
    }
  }
  return out;
}

void relu_inplace(Tensor4& t) {
  for (float& v : t.data) v = v > 0.0f ? v : 0.0f;
}

Tensor4 pool2d(const Tensor4& input, PoolMode mode, int kernel, int stride, int padding) {
  if (kernel < 1) throw ConfigError("pool2d kernel must be >= 1");
  const int in_h = static_cast<int>(input.height);
  const int in_w = static_cast<int>(input.width);
  const int out_h = out_extent(in_h, kernel, stride, padding);
  const int out_w = out_extent(in_w, kernel, stride, padding);
  if (out_h <= 0 || out_w <= 0) throw ShapeError("pool2d output would be empty");

  Tensor4 out = Tensor4::zeros(input.batch, input.channels, out_h, out_w);
  const double inv_area = 1.0 / (static_cast<double>(kernel) * kernel);
  for (std::size_t n = 0; n < input.batch; ++n) {
    for (std::size_t c = 0; c < input.channels; ++c) {
      const float* src = input.plane(n, c);
      float* dst = out.plane(n, c);
      for (int oh = 0; oh < out_h; ++oh) {
        for (int ow = 0; ow < out_w; ++ow) {
          const int h0 = oh * stride - padding;
          const int w0 = ow * stride - padding;
          if (mode == PoolMode::kMax) {
            float best = -std::numeric_limits<float>::infinity();
            for (int dh = 0; dh < kernel; ++dh) {
              const int ih = h0 + dh;
              if (ih < 0 || ih >= in_h) continue;
              for (int dw = 0; dw < kernel; ++dw) {
                const int iw = w0 + dw;
                if (iw < 0 || iw >= in_w) continue;
                best = std::max(best, src[ih * in_w + iw]);
              }
            }
            dst[oh * out_w + ow] = best;
          } else {
            double sum = 0.0;
            for (int dh = 0; dh < kernel; ++dh) {
              const int ih = h0 + dh;
              if (ih < 0 || ih >= in_h) continue;
              for (int dw = 0; dw < kernel; ++dw) {
                const int iw = w0 + dw;
                if (iw < 0 || iw >= in_w) continue;
                sum += src[ih * in_w + iw];
              }
            }
            dst[oh * out_w + ow] = static_cast<float>(sum * inv_area);
          }
        }
      }
    }
  }
  return out;
}

std::vector<float> linear(const std::vector<float>& input, std::size_t batch,
                          const std::vector<float>& weights, const std::vector<float>& bias,
                          std::size_t out_features, std::size_t in_features) {
  if (input.size() != batch * in_features) throw ShapeError("linear input length mismatch");
  if (weights.size() != out_features * in_features) throw ShapeError("linear weight shape mismatch");
  if (bias.size() != out_features) throw ShapeError("linear bias length mismatch");

  std::vector<float> out(batch * out_features);
  for (std::size_t n = 0; n < batch; ++n) {
    const float* x = input.data() + n * in_features;
    for (std::size_t o = 0; o < out_features; ++o) {
      const float* w = weights.data() + o * in_features;
      double acc = bias[o];
      for (std::size_t i = 0; i < in_features; ++i) acc += static_cast<double>(w[i]) * x[i];
      out[n * out_features + o] = static_cast<float>(acc);
    }
  }
  return out;
}

std::vector<float> softmax(const std::vector<float>& logits, std::size_t batch,
                           std::size_t classes) {
  if (logits.size() != batch * classes) throw ShapeError("softmax input length mismatch");
  std::vector<float> out(logits.size());
  for (std::size_t n = 0; n < batch; ++n) {
    const float* row = logits.data() + n * classes;
    const float peak = *std::max_element(row, row + classes);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) sum += std::exp(static_cast<double>(row[k]) - peak);
    for (std::size_t k = 0; k < classes; ++k)
      out[n * classes + k] = static_cast<float>(std::exp(static_cast<double>(row[k]) - peak) / sum);
  }
  return out;
}

namespace {

// Registers the four parameters of one conv+GN unit.
void declare_conv_block(ParamStore& params, const std::string& prefix, std::size_t in_c,
                        std::size_t out_c, std::size_t kernel) {
  params.add(prefix + ".conv.w", {out_c, in_c, kernel, kernel});
  params.add(prefix + ".conv.b", {out_c});
  params.add(prefix + ".gn.g", {out_c});
  params.add(prefix + ".gn.b", {out_c});
}

Tensor4 conv_gn(const Tensor4& input, const ParamStore& params, const std::string& prefix,
                int stride, int padding) {
  const Param& w = params.get(prefix + ".conv.w");
  const Param& b = params.get(prefix + ".conv.b");
  const Param& g = params.get(prefix + ".gn.g");
  const Param& be = params.get(prefix + ".gn.b");
  const int out_c = static_cast<int>(w.shape[0]);
  const int kh = static_cast<int>(w.shape[2]);
  const int kw = static_cast<int>(w.shape[3]);
  Tensor4 out = conv2d(input, w.values, b.values, out_c, kh, kw, stride, padding);
  return group_norm(out, kGroupNormGroups, g.values, be.values);
}

Tensor4 conv_block(const Tensor4& input, const ParamStore& params, const std::string& prefix,
                   int stride, int padding) {
  Tensor4 out = conv_gn(input, params, prefix, stride, padding);
  relu_inplace(out);
  return out;
}

Tensor4 concat_channels(const std::vector<Tensor4>& parts) {
  std::size_t channels = 0;
  for (const auto& p : parts) channels += p.channels;
  Tensor4 out = Tensor4::zeros(parts[0].batch, channels, parts[0].height, parts[0].width);
  for (std::size_t n = 0; n < out.batch; ++n) {
    std::size_t c_off = 0;
    for (const auto& p : parts) {
      std::memcpy(out.plane(n, c_off), p.plane(n, 0),
                  p.channels * p.plane_size() * sizeof(float));
      c_off += p.channels;
    }
  }
  return out;
}

}  // namespace

Tensor4 inception_forward(const Tensor4& input, const InceptionSpec& spec,
                          const ParamStore& params, const std::string& prefix) {
  if (spec.c1 <= 0 || spec.c3_reduce <= 0 || spec.c3 <= 0 || spec.c5_reduce <= 0 ||
      spec.c5 <= 0 || spec.pool_proj <= 0)
    throw ConfigError("inception widths must be positive");

  Tensor4 b1 = conv_block(input, params, prefix + ".b1", 1, 0);
  Tensor4 b2 = conv_block(conv_block(input, params, prefix + ".b2r", 1, 0), params,
                          prefix + ".b2", 1, 1);
  Tensor4 b3 = conv_block(conv_block(input, params, prefix + ".b3r", 1, 0), params,
                          prefix + ".b3", 1, 2);
  Tensor4 pooled = pool2d(input, PoolMode::kMax, 3, 1, 1);
  Tensor4 b4 = conv_block(pooled, params, prefix + ".b4", 1, 0);

  if (b1.channels != static_cast<std::size_t>(spec.c1) ||
      b2.channels != static_cast<std::size_t>(spec.c3) ||
      b3.channels != static_cast<std::size_t>(spec.c5) ||
      b4.channels != static_cast<std::size_t>(spec.pool_proj))
    throw ConfigError("inception branch widths do not match weights at " + prefix);

  return concat_channels({b1, b2, b3, b4});
}

Tensor4 bottleneck_forward(const Tensor4& input, int width, int out_channels, int stride,
                           const ParamStore& params, const std::string& prefix) {
  if (width <= 0 || out_channels <= 0) throw ConfigError("bottleneck widths must be positive");

  Tensor4 y = conv_block(input, params, prefix + ".reduce", 1, 0);
  y = conv_block(y, params, prefix + ".mid", stride, 1);
  y = conv_gn(y, params, prefix + ".expand", 1, 0);

  Tensor4 shortcut;
  if (params.has(prefix + ".proj.conv.w")) {
    shortcut = conv_gn(input, params, prefix + ".proj", stride, 0);
  } else {
    if (input.channels != static_cast<std::size_t>(out_channels) || stride != 1)
      throw ConfigError("identity shortcut needs matching geometry at " + prefix);
    shortcut = input;
  }
  if (shortcut.data.size() != y.data.size())
    throw ShapeError("bottleneck shortcut shape mismatch at " + prefix);
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += shortcut.data[i];
  relu_inplace(y);
  return y;
}

NetworkModel build_network(NetworkKind kind, int in_channels) {
  if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
  NetworkModel model;
  model.kind = kind;
  model.in_channels = in_channels;

  auto add_conv_block = [&model](const std::string& name, std::size_t in_c, std::size_t out_c,
                                 int kernel, int stride, int padding) {
    declare_conv_block(model.params, name, in_c, out_c, kernel);
    model.layers.push_back({name, ConvBlockSpec{static_cast<int>(out_c), kernel, stride, padding}});
  };
  auto add_pool = [&model](const std::string& name, bool is_max, int kernel, int stride,
                           int padding) {
    model.layers.push_back({name, PoolSpec{is_max, kernel, stride, padding}});
  };
  auto add_linear = [&model](const std::string& name, std::size_t in_f, std::size_t out_f,
                             bool relu) {
    model.params.add(name + ".w", {out_f, in_f});
    model.params.add(name + ".b", {out_f});
    model.layers.push_back({name, LinearSpec{static_cast<int>(out_f), relu}});
  };

  switch (kind) {
    case NetworkKind::VNet: {
      const int plan[5][2] = {{2, 16}, {2, 32}, {3, 64}, {3, 128}, {3, 128}};
      std::size_t in_c = in_channels;
      int conv_id = 0;
      for (int stage = 0; stage < 5; ++stage) {
        for (int i = 0; i < plan[stage][0]; ++i) {
          ++conv_id;
          add_conv_block("conv" + std::to_string(conv_id), in_c, plan[stage][1], 3, 1, 1);
          in_c = plan[stage][1];
        }
        add_pool("pool" + std::to_string(stage + 1), true, 2, 2, 0);
      }
      add_linear("fc1", in_c * 4 * 4, 512, true);
      add_linear("fc2", 512, 32, true);
      add_linear("fc3", 32, 2, false);
      model.layers.push_back({"softmax", SoftmaxSpec{}});
      break;
    }
    case NetworkKind::GNet: {
      add_conv_block("pre1", in_channels, 16, 7, 1, 3);
      add_pool("pool1", true, 3, 2, 1);
      add_conv_block("pre2", 16, 48, 3, 1, 1);
      add_pool("pool2", true, 3, 2, 1);

      const InceptionSpec modules[9] = {
          {64, 96, 128, 16, 32, 32},    {128, 128, 192, 32, 96, 64},
          {192, 96, 208, 16, 48, 64},   {160, 112, 224, 24, 64, 64},
          {128, 128, 256, 24, 64, 64},  {112, 144, 288, 32, 64, 64},
          {256, 160, 320, 32, 128, 128}, {256, 160, 320, 32, 128, 128},
          {384, 192, 384, 48, 128, 128}};
      std::size_t in_c = 48;
      for (int m = 0; m < 9; ++m) {
        const std::string name = "inc" + std::to_string(m + 1);
        const InceptionSpec& spec = modules[m];
        declare_conv_block(model.params, name + ".b1", in_c, spec.c1, 1);
        declare_conv_block(model.params, name + ".b2r", in_c, spec.c3_reduce, 1);
        declare_conv_block(model.params, name + ".b2", spec.c3_reduce, spec.c3, 3);
        declare_conv_block(model.params, name + ".b3r", in_c, spec.c5_reduce, 1);
        declare_conv_block(model.params, name + ".b3", spec.c5_reduce, spec.c5, 5);
        declare_conv_block(model.params, name + ".b4", in_c, spec.pool_proj, 1);
        model.layers.push_back({name, spec});
        in_c = spec.out_channels();
        if (m == 1) add_pool("pool3", true, 3, 2, 1);
        if (m == 6) add_pool("pool4", true, 3, 2, 1);
      }
      add_pool("avgpool", false, 8, 1, 0);
      add_linear("fc", 1024, 2, false);
      model.layers.push_back({"softmax", SoftmaxSpec{}});
      break;
    }
    case NetworkKind::RNet: {
      add_conv_block("pre", in_channels, 16, 7, 1, 3);
      add_pool("pool1", true, 3, 2, 1);

      const BottleneckSetSpec sets[4] = {
          {16, 64, 3, 2}, {32, 128, 4, 2}, {64, 256, 6, 2}, {128, 512, 3, 1}};
      std::size_t in_c = 16;
      for (int s = 0; s < 4; ++s) {
        const std::string name = "set" + std::to_string(s + 1);
        const BottleneckSetSpec& spec = sets[s];
        for (int i = 0; i < spec.count; ++i) {
          const std::string block = name + "." + std::to_string(i);
          const int stride = i == 0 ? spec.first_stride : 1;
          declare_conv_block(model.params, block + ".reduce", in_c, spec.width, 1);
          declare_conv_block(model.params, block + ".mid", spec.width, spec.width, 3);
          declare_conv_block(model.params, block + ".expand", spec.width, spec.out_channels, 1);
          if (stride != 1 || in_c != static_cast<std::size_t>(spec.out_channels))
            declare_conv_block(model.params, block + ".proj", in_c, spec.out_channels, 1);
          in_c = spec.out_channels;
        }
        model.layers.push_back({name, spec});
      }
      add_pool("avgpool", false, 8, 1, 0);
      add_linear("fc", 512, 2, false);
      model.layers.push_back({"softmax", SoftmaxSpec{}});
      break;
    }
  }
  return model;
}

void init_weights(NetworkModel& model, std::uint64_t seed) {
  const Rng rng(seed);
  std::uint64_t stream = 0;
  for (auto& param : model.params.all()) {
    ++stream;
    const bool is_gamma = param.name.size() > 5 && param.name.rfind(".gn.g") == param.name.size() - 5;
    const bool is_beta = param.name.size() > 5 && param.name.rfind(".gn.b") == param.name.size() - 5;
    if (is_gamma) {
      std::fill(param.values.begin(), param.values.end(), 1.0f);
      continue;
    }
    if (is_beta || param.shape.size() == 1) {
      // GN beta and conv/linear biases start at zero.
      std::fill(param.values.begin(), param.values.end(), 0.0f);
      continue;
    }
    // fan_in: conv [out,in,kh,kw] -> in*kh*kw; linear [out,in] -> in.
    std::size_t fan_in = param.shape[1];
    for (std::size_t d = 2; d < param.shape.size(); ++d) fan_in *= param.shape[d];
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < param.values.size(); ++i)
      param.values[i] = static_cast<float>(rng.uniform(stream, i, -bound, bound));
  }
}

ForwardResult forward(const NetworkModel& model, const Tensor4& input) {
  if (input.channels != static_cast<std::size_t>(model.in_channels))
    throw ShapeError("input has " + std::to_string(input.channels) + " channels, model expects " +
                     std::to_string(model.in_channels));
  if (input.height != 128 || input.width != 128)
    throw ShapeError("input must be 128x128, got " + shape_str(input));

  ForwardResult result;
  Tensor4 x = input;
  bool flattened = false;
  std::vector<float> vec;  // batch x features once flattened

  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const LayerSpec& layer = model.layers[li];
    try {
      if (const auto* conv = std::get_if<ConvBlockSpec>(&layer.op)) {
        x = conv_block(x, model.params, layer.name, conv->stride, conv->padding);
      } else if (const auto* pool = std::get_if<PoolSpec>(&layer.op)) {
        x = pool2d(x, pool->is_max ? PoolMode::kMax : PoolMode::kAvg, pool->kernel, pool->stride,
                   pool->padding);
      } else if (const auto* inc = std::get_if<InceptionSpec>(&layer.op)) {
        x = inception_forward(x, *inc, model.params, layer.name);
      } else if (const auto* set = std::get_if<BottleneckSetSpec>(&layer.op)) {
        for (int i = 0; i < set->count; ++i)
          x = bottleneck_forward(x, set->width, set->out_channels,
                                 i == 0 ? set->first_stride : 1, model.params,
                                 layer.name + "." + std::to_string(i));
      } else if (const auto* lin = std::get_if<LinearSpec>(&layer.op)) {
        if (!flattened) {
          vec = x.data;  // NCHW row-major is already batch-major
          flattened = true;
        }
        const Param& w = model.params.get(layer.name + ".w");
        const Param& b = model.params.get(layer.name + ".b");
        vec = linear(vec, input.batch, w.values, b.values, w.shape[0], w.shape[1]);
        if (lin->relu)
          for (float& v : vec) v = v > 0.0f ? v : 0.0f;
        x = Tensor4::zeros(input.batch, w.shape[0], 1, 1);
        x.data = vec;
      } else if (std::get_if<SoftmaxSpec>(&layer.op)) {
        vec = softmax(vec, input.batch, 2);
        x = Tensor4::zeros(input.batch, 2, 1, 1);
        x.data = vec;
      }
    } catch (const std::exception& e) {
      throw ShapeError("layer " + std::to_string(li) + " (" + layer.name + "): " + e.what());
    }
#ifndef NDEBUG
    for (float v : x.data)
      if (!std::isfinite(v))
        throw ShapeError("non-finite activation after layer " + layer.name);
#endif
    result.trace.push_back({layer.name, x.channels, x.height, x.width});
  }
  result.probabilities = vec;
  return result;
}

double cross_entropy(const std::vector<float>& probabilities, std::size_t batch,
                     const std::vector<int>& labels) {
  if (labels.size() != batch) throw ShapeError("label count does not match batch");
  if (probabilities.size() != batch * 2) throw ShapeError("probabilities must be batch x 2");
  double total = 0.0;
  for (std::size_t n = 0; n < batch; ++n) {
    const double p = std::max(static_cast<double>(probabilities[n * 2 + labels[n]]), 1e-12);
    total += -std::log(p);
  }
  return total / static_cast<double>(batch);
}

namespace {

std::uint32_t blob_crc32(const std::vector<float>& blob) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(blob.data()),
              static_cast<uInt>(blob.size() * sizeof(float))));
}

}  // namespace

void save_weights(const NetworkModel& model, const std::string& manifest_path,
                  const std::string& blob_path) {
  std::vector<float> blob;
  blob.reserve(model.params.total_values());
  nlohmann::json params_json = nlohmann::json::array();
  for (const auto& param : model.params.all()) {
    nlohmann::json p;
    p["name"] = param.name;
    p["shape"] = param.shape;
    p["offset"] = blob.size();
    params_json.push_back(std::move(p));
    blob.insert(blob.end(), param.values.begin(), param.values.end());
  }

  nlohmann::json manifest;
  manifest["kind"] = network_kind_name(model.kind);
  manifest["in_channels"] = model.in_channels;
  manifest["dtype"] = "f32";
  manifest["params"] = std::move(params_json);
  manifest["checksum"] = blob_crc32(blob);

  std::ofstream mout(manifest_path);
  if (!mout) throw IoError("cannot open " + manifest_path + " for writing");
  mout << manifest.dump(2) << '\n';

  std::ofstream bout(blob_path, std::ios::binary);
  if (!bout) throw IoError("cannot open " + blob_path + " for writing");
  bout.write(reinterpret_cast<const char*>(blob.data()),
             static_cast<std::streamsize>(blob.size() * sizeof(float)));
  if (!bout) throw IoError("failed writing " + blob_path);
}

NetworkModel load_weights(NetworkKind expected, const std::string& manifest_path,
                          const std::string& blob_path) {
  NetworkModel model = load_weights_any(manifest_path, blob_path);
  if (model.kind != expected)
    throw ConfigError("weight manifest is for " + std::string(network_kind_name(model.kind)) +
                      ", expected " + network_kind_name(expected));
  return model;
}

NetworkModel load_weights_any(const std::string& manifest_path, const std::string& blob_path) {
  std::ifstream min(manifest_path);
  if (!min) throw IoError("cannot open " + manifest_path);
  nlohmann::json manifest;
  try {
    min >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path + ": " + e.what());
  }

  const NetworkKind kind = network_kind_from_name(manifest.at("kind").get<std::string>());
  const int in_channels = manifest.value("in_channels", 3);
  if (manifest.value("dtype", "f32") != std::string("f32"))
    throw UnsupportedFormatError(manifest_path + ": unsupported dtype");

  NetworkModel model = build_network(kind, in_channels);

  std::ifstream bin(blob_path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + blob_path);
  bin.seekg(0, std::ios::end);
  const std::size_t bytes = static_cast<std::size_t>(bin.tellg());
  bin.seekg(0);
  if (bytes % sizeof(float) != 0) throw CorruptWeightsError(blob_path + ": odd blob size");
  std::vector<float> blob(bytes / sizeof(float));
  bin.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(bytes));
  if (!bin) throw CorruptWeightsError(blob_path + ": short read");

  if (blob.size() != model.params.total_values())
    throw CorruptWeightsError(blob_path + ": blob holds " + std::to_string(blob.size()) +
                              " values, network needs " +
                              std::to_string(model.params.total_values()));
  const std::uint32_t expected_crc = manifest.at("checksum").get<std::uint32_t>();
  if (blob_crc32(blob) != expected_crc)
    throw CorruptWeightsError(blob_path + ": checksum mismatch");

  // Every declared parameter must appear exactly once with a matching shape.
  const auto& params_json = manifest.at("params");
  if (params_json.size() != model.params.all().size())
    throw CorruptWeightsError(manifest_path + ": parameter count mismatch");
  for (const auto& p : params_json) {
    const std::string name = p.at("name").get<std::string>();
    const auto shape = p.at("shape").get<std::vector<std::size_t>>();
    const std::size_t offset = p.at("offset").get<std::size_t>();
    Param& param = model.params.get(name);
    if (shape != param.shape) throw CorruptWeightsError(manifest_path + ": shape mismatch for " + name);
    if (offset + param.count() > blob.size())
      throw CorruptWeightsError(manifest_path + ": offset out of range for " + name);
    std::copy_n(blob.begin() + offset, param.count(), param.values.begin());
  }
  return model;
}

}  // namespace sfc
