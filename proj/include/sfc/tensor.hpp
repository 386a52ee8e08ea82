#pragma once

#include <cstddef>
#include <vector>

namespace sfc {

// Dense NCHW tensor of 32-bit floats, row-major.
struct Tensor4 {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  static Tensor4 zeros(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    Tensor4 t;
    t.batch = n;
    t.channels = c;
    t.height = h;
    t.width = w;
    t.data.assign(n * c * h * w, 0.0f);
    return t;
  }

  std::size_t size() const { return data.size(); }
  std::size_t plane_size() const { return height * width; }

  float* plane(std::size_t n, std::size_t c) {
    return data.data() + (n * channels + c) * plane_size();
  }
  const float* plane(std::size_t n, std::size_t c) const {
    return data.data() + (n * channels + c) * plane_size();
  }

  float& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data[((n * channels + c) * height + h) * width + w];
  }
  float at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data[((n * channels + c) * height + h) * width + w];
  }
};

}  // namespace sfc
