#pragma once

#include <stdexcept>
#include <string>

namespace sfc {

// Malformed input that could not be parsed (bad RIFF header, bad CSV row, ...).
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input parsed but uses a codec/layout this toolkit does not handle.
struct UnsupportedFormatError : std::runtime_error {
  explicit UnsupportedFormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension/length mismatch between operands.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration (bad layer widths, indivisible group counts, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unknown feature-spec token.
struct SpecError : std::runtime_error {
  explicit SpecError(const std::string& msg) : std::runtime_error(msg) {}
};

// Weight blob fails checksum/shape validation.
struct CorruptWeightsError : std::runtime_error {
  explicit CorruptWeightsError(const std::string& msg) : std::runtime_error(msg) {}
};

// Statistics unusable for normalization (std <= 0).
struct DegenerateStatsError : std::runtime_error {
  explicit DegenerateStatsError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sfc
