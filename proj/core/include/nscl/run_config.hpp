#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nscl/dataset.hpp"
#include "nscl/harness.hpp"
#include "nscl/network.hpp"

namespace nscl {

enum class DataSource { synthetic_gaussian, synthetic_images, csv, raw_f32 };

struct RunConfig {
  TrainConfig train;
  DataSource data = DataSource::synthetic_gaussian;
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  std::size_t classes_per_task = 4;
  // Synthetic stream shape.
  std::size_t tasks = 5;
  std::size_t dim = 32;
  std::size_t image_side = 8;
  std::size_t train_per_task = 256;
  std::size_t test_per_task = 256;
  double noise = 0.3;
  // Architecture.
  std::string layers = "dense:64,relu,dense:64,relu";
  std::string input_shape;  // empty: inferred from the data
  BiasMode bias = BiasMode::augmented;
  std::filesystem::path output_dir = "out";
};

/// key → (value, origin) where origin names the line or override it came from.
struct RawConfig {
  struct Entry {
    std::string value;
    std::string origin;
  };
  std::map<std::string, Entry, std::less<>> entries;
};

/// Parses `key = value` lines; `#` starts a comment. Throws ConfigError
/// naming the line for malformed or duplicate keys.
RawConfig parse_config_text(std::istream& in, std::string_view source);
RawConfig read_config_file(const std::filesystem::path& path);

/// Applies a `key=value` override, replacing any earlier value.
void apply_override(RawConfig& raw, std::string_view assignment);

/// Converts and validates every field. Throws ConfigError naming the key for
/// unknown keys, unparsable values and violated constraints (a ≥ 1, batch
/// size ≥ 1, epochs ≥ 1, seed present).
RunConfig resolve_config(const RawConfig& raw);

/// Keys accepted by resolve_config, in documentation order.
const std::vector<std::string_view>& config_keys();

/// Builds the task stream described by the config.
std::vector<TaskDataset> build_tasks(const RunConfig& config);

/// Parses the layer list against the input shape of `tasks`. Layer grammar:
/// `dense:<out>`, `relu`, `conv:<out_channels>:<kh>x<kw>[:<stride>]`.
NetworkSpec build_network_spec(const RunConfig& config, std::size_t input_features);

}  // namespace nscl
