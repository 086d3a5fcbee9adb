#include "nscl/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <utility>
#include <cmath>
#include <fstream>
#include <istream>

#include "csv_format.hpp"
#include "nscl/dataset_io.hpp"
#include "nscl/errors.hpp"

namespace nscl {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(sep, start);
    out.push_back(trim(s.substr(start, at == std::string_view::npos ? at : at - start)));
    if (at == std::string_view::npos) return out;
    start = at + 1;
  }
}

[[noreturn]] void bad(std::string_view key, const std::string& origin, const std::string& what) {
  throw ConfigError(std::string(key) + ": " + what + " (" + origin + ")");
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return true;
}

// Typed access to RawConfig that remembers which keys were consumed.
class Reader {
 public:
  explicit Reader(const RawConfig& raw) : raw_(raw) {}

  const RawConfig::Entry* find(std::string_view key) {
    const auto it = raw_.entries.find(key);
    if (it == raw_.entries.end()) return nullptr;
    ++used_;
    return &it->second;
  }

  std::size_t used() const { return used_; }

  double number(std::string_view key, double fallback) {
    const auto* e = find(key);
    if (!e) return fallback;
    double v = 0.0;
    const auto& s = e->value;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
      bad(key, e->origin, "expected a number, got '" + s + "'");
    }
    return v;
  }

  std::uint64_t count(std::string_view key, std::uint64_t fallback) {
    const auto* e = find(key);
    return e ? parse_count(key, *e, e->value) : fallback;
  }

  std::string text(std::string_view key, std::string fallback) {
    const auto* e = find(key);
    return e ? e->value : fallback;
  }

  static std::uint64_t parse_count(std::string_view key, const RawConfig::Entry& e,
                                   std::string_view s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      bad(key, e.origin, "expected a non-negative integer, got '" + std::string(s) + "'");
    }
    return v;
  }

 private:
  const RawConfig& raw_;
  std::size_t used_ = 0;
};

const std::vector<std::string_view> kKeys = {
    "seed",           "mode",           "a",           "lr",
    "lr_decay_epochs", "lr_decay_factor", "epochs",     "batch_size",
    "covariance_batch", "descent_probe_lr", "record_steps", "data",
    "train_path",     "test_path",      "classes_per_task", "tasks",
    "dim",            "image_side",     "train_per_task", "test_per_task",
    "noise",          "layers",         "input_shape", "bias",
    "output_dir"};

std::size_t parse_dim(std::string_view s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || v == 0) {
    throw ConfigError("expected a positive integer, got '" + std::string(s) + "'");
  }
  return v;
}

Shape3 parse_shape(std::string_view s) {
  const auto parts = split(s, 'x');
  if (parts.size() == 1) return {parse_dim(parts[0]), 1, 1};
  if (parts.size() == 3) return {parse_dim(parts[0]), parse_dim(parts[1]), parse_dim(parts[2])};
  throw ConfigError("expected <features> or <channels>x<height>x<width>, got '" + std::string(s) + "'");
}

}  // namespace

RawConfig parse_config_text(std::istream& in, std::string_view source) {
  RawConfig raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    const std::string origin = std::string(source) + ":" + std::to_string(line_no);
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("expected key = value, got '" + std::string(body) + "' (" + origin + ")");
    }
    const std::string key(trim(body.substr(0, eq)));
    if (!valid_key(key)) throw ConfigError("invalid key '" + key + "' (" + origin + ")");
    if (raw.entries.contains(key)) bad(key, origin, "duplicate key");
    raw.entries[key] = {std::string(trim(body.substr(eq + 1))), origin};
  }
  return raw;
}

RawConfig read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config_text(in, path.string());
}

void apply_override(RawConfig& raw, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const std::string key(trim(assignment.substr(0, eq)));
  if (eq == std::string_view::npos || !valid_key(key)) {
    throw ConfigError("override must look like key=value, got '" + std::string(assignment) + "'");
  }
  raw.entries[key] = {std::string(trim(assignment.substr(eq + 1))), "--set"};
}

const std::vector<std::string_view>& config_keys() { return kKeys; }

RunConfig resolve_config(const RawConfig& raw) {
  for (const auto& [key, entry] : raw.entries) {
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      bad(key, entry.origin, "unknown key");
    }
  }

  Reader r(raw);
  RunConfig c;
  TrainConfig& t = c.train;

  const auto* seed = r.find("seed");
  if (!seed) throw ConfigError("seed: required key is missing");
  t.seed = Reader::parse_count("seed", *seed, seed->value);

  const std::string mode = r.text("mode", "nscl");
  if (mode == "nscl") {
    t.mode = TrainingMode::nscl;
  } else if (mode == "plain-adam") {
    t.mode = TrainingMode::plain_adam;
  } else {
    bad("mode", raw.entries.at("mode").origin, "expected nscl or plain-adam, got '" + mode + "'");
  }

  t.a = r.number("a", 10.0);
  t.lr.base = r.number("lr", 3e-2);
  t.lr.factor = r.number("lr_decay_factor", 0.5);
  t.lr.decay_epochs = {8, 15};
  if (const auto* e = r.find("lr_decay_epochs")) {
    t.lr.decay_epochs.clear();
    if (e->value != "none" && !e->value.empty()) {
      for (auto part : split(e->value, ',')) {
        t.lr.decay_epochs.push_back(Reader::parse_count("lr_decay_epochs", *e, part));
      }
    }
  }
  t.epochs = r.count("epochs", 20);
  t.batch_size = r.count("batch_size", 32);
  t.covariance_batch = r.count("covariance_batch", 256);
  t.descent_probe_lr = r.number("descent_probe_lr", 0.0);
  const std::string record = r.text("record_steps", "true");
  if (record != "true" && record != "false") {
    bad("record_steps", raw.entries.at("record_steps").origin, "expected true or false");
  }
  t.record_steps = record == "true";

  // Named field checks before the generic TrainConfig validation so that
  // the message always carries the key and its origin.
  auto origin = [&](std::string_view key) {
    const auto it = raw.entries.find(key);
    return it == raw.entries.end() ? std::string("default") : it->second.origin;
  };
  if (!(t.a >= 1.0)) bad("a", origin("a"), "must be >= 1, got " + detail::format_double(t.a));
  if (t.batch_size < 1) bad("batch_size", origin("batch_size"), "must be >= 1");
  if (t.epochs < 1) bad("epochs", origin("epochs"), "must be >= 1");
  if (!(t.lr.base > 0.0)) bad("lr", origin("lr"), "must be > 0");
  if (!(t.lr.factor > 0.0)) bad("lr_decay_factor", origin("lr_decay_factor"), "must be > 0");
  if (t.covariance_batch < 1) bad("covariance_batch", origin("covariance_batch"), "must be >= 1");
  if (t.descent_probe_lr < 0.0) bad("descent_probe_lr", origin("descent_probe_lr"), "must be >= 0");
  t.validate();

  const std::string data = r.text("data", "synthetic-gaussian");
  if (data == "synthetic-gaussian") {
    c.data = DataSource::synthetic_gaussian;
  } else if (data == "synthetic-images") {
    c.data = DataSource::synthetic_images;
  } else if (data == "csv") {
    c.data = DataSource::csv;
  } else if (data == "raw-f32") {
    c.data = DataSource::raw_f32;
  } else {
    bad("data", origin("data"),
        "expected synthetic-gaussian, synthetic-images, csv or raw-f32, got '" + data + "'");
  }
  c.train_path = r.text("train_path", "");
  c.test_path = r.text("test_path", "");
  const bool from_file = c.data == DataSource::csv || c.data == DataSource::raw_f32;
  if (from_file && c.train_path.empty()) bad("train_path", origin("train_path"), "required for file data");
  if (from_file && c.test_path.empty()) bad("test_path", origin("test_path"), "required for file data");

  const bool images = c.data == DataSource::synthetic_images;
  c.classes_per_task = r.count("classes_per_task", images ? 3 : 4);
  c.tasks = r.count("tasks", images ? 3 : 5);
  c.dim = r.count("dim", 32);
  c.image_side = r.count("image_side", 8);
  c.train_per_task = r.count("train_per_task", images ? 96 : 256);
  c.test_per_task = r.count("test_per_task", images ? 96 : 256);
  c.noise = r.number("noise", images ? 0.5 : 0.3);
  const std::pair<std::string_view, std::size_t> positive[] = {
      {"tasks", c.tasks},
      {"dim", c.dim},
      {"image_side", c.image_side},
      {"train_per_task", c.train_per_task},
      {"test_per_task", c.test_per_task}};
  for (const auto& [key, v] : positive) {
    if (v < 1) bad(key, origin(key), "must be >= 1");
  }
  if (c.classes_per_task < 2) bad("classes_per_task", origin("classes_per_task"), "must be >= 2");
  if (!(c.noise >= 0.0)) bad("noise", origin("noise"), "must be >= 0");

  c.layers = r.text("layers", c.layers);
  c.input_shape = r.text("input_shape", "");
  if (!c.input_shape.empty()) {
    try {
      (void)parse_shape(c.input_shape);
    } catch (const ConfigError& e) {
      bad("input_shape", origin("input_shape"), e.what());
    }
  }
  const std::string bias = r.text("bias", "augmented");
  if (bias == "augmented") {
    c.bias = BiasMode::augmented;
  } else if (bias == "none") {
    c.bias = BiasMode::none;
  } else {
    bad("bias", origin("bias"), "expected augmented or none, got '" + bias + "'");
  }
  c.output_dir = r.text("output_dir", "out");
  if (c.output_dir.empty()) bad("output_dir", origin("output_dir"), "must not be empty");

  // Layer syntax errors surface here rather than after data loading.
  const std::size_t known_features =
      images ? c.image_side * c.image_side : (from_file ? 0 : c.dim);
  if (known_features > 0 || !c.input_shape.empty()) (void)build_network_spec(c, known_features);
  return c;
}

std::vector<TaskDataset> build_tasks(const RunConfig& c) {
  switch (c.data) {
    case DataSource::synthetic_gaussian: {
      GaussianStreamConfig g;
      g.tasks = c.tasks;
      g.dim = c.dim;
      g.classes = c.classes_per_task;
      g.noise = c.noise;
      g.train_per_task = c.train_per_task;
      g.test_per_task = c.test_per_task;
      g.seed = c.train.seed;
      if (g.subspace_dim > g.dim) g.subspace_dim = g.dim;
      return make_gaussian_stream(g);
    }
    case DataSource::synthetic_images: {
      ImageStreamConfig g;
      g.tasks = c.tasks;
      g.side = c.image_side;
      g.classes = c.classes_per_task;
      g.noise = c.noise;
      g.train_per_task = c.train_per_task;
      g.test_per_task = c.test_per_task;
      g.seed = c.train.seed;
      return make_image_stream(g);
    }
    case DataSource::csv:
      return load_dataset(c.train_path, c.test_path, DataFormat::csv, c.classes_per_task);
    case DataSource::raw_f32:
      return load_dataset(c.train_path, c.test_path, DataFormat::raw_f32, c.classes_per_task);
  }
  throw ConfigError("data: unsupported source");
}

NetworkSpec build_network_spec(const RunConfig& c, std::size_t input_features) {
  NetworkSpec spec;
  spec.head_bias = c.bias;
  if (!c.input_shape.empty()) {
    spec.input = parse_shape(c.input_shape);
    if (input_features != 0 && spec.input.features() != input_features) {
      throw ConfigError("input_shape: " + c.input_shape + " has " +
                        std::to_string(spec.input.features()) + " features but the data has " +
                        std::to_string(input_features));
    }
  } else if (c.data == DataSource::synthetic_images) {
    spec.input = {1, c.image_side, c.image_side};
  } else {
    spec.input = {input_features, 1, 1};
  }

  Shape3 shape = spec.input;
  for (std::string_view item : split(c.layers, ',')) {
    const auto parts = split(item, ':');
    try {
      if (parts[0] == "relu" && parts.size() == 1) {
        spec.layers.push_back(LayerSpec::relu());
      } else if (parts[0] == "dense" && parts.size() == 2) {
        const std::size_t out = parse_dim(parts[1]);
        spec.layers.push_back(LayerSpec::dense(shape.features(), out, c.bias));
        shape = {out, 1, 1};
      } else if (parts[0] == "conv" && (parts.size() == 3 || parts.size() == 4)) {
        const auto kernel = split(parts[2], 'x');
        if (kernel.size() != 2) throw ConfigError("kernel must be <h>x<w>");
        const std::size_t stride = parts.size() == 4 ? parse_dim(parts[3]) : 1;
        const LayerSpec layer = LayerSpec::conv2d(shape.channels, parse_dim(parts[1]),
                                                  parse_dim(kernel[0]), parse_dim(kernel[1]), stride,
                                                  c.bias);
        shape = conv_output_shape(shape, layer);
        spec.layers.push_back(layer);
      } else {
        throw ConfigError("unrecognized layer");
      }
    } catch (const Error& e) {
      throw ConfigError("layers: '" + std::string(item) + "': " + e.what());
    }
  }
  if (spec.layers.empty() || !spec.layers.front().is_linear()) {
    throw ConfigError("layers: must start with a dense or conv layer");
  }
  return spec;
}

}  // namespace nscl
