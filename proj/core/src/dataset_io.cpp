#include "nscl/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "binary_io.hpp"
#include "nscl/errors.hpp"

namespace nscl {

namespace {

constexpr std::string_view kRawMagic{"NSCLF32\x01", 8};

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

double parse_value(std::string_view field, std::uint64_t line) {
  field = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw ParseError("invalid number '" + std::string(field) + "'", line);
  }
  return v;
}

int parse_label(std::string_view field, std::uint64_t line) {
  field = trim(field);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError("invalid label '" + std::string(field) + "'", line);
  }
  if (v < 0) throw ParseError("negative label " + std::to_string(v), line);
  return v;
}

}  // namespace

DataFormat parse_data_format(std::string_view name) {
  if (name == "csv") return DataFormat::csv;
  if (name == "raw-f32") return DataFormat::raw_f32;
  throw ConfigError("unknown data format '" + std::string(name) + "' (expected csv or raw-f32)");
}

SampleSet read_csv_samples(std::istream& in) {
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t dim = 0;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = row.find(',', start);
      fields.push_back(row.substr(start, comma == std::string_view::npos ? comma : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() < 2) throw ParseError("expected at least one feature and a label", line_no);
    if (labels.empty()) {
      dim = fields.size() - 1;
    } else if (fields.size() - 1 != dim) {
      throw ParseError("expected " + std::to_string(dim) + " features, got " +
                           std::to_string(fields.size() - 1),
                       line_no);
    }
    for (std::size_t i = 0; i < dim; ++i) values.push_back(parse_value(fields[i], line_no));
    labels.push_back(parse_label(fields.back(), line_no));
  }
  if (labels.empty()) throw ParseError("no samples", line_no == 0 ? 1 : line_no);
  SampleSet out;
  out.x = Matrix(labels.size(), dim, std::move(values));
  out.classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  out.y = std::move(labels);
  return out;
}

SampleSet read_raw_f32(std::istream& in) {
  detail::LeReader r(in);
  if (r.read_bytes(kRawMagic.size(), "magic") != kRawMagic) throw ParseError("bad magic", 0);
  const std::uint64_t n_at = r.offset();
  const auto n = r.read<std::uint64_t>("sample count");
  const std::uint64_t dim_at = r.offset();
  const auto dim = r.read<std::uint64_t>("dimension");
  const std::uint64_t classes_at = r.offset();
  const auto classes = r.read<std::uint64_t>("class count");
  if (n == 0) throw ParseError("sample count is zero", n_at);
  if (dim == 0) throw ParseError("dimension is zero", dim_at);
  if (classes == 0 || classes > static_cast<std::uint64_t>(INT32_MAX)) {
    throw ParseError("invalid class count " + std::to_string(classes), classes_at);
  }
  // Guard allocation against corrupt headers before reading the payload.
  if (n > (std::uint64_t{1} << 32) || dim > (std::uint64_t{1} << 24) || n * dim > (std::uint64_t{1} << 32)) {
    throw ParseError("header sizes are implausibly large", n_at);
  }

  SampleSet out;
  out.x = Matrix(n, dim);
  out.y.resize(n);
  out.classes = classes;
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint64_t j = 0; j < dim; ++j) {
      const std::uint64_t at = r.offset();
      const float v = r.read_f32("feature");
      if (!std::isfinite(v)) throw ParseError("non-finite feature", at);
      out.x(i, j) = v;
    }
    const std::uint64_t at = r.offset();
    const auto label = static_cast<std::int32_t>(r.read<std::uint32_t>("label"));
    if (label < 0 || static_cast<std::uint64_t>(label) >= classes) {
      throw DataError("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) +
                      ") at byte " + std::to_string(at));
    }
    out.y[i] = label;
  }
  if (!r.at_end()) throw ParseError("trailing bytes after last record", r.offset());
  return out;
}

void write_raw_f32(std::ostream& out, const SampleSet& samples) {
  if (samples.y.size() != samples.x.rows()) throw ShapeError("label count does not match rows");
  out.write(kRawMagic.data(), static_cast<std::streamsize>(kRawMagic.size()));
  detail::write_le<std::uint64_t>(out, samples.x.rows());
  detail::write_le<std::uint64_t>(out, samples.x.cols());
  detail::write_le<std::uint64_t>(out, samples.classes);
  for (std::size_t i = 0; i < samples.x.rows(); ++i) {
    for (std::size_t j = 0; j < samples.x.cols(); ++j) {
      detail::write_f32(out, static_cast<float>(samples.x(i, j)));
    }
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(samples.y[i]));
  }
}

SampleSet load_samples(const std::filesystem::path& path, DataFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return format == DataFormat::csv ? read_csv_samples(in) : read_raw_f32(in);
  } catch (const Error& e) {
    rethrow_with_context(e, path.string());
  }
}

std::vector<TaskDataset> split_into_tasks(const SampleSet& train, const SampleSet& test,
                                          std::size_t classes_per_task) {
  if (classes_per_task == 0) throw ConfigError("classes_per_task must be >= 1");
  if (train.x.cols() != test.x.cols()) {
    throw DataError("train and test dimensions differ: " + std::to_string(train.x.cols()) +
                    " vs " + std::to_string(test.x.cols()));
  }
  std::map<int, std::size_t> rank;
  for (int y : train.y) rank.emplace(y, 0);
  for (int y : test.y) rank.emplace(y, 0);
  std::size_t next = 0;
  for (auto& [label, r] : rank) r = next++;
  if (rank.size() % classes_per_task != 0) {
    throw DataError(std::to_string(rank.size()) + " distinct labels do not split into tasks of " +
                    std::to_string(classes_per_task));
  }
  const std::size_t n_tasks = rank.size() / classes_per_task;

  auto partition = [&](const SampleSet& s) {
    std::vector<std::vector<std::size_t>> rows(n_tasks);
    for (std::size_t i = 0; i < s.y.size(); ++i) rows[rank.at(s.y[i]) / classes_per_task].push_back(i);
    return rows;
  };
  const auto train_rows = partition(train);
  const auto test_rows = partition(test);

  std::vector<TaskDataset> tasks;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    TaskDataset d;
    d.id = TaskId{static_cast<std::uint32_t>(t)};
    d.classes = classes_per_task;
    if (train_rows[t].empty() || test_rows[t].empty()) {
      throw DataError("task " + std::to_string(t) + " has no " +
                      (train_rows[t].empty() ? "training" : "test") + " samples");
    }
    d.train_x = select_rows(train.x, train_rows[t]);
    d.test_x = select_rows(test.x, test_rows[t]);
    for (std::size_t i : train_rows[t]) d.train_y.push_back(static_cast<int>(rank.at(train.y[i]) % classes_per_task));
    for (std::size_t i : test_rows[t]) d.test_y.push_back(static_cast<int>(rank.at(test.y[i]) % classes_per_task));
    d.validate();
    tasks.push_back(std::move(d));
  }
  return tasks;
}

std::vector<TaskDataset> load_dataset(const std::filesystem::path& train,
                                      const std::filesystem::path& test, DataFormat format,
                                      std::size_t classes_per_task) {
  return split_into_tasks(load_samples(train, format), load_samples(test, format),
                          classes_per_task);
}

}  // namespace nscl
