#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "nscl/dataset.hpp"
#include "nscl/matrix.hpp"

namespace nscl {

enum class DataFormat { csv, raw_f32 };

/// Parses "csv" or "raw-f32"; throws ConfigError otherwise.
DataFormat parse_data_format(std::string_view name);

/// Flat labelled sample set as stored on disk, labels global.
struct SampleSet {
  Matrix x;
  std::vector<int> y;
  std::size_t classes = 0;  // declared (raw-f32) or max label + 1 (csv)
};

/// One sample per line, comma separated, last column an integer label ≥ 0.
/// Blank lines are skipped. Throws ParseError with the 1-based line number.
SampleSet read_csv_samples(std::istream& in);

/// Little-endian binary: 8 bytes magic "NSCLF32\x01", u64 n, u64 dim,
/// u64 classes, then n records of dim f32 followed by an i32 label.
/// Throws ParseError with the byte offset of the offending field and
/// DataError for labels outside [0, classes).
SampleSet read_raw_f32(std::istream& in);
void write_raw_f32(std::ostream& out, const SampleSet& samples);

SampleSet load_samples(const std::filesystem::path& path, DataFormat format);

/// Splits labelled sets into tasks of `classes_per_task` consecutive labels
/// (sorted ascending). Labels are remapped to [0, classes_per_task) within
/// each task. Throws DataError when the label count is not a multiple of
/// `classes_per_task`, a task has no train or test samples, or widths differ.
std::vector<TaskDataset> split_into_tasks(const SampleSet& train, const SampleSet& test,
                                          std::size_t classes_per_task);

std::vector<TaskDataset> load_dataset(const std::filesystem::path& train,
                                      const std::filesystem::path& test, DataFormat format,
                                      std::size_t classes_per_task);

}  // namespace nscl
