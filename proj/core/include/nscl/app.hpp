#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nscl {

/// Environment variable that, when set, prefixes relative output directories.
inline constexpr const char* kOutputRootEnv = "NSCL_OUTPUT_ROOT";

/// Every command returns a process exit code (0 ok, 1 config, 2 data,
/// 3 numeric, 4 verification). Failures print one line
/// `error: kind=<kind> message=<text>` to `err`.
int run_command(const std::filesystem::path& config_path, const std::vector<std::string>& overrides,
                std::ostream& out, std::ostream& err);

int verify_command(std::string_view suite, std::uint64_t seed, std::ostream& out, std::ostream& err);

/// Recomputes per-layer bases from a covariance checkpoint. Prints the
/// summary CSV to `out`, and writes spectra files when `out_dir` is given.
int spectra_command(const std::filesystem::path& checkpoint, double a,
                    const std::optional<std::filesystem::path>& out_dir, std::ostream& out,
                    std::ostream& err);

/// Applies the output-root override to a configured directory.
std::filesystem::path resolve_output_dir(const std::filesystem::path& configured);

}  // namespace nscl
