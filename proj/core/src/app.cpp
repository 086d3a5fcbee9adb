#include "nscl/app.hpp"

#include <cstdlib>
#include <exception>
#include <new>
#include <ostream>

#include "csv_format.hpp"
#include "nscl/covariance.hpp"
#include "nscl/errors.hpp"
#include "nscl/harness.hpp"
#include "nscl/null_space.hpp"
#include "nscl/report_io.hpp"
#include "nscl/run_config.hpp"
#include "nscl/verify.hpp"

namespace nscl {

namespace {

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: kind=" << to_string(e.kind()) << " message=" << one_line(e.what()) << '\n';
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    err << "error: kind=numeric message=out of memory\n";
    return exit_code(ErrorKind::numeric);
  } catch (const std::exception& e) {
    err << "error: kind=internal message=" << one_line(e.what()) << '\n';
    return exit_code(ErrorKind::numeric);
  }
}

}  // namespace

std::filesystem::path resolve_output_dir(const std::filesystem::path& configured) {
  const char* root = std::getenv(kOutputRootEnv);
  if (root == nullptr || *root == '\0' || configured.is_absolute()) return configured;
  return std::filesystem::path(root) / configured;
}

int run_command(const std::filesystem::path& config_path, const std::vector<std::string>& overrides,
                std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RawConfig raw = read_config_file(config_path);
    for (const auto& o : overrides) apply_override(raw, o);
    const RunConfig config = resolve_config(raw);

    const auto tasks = build_tasks(config);
    const NetworkSpec spec = build_network_spec(config, tasks.front().train_x.cols());
    const RunReport report = run_sequence(tasks, spec, config.train);

    for (const auto& w : report.warnings) err << "warning: " << w << '\n';
    const auto dir = resolve_output_dir(config.output_dir);
    write_run_report(dir, report);

    out << "tasks=" << tasks.size() << " acc=" << detail::format_double(report.acc)
        << " bwt=" << detail::format_double(report.bwt.value) << " output=" << dir.string() << '\n';
    return 0;
  });
}

int verify_command(std::string_view suite, std::uint64_t seed, std::ostream& out,
                   std::ostream& err) {
  return guarded(err, [&] {
    const SuiteResult result = run_verification(suite, seed);
    print_suite(out, result);
    if (!result.passed()) throw VerificationError("suite " + result.suite + " failed");
    return 0;
  });
}

int spectra_command(const std::filesystem::path& checkpoint, double a,
                    const std::optional<std::filesystem::path>& out_dir, std::ostream& out,
                    std::ostream& err) {
  return guarded(err, [&] {
    if (!(a >= 1.0)) throw ConfigError("a: must be >= 1, got " + detail::format_double(a));
    const CovarianceState state = load_checkpoint(checkpoint);
    const NullSpaceBasis basis = compute_null_bases(state, a);
    const NullSpaceBasis one[] = {basis};
    write_spectrum_summary_csv(out, one);
    if (out_dir) write_spectra(resolve_output_dir(*out_dir), basis);
    return 0;
  });
}

}  // namespace nscl
