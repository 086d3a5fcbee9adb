#include "nscl/report_io.hpp"

#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "csv_format.hpp"
#include "nscl/errors.hpp"

namespace nscl {

namespace fs = std::filesystem;
using detail::format_double;

void write_file_atomic(const fs::path& path, std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw DataError("cannot create directory " + path.parent_path().string() + ": " + ec.message());

  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw DataError("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw DataError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

namespace {

std::string task_matrix_csv(std::string_view header, const TaskMatrix& m) {
  std::ostringstream out;
  out << header << '\n';
  for (std::size_t t = 0; t < m.tasks(); ++t) {
    for (std::size_t i = 0; i <= t; ++i) {
      if (m.has(t, i)) out << t + 1 << ',' << i + 1 << ',' << format_double(m.at(t, i)) << '\n';
    }
  }
  return out.str();
}

std::string metrics_csv(const AccuracyMatrix& m) {
  std::ostringstream out;
  out << schema::metrics << '\n';
  for (std::size_t t = 0; t < m.tasks(); ++t) {
    if (!m.has(t, t)) break;
    const BwtResult bwt = compute_bwt(m, t);
    out << t + 1 << ',' << format_double(compute_acc(m, t)) << ',' << format_double(bwt.value)
        << ',' << (bwt.defined ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace

void write_spectra(const fs::path& dir, const NullSpaceBasis& basis) {
  const NullSpaceBasis one[] = {basis};
  std::ostringstream summary;
  write_spectrum_summary_csv(summary, one);
  write_file_atomic(dir / "spectra" / "summary.csv", summary.str());
  for (std::size_t l = 0; l < basis.size(); ++l) {
    std::ostringstream s;
    write_spectrum_csv(s, basis[l]);
    write_file_atomic(dir / "spectra" / ("layer" + std::to_string(l + 1) + ".csv"), s.str());
  }
}

void write_run_report(const fs::path& dir, const RunReport& report) {
  write_file_atomic(dir / "metrics.csv", metrics_csv(report.accuracy));
  write_file_atomic(dir / "accuracy_matrix.csv",
                    task_matrix_csv(schema::accuracy_matrix, report.accuracy));
  write_file_atomic(dir / "train_loss.csv", task_matrix_csv(schema::train_loss, report.train_loss));

  std::ostringstream diag;
  diag << schema::diagnostics << '\n';
  for (const auto& s : report.steps) {
    diag << to_index(s.task) + 1 << ',' << s.step << ',' << format_double(s.loss) << ','
         << format_double(s.inner_product) << ',' << format_double(s.candidate_norm) << ','
         << format_double(s.delta_norm) << '\n';
  }
  write_file_atomic(dir / "diagnostics.csv", diag.str());

  std::ostringstream tasks;
  tasks << schema::task_summary << '\n';
  for (const auto& t : report.tasks) {
    tasks << to_index(t.task) + 1 << ',' << format_double(t.initial_loss) << ','
          << format_double(t.final_loss) << ',' << t.steps << ',' << t.nonpositive_inner_steps << ','
          << format_double(t.min_inner_product) << ',' << t.empty_basis_steps << '\n';
  }
  write_file_atomic(dir / "task_summary.csv", tasks.str());

  std::ostringstream summary;
  write_spectrum_summary_csv(summary, report.spectra);
  write_file_atomic(dir / "spectra" / "summary.csv", summary.str());
  for (std::size_t t = 0; t < report.spectra.size(); ++t) {
    for (std::size_t l = 0; l < report.spectra[t].size(); ++l) {
      std::ostringstream s;
      write_spectrum_csv(s, report.spectra[t][l]);
      write_file_atomic(
          dir / "spectra" / ("task" + std::to_string(t + 1) + "_layer" + std::to_string(l + 1) + ".csv"),
          s.str());
    }
  }

  std::ostringstream cov;
  write_checkpoint(cov, report.covariance);
  write_file_atomic(dir / "covariance.bin", cov.str());
}

}  // namespace nscl
