#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include "nscl/app.hpp"
#include "nscl/report_io.hpp"

namespace fs = std::filesystem;
using namespace nscl;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("nscl_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "run.cfg";
  std::ofstream(p) << body;
  return p;
}

const char* kQuick =
    "seed = 5\n"
    "tasks = 3\n"
    "train_per_task = 64\n"
    "test_per_task = 32\n"
    "epochs = 3\n"
    "lr_decay_epochs = 2\n";

int run(const fs::path& cfg, std::vector<std::string> sets, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_command(cfg, sets, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

std::set<std::string> relative_files(const fs::path& dir) {
  std::set<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.insert(fs::relative(e.path(), dir).string());
  return files;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::size_t columns(const std::string& line) {
  return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

}  // namespace

TEST_CASE("both modes emit the same schemas") {
  TempDir tmp;
  const fs::path cfg = write_config(tmp.path, kQuick);
  REQUIRE(run(cfg, {"output_dir=" + (tmp.path / "nscl").string()}) == 0);
  REQUIRE(run(cfg, {"mode=plain-adam", "output_dir=" + (tmp.path / "plain").string()}) == 0);

  const auto files = relative_files(tmp.path / "nscl");
  CHECK(files == relative_files(tmp.path / "plain"));
  for (const char* f : {"metrics.csv", "accuracy_matrix.csv", "diagnostics.csv", "train_loss.csv",
                        "task_summary.csv", "spectra/summary.csv", "spectra/task3_layer2.csv",
                        "covariance.bin"})
    CHECK(files.contains(f));

  const std::pair<const char*, std::string_view> schemas[] = {
      {"metrics.csv", schema::metrics},
      {"accuracy_matrix.csv", schema::accuracy_matrix},
      {"train_loss.csv", schema::train_loss},
      {"diagnostics.csv", schema::diagnostics},
      {"task_summary.csv", schema::task_summary},
      {"spectra/summary.csv", schema::spectrum_summary},
      {"spectra/task1_layer1.csv", schema::spectrum}};
  for (const auto& [file, header] : schemas) {
    for (const char* mode : {"nscl", "plain"}) {
      CAPTURE(file);
      const auto rows = lines(slurp(tmp.path / mode / file));
      REQUIRE(!rows.empty());
      CHECK(rows[0] == header);
      for (const auto& r : rows) CHECK(columns(r) == columns(std::string(header)));
    }
    CHECK(lines(slurp(tmp.path / "nscl" / file)).size() ==
          lines(slurp(tmp.path / "plain" / file)).size());
  }
  CHECK(lines(slurp(tmp.path / "nscl" / "accuracy_matrix.csv")).size() == 1 + 6);
}

TEST_CASE("reruns are bit-identical") {
  TempDir tmp;
  const fs::path cfg = write_config(tmp.path, kQuick);
  REQUIRE(run(cfg, {"output_dir=" + (tmp.path / "a").string()}) == 0);
  REQUIRE(run(cfg, {"output_dir=" + (tmp.path / "b").string()}) == 0);
  for (const char* f : {"metrics.csv", "accuracy_matrix.csv", "diagnostics.csv", "covariance.bin"})
    CHECK(slurp(tmp.path / "a" / f) == slurp(tmp.path / "b" / f));
}

TEST_CASE("invalid threshold fails before training") {
  TempDir tmp;
  const fs::path cfg = write_config(tmp.path, kQuick);
  std::string err;
  CHECK(run(cfg, {"a=0.5", "output_dir=" + (tmp.path / "never").string()}, &err) == 1);
  CHECK(err.rfind("error: kind=config message=a:", 0) == 0);
  CHECK_FALSE(fs::exists(tmp.path / "never"));
  CHECK(run(tmp.path / "missing.cfg", {}) == 1);
}

TEST_CASE("data errors map to exit code 2") {
  TempDir tmp;
  std::ofstream(tmp.path / "train.csv") << "0.1,0.2,0\n0.3,oops,1\n";
  std::ofstream(tmp.path / "test.csv") << "0.1,0.2,0\n";
  const fs::path cfg = write_config(tmp.path, "seed=1\ndata=csv\nclasses_per_task=2\ntrain_path=" +
                                                  (tmp.path / "train.csv").string() +
                                                  "\ntest_path=" + (tmp.path / "test.csv").string() + "\n");
  std::string err;
  CHECK(run(cfg, {}, &err) == 2);
  CHECK(err.find("kind=data") != std::string::npos);
  CHECK(err.find("(at 2)") != std::string::npos);
}

TEST_CASE("csv data runs end to end") {
  TempDir tmp;
  {
    std::ofstream train(tmp.path / "train.csv"), test(tmp.path / "test.csv");
    for (int i = 0; i < 40; ++i) {
      const int label = i % 4;
      const double v = label + 0.01 * i;
      train << v << ',' << -v << ',' << label << '\n';
      test << v + 0.05 << ',' << -v << ',' << label << '\n';
    }
  }
  const fs::path cfg = write_config(
      tmp.path, "seed=1\ndata=csv\nclasses_per_task=2\nepochs=2\nlayers=dense:8,relu\ntrain_path=" +
                    (tmp.path / "train.csv").string() + "\ntest_path=" + (tmp.path / "test.csv").string() +
                    "\noutput_dir=" + (tmp.path / "out").string() + "\n");
  CHECK(run(cfg, {}) == 0);
  CHECK(lines(slurp(tmp.path / "out" / "metrics.csv")).size() == 3);
}

TEST_CASE("output root prefixes relative directories") {
  TempDir tmp;
  const fs::path cfg = write_config(tmp.path, kQuick);
  ::setenv(kOutputRootEnv, tmp.path.c_str(), 1);
  const int code = run(cfg, {"output_dir=rooted", "epochs=1"});
  ::unsetenv(kOutputRootEnv);
  CHECK(code == 0);
  CHECK(fs::exists(tmp.path / "rooted" / "metrics.csv"));
  CHECK(resolve_output_dir("/abs") == fs::path("/abs"));
}

TEST_CASE("verify and spectra commands") {
  std::ostringstream out, err;
  CHECK(verify_command("covariance", 1, out, err) == 0);
  CHECK(out.str().find("PASS covariance/merge_relative_frobenius") != std::string::npos);
  CHECK(verify_command("bogus", 1, out, err) == 1);

  TempDir tmp;
  const fs::path cfg = write_config(tmp.path, kQuick);
  REQUIRE(run(cfg, {"epochs=1", "output_dir=" + (tmp.path / "r").string()}) == 0);
  std::ostringstream summary;
  CHECK(spectra_command(tmp.path / "r" / "covariance.bin", 10.0, tmp.path / "s", summary, err) == 0);
  const auto rows = lines(summary.str());
  CHECK(rows.size() == 3);
  CHECK(rows[0] == schema::spectrum_summary);
  // Recomputing from the checkpoint reproduces the last task's spectrum summary.
  const auto run_rows = lines(slurp(tmp.path / "r" / "spectra" / "summary.csv"));
  CHECK(rows[1].substr(rows[1].find(',')) == run_rows[run_rows.size() - 2].substr(run_rows[run_rows.size() - 2].find(',')));
  CHECK(fs::exists(tmp.path / "s" / "spectra" / "layer1.csv"));

  std::ofstream(tmp.path / "junk.bin") << "junk";
  std::ostringstream e2;
  CHECK(spectra_command(tmp.path / "junk.bin", 10.0, std::nullopt, out, e2) == 2);
  CHECK(spectra_command(tmp.path / "r" / "covariance.bin", 0.5, std::nullopt, out, e2) == 1);
}
