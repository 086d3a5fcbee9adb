// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <CLI11.hpp>

#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>

#include "nscl/covariance.hpp"
#include "nscl/harness.hpp"
#include "nscl/null_space.hpp"
#include "nscl/sym_eig.hpp"
#include "../support/oracles.hpp"

namespace fs = std::filesystem;
using namespace nscl;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

// Criterion 1
Outcome projector_algebra() {
  Rng rng(101);
  double idem = 0.0, sym = 0.0, ortho = 0.0;
  for (std::size_t h : {16u, 64u}) {
    for (int trial = 0; trial < 20; ++trial) {
      // Decaying column scales give spectra over several orders of magnitude.
      Matrix x = oracle::random_matrix(2 * h, h, rng);
      for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < h; ++c) x(r, c) *= std::pow(0.85, static_cast<double>(c));
      const Matrix cov = oracle::naive_covariance(x);
      for (double a : {1.0, 10.0, 50.0}) {
        const NullSpaceEntry e = compute_null_basis(cov, a);
        const Matrix p = matmul_nt(e.u2, e.u2);
        idem = std::max(idem, frobenius_norm(scale_add(matmul(p, p), 1.0, p, -1.0)));
        sym = std::max(sym, symmetry_residual(p));
        ortho = std::max(ortho, max_abs_diff(matmul_tn(e.u2, e.u2), Matrix::identity(e.k())));
      }
    }
  }
  return {idem <= 1e-9 && sym <= 1e-12 && ortho <= 1e-10,
          "|P^2-P|_F=" + num(idem) + " symmetry=" + num(sym) + " orthonormality=" + num(ortho)};
}

// Criterion 2
Outcome covariance_correctness() {
  Rng rng(202);
  const Matrix x = oracle::random_matrix(1000, 32, rng);
  const Matrix expected = oracle::naive_covariance(x);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t c1 = 1 + rng.below(998), c2 = 1 + rng.below(998);
    if (c1 > c2) std::swap(c1, c2);
    if (c1 == c2) ++c2;
    CovarianceState state;
    state.layers.push_back({Matrix(32, 32), 0});
    for (auto [b, e] : std::array<std::pair<std::size_t, std::size_t>, 3>{{{0, c1}, {c1, c2}, {c2, 1000}}}) {
      std::vector<std::size_t> idx;
      for (std::size_t i = b; i < e; ++i) idx.push_back(i);
      const Matrix part = select_rows(x, idx);
      const LayerCovariance task = accumulate_covariance(std::span(&part, 1));
      state = merge_covariance(state, std::span(&task, 1));
    }
    worst = std::max(worst, frobenius_norm(scale_add(state.layers[0].cov, 1.0, expected, -1.0)) /
                                frobenius_norm(expected));
  }
  const Matrix ex{{1, 2}, {3, 4}};
  const bool exact = accumulate_covariance(std::span(&ex, 1)).cov == Matrix{{5, 7}, {7, 10}};
  return {worst <= 1e-12 && exact,
          "merge relative error=" + num(worst) + " example exact=" + (exact ? "yes" : "no")};
}

// Criterion 3
Outcome lemma1_stability() {
  bool ok = true;
  std::string detail;
  for (bool relu : {false, true}) {
    Lemma1Config c;
    c.seed = 303;
    c.relu = relu;
    const Lemma1Report r = verify_lemma1(c);
    ok = ok && r.task2_steps >= 500 && r.output_drift <= 1e-5 && r.max_feature_drift <= 1e-6;
    detail += std::string(relu ? " relu:" : "linear:") + " steps=" + std::to_string(r.task2_steps) +
              " output_drift=" + num(r.output_drift) + " feature_drift=" + num(r.max_feature_drift) +
              " task2_loss " + num(r.task2_initial_loss) + "->" + num(r.task2_final_loss);
  }
  return {ok, detail};
}

struct DeskRuns {
  RunReport nscl;
  RunReport plain;
};

const DeskRuns& desk_runs() {
  static const DeskRuns runs = [] {
    const auto tasks = make_gaussian_stream(desk_stream_config(1));
    TrainConfig c = desk_train_config(1);
    DeskRuns r;
    r.nscl = run_sequence(tasks, desk_mlp_spec(), c);
    c.mode = TrainingMode::plain_adam;
    c.record_steps = false;
    r.plain = run_sequence(tasks, desk_mlp_spec(), c);
    return r;
  }();
  return runs;
}

// Criterion 4
Outcome plasticity() {
  const RunReport& r = desk_runs().nscl;
  double min_inner = std::numeric_limits<double>::infinity();
  for (const auto& s : r.steps) min_inner = std::min(min_inner, s.inner_product);
  double worst_ratio = 0.0;
  for (const auto& t : r.tasks) worst_ratio = std::max(worst_ratio, t.final_loss / t.initial_loss);
  return {!r.steps.empty() && min_inner >= -1e-12 && worst_ratio <= 0.5,
          "steps=" + std::to_string(r.steps.size()) + " min<dw,g>=" + num(min_inner) +
              " max final/initial loss=" + num(worst_ratio)};
}

// Criterion 5
Outcome forgetting_contrast() {
  const DeskRuns& r = desk_runs();
  const double gap = r.nscl.bwt.value - r.plain.bwt.value;
  return {gap >= 0.15 && r.nscl.acc > r.plain.acc,
          "BWT nscl=" + num(r.nscl.bwt.value) + " plain=" + num(r.plain.bwt.value) +
              " gap=" + num(gap) + " ACC nscl=" + num(r.nscl.acc) + " plain=" + num(r.plain.acc)};
}

// Criterion 6
Outcome threshold_sweep() {
  const auto tasks = make_gaussian_stream(desk_stream_config(1));
  const std::array<double, 3> as{1.0, 10.0, 50.0};
  const auto points = sweep_threshold(tasks, desk_mlp_spec(), desk_train_config(1), as);
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i > 0 && points[i].bwt > points[i - 1].bwt) ok = false;
    detail += "a=" + num(points[i].a) + ":BWT=" + num(points[i].bwt) + " ";
  }
  return {ok, detail};
}

// Criterion 7
Outcome eigensolver_oracle() {
  Rng rng(707);
  double eig_err = 0.0, recon = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix a = oracle::random_symmetric(3, rng);
    const auto expected = oracle::cubic_eigenvalues(a);
    const SymEigResult r = sym_eig(a);
    for (int i = 0; i < 3; ++i) eig_err = std::max(eig_err, std::abs(r.eigenvalues[i] - expected[i]));
    const Matrix vl = matmul(r.eigenvectors, Matrix::diagonal(r.eigenvalues));
    recon = std::max(recon, frobenius_norm(scale_add(matmul_nt(vl, r.eigenvectors), 1.0, a, -1.0)));
  }
  return {eig_err <= 1e-8 && recon <= 1e-9,
          "max eigenvalue error=" + num(eig_err) + " reconstruction=" + num(recon)};
}

double gradient_check(Network& net, std::size_t input, std::uint64_t seed) {
  Rng rng(seed);
  const TaskId task{0};
  net.add_head(task, 4, rng);
  const Matrix x = oracle::random_matrix(8, input, rng);
  std::vector<int> y(8);
  for (int& v : y) v = static_cast<int>(rng.below(4));
  const Gradients g = backward(net, forward(net, x, task), y, task);
  auto loss = [&](const Network& n) { return oracle::naive_cross_entropy(forward(n, x, task).logits, y); };
  double worst = 0.0;
  for (const auto& p : oracle::finite_difference_probes(net, task, g.layers, g.head, loss, 50, rng))
    worst = std::max(worst, p.relative_error());
  return worst;
}

// Criterion 8
Outcome gradient_correctness() {
  Network mlp(desk_mlp_spec(10, 12), 808);
  Network conv(desk_conv_spec(8), 809);
  const double e_mlp = gradient_check(mlp, 10, 1);
  const double e_conv = gradient_check(conv, 64, 2);
  return {e_mlp <= 1e-4 && e_conv <= 1e-4,
          "max relative error mlp=" + num(e_mlp) + " conv=" + num(e_conv)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Criterion 9
Outcome determinism(const std::string& cli, const fs::path& work) {
  if (cli.empty()) return {false, "no CLI binary given (--cli)"};
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path cfg = work / "determinism.cfg";
  std::ofstream(cfg) << "seed = 9\nepochs = 8\nlr_decay_epochs = 4,6\n";
  std::string detail;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = "\"" + cli + "\" run --config \"" + cfg.string() + "\" --set output_dir=\"" +
                            (work / run).string() + "\" > \"" + (work / run).string() + ".log\" 2>&1";
    const int status = std::system(cmd.c_str());
    if (status != 0) return {false, std::string("run ") + run + " exited with status " + std::to_string(status)};
  }
  const std::string a = slurp(work / "a" / "accuracy_matrix.csv");
  const std::string b = slurp(work / "b" / "accuracy_matrix.csv");
  return {!a.empty() && a == b, "accuracy_matrix.csv " + std::to_string(a.size()) + " bytes, identical=" +
                                    (a == b ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string cli;
  std::string work = (fs::temp_directory_path() / "nscl_acceptance").string();
  app.add_option("--cli", cli, "Path to the nscl executable");
  app.add_option("--work", work, "Scratch directory");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "projector algebra", 5, projector_algebra},
      {2, "covariance merge", 5, covariance_correctness},
      {3, "exact null-space stability", 30, lemma1_stability},
      {4, "descent direction and plasticity", 180, plasticity},
      {5, "forgetting contrast", 180, forgetting_contrast},
      {6, "threshold sweep monotonicity", 600, threshold_sweep},
      {7, "eigensolver oracle", 5, eigensolver_oracle},
      {8, "gradient check", 30, gradient_correctness},
      {9, "run determinism", 300, [&] { return determinism(cli, work); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.passed && in_time;
    if (!pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.2fs, limit %.0fs%s]\n", pass ? "PASS" : "FAIL", c.id,
                c.name, o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
