#include "nscl/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>

#include "csv_format.hpp"
#include "nscl/covariance.hpp"
#include "nscl/errors.hpp"
#include "nscl/harness.hpp"
#include "nscl/null_space.hpp"
#include "nscl/rng.hpp"

namespace nscl {

bool SuiteResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

namespace {

constexpr std::array<std::string_view, 5> kSuites = {"projector", "covariance", "lemma1",
                                                     "plasticity", "sweep"};

CheckResult at_most(std::string name, double measured, double threshold) {
  return {std::move(name), measured, threshold, measured <= threshold};
}

CheckResult at_least(std::string name, double measured, double threshold) {
  return {std::move(name), measured, threshold, measured >= threshold};
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

// Covariance of features with geometrically decaying column scales, so the
// spectrum spans several orders of magnitude like real layer inputs.
Matrix random_covariance(std::size_t h, Rng& rng) {
  Matrix x = random_matrix(4 * h, h, rng);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < h; ++c) x(r, c) *= std::pow(0.8, static_cast<double>(c));
  Matrix cov = matmul_tn(x, x);
  for (double& v : cov.values()) v /= static_cast<double>(x.rows());
  return symmetrize(cov);
}

SuiteResult projector_suite(std::uint64_t seed) {
  Rng rng(seed);
  double idempotence = 0.0, symmetry = 0.0, orthonormality = 0.0;
  double min_inner = std::numeric_limits<double>::infinity();
  double bound_ratio = 0.0;
  for (std::size_t h : {16u, 64u}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix cov = random_covariance(h, rng);
      for (double a : {1.0, 10.0, 50.0}) {
        const NullSpaceEntry e = compute_null_basis(cov, a);
        const Matrix p = matmul_nt(e.u2, e.u2);
        idempotence = std::max(idempotence, frobenius_norm(scale_add(matmul(p, p), 1.0, p, -1.0)));
        symmetry = std::max(symmetry, symmetry_residual(p));
        orthonormality = std::max(
            orthonormality, max_abs_diff(matmul_tn(e.u2, e.u2), Matrix::identity(e.k())));

        const Matrix g = random_matrix(h, 3, rng);
        const Matrix delta = project_update(e, g);
        min_inner = std::min(min_inner, dot(delta, g));
        // ‖X̄·Δw‖ is at most the largest retained eigenvalue times ‖g‖.
        const double bound =
            (e.cutoff + 1e-12 * frobenius_norm(cov)) * frobenius_norm(g);
        bound_ratio = std::max(bound_ratio, frobenius_norm(matmul(cov, delta)) / bound);
      }
    }
  }
  return {"projector",
          {at_most("idempotence_frobenius", idempotence, 1e-9),
           at_most("symmetry_max_abs", symmetry, 1e-12),
           at_most("orthonormality_max_abs", orthonormality, 1e-10),
           at_least("min_inner_product", min_inner, 0.0),
           at_most("stability_bound_ratio", bound_ratio, 1.0)}};
}

SuiteResult covariance_suite(std::uint64_t seed) {
  Rng rng(seed);
  const Matrix features = random_matrix(1000, 32, rng);
  const LayerCovariance whole = accumulate_covariance(std::span(&features, 1));

  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    std::size_t cut1 = 1 + rng.below(998);
    std::size_t cut2 = 1 + rng.below(998);
    if (cut1 > cut2) std::swap(cut1, cut2);
    if (cut1 == cut2) ++cut2;
    const std::array<std::pair<std::size_t, std::size_t>, 3> parts = {
        {{0, cut1}, {cut1, cut2}, {cut2, 1000}}};
    CovarianceState state;
    state.layers.push_back({Matrix(32, 32), 0});
    for (const auto& [begin, end] : parts) {
      std::vector<std::size_t> idx(end - begin);
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
      const Matrix part = select_rows(features, idx);
      const LayerCovariance task = accumulate_covariance(std::span(&part, 1));
      state = merge_covariance(state, std::span(&task, 1));
    }
    worst = std::max(worst, frobenius_norm(scale_add(state.layers[0].cov, 1.0, whole.cov, -1.0)) /
                                frobenius_norm(whole.cov));
  }

  const Matrix example{{1, 2}, {3, 4}};
  const LayerCovariance small = accumulate_covariance(std::span(&example, 1));
  const double example_error = max_abs_diff(small.cov, Matrix{{5, 7}, {7, 10}});
  return {"covariance",
          {at_most("merge_relative_frobenius", worst, 1e-12),
           at_most("example_max_abs", example_error, 0.0)}};
}

SuiteResult lemma1_suite(std::uint64_t seed) {
  SuiteResult out{"lemma1", {}};
  for (bool relu : {false, true}) {
    Lemma1Config config;
    config.seed = seed;
    config.relu = relu;
    const Lemma1Report r = verify_lemma1(config);
    const std::string tag = relu ? "relu" : "linear";
    out.checks.push_back(at_most(tag + "_output_drift", r.output_drift, 1e-5));
    out.checks.push_back(at_most(tag + "_feature_drift", r.max_feature_drift, 1e-6));
    out.checks.push_back(at_least(tag + "_task2_steps", static_cast<double>(r.task2_steps), 500));
    out.checks.push_back(
        at_most(tag + "_task2_loss_ratio", r.task2_final_loss / r.task2_initial_loss, 0.5));
  }
  return out;
}

SuiteResult plasticity_suite(std::uint64_t seed) {
  const auto tasks = make_gaussian_stream(desk_stream_config(seed));
  TrainConfig config = desk_train_config(seed);
  config.descent_probe_lr = 1e-4;
  const RunReport run = run_sequence(tasks, desk_mlp_spec(), config);

  double min_inner = std::numeric_limits<double>::infinity(), worst_ratio = 0.0;
  std::size_t positive = 0, descending = 0;
  for (const auto& s : run.steps) min_inner = std::min(min_inner, s.inner_product);
  for (const auto& t : run.tasks) {
    worst_ratio = std::max(worst_ratio, t.final_loss / t.initial_loss);
    positive += t.positive_raw_inner_steps;
    descending += t.descending_steps;
  }
  const double fraction = positive == 0 ? 0.0 : double(descending) / double(positive);
  return {"plasticity",
          {at_least("min_inner_product", min_inner, -1e-12),
           at_most("max_final_over_initial_loss", worst_ratio, 0.5),
           at_least("descent_fraction", fraction, 0.99)}};
}

SuiteResult sweep_suite(std::uint64_t seed) {
  const auto tasks = make_gaussian_stream(desk_stream_config(seed));
  const std::array<double, 3> as = {1.0, 10.0, 50.0};
  const auto points = sweep_threshold(tasks, desk_mlp_spec(), desk_train_config(seed), as);
  SuiteResult out{"sweep", {}};
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const std::string name = "bwt_a" + detail::format_double(points[i + 1].a) + "_minus_a" +
                             detail::format_double(points[i].a);
    out.checks.push_back(at_most(name, points[i + 1].bwt - points[i].bwt, 0.0));
  }
  return out;
}

}  // namespace

std::span<const std::string_view> verification_suites() { return kSuites; }

SuiteResult run_verification(std::string_view suite, std::uint64_t seed) {
  if (suite == "projector") return projector_suite(seed);
  if (suite == "covariance") return covariance_suite(seed);
  if (suite == "lemma1") return lemma1_suite(seed);
  if (suite == "plasticity") return plasticity_suite(seed);
  if (suite == "sweep") return sweep_suite(seed);
  throw ConfigError("unknown verification suite '" + std::string(suite) + "'");
}

void print_suite(std::ostream& out, const SuiteResult& result) {
  for (const auto& c : result.checks) {
    out << (c.passed ? "PASS " : "FAIL ") << result.suite << '/' << c.name
        << " measured=" << detail::format_double(c.measured)
        << " threshold=" << detail::format_double(c.threshold) << '\n';
  }
  out << (result.passed() ? "PASS " : "FAIL ") << result.suite << '\n';
}

}  // namespace nscl
