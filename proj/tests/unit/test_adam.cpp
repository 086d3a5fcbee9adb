#include <doctest.h>

#include <cmath>
#include <limits>

#include "nscl/adam.hpp"
#include "nscl/covariance.hpp"
#include "nscl/errors.hpp"
#include "nscl/harness.hpp"
#include "../support/oracles.hpp"

using namespace nscl;

namespace {

NetworkSpec tiny_spec() {
  NetworkSpec s;
  s.input = {4, 1, 1};
  s.layers = {LayerSpec::dense(4, 3), LayerSpec::relu()};
  return s;
}

}  // namespace

TEST_CASE("first Adam step is the gradient sign up to epsilon") {
  const Matrix g{{0.5, -2.0}, {1e-3, 0.0}};
  AdamState state(std::span(&g, 1));
  const auto c = state.candidate(std::span(&g, 1));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      const double u = g(i, j);
      CHECK(c[0](i, j) == doctest::Approx(u / (std::abs(u) + 1e-8)).epsilon(1e-12));
    }
  CHECK(state.step() == 1);
}

TEST_CASE("second step follows the bias-corrected moment recurrences") {
  const Matrix g1{{1.0}}, g2{{-3.0}};
  AdamState state(std::span(&g1, 1));
  state.candidate(std::span(&g1, 1));
  const auto c = state.candidate(std::span(&g2, 1));
  const double m = (0.9 * 0.1 * 1.0 + 0.1 * -3.0) / (1 - 0.81);
  const double v = (0.999 * 0.001 * 1.0 + 0.001 * 9.0) / (1 - 0.999 * 0.999);
  CHECK(c[0](0, 0) == doctest::Approx(m / (std::sqrt(v) + 1e-8)).epsilon(1e-12));
}

TEST_CASE("non-finite gradients leave the state untouched") {
  const Matrix g{{1.0}};
  Matrix bad{{std::numeric_limits<double>::quiet_NaN()}};
  AdamState state(std::span(&g, 1));
  CHECK_THROWS_AS(state.candidate(std::span(&bad, 1)), NumericError);
  CHECK(state.step() == 0);
  CHECK(state.first_moment()[0](0, 0) == 0.0);
  const Matrix wrong(2, 1);
  CHECK_THROWS_AS(state.candidate(std::span(&wrong, 1)), ShapeError);
}

TEST_CASE("projected step stays in the retained subspace") {
  Network net(tiny_spec(), 3);
  Rng rng(3);
  net.add_head(TaskId{0}, 2, rng);
  const Matrix x = oracle::random_matrix(2, 4, rng);  // rank-2 features, width 5
  const auto covs = accumulate_task_covariance(net, x, 8);
  CovarianceState state = merge_covariance(CovarianceState::empty_for(net), covs);
  const NullSpaceBasis basis = compute_null_bases(state, 1.0);
  REQUIRE(basis[0].k() == 3);

  const Matrix before = forward_features(net, x).outputs[0];
  ParameterUpdate cand{{oracle::random_matrix(5, 3, rng)}, oracle::random_matrix(4, 2, rng)};
  const Matrix head_before = net.head(TaskId{0});
  const StepRecord r = projected_step(net, TaskId{0}, cand, &basis, 0.1);
  CHECK(r.inner_product >= 0.0);
  CHECK(max_abs_diff(forward_features(net, x).outputs[0], before) < 1e-12);
  // Head takes the raw candidate.
  CHECK(max_abs_diff(net.head(TaskId{0}), scale_add(head_before, 1.0, cand.head, -0.1)) < 1e-15);
}

TEST_CASE("a full basis reproduces the unprojected step bit for bit") {
  Network a(tiny_spec(), 4), b(tiny_spec(), 4);
  Rng ra(5), rb(5);
  a.add_head(TaskId{0}, 2, ra);
  b.add_head(TaskId{0}, 2, rb);
  CovarianceState zero = CovarianceState::empty_for(a);
  const NullSpaceBasis full = compute_null_bases(zero, 10.0);
  REQUIRE(full[0].k() == full[0].dim());
  Rng rng(6);
  ParameterUpdate cand{{oracle::random_matrix(5, 3, rng)}, oracle::random_matrix(4, 2, rng)};
  projected_step(a, TaskId{0}, cand, &full, 0.01);
  projected_step(b, TaskId{0}, cand, nullptr, 0.01);
  CHECK(a.weights() == b.weights());
}

TEST_CASE("frozen heads and mismatched bases are rejected") {
  Network net(tiny_spec(), 4);
  Rng rng(1);
  net.add_head(TaskId{0}, 2, rng);
  ParameterUpdate cand{{Matrix(5, 3)}, Matrix(4, 2)};
  const NullSpaceBasis wrong{compute_null_basis(Matrix::identity(4), 1.0)};
  CHECK_THROWS_AS(projected_step(net, TaskId{0}, cand, &wrong, 0.1), ShapeError);
  net.freeze_head(TaskId{0});
  CHECK_THROWS_AS(projected_step(net, TaskId{0}, cand, nullptr, 0.1), LookupError);
}

TEST_CASE("an empty retained space yields a zero update and is reported") {
  Network net(tiny_spec(), 4);
  Rng rng(1);
  net.add_head(TaskId{0}, 2, rng);
  NullSpaceEntry empty = compute_null_basis(Matrix::identity(5), 1.0);
  empty.u2 = Matrix(5, 0);
  const NullSpaceBasis basis{empty};
  const auto before = net.weights();
  ParameterUpdate cand{{Matrix(5, 3, 1.0)}, Matrix(4, 2)};
  const StepRecord r = projected_step(net, TaskId{0}, cand, &basis, 0.1);
  CHECK(net.weights() == before);
  CHECK(r.empty_layers == std::vector<std::size_t>{0});
}
