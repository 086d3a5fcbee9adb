#include <doctest.h>

#include <array>
#include <sstream>

#include "nscl/covariance.hpp"
#include "nscl/errors.hpp"
#include "nscl/harness.hpp"
#include "../support/oracles.hpp"

using namespace nscl;

TEST_CASE("accumulation example") {
  const Matrix x{{1, 2}, {3, 4}};
  const LayerCovariance c = accumulate_covariance(std::span(&x, 1));
  CHECK(c.cov == Matrix{{5, 7}, {7, 10}});
  CHECK(c.n_seen == 2);
}

TEST_CASE("batched accumulation equals the one-shot oracle") {
  Rng rng(1);
  const Matrix x = oracle::random_matrix(50, 6, rng);
  const std::array<std::size_t, 3> cuts{0, 17, 50};
  std::vector<Matrix> batches;
  for (std::size_t b = 0; b + 1 < cuts.size(); ++b) {
    std::vector<std::size_t> idx;
    for (std::size_t i = cuts[b]; i < cuts[b + 1]; ++i) idx.push_back(i);
    batches.push_back(select_rows(x, idx));
  }
  const LayerCovariance c = accumulate_covariance(batches);
  const Matrix expected = oracle::naive_covariance(x);
  CHECK(frobenius_norm(scale_add(c.cov, 1.0, expected, -1.0)) <= 1e-12 * frobenius_norm(expected));
  CHECK(symmetry_residual(c.cov) == 0.0);
}

TEST_CASE("merging partitions reproduces the concatenation") {
  Rng rng(2);
  const Matrix x = oracle::random_matrix(1000, 32, rng);
  const Matrix expected = oracle::naive_covariance(x);
  CovarianceState state;
  state.layers.push_back({Matrix(32, 32), 0});
  for (auto [b, e] : std::array<std::pair<std::size_t, std::size_t>, 3>{{{0, 123}, {123, 700}, {700, 1000}}}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = b; i < e; ++i) idx.push_back(i);
    const Matrix part = select_rows(x, idx);
    const LayerCovariance task = accumulate_covariance(std::span(&part, 1));
    state = merge_covariance(state, std::span(&task, 1));
  }
  CHECK(state.layers[0].n_seen == 1000);
  CHECK(frobenius_norm(scale_add(state.layers[0].cov, 1.0, expected, -1.0)) <=
        1e-12 * frobenius_norm(expected));
}

TEST_CASE("merging into an empty state returns the task covariance") {
  const Matrix x{{1, 2}, {3, 4}};
  const LayerCovariance task = accumulate_covariance(std::span(&x, 1));
  const LayerCovariance merged = merge_covariance(LayerCovariance{Matrix(2, 2), 0}, task);
  CHECK(merged.cov == task.cov);
  CHECK_THROWS_AS(merge_covariance(LayerCovariance{Matrix(3, 3), 0}, task), ShapeError);
}

TEST_CASE("empty feature input is a data error") {
  const Matrix empty(0, 3);
  CHECK_THROWS_AS(accumulate_covariance(std::span(&empty, 1)), DataError);
}

TEST_CASE("task covariance counts conv patches") {
  Network net(desk_conv_spec(8), 1);
  Rng rng(3);
  const Matrix x = oracle::random_matrix(10, 64, rng);
  const auto covs = accumulate_task_covariance(net, x, 4);
  REQUIRE(covs.size() == 2);
  CHECK(covs[0].n_seen == 10 * 36);
  CHECK(covs[0].cov.rows() == 10);
  CHECK(covs[1].n_seen == 10);
  const ForwardTrace t = forward_features(net, x);
  const Matrix expected = oracle::naive_covariance(t.features[0]);
  CHECK(max_abs_diff(covs[0].cov, expected) <= 1e-12 * max_abs(expected));
}

TEST_CASE("checkpoint round trip is exact") {
  Rng rng(4);
  CovarianceState s;
  for (std::size_t h : {3u, 5u}) {
    const Matrix x = oracle::random_matrix(7, h, rng);
    s.layers.push_back(accumulate_covariance(std::span(&x, 1)));
  }
  std::stringstream buf;
  write_checkpoint(buf, s);
  const CovarianceState back = read_checkpoint(buf);
  REQUIRE(back.layers.size() == 2);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(back.layers[l].cov == s.layers[l].cov);
    CHECK(back.layers[l].n_seen == s.layers[l].n_seen);
  }
}

TEST_CASE("corrupt checkpoints report a byte offset") {
  CovarianceState s;
  s.layers.push_back({Matrix{{1, 0}, {0, 1}}, 4});
  std::stringstream buf;
  write_checkpoint(buf, s);
  const std::string bytes = buf.str();

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(truncated), ParseError);

  std::string bad = bytes;
  bad[0] = 'X';
  std::stringstream wrong_magic(bad);
  try {
    read_checkpoint(wrong_magic);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.position() == 0);
  }
}
