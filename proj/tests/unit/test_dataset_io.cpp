#include <doctest.h>

#include <bit>
#include <sstream>

#include "nscl/dataset_io.hpp"
#include "nscl/errors.hpp"
#include "../support/oracles.hpp"

using namespace nscl;

TEST_CASE("csv rows parse into samples") {
  std::istringstream in("0.1,0.2,1\n0.3,0.4,0\n");
  const SampleSet s = read_csv_samples(in);
  CHECK(s.x == Matrix{{0.1, 0.2}, {0.3, 0.4}});
  CHECK(s.y == std::vector<int>{1, 0});
  CHECK(s.classes == 2);
}

TEST_CASE("csv errors carry the line number") {
  std::istringstream empty("");
  CHECK_THROWS_AS(read_csv_samples(empty), ParseError);

  std::istringstream ragged("1,2,0\n\n1,0\n");
  try {
    read_csv_samples(ragged);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.position() == 3);
  }
  std::istringstream bad_number("1,x,0\n");
  CHECK_THROWS_AS(read_csv_samples(bad_number), ParseError);
  std::istringstream bad_label("1,2,0.5\n");
  CHECK_THROWS_AS(read_csv_samples(bad_label), ParseError);
  std::istringstream negative("1,2,-1\n");
  CHECK_THROWS_AS(read_csv_samples(negative), ParseError);
}

TEST_CASE("raw-f32 round trip is bitwise") {
  Rng rng(1);
  SampleSet s;
  s.x = oracle::random_matrix(5, 3, rng);
  for (double& v : s.x.values()) v = static_cast<float>(v);
  s.y = {0, 2, 1, 1, 0};
  s.classes = 3;
  std::stringstream buf;
  write_raw_f32(buf, s);
  CHECK(buf.str().size() == 32 + 5 * (3 * 4 + 4));
  const SampleSet back = read_raw_f32(buf);
  CHECK(back.y == s.y);
  CHECK(back.classes == 3);
  for (std::size_t i = 0; i < s.x.size(); ++i)
    CHECK(std::bit_cast<std::uint32_t>(static_cast<float>(back.x.values()[i])) ==
          std::bit_cast<std::uint32_t>(static_cast<float>(s.x.values()[i])));
}

TEST_CASE("raw-f32 errors") {
  SampleSet s;
  s.x = Matrix{{1, 2}};
  s.y = {1};
  s.classes = 2;
  std::stringstream buf;
  write_raw_f32(buf, s);
  const std::string bytes = buf.str();

  std::istringstream truncated(bytes.substr(0, bytes.size() - 2));
  try {
    read_raw_f32(truncated);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.position() == 40);
  }

  std::string bad = bytes;
  bad[3] = 'x';
  std::istringstream magic(bad);
  CHECK_THROWS_AS(read_raw_f32(magic), ParseError);

  s.classes = 1;
  std::stringstream out_of_range;
  write_raw_f32(out_of_range, s);
  CHECK_THROWS_AS(read_raw_f32(out_of_range), DataError);

  std::istringstream trailing(bytes + "x");
  CHECK_THROWS_AS(read_raw_f32(trailing), ParseError);
}

TEST_CASE("labels split into consecutive class groups") {
  SampleSet train;
  train.x = Matrix{{0}, {1}, {2}, {3}, {4}, {5}};
  train.y = {7, 3, 5, 9, 3, 9};
  SampleSet test;
  test.x = Matrix{{6}, {7}};
  test.y = {3, 9};
  const auto tasks = split_into_tasks(train, test, 2);
  REQUIRE(tasks.size() == 2);
  // Sorted labels 3,5 | 7,9.
  CHECK(tasks[0].train_y == std::vector<int>{0, 1, 0});
  CHECK(tasks[0].train_x == Matrix{{1}, {2}, {4}});
  CHECK(tasks[1].train_y == std::vector<int>{0, 1, 1});
  CHECK(tasks[1].test_y == std::vector<int>{1});
  CHECK(tasks[1].id == TaskId{1});
  CHECK_THROWS_AS(split_into_tasks(train, test, 3), DataError);

  test.y = {3, 5};
  CHECK_THROWS_AS(split_into_tasks(train, test, 2), DataError);
}

TEST_CASE("format names") {
  CHECK(parse_data_format("csv") == DataFormat::csv);
  CHECK(parse_data_format("raw-f32") == DataFormat::raw_f32);
  CHECK_THROWS_AS(parse_data_format("parquet"), ConfigError);
}
