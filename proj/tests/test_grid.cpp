#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "kfp/grid.hpp"
#include "kfp/rng.hpp"

using namespace kfp;

namespace {

GridField sample_field() {
  GridField f;
  f.time = Axis{3, 0.0, 0.1};
  f.x_axes = {Axis{8, -1.0, 0.25}};
  f.v_axes = {Axis{6, -2.0, 0.8}, Axis{5, -1.0, 0.5}};
  f.boundary_x = Boundary::periodic;
  f.boundary_v = Boundary::truncated_decay;
  f.allocate();
  const CounterRng rng(99);
  const auto s = CounterRng::stream("grid");
  for (std::size_t i = 0; i < f.data.size(); ++i)
    f.data[i] = rng.uniform(s, i, -1.0, 1.0);
  return f;
}

}  // namespace

TEST_CASE("indexing is row-major with time outermost") {
  GridField f;
  f.time = Axis{2, 0.0, 1.0};
  f.x_axes = {Axis{3, 0.0, 1.0}};
  f.v_axes = {Axis{4, 0.0, 1.0}};
  f.allocate();
  int ix = 1, iv = 2;
  CHECK(f.index(0, &ix, &iv) == 1 * 4 + 2);
  CHECK(f.index(1, &ix, &iv) == 12 + 6);
  CHECK(f.size() == 24);
}

TEST_CASE("binary container round trip") {
  const GridField f = sample_field();
  const std::string path = "roundtrip.kfp1";
  write_kfp1(f, path);
  const GridField g = read_kfp1(path);
  CHECK(g.time.n == f.time.n);
  CHECK(g.time.step == f.time.step);
  CHECK(g.dx() == 1);
  CHECK(g.dv() == 2);
  CHECK(g.v_axes[1].origin == f.v_axes[1].origin);
  CHECK(g.boundary_x == Boundary::periodic);
  CHECK(g.boundary_v == Boundary::truncated_decay);
  REQUIRE(g.data.size() == f.data.size());
  for (std::size_t i = 0; i < f.data.size(); ++i) CHECK(g.data[i] == f.data[i]);
  std::filesystem::remove(path);
}

TEST_CASE("bad magic is rejected") {
  const std::string path = "bad.kfp1";
  {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    std::fputs("NOPE123456789", fp);
    std::fclose(fp);
  }
  CHECK_THROWS_AS(read_kfp1(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("multilinear interpolation is exact on affine data") {
  GridField f;
  f.time = Axis{1, 0.0, 0.0};
  f.x_axes = {Axis{5, -1.0, 0.5}};
  f.v_axes = {Axis{7, -1.5, 0.5}};
  f.allocate();
  for (int ix = 0; ix < 5; ++ix)
    for (int iv = 0; iv < 7; ++iv)
      f.at(0, &ix, &iv) =
          2.0 * f.x_axes[0].coord(ix) - 3.0 * f.v_axes[0].coord(iv) + 0.25;
  Eigen::VectorXd x(1), v(1);
  x << 0.3;
  v << -0.7;
  CHECK(f.interpolate(0, x, v) ==
        doctest::Approx(2.0 * 0.3 - 3.0 * (-0.7) + 0.25).epsilon(1e-14));
  x << 5.0;
  CHECK_THROWS_AS(f.interpolate(0, x, v), std::out_of_range);
}

TEST_CASE("mass uses trapezoid weights on truncated axes only") {
  GridField f;
  f.time = Axis{1, 0.0, 0.0};
  f.x_axes = {Axis{4, 0.0, 0.25}};  // periodic: all nodes weighted equally
  f.v_axes = {Axis{3, 0.0, 0.5}};   // truncated: borders half-weighted
  f.boundary_x = Boundary::periodic;
  f.boundary_v = Boundary::truncated_decay;
  f.allocate();
  for (auto& v : f.data) v = 1.0;
  // cell = 0.25 * 0.5; x sum = 4; v sum = 0.5 + 1 + 0.5 = 2
  CHECK(f.mass(0) == doctest::Approx(0.25 * 0.5 * 4 * 2).epsilon(1e-14));
}

TEST_CASE("csv slice export writes one row per node") {
  const GridField f = sample_field();
  const std::string path = "slice.csv";
  write_slice_csv(f, 1, path);
  std::ifstream is(path);
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 1 + f.slice_size());
  std::filesystem::remove(path);
}
