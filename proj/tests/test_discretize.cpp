#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "ctrl_duality/discretize.hpp"
#include "ctrl_duality/errors.hpp"

using namespace ctrl_duality;

TEST_CASE("uniform time grid") {
  const TimeGrid g = make_time_grid(1.0, 4);
  REQUIRE(g.intervals() == 4);
  const double expected[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (std::size_t i = 0; i <= 4; ++i) CHECK(g.time(i) == doctest::Approx(expected[i]).epsilon(1e-15));
  CHECK(g.mesh() == doctest::Approx(0.25));

  const TimeGrid one = make_time_grid(1.0, 1);
  CHECK(one.times().size() == 2);
  CHECK(one.time(0) == 0.0);
  CHECK(one.time(1) == 1.0);

  const TimeGrid fine = make_time_grid(1.0, 200);
  CHECK(fine.intervals() == 200);
  CHECK(fine.horizon() == 1.0);
  CHECK(fine.mesh() == doctest::Approx(0.005));
}

TEST_CASE("time grid rejects bad input") {
  CHECK_THROWS_AS(make_time_grid(0.0, 4), ConfigError);
  CHECK_THROWS_AS(make_time_grid(-1.0, 4), ConfigError);
  CHECK_THROWS_AS(make_time_grid(1.0, 0), ConfigError);
}

TEST_CASE("doubled grids are nested") {
  const TimeGrid a = make_time_grid(1.0, 8);
  const TimeGrid b = make_time_grid(1.0, 16);
  for (std::size_t i = 0; i <= 8; ++i) CHECK(a.time(i) == b.time(2 * i));
}

TEST_CASE("interval lookup") {
  const TimeGrid g = make_time_grid(1.0, 4);
  CHECK(g.interval_of(0.0) == 0);
  CHECK(g.interval_of(0.2) == 0);
  CHECK(g.interval_of(0.25) == 1);
  CHECK(g.interval_of(0.99) == 3);
  CHECK(g.interval_of(1.0) == 3);
}

TEST_CASE("control nets") {
  const ControlBox box({{0.1, 0.2}});
  const ControlNet net = make_control_net(box, 0.05);
  REQUIRE(net.size() == 3);
  CHECK(net.points[0][0] == doctest::Approx(0.10));
  CHECK(net.points[1][0] == doctest::Approx(0.15));
  CHECK(net.points[2][0] == doctest::Approx(0.20));

  const ControlNet two = make_control_net(ControlBox({{0.0, 0.1}}), 0.1);
  REQUIRE(two.size() == 2);
  CHECK(two.points[0][0] == 0.0);
  CHECK(two.points[1][0] == doctest::Approx(0.1));
}

TEST_CASE("two-asset correlation box net is fully feasible") {
  const ControlBox box({{0.1, 0.2}, {0.1, 0.2}, {-1.0, 1.0}}, correlation_feasibility(2));
  const ControlNet net = make_control_net(box, 0.1);
  CHECK(net.size() == 2 * 2 * 21);
  for (const auto& p : net.points) {
    // 2x2 correlation matrix eigenvalues are 1 -+ rho.
    CHECK(1.0 - std::abs(p[2]) >= -1e-12);
    CHECK(box.contains(p));
  }
}

TEST_CASE("infeasible lattice points are filtered") {
  // Three assets with all pairwise correlations -1 is not PSD.
  const ControlBox box({{0.2, 0.2}, {0.2, 0.2}, {0.2, 0.2}, {-1.0, -0.5}, {-1.0, -0.5}, {-1.0, -0.5}},
                       correlation_feasibility(3));
  const ControlNet net = make_control_net(box, 0.5);
  CHECK(net.size() < 8);
  for (const auto& p : net.points) CHECK(box.feasible(p));
  const ControlBox empty({{0.2, 0.2}, {0.2, 0.2}, {0.2, 0.2}, {-1.0, -0.9}, {-1.0, -0.9}, {-1.0, -0.9}},
                         correlation_feasibility(3));
  CHECK_THROWS_AS(make_control_net(empty, 0.1), ConfigError);
}

TEST_CASE("net points are pairwise distinct and h-dense") {
  const ControlBox box({{0.1, 0.2}, {0.13, 0.31}});
  const double h = 0.04;
  const ControlNet net = make_control_net(box, h);
  std::set<std::vector<double>> unique(net.points.begin(), net.points.end());
  CHECK(unique.size() == net.size());

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u0(0.1, 0.2), u1(0.13, 0.31);
  for (int k = 0; k < 500; ++k) {
    const double a = u0(rng), b = u1(rng);
    double best = 1e9;
    for (const auto& p : net.points) best = std::min(best, std::max(std::abs(p[0] - a), std::abs(p[1] - b)));
    CHECK(best <= h + 1e-12);
  }
}

TEST_CASE("control path enumeration") {
  const ControlNet two = make_control_net(ControlBox({{0.0, 1.0}}), 1.0);
  const auto four = enumerate_control_paths(two, make_time_grid(1.0, 2), 100);
  REQUIRE(four.size() == 4);
  const double expected[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  for (int k = 0; k < 4; ++k) {
    CHECK(four[k].at(0)[0] == expected[k][0]);
    CHECK(four[k].at(1)[0] == expected[k][1]);
  }

  const ControlNet three = make_control_net(ControlBox({{0.1, 0.2}}), 0.05);
  const auto all = enumerate_control_paths(three, make_time_grid(1.0, 3), 1000);
  CHECK(all.size() == 27);
  std::set<std::vector<double>> unique;
  for (const auto& p : all) unique.insert({p.flat().begin(), p.flat().end()});
  CHECK(unique.size() == 27);
  CHECK(std::is_sorted(all.begin(), all.end(), [](const ControlPath& a, const ControlPath& b) {
    return std::lexicographical_compare(a.flat().begin(), a.flat().end(), b.flat().begin(), b.flat().end());
  }));
}

TEST_CASE("enumeration cap guard") {
  const ControlNet ten = make_control_net(ControlBox({{0.0, 0.9}}), 0.1);
  REQUIRE(ten.size() == 10);
  CHECK(control_path_count(10, 12) == 1'000'000'000'000ULL);
  CHECK_THROWS_WITH_AS(enumerate_control_paths(ten, make_time_grid(1.0, 12), 1'000'000),
                       doctest::Contains("optimizer"), ConfigError);
  CHECK(control_path_count(10, 100) == SIZE_MAX);
}

TEST_CASE("box clamp and containment") {
  const ControlBox box({{0.1, 0.2}, {-0.5, 0.5}});
  std::vector<double> a{0.05, 0.9};
  CHECK_FALSE(box.contains(a));
  box.clamp(a);
  CHECK(a[0] == 0.1);
  CHECK(a[1] == 0.5);
  CHECK(box.contains(a));
}
