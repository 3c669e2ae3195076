#include "qlens/geometry.hpp"
#include "qlens/operators.hpp"

#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace qlens;
using namespace qlens::geometry;

namespace {

// Direct disc-intersection predicates for the two lobes.
bool oracle_contains(double a, double b) {
  const double tol = 1e-9;
  const bool upper = (a + 1) * (a + 1) + b * b <= 1 + tol && a * a + (b - 1) * (b - 1) <= 1 + tol;
  const bool lower = (a - 1) * (a - 1) + b * b <= 1 + tol && a * a + (b + 1) * (b + 1) <= 1 + tol;
  return upper || lower;
}

}  // namespace

TEST_CASE("membership examples") {
  CHECK(locus_contains({0.0, 0.0}));
  CHECK(locus_contains({-1.0, 1.0}));
  CHECK(locus_contains({1.0, -1.0}));
  CHECK_FALSE(locus_contains({-1.0, -1.0}));
  CHECK_FALSE(locus_contains({1.0, 1.0}));
  CHECK_FALSE(locus_contains({0.5, 0.5}));
  CHECK(in_upper_lobe({-0.5, 0.5}));
  CHECK_FALSE(in_lower_lobe({-0.5, 0.5}));
}

TEST_CASE("lobes are point reflections of each other") {
  Rng rng(1);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  for (int i = 0; i < 20000; ++i) {
    const double a = coord(rng), b = coord(rng);
    CHECK(in_upper_lobe({a, b}) == in_lower_lobe({-a, -b}));
    CHECK(locus_contains({a, b}) == locus_contains({-a, -b}));
    CHECK(locus_contains({a, b}) == locus_contains({-b, -a}));
  }
}

TEST_CASE("every angle pair lands inside the locus") {
  const int steps = 100;
  for (int i = 0; i < steps; ++i)
    for (int j = 0; j < steps; ++j) {
      const double theta = std::numbers::pi / 2 * (i / (steps - 1.0));
      const double phi = std::numbers::pi / 2 * (j / (steps - 1.0));
      const auto d = delta_from_angles(theta, phi);
      CHECK(locus_contains({d[0], d[1]}));
      CHECK(oracle_contains(d[0], d[1]));
      CHECK((d - delta_from_angles_closed_form(theta, phi)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("delta_from_angles agrees with operator-fitted changes") {
  Rng rng(2);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi / 2);
  for (int i = 0; i < 500; ++i) {
    const double theta = angle(rng), phi = angle(rng);
    State in, out;
    in.components = Eigen::Vector2d(std::cos(theta), std::sin(theta));
    out.components = Eigen::Vector2d(std::cos(phi), std::sin(phi));
    const auto op = fit_householder(in, out);
    const VectorXd moved = apply_operator(op, in) - in.components;
    CHECK((moved - delta_from_angles(theta, phi)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(state_angle(in.components) - theta) <= 1e-12);
  }
}

TEST_CASE("boundary arcs") {
  const auto arcs = locus_boundary(64);
  REQUIRE(arcs.size() == 4);
  for (const auto& arc : arcs) {
    CHECK(arc.points.size() == 64);
    for (const auto& p : arc.points) CHECK(locus_contains({p[0], p[1]}));
  }
  auto near = [](const Eigen::Vector2d& p, double x, double y) {
    return std::abs(p[0] - x) <= 1e-12 && std::abs(p[1] - y) <= 1e-12;
  };
  // Each lobe closes between (0,0) and its far corner.
  CHECK(near(arcs[0].points.front(), 0.0, 0.0));
  CHECK(near(arcs[0].points.back(), -1.0, 1.0));
  CHECK(near(arcs[1].points.front(), 0.0, 0.0));
  CHECK(near(arcs[1].points.back(), -1.0, 1.0));
  CHECK(near(arcs[2].points.front(), 0.0, 0.0));
  CHECK(near(arcs[2].points.back(), 1.0, -1.0));
  CHECK(near(arcs[3].points.front(), 0.0, 0.0));
  CHECK(near(arcs[3].points.back(), 1.0, -1.0));
}

TEST_CASE("angle range is enforced") {
  CHECK_THROWS_AS(delta_from_angles(-0.1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(delta_from_angles(0.0, 2.0), std::invalid_argument);
  CHECK_NOTHROW(delta_from_angles(0.0, std::numbers::pi / 2));
}
