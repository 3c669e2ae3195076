#ifndef QLENS_GEOMETRY_HPP
#define QLENS_GEOMETRY_HPP

#include "qlens/core.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

// Locus of feasible state changes for two output units. Two-unit states lie
// on the quarter circle (cos t, sin t), t in [0, pi/2], so every change lies
// in S = R u T:
//   R = {(a+1)^2 + b^2 <= 1  and  a^2 + (b-1)^2 <= 1}   (quadrant II)
//   T = {(a-1)^2 + b^2 <= 1  and  a^2 + (b+1)^2 <= 1}   (quadrant IV)
namespace qlens::geometry {

inline constexpr double kLocusTolerance = 1e-9;

bool in_upper_lobe(const Eigen::Vector2d& delta, double tol = kLocusTolerance);
bool in_lower_lobe(const Eigen::Vector2d& delta, double tol = kLocusTolerance);
bool locus_contains(const Eigen::Vector2d& delta, double tol = kLocusTolerance);

struct Polyline {
  std::string name;
  std::vector<Eigen::Vector2d> points;
};

/// The four bounding quarter circles, sampled uniformly in angle. The upper
/// lobe's arcs run from (0,0) to (-1,1); the lower lobe's from (0,0) to (1,-1).
std::vector<Polyline> locus_boundary(int samples_per_arc = 256);

/// (cos phi - cos theta, sin phi - sin theta) for theta, phi in [0, pi/2].
Eigen::Vector2d delta_from_angles(double theta, double phi);

/// Sum-to-product form 2 sin(d/2) (-sin(e/2), cos(e/2)), d = phi - theta,
/// e = phi + theta.
Eigen::Vector2d delta_from_angles_closed_form(double theta, double phi);

/// Angle of a two-unit state on the quarter circle.
double state_angle(const Eigen::Vector2d& state);

}  // namespace qlens::geometry

#endif  // QLENS_GEOMETRY_HPP
