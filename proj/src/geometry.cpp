#include "qlens/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qlens::geometry {

namespace {

bool in_unit_disk(double x, double y, double cx, double cy, double tol) {
  const double dx = x - cx;
  const double dy = y - cy;
  return dx * dx + dy * dy <= 1.0 + tol;
}

void require_quarter_angle(double angle, const char* name) {
  if (!(angle >= 0.0 && angle <= std::numbers::pi / 2))
    throw std::invalid_argument(std::string(name) + " must lie in [0, pi/2]");
}

Polyline sample_arc(std::string name, Eigen::Vector2d center, double from, double to, int samples) {
  Polyline line{std::move(name), {}};
  line.points.reserve(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    const double t = from + (to - from) * static_cast<double>(i) / (samples - 1);
    line.points.emplace_back(center.x() + std::cos(t), center.y() + std::sin(t));
  }
  return line;
}

}  // namespace

bool in_upper_lobe(const Eigen::Vector2d& d, double tol) {
  return in_unit_disk(d.x(), d.y(), -1.0, 0.0, tol) && in_unit_disk(d.x(), d.y(), 0.0, 1.0, tol);
}

bool in_lower_lobe(const Eigen::Vector2d& d, double tol) {
  return in_unit_disk(d.x(), d.y(), 1.0, 0.0, tol) && in_unit_disk(d.x(), d.y(), 0.0, -1.0, tol);
}

bool locus_contains(const Eigen::Vector2d& d, double tol) {
  return in_upper_lobe(d, tol) || in_lower_lobe(d, tol);
}

std::vector<Polyline> locus_boundary(int samples_per_arc) {
  if (samples_per_arc < 2) throw std::invalid_argument("samples_per_arc must be at least 2");
  constexpr double pi = std::numbers::pi;
  std::vector<Polyline> arcs;
  // Upper lobe: circles centred at (-1,0) and (0,1), both from (0,0) to (-1,1).
  arcs.push_back(sample_arc("upper_left_circle", {-1.0, 0.0}, 0.0, pi / 2, samples_per_arc));
  arcs.push_back(sample_arc("upper_top_circle", {0.0, 1.0}, -pi / 2, -pi, samples_per_arc));
  // Lower lobe mirrors through the origin, from (0,0) to (1,-1).
  arcs.push_back(sample_arc("lower_right_circle", {1.0, 0.0}, pi, 3 * pi / 2, samples_per_arc));
  arcs.push_back(sample_arc("lower_bottom_circle", {0.0, -1.0}, pi / 2, 0.0, samples_per_arc));
  return arcs;
}

Eigen::Vector2d delta_from_angles(double theta, double phi) {
  require_quarter_angle(theta, "theta");
  require_quarter_angle(phi, "phi");
  return {std::cos(phi) - std::cos(theta), std::sin(phi) - std::sin(theta)};
}

Eigen::Vector2d delta_from_angles_closed_form(double theta, double phi) {
  require_quarter_angle(theta, "theta");
  require_quarter_angle(phi, "phi");
  const double half_gap = 0.5 * (phi - theta);
  const double half_sum = 0.5 * (phi + theta);
  return 2.0 * std::sin(half_gap) * Eigen::Vector2d(-std::sin(half_sum), std::cos(half_sum));
}

double state_angle(const Eigen::Vector2d& state) { return std::atan2(state.y(), state.x()); }

}  // namespace qlens::geometry
