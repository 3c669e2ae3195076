// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include "qlens/analysis.hpp"
#include "qlens/clustering.hpp"
#include "qlens/geometry.hpp"
#include "qlens/operators.hpp"
#include "qlens/stats.hpp"

#include "support.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>

using namespace qlens;
using testing::random_state;
using testing::random_unit;

namespace {

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool condition, const std::string& what) {
    if (!condition) {
      passed = false;
      detail << " failed: " << what << ";";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void run(const std::string& name, double time_limit, const std::function<void(Outcome&)>& body) {
  Outcome outcome;
  const auto start = Clock::now();
  try {
    body(outcome);
  } catch (const std::exception& e) {
    outcome.passed = false;
    outcome.detail << " exception: " << e.what() << ";";
  }
  const double elapsed = seconds_since(start);
  if (time_limit > 0.0) {
    std::ostringstream limit;
    limit << "runtime " << elapsed << " s < " << time_limit << " s";
    outcome.require(elapsed < time_limit, limit.str());
  }
  if (!outcome.passed) ++failures;
  std::printf("[%s] %s (%.2f s)%s\n", outcome.passed ? "PASS" : "FAIL", name.c_str(), elapsed,
              outcome.detail.str().c_str());
  std::fflush(stdout);
}

void spectral_equivalence(Outcome& out) {
  for (Eigen::Index n : {2, 8, 64}) {
    Rng rng(100 + static_cast<std::uint64_t>(n));
    double worst = 0.0;
    int pairs = 0;
    while (pairs < 1000) {
      const auto a = random_state(rng, n);
      const auto b = random_state(rng, n);
      const auto op = fit_householder(a, b);
      if (op.degenerate) continue;
      const auto delta = delta_psi_spectral(hamiltonian_of(op, 1.0), a);
      worst = std::max(worst, (delta.components - (b.components - a.components)).cwiseAbs().maxCoeff());
      ++pairs;
    }
    out.detail << " N=" << n << " max err " << worst << ";";
    out.require(worst <= 1e-10, "N=" + std::to_string(n) + " error above 1e-10");
  }
}

void spectral_consistency(Outcome& out) {
  Rng rng(200);
  double worst = 0.0, worst_pade = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = 2 + i % 63;
    const double alpha = 0.5 + 0.05 * i;
    const auto op = fit_householder(random_state(rng, n), random_state(rng, n));
    const auto h = hamiltonian_of(op, alpha);
    const MatrixXd dense_h = materialize_hamiltonian(h);
    const MatrixXd reflection = MatrixXd::Identity(n, n) - 2.0 * op.normal * op.normal.transpose();
    const Eigen::MatrixXcd u = propagator(dense_h, alpha);
    worst = std::max({worst, (u.real() - reflection).cwiseAbs().maxCoeff(), u.imag().cwiseAbs().maxCoeff()});
    const Eigen::MatrixXcd pade =
        (std::complex<double>(0.0, -alpha) * dense_h.cast<std::complex<double>>()).exp();
    worst_pade = std::max({worst_pade, (pade.real() - reflection).cwiseAbs().maxCoeff(),
                           pade.imag().cwiseAbs().maxCoeff()});
  }
  out.detail << " eigen route max err " << worst << ", Pade cross-check " << worst_pade << ";";
  out.require(worst <= 1e-8, "eigendecomposition propagator off by more than 1e-8");
  out.require(worst_pade <= 1e-8, "Pade exponential off by more than 1e-8");
}

void similarity_closed_form(Outcome& out) {
  Rng rng(300);
  const Eigen::Index n = 16;
  double worst = 0.0;
  bool bounds = true;
  for (int i = 0; i < 100; ++i) {
    const auto u = fit_householder(random_state(rng, n), random_state(rng, n));
    const auto v = fit_householder(random_state(rng, n), random_state(rng, n));
    const MatrixXd mu = materialize_unitary(u), mv = materialize_unitary(v);
    const MatrixXd hu = materialize_hamiltonian(hamiltonian_of(u, 1.0));
    const MatrixXd hv = materialize_hamiltonian(hamiltonian_of(v, 1.0));
    const double dense_u = (mu.transpose() * mv).trace() / (mu.norm() * mv.norm());
    const double dense_h = (hu.transpose() * hv).trace() / (hu.norm() * hv.norm());
    const double su = unitary_frobenius_similarity(u, v);
    const double sh = hamiltonian_frobenius_similarity(u, v);
    worst = std::max({worst, std::abs(su - dense_u), std::abs(sh - dense_h)});
    bounds = bounds && su >= (n - 4.0) / n && su <= 1.0 && sh >= 0.0 && sh <= 1.0;
  }
  out.detail << " max err " << worst << ";";
  out.require(worst <= 1e-10, "closed form differs from trace by more than 1e-10");
  out.require(bounds, "similarity outside analytic bounds");
}

void locus_completeness(Outcome& out) {
  const int steps = 100;
  int inside = 0;
  for (int i = 0; i < steps; ++i)
    for (int j = 0; j < steps; ++j) {
      const double theta = std::numbers::pi / 2 * (i / (steps - 1.0));
      const double phi = std::numbers::pi / 2 * (j / (steps - 1.0));
      State in, target;
      in.components = Eigen::Vector2d(std::cos(theta), std::sin(theta));
      target.components = Eigen::Vector2d(std::cos(phi), std::sin(phi));
      const VectorXd delta = apply_operator(fit_householder(in, target), in) - in.components;
      if (geometry::locus_contains(Eigen::Vector2d(delta))) ++inside;
    }
  out.detail << " " << inside << "/" << steps * steps << " inside;";
  out.require(inside == steps * steps, "grid change outside the locus");

  std::size_t boundary_total = 0, boundary_inside = 0;
  double corner_err = 0.0;
  const auto arcs = geometry::locus_boundary(256);
  for (const auto& arc : arcs) {
    for (const auto& p : arc.points) {
      ++boundary_total;
      if (geometry::locus_contains(p)) ++boundary_inside;
    }
  }
  out.require(boundary_inside == boundary_total, "boundary point outside the locus");
  const Eigen::Vector2d origin(0, 0), upper(-1, 1), lower(1, -1);
  corner_err = std::max({(arcs[0].points.front() - origin).cwiseAbs().maxCoeff(),
                         (arcs[0].points.back() - upper).cwiseAbs().maxCoeff(),
                         (arcs[1].points.back() - upper).cwiseAbs().maxCoeff(),
                         (arcs[2].points.front() - origin).cwiseAbs().maxCoeff(),
                         (arcs[2].points.back() - lower).cwiseAbs().maxCoeff(),
                         (arcs[3].points.back() - lower).cwiseAbs().maxCoeff()});
  out.detail << " boundary " << boundary_inside << "/" << boundary_total << ", corner err " << corner_err
             << ";";
  out.require(corner_err <= 1e-12, "corner points off by more than 1e-12");
}

void permutation_machinery(Outcome& out) {
  // Floors from a group far more concentrated than its control.
  Rng rng(400);
  const VectorXd centre = random_unit(rng, 12);
  std::vector<Householder> tight;
  for (int i = 0; i < 40; ++i) {
    Householder op;
    op.normal = (centre + 0.05 * random_unit(rng, 12)).normalized();
    tight.push_back(op);
  }
  const auto controls = sample_control_operators(40, 12, 401);
  const auto p100 = two_sample_permutation_test(tight, controls, SimilarityKind::unitary, 100, 402);
  const auto p9999 = two_sample_permutation_test(tight, controls, SimilarityKind::unitary, 9999, 403);
  out.detail << " floors " << p100.p_value << ", " << p9999.p_value << ";";
  out.require(p100.p_value == 1.0 / 101.0, "100-permutation floor is not 1/101");
  out.require(p9999.p_value == 1.0 / 10000.0, "9999-permutation floor is not 1/10000");

  double total = 0.0;
  for (int s = 0; s < 50; ++s) {
    const auto a = sample_control_operators(30, 8, 10000 + s);
    const auto b = sample_control_operators(30, 8, 20000 + s);
    total += two_sample_permutation_test(a, b, SimilarityKind::unitary, 100, 30000 + s).p_value;
  }
  const double mean_p = total / 50.0;
  out.detail << " null mean p " << mean_p << ";";
  out.require(mean_p >= 0.35 && mean_p <= 0.65, "null mean p outside [0.35, 0.65]");
}

void distance_correlation_checks(Outcome& out) {
  Rng rng(500);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd x(50, 3), y(50, 2);
  for (auto& v : x.reshaped()) v = normal(rng);
  for (Eigen::Index i = 0; i < 50; ++i) {
    y(i, 0) = std::sin(x(i, 0)) + 0.3 * normal(rng);
    y(i, 1) = x(i, 1) * x(i, 2) + 0.3 * normal(rng);
  }
  const double self = distance_correlation(x, x);
  const double err = std::abs(distance_correlation(x, y) - testing::naive_dcor(x, y));
  out.detail << " dCor(X,X)-1 = " << self - 1.0 << ", oracle err " << err << ";";
  out.require(std::abs(self - 1.0) <= 1e-10, "dCor(X, X) != 1");
  out.require(err <= 1e-10, "differs from the naive oracle");

  std::vector<double> ps;
  for (int s = 0; s < 20; ++s) {
    MatrixXd a(60, 3), b(60, 3);
    for (auto& v : a.reshaped()) v = normal(rng);
    for (auto& v : b.reshaped()) v = normal(rng);
    ps.push_back(dcor_independence_test(a, b, 999, 600 + s).p_value);
  }
  const double med = testing::median(ps);
  out.detail << " independent median p " << med << ";";
  out.require(med >= 0.2, "median p below 0.2 on independent samples");
}

void clustering_checks(Outcome& out) {
  const auto blobs = testing::make_blobs(100, testing::three_centres(), 1.0, 700);
  const auto model = kmeans(blobs.points, 3, 701);
  const double agreement = testing::label_agreement(blobs.labels, model.assignments, 3);
  bool monotone = true;
  for (std::size_t i = 1; i < model.inertia_history.size(); ++i)
    monotone = monotone && model.inertia_history[i] <= model.inertia_history[i - 1] + 1e-9;
  std::vector<Eigen::Index> grid(10);
  std::iota(grid.begin(), grid.end(), Eigen::Index{1});
  const auto elbow = elbow_select_k(blobs.points, grid, 702);
  out.detail << " agreement " << agreement << ", elbow k " << elbow.k << ";";
  out.require(agreement >= 0.99, "label agreement below 99%");
  out.require(std::abs(elbow.k - 3) <= 1, "elbow k not within 1 of 3");
  out.require(monotone, "inertia increased between iterations");
}

std::vector<double> bias_p_values(const std::filesystem::path& report) {
  const auto json = nlohmann::json::parse(testing::slurp(report));
  std::vector<double> ps;
  for (const auto& layer : json["layers"]) ps.push_back(layer["delta_psi"]["magnitude_test"]["p_value"]);
  return ps;
}

void end_to_end(Outcome& out) {
  const auto dir = testing::scratch_dir("acceptance");
  const auto path = [&](const char* name) { return (dir / name).string(); };
  const std::string shape = " --n-outputs 2 --instances 500";
  out.require(testing::run_cli("gen --seed 7 --mode biased_arc" + shape + " --out " + path("biased")) == 0,
              "gen biased_arc");
  out.require(testing::run_cli("analyze " + path("biased") + " --seed 11 --out " + path("run1")) == 0,
              "analyze run 1");
  out.require(testing::run_cli("gen --seed 7 --mode biased_arc" + shape + " --out " + path("biased2")) == 0,
              "gen rerun");
  out.require(testing::run_cli("analyze " + path("biased2") + " --seed 11 --out " + path("run2")) == 0,
              "analyze run 2");
  const auto first = testing::slurp(dir / "run1" / "report.json");
  const bool identical = !first.empty() && first == testing::slurp(dir / "run2" / "report.json");
  out.detail << " report.json byte-identical: " << (identical ? "yes" : "no") << ";";
  out.require(identical, "reports differ");

  // Bias fixtures: gen seed 2, analyze seed 11.
  out.require(testing::run_cli("gen --seed 2 --mode biased_arc" + shape + " --out " + path("arc")) == 0,
              "gen biased_arc fixture");
  out.require(testing::run_cli("analyze " + path("arc") + " --seed 11 --out " + path("arc_out")) == 0,
              "analyze biased_arc fixture");
  out.require(testing::run_cli("gen --seed 2 --mode random_walk" + shape + " --out " + path("walk")) == 0,
              "gen random_walk fixture");
  out.require(testing::run_cli("analyze " + path("walk") + " --seed 11 --out " + path("walk_out")) == 0,
              "analyze random_walk fixture");

  const auto biased = bias_p_values(dir / "arc_out" / "report.json");
  const auto walk = bias_p_values(dir / "walk_out" / "report.json");
  out.detail << " biased_arc p";
  for (double p : biased) out.detail << " " << p;
  out.detail << "; random_walk p";
  for (double p : walk) out.detail << " " << p;
  out.detail << ";";
  out.require(!biased.empty() && std::all_of(biased.begin(), biased.end(),
                                             [](double p) { return p == 1.0 / 10000.0; }),
              "biased_arc p not at the 1/10000 floor");
  out.require(!walk.empty() && std::all_of(walk.begin(), walk.end(), [](double p) { return p > 0.05; }),
              "random_walk p not above 0.05");
  std::filesystem::remove_all(dir);
}

}  // namespace

int main() {
  const auto start = Clock::now();
  run("Hamiltonian route equals direct state change (N=2,8,64; 1000 pairs; <=1e-10)", 5.0,
      spectral_equivalence);
  run("exp(-i alpha H) equals the reflection (100 operators, N<=64, <=1e-8)", 10.0,
      spectral_consistency);
  run("closed-form similarities equal dense traces (100 pairs, N=16, <=1e-10) within bounds", 0.0,
      similarity_closed_form);
  run("two-unit locus contains grid changes, boundary and corners", 2.0, locus_completeness);
  run("permutation floors 1/101 and 1/10000; null mean p in [0.35, 0.65]", 0.0, permutation_machinery);
  run("distance correlation: self, oracle, independence calibration", 0.0,
      distance_correlation_checks);
  run("k-means blobs, elbow within 1, monotone inertia", 0.0, clustering_checks);
  run("end-to-end determinism and bias test (biased_arc at floor, random_walk p > 0.05)", 0.0,
      end_to_end);
  const double total = seconds_since(start);
  const bool fast = total < 120.0;
  if (!fast) ++failures;
  std::printf("[%s] acceptance suite runtime %.2f s < 120 s\n", fast ? "PASS" : "FAIL", total);
  return failures;
}
