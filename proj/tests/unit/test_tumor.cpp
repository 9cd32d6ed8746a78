// SPDX-License-Identifier: Apache-2.0
#include "goalcal/goal/error_estimate.hpp"
#include "goalcal/tumor/tumor_pair.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

using namespace goalcal;
using namespace goalcal::tumor;

namespace {

std::shared_ptr<const TumorDiscretization> small_disc(int n = 8, double dt = 0.025, double t_final = 0.5) {
  return TumorDiscretization::create(n, n, TimeGrid::uniform(dt, t_final), QoISpec{{0.1}, 2 * dt});
}

double total_weight(const QoISpec& spec, const TimeGrid& grid) {
  const auto w = spec.time_weights(grid);
  return std::accumulate(w.begin(), w.end(), 0.0);
}

}  // namespace

TEST(TimeGrid, UniformRejectsIncommensurateStep) {
  EXPECT_EQ(TimeGrid::uniform(0.005, 1.0).n_steps, 200);
  EXPECT_THROW(TimeGrid::uniform(0.3, 1.0), std::invalid_argument);
}

TEST(WindowRules, ConstantTrajectoryWeights) {
  const TimeGrid grid = TimeGrid::uniform(0.005, 1.0);
  QoISpec spec;
  // Four windows of width 0.05: nine interior levels at dt / width each.
  EXPECT_NEAR(total_weight(spec, grid), 4 * 0.9 + 1.0, 1e-12);
  spec.rule = WindowRule::kStepEnd;
  EXPECT_NEAR(total_weight(spec, grid), 5.0, 1e-12);
  spec.include_final = false;
  EXPECT_NEAR(total_weight(spec, grid), 4.0, 1e-12);
}

TEST(WindowRules, MisalignedOrOutOfRangeWindowsThrow) {
  const TimeGrid grid = TimeGrid::uniform(0.02, 1.0);
  EXPECT_THROW(QoISpec({0.21}, 0.04).time_weights(grid), std::invalid_argument);
  EXPECT_THROW(QoISpec({0.98}, 0.04).time_weights(grid), std::invalid_argument);
  EXPECT_NO_THROW(QoISpec({0.2}, 0.04).time_weights(grid));
  EXPECT_EQ(parse_window_rule(to_string(WindowRule::kStepEnd)), WindowRule::kStepEnd);
}

TEST(TumorReaction, DerivativesMatchFiniteDifferences) {
  const TumorModelPair pair(small_disc(), {}, {0.5, 0.1, 0.01, 1.3}, 0.7);
  const double h = 1e-6, f = 0.8;
  for (double u : {-0.1, 0.2, 0.55, 1.05}) {
    EXPECT_NEAR(pair.reaction_derivative(u, f), (pair.reaction(u + h, f) - pair.reaction(u - h, f)) / (2 * h), 1e-7);
    EXPECT_NEAR(pair.reaction_second(u, f),
                (pair.reaction_derivative(u + h, f) - pair.reaction_derivative(u - h, f)) / (2 * h), 1e-6);
  }
}

TEST(TumorPair, TangentForwardDifferenceSlopeIsOne) {
  const TumorModelPair pair(small_disc(), {}, {});
  std::mt19937_64 rng(3);
  const Vector u = checks::random_vector(pair.dimension(), rng, 0.5).array() + 0.5;
  const Vector v = checks::random_vector(pair.dimension(), rng);
  EXPECT_NEAR(checks::forward_difference_slope(pair, u, v), 1.0, 0.1);
}

TEST(TumorPair, SecondDerivativeTransposesAndShiftedSolves) {
  const TumorModelPair pair(small_disc(6, 0.05, 0.2), {}, {});
  std::mt19937_64 rng(5);
  const auto n = pair.dimension();
  const Vector u = checks::random_vector(n, rng, 0.5).array() + 0.5;
  const auto r = checks::check_derivatives(pair, u, checks::random_vector(n, rng),
                                            checks::random_vector(n, rng, 0.1), checks::random_vector(n, rng));
  EXPECT_LT(r.second_fd, 1e-6);
  EXPECT_LT(r.tangent_transpose, 1e-12);
  EXPECT_LT(r.second_transpose, 1e-12);
  EXPECT_LT(r.second_symmetry, 1e-12);
  EXPECT_LT(r.tangent_solve, 1e-9);
  EXPECT_LT(r.tangent_adjoint_solve, 1e-9);
}

TEST(TumorPair, CoarseDualityQEqualsLoadOfAdjoint) {
  const TumorModelPair pair(small_disc(), {}, {});
  const Vector u0 = pair.solve_coarse_forward();
  const Vector p0 = pair.solve_coarse_adjoint(u0);
  EXPECT_NEAR(pair.qoi(u0), pair.load().dot(p0), 1e-10);
}

TEST(TumorPair, FinePrimalAdjointIdentity) {
  const TumorModelPair pair(small_disc(), {}, {});
  const Vector u = pair.solve_fine_forward();
  const Vector p = pair.solve_fine_adjoint(u);
  std::mt19937_64 rng(9);
  for (int k = 0; k < 3; ++k) {
    const Vector v = checks::random_vector(pair.dimension(), rng);
    EXPECT_NEAR(pair.qoi_gradient(u).dot(v), pair.fine_tangent(u, v).dot(p), 1e-10);
  }
}

TEST(TumorPair, ForwardSolvesSatisfyTheirForms) {
  const TumorModelPair pair(small_disc(), {}, {});
  const Vector u0 = pair.solve_coarse_forward();
  EXPECT_LT((pair.coarse_form(u0) - pair.load()).norm(), 1e-10);
  const Vector u = pair.solve_fine_forward();
  EXPECT_LT(goal::residual_vector(pair, u).norm(), 1e-9);
}

TEST(TumorPair, ZeroBlendReproducesCoarseModel) {
  const TumorModelPair pair(small_disc(), {}, {}, 0.0);
  EXPECT_TRUE(pair.fine_is_linear());
  EXPECT_DOUBLE_EQ(pair.diffusion(), pair.coarse_params().D);
  std::mt19937_64 rng(1);
  const Vector u = checks::random_vector(pair.dimension(), rng);
  EXPECT_LT(checks::relative(pair.fine_form(u), pair.coarse_form(u)), 1e-13);
  EXPECT_THROW(TumorModelPair(small_disc(), {}, {}, 1.5), std::invalid_argument);
}

TEST(TumorPair, PureNeumannDiffusionConservesMass) {
  const auto disc = small_disc(10, 0.02, 0.4);
  const Trajectory traj = march_coarse_forward(disc, {0.0, 0.0, 0.05});
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(disc->nodes()));
  const double m0 = ones.dot(disc->mass() * traj.step(0));
  for (int n = 1; n <= traj.n_steps(); ++n) {
    EXPECT_NEAR(ones.dot(disc->mass() * traj.step(n)), m0, 1e-10) << "step " << n;
  }
}

TEST(TumorPair, FineTrajectoryStaysNearPhaseBounds) {
  const auto disc = small_disc(16, 0.02, 1.0);
  const Trajectory traj = march_fine_forward(disc, {});
  EXPECT_NO_THROW(check_bounded(traj, -0.1, 1.1));
  EXPECT_THROW(check_bounded(traj, 0.1, 0.9), NumericError);
}

TEST(TumorPair, QoiConvergesAtFirstOrderInTime) {
  std::vector<double> q;
  for (double dt : {0.04, 0.02, 0.01, 0.005}) {
    const auto disc = TumorDiscretization::create(10, 10, TimeGrid::uniform(dt, 1.0), QoISpec{{}, 0.05});
    q.push_back(evaluate_qoi(march_fine_forward(disc, {}), disc->qoi_spec()));
  }
  EXPECT_NEAR(std::log2((q[1] - q[2]) / (q[2] - q[3])), 1.0, 0.2);
}

TEST(TumorPair, EvaluateQoiMatchesPairQoi) {
  const auto disc = small_disc();
  const TumorModelPair pair(disc, {}, {});
  const Trajectory traj = march_coarse_forward(disc, {});
  EXPECT_NEAR(evaluate_qoi(traj, disc->qoi_spec()), pair.qoi(traj.data()), 1e-14);
}

TEST(TumorLinearized, CachedSolverMatchesGenericFirstOrderProblem) {
  const auto disc = small_disc();
  const Vector u0 = march_coarse_forward(disc, {}).data();
  const LinearizedErrorSolver fast(disc, u0);
  for (const TumorFineParams params : {TumorFineParams{}, TumorFineParams{0.8, 0.05, 0.02, 0.7}}) {
    const TumorModelPair pair(disc, {}, params);
    const Vector e = goal::solve_primal_error(pair, u0);
    EXPECT_LT(checks::relative(fast.solve(params), e), 1e-8);
    EXPECT_NEAR(fast.qoi_error(params), pair.qoi_gradient(u0).dot(e), 1e-10);
  }
}

TEST(TumorExport, TrajectoryLevelsAndManifestAreWritten) {
  const auto disc = small_disc();
  const Trajectory traj = march_coarse_forward(disc, {});
  const auto dir = std::filesystem::temp_directory_path() / "goalcal_traj_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_trajectory(traj, disc->qoi_spec(), {0, 10, 20}, dir, "u0");
  for (const char* name : {"u0_0.csv", "u0_10.csv", "u0_20.csv", "u0_manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  EXPECT_ANY_THROW(write_trajectory(traj, disc->qoi_spec(), {21}, dir, "bad"));
  std::filesystem::remove_all(dir);
}
