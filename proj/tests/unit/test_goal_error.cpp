// SPDX-License-Identifier: Apache-2.0
#include "goalcal/elliptic/elliptic_pair.hpp"
#include "goalcal/goal/error_estimate.hpp"
#include "goalcal/io/runner.hpp"
#include "goalcal/tumor/tumor_pair.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace goalcal;
using namespace goalcal::goal;

namespace {

const std::vector<ErrorSource> kAllSources{ErrorSource::kExact, ErrorSource::kFirstOrder, ErrorSource::kSecondOrder};

std::shared_ptr<const elliptic::EllipticDiscretization> disc(int n) {
  return elliptic::EllipticDiscretization::create(n, n);
}

Homotopy alpha_homotopy(std::shared_ptr<const elliptic::EllipticDiscretization> d, double alpha) {
  return [d, alpha](double s) -> std::unique_ptr<ModelPair> {
    return std::make_unique<elliptic::EllipticModelPair>(d, elliptic::EllipticCoarseParams{0.25},
                                                         elliptic::EllipticFineParams{0.25, s * alpha});
  };
}

}  // namespace

TEST(Estimators, ExactForTwoLinearEllipticModels) {
  const elliptic::EllipticModelPair pair(disc(24), {0.25}, {0.4, 0.0});
  const auto report = compare_estimates(pair, kAllSources);
  ASSERT_TRUE(report.exact_error.has_value());
  EXPECT_GT(std::abs(*report.exact_error), 0.05);
  for (const auto& s : report.estimates) {
    EXPECT_NEAR(s.xi1, *report.exact_error, 1e-8) << to_string(s.source);
    EXPECT_NEAR(s.xi2, *report.exact_error, 1e-8) << to_string(s.source);
    EXPECT_NEAR(s.q_ehat, *report.exact_error, 1e-8) << to_string(s.source);
  }
}

TEST(Estimators, AllZeroWhenModelsCoincide) {
  const elliptic::EllipticModelPair ep(disc(12), {0.25}, {0.25, 0.0});
  const auto tdisc = tumor::TumorDiscretization::create(6, 6, tumor::TimeGrid::uniform(0.05, 0.5),
                                                        tumor::QoISpec{{0.2}, 0.1});
  const tumor::TumorModelPair tp(tdisc, {}, {}, 0.0);
  for (const ModelPair* pair : {static_cast<const ModelPair*>(&ep), static_cast<const ModelPair*>(&tp)}) {
    const auto report = compare_estimates(*pair, kAllSources);
    EXPECT_NEAR(*report.exact_error, 0.0, 1e-12) << pair->name();
    for (const auto& s : report.estimates) {
      EXPECT_NEAR(s.xi1, 0.0, 1e-12);
      EXPECT_NEAR(s.xi2, 0.0, 1e-12);
      EXPECT_NEAR(s.q_ehat, 0.0, 1e-12);
    }
  }
}

TEST(Estimators, ExactSourceQEhatIsTheExactError) {
  const elliptic::EllipticModelPair pair(disc(16), {0.25}, {0.25, 10.0});
  const auto report = compare_estimates(pair, {ErrorSource::kExact});
  EXPECT_NEAR(report.find(ErrorSource::kExact)->q_ehat, *report.exact_error, 1e-12);
  EXPECT_NEAR(*report.exact_error, *report.q_fine - report.q_coarse, 1e-14);
}

TEST(Estimators, FirstOrderXi1EqualsQEhat) {
  // With the linearized adjoint error, R(u0; p0 + eps) = B'(u0; e, p0 + eps) = Q'(e).
  const elliptic::EllipticModelPair pair(disc(16), {0.25}, {0.3, 4.0});
  const auto s = *compare_estimates(pair, {ErrorSource::kFirstOrder}).find(ErrorSource::kFirstOrder);
  EXPECT_NEAR(s.xi1, s.q_ehat, 1e-12);
}

TEST(Estimators, ResidualVanishesAtFineSolution) {
  const elliptic::EllipticModelPair pair(disc(16), {0.25}, {0.25, 10.0});
  const Vector u = pair.solve_fine_forward();
  EXPECT_LT(residual_vector(pair, u).norm(), 1e-9);
  EXPECT_LT(adjoint_residual_vector(pair, u, pair.solve_fine_adjoint(u)).norm(), 1e-9);
}

TEST(Estimators, QuadraticErrorSolveSatisfiesItsEquation) {
  const elliptic::EllipticModelPair pair(disc(16), {0.25}, {0.25, 10.0});
  const Vector u0 = pair.solve_coarse_forward();
  int iterations = 0;
  const Vector e = solve_primal_error_second_order(pair, u0, {}, &iterations);
  const Vector g = pair.fine_tangent(u0, e) + 0.5 * pair.fine_second(u0, e, e) - residual_vector(pair, u0);
  EXPECT_LT(g.norm(), 1e-9);
  EXPECT_GT(iterations, 0);
  EXPECT_LE(iterations, 8);
}

TEST(Estimators, Xi2WithExactFieldsConvergesFasterThanXi1) {
  const auto d = disc(20);
  std::vector<double> exact, d1, d2;
  for (double s : {0.2, 0.1, 0.05}) {
    const auto pair = alpha_homotopy(d, 10.0)(s);
    const auto report = compare_estimates(*pair, {ErrorSource::kExact});
    const auto& est = *report.find(ErrorSource::kExact);
    exact.push_back(std::abs(*report.exact_error));
    d1.push_back(std::abs(*report.exact_error - est.xi1));
    d2.push_back(std::abs(*report.exact_error - est.xi2));
  }
  EXPECT_GE(*loglog_slope(exact, d1), 1.8);
  EXPECT_GT(*loglog_slope(exact, d2), 2.6);
  for (std::size_t k = 0; k < exact.size(); ++k) EXPECT_LT(d2[k], d1[k]);
}

TEST(OrderStudy, AlphaHomotopySlopeAndSecondOrderDominance) {
  const auto study = order_study(alpha_homotopy(disc(32), 10.0), {1.0, 0.5, 0.25, 0.125});
  ASSERT_EQ(study.rows.size(), 4u);
  ASSERT_TRUE(study.slope_first.has_value());
  EXPECT_GE(*study.slope_first, 1.7);
  for (const auto& row : study.rows) {
    EXPECT_LE(row.deficit_second(), row.deficit_first()) << "level " << row.level;
  }
}

TEST(OrderStudy, ZeroLevelGivesZeroRowAndNoSlope) {
  const auto study = order_study(alpha_homotopy(disc(8), 10.0), {0.0});
  ASSERT_EQ(study.rows.size(), 1u);
  EXPECT_NEAR(study.rows[0].exact_error, 0.0, 1e-14);
  EXPECT_FALSE(study.slope_first.has_value());
}

TEST(OrderStudy, PartialRowsSurviveAFailingLevel) {
  const auto d = disc(8);
  Homotopy family = [d](double s) -> std::unique_ptr<ModelPair> {
    return std::make_unique<elliptic::EllipticModelPair>(d, elliptic::EllipticCoarseParams{0.25},
                                                         elliptic::EllipticFineParams{0.25, 80.0 * s},
                                                         elliptic::NonlinearityKind::kExponential);
  };
  OrderStudy partial;
  EXPECT_ANY_THROW(order_study(family, {0.01, 1.0}, &partial));
  ASSERT_EQ(partial.rows.size(), 1u);
  EXPECT_DOUBLE_EQ(partial.rows[0].level, 0.01);
}

TEST(OrderStudy, TumorBlendHomotopyDeficitsShrink) {
  const auto tdisc = tumor::TumorDiscretization::create(10, 10, tumor::TimeGrid::uniform(0.01, 1.0));
  Homotopy family = [tdisc](double s) -> std::unique_ptr<ModelPair> {
    return std::make_unique<tumor::TumorModelPair>(tdisc, tumor::TumorCoarseParams{}, tumor::TumorFineParams{}, s);
  };
  const auto study = order_study(family, {0.4, 0.2, 0.1});
  ASSERT_TRUE(study.slope_first.has_value());
  EXPECT_GE(*study.slope_first, 1.7);
  for (const auto& row : study.rows) EXPECT_LE(row.deficit_second(), row.deficit_first());
}

TEST(LoglogSlope, RecoversPowerAndSkipsNonpositive) {
  EXPECT_NEAR(*loglog_slope({1, 0.5, 0.25, 0.0}, {1, 0.125, 0.015625, 0.0}), 3.0, 1e-12);
  EXPECT_FALSE(loglog_slope({1, 2}, {0, 0}).has_value());
}

TEST(Report, JsonRoundTrip) {
  const elliptic::EllipticModelPair pair(disc(8), {0.25}, {0.25, 5.0});
  const auto report = compare_estimates(pair, kAllSources);
  const nlohmann::json j = report;
  const auto back = j.get<ErrorEstimateReport>();
  EXPECT_EQ(back.application, report.application);
  EXPECT_EQ(back.q_coarse, report.q_coarse);
  EXPECT_EQ(back.exact_error, report.exact_error);
  ASSERT_EQ(back.estimates.size(), report.estimates.size());
  for (std::size_t i = 0; i < back.estimates.size(); ++i) {
    EXPECT_EQ(back.estimates[i].source, report.estimates[i].source);
    EXPECT_EQ(back.estimates[i].xi2, report.estimates[i].xi2);
    EXPECT_EQ(back.estimates[i].newton_iterations, report.estimates[i].newton_iterations);
  }
}

TEST(ErrorSourceNames, ParseAcceptsOracleAlias) {
  for (auto s : kAllSources) EXPECT_EQ(parse_error_source(to_string(s)), s);
  EXPECT_EQ(parse_error_source("exact-fine-oracle"), ErrorSource::kExact);
  EXPECT_THROW(parse_error_source("third-order"), std::invalid_argument);
}

TEST(Estimators, FirstOrderQEhatWithinFivePercentAtMildNonlinearity) {
  const elliptic::EllipticModelPair pair(disc(50), {0.25}, {0.25, 1.0});
  const auto report = compare_estimates(pair, {ErrorSource::kExact, ErrorSource::kFirstOrder});
  const double qe = report.find(ErrorSource::kFirstOrder)->q_ehat;
  EXPECT_LT(std::abs(qe - *report.exact_error), 0.05 * std::abs(*report.exact_error));
}

TEST(Estimators, Xi2ApproachesXi1AsModelsConverge) {
  const auto d = disc(24);
  double previous = 1.0;
  for (double alpha : {2.0, 1.0, 0.5, 0.25}) {
    const elliptic::EllipticModelPair pair(d, {0.25}, {0.25, alpha});
    const auto s = *compare_estimates(pair, {ErrorSource::kFirstOrder}).find(ErrorSource::kFirstOrder);
    const double gap = std::abs(s.xi2 - s.xi1) / std::abs(s.xi1);
    EXPECT_LT(gap, previous);
    previous = gap;
  }
  EXPECT_LT(previous, 1e-2);
}
