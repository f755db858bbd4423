/*
 * Copyright 2026 The curvecast Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#include <gtest/gtest.h>

#include <cmath>

#include "curvecast/blup.hpp"
#include "curvecast/random.hpp"
#include "curvecast/synth.hpp"
#include "test_support.hpp"

using namespace curvecast;

namespace {

SplineSpace unit_space(int spans = 6, int order = 4) {
  return SplineSpace(KnotVector::clamped_uniform(0.0, 1.0, spans, order));
}

// Left-segment curve drawn from the model.
SplineFunction draw_left(const CurveModel& m, const SegmentedModel& seg, NormalSource& rng) {
  const SyntheticSpec spec = SyntheticSpec::from_model(m, 0.0, 0);
  const CurveDraws d = sample_coefficients(spec, 1, rng);
  return SplineFunction(seg.left_space, seg.R1 * d.coeffs.row(0).transpose());
}

}  // namespace

TEST(Segment, CutMustBeInterior) {
  NormalSource rng(1);
  const CurveModel m = random_model(unit_space(), 2, 1, rng);
  expect_error([&] { segment(m, 0.0); }, ErrorKind::domain);
  expect_error([&] { segment(m, 1.0); }, ErrorKind::domain);
  expect_error([&] { segment(m, 1.5); }, ErrorKind::domain);
}

TEST(Predict, MatchesTheDiscreteOracle) {
  NormalSource rng(2);
  for (int trial = 0; trial < 6; ++trial) {
    const SplineSpace sp = unit_space(5 + trial, 4);
    const int p = 1 + trial % 3, q = trial % 3;
    const CurveModel m = random_model(sp, p, q, rng);
    const double cut = 0.31 + 0.07 * trial;
    const SegmentedModel seg = segment(m, cut);
    const SplineFunction y1 = draw_left(m, seg, rng);
    const Eigen::VectorXd ref = discrete_blup_oracle(SyntheticSpec::from_model(m, 0.0, 0), cut, y1.coefficients());
    const Eigen::VectorXd got = predict(seg, y1).mean.coefficients();
    EXPECT_LT((got - ref).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, ref.cwiseAbs().maxCoeff()))
        << "trial " << trial;
  }
}

TEST(Predict, ObservingTheMeanGivesTheMean) {
  NormalSource rng(3);
  const CurveModel m = random_model(unit_space(), 2, 2, rng);
  const SegmentedModel seg = segment(m, 0.45);
  const Prediction pr = predict(seg, SplineFunction(seg.left_space, seg.mu1));
  EXPECT_LT((pr.mean.coefficients() - seg.mu2).norm(), 1e-12);
}

TEST(Predict, SingleFactorClosedForm) {
  NormalSource rng(4);
  const CurveModel m = random_model(unit_space(), 1, 0, rng);
  const SegmentedModel seg = segment(m, 0.5);
  const SplineFunction y1 = draw_left(m, seg, rng);
  const Eigen::VectorXd a1 = seg.A1.col(0), a2 = seg.A2.col(0);
  const Eigen::VectorXd expected = seg.mu2 + a2 * a1.dot(y1.coefficients() - seg.mu1) / a1.squaredNorm();
  const Prediction pr = predict(seg, y1);
  EXPECT_LT((pr.mean.coefficients() - expected).norm(), 1e-10);
  // the factor is identified exactly, so nothing is left to predict
  EXPECT_LT(pr.cond_cov.norm(), 1e-10 * seg.g22.norm());
}

TEST(Predict, FactoredAndDirectRoutesAgree) {
  NormalSource rng(5);
  const CurveModel m = random_model(unit_space(8, 4), 3, 2, rng);
  const SegmentedModel a = segment(m, 0.4, PseudoinverseRoute::factored);
  const SegmentedModel b = segment(m, 0.4, PseudoinverseRoute::direct);
  const SplineFunction y1 = draw_left(m, a, rng);
  EXPECT_LT((predict(a, y1).mean.coefficients() - predict(b, y1).mean.coefficients()).norm(), 1e-8);
  EXPECT_LT((a.G11_pinv - b.G11_pinv).norm(), 1e-8 * b.G11_pinv.norm());
}

TEST(Predict, SingularLeftCovarianceMatchesTheOracle) {
  NormalSource rng(6);
  // more factors than the short left segment can separate: G11 is singular
  const CurveModel m = random_model(unit_space(8, 4), 4, 3, rng);
  const double cut = 0.3;
  const SegmentedModel seg = segment(m, cut);
  ASSERT_LT(seg.left_dimension(), m.p() + m.q());
  const SplineFunction y1 = draw_left(m, seg, rng);
  const SyntheticSpec spec = SyntheticSpec::from_model(m, 0.0, 0);
  const Eigen::VectorXd ref = discrete_blup_oracle(spec, cut, y1.coefficients());
  EXPECT_LT((predict(seg, y1).mean.coefficients() - ref).norm(), 1e-8 * std::max(1.0, ref.norm()));
  const Eigen::MatrixXd cf = conditional_covariance(seg, CovarianceForm::factor);
  EXPECT_GT(cf.trace(), 0.0);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cf).eigenvalues().minCoeff(), -1e-12 * seg.g22.norm());
  EXPECT_LT((cf - (seg.g22 - seg.g21 * seg.G11_pinv * seg.g12)).norm(), 1e-8 * seg.g22.norm());
}

TEST(ConditionalCovariance, NoisyFormSubtractsTheRightNoise) {
  NormalSource rng(16);
  const CurveModel m = random_model(unit_space(8, 4), 4, 3, rng);
  const SegmentedModel seg = segment(m, 0.3);
  // g22 - G21 G11^+ G12 is Cov(Y2 | Y1) minus B2 Sigma B2', so it need not be
  // a covariance at all
  const Eigen::MatrixXd noise2 = seg.B2 * m.Sigma_diag.asDiagonal() * seg.B2.transpose();
  const Eigen::MatrixXd observed = seg.g22 + noise2 - seg.G21 * seg.G11_pinv * seg.G12;
  const Eigen::MatrixXd cn = conditional_covariance(seg, CovarianceForm::noisy);
  EXPECT_LT((cn - (observed - noise2)).norm(), 1e-9 * observed.norm());
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(observed).eigenvalues().minCoeff(), -1e-8 * observed.norm());
}

TEST(ConditionalCovariance, ExactlyZeroWhenTheFactorsAreIdentified) {
  NormalSource rng(17);
  const CurveModel m = random_model(unit_space(8, 4), 2, 2, rng);
  const SegmentedModel seg = segment(m, 0.5);
  ASSERT_GE(seg.left_dimension(), 4);
  EXPECT_EQ(conditional_covariance(seg).norm(), 0.0);
}

TEST(Segment, BlockIdentities) {
  NormalSource rng(18);
  const SplineSpace sp = unit_space(6, 4);
  const CurveModel m = random_model(sp, 3, 2, rng);
  // a fresh cut inserts k knots, a cut on a simple break only k - 1
  const SegmentedModel seg = segment(m, 0.43);
  EXPECT_EQ(seg.left_dimension() + seg.right_dimension(), sp.dimension() + sp.order());
  const SegmentedModel at_break = segment(m, 0.5);
  EXPECT_EQ(at_break.left_dimension() + at_break.right_dimension(), sp.dimension() + sp.order() - 1);
  // cross covariance from the blocks equals the full-segment one
  const Eigen::MatrixXd full = m.factor_covariance();
  for (int i = 0; i < 20; ++i) {
    const double s = 0.43 * rng.uniform(), t = 0.43 + 0.57 * rng.uniform();
    const double direct = eval_basis(sp, s).dot(full * eval_basis(sp, t));
    const double blocks = eval_basis(seg.left_space, s).dot(seg.g12 * eval_basis(seg.right_space, t));
    EXPECT_NEAR(blocks, direct, 1e-10);
  }
  EXPECT_LT((seg.G11 * seg.G11_pinv * seg.g12 - seg.g12).norm(), 1e-9 * seg.g12.norm());
  EXPECT_LT(penrose_residuals(seg.G11, seg.G11_pinv).max(), 1e-8 * std::max(1.0, seg.G11_pinv.norm()));
}

TEST(Predict, RejectsCurvesFromOtherSpaces) {
  NormalSource rng(7);
  const CurveModel m = random_model(unit_space(), 2, 1, rng);
  const SegmentedModel seg = segment(m, 0.5);
  const SplineFunction wrong(seg.right_space, seg.mu2);
  expect_error([&] { predict(seg, wrong); }, ErrorKind::invalid_input);
}

TEST(PseudoOpCheck, VanishesForModelDraws) {
  NormalSource rng(8);
  const CurveModel m = random_model(unit_space(8, 4), 4, 3, rng);
  const SegmentedModel seg = segment(m, 0.3);
  for (int i = 0; i < 10; ++i) {
    const SplineFunction y1 = draw_left(m, seg, rng);
    EXPECT_LT(pseudo_op_check(seg, y1), 1e-8 * (y1.coefficients() - seg.mu1).norm());
  }
}

TEST(PseudoOpCheck, MeasuresTheOutOfSpanComponent) {
  NormalSource rng(19);
  const CurveModel m = random_model(unit_space(8, 4), 2, 1, rng);
  const SegmentedModel seg = segment(m, 0.6);
  Eigen::MatrixXd C(seg.A1.rows(), 3);
  C << seg.A1, seg.B1;
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(C).householderQ();
  const Eigen::VectorXd outside = Q.rightCols(Q.cols() - 3) * rng.normal_vector(Q.cols() - 3);
  const Eigen::VectorXd inside = C * rng.normal_vector(3);
  const SplineFunction y1(seg.left_space, seg.mu1 + inside + outside);
  EXPECT_NEAR(pseudo_op_check(seg, y1), outside.norm(), 1e-9 * outside.norm());
  EXPECT_EQ(pseudo_op_check(seg, SplineFunction(seg.left_space, seg.mu1)), 0.0);
}

TEST(Ridge, SingleFactorClosedForm) {
  NormalSource rng(20);
  const CurveModel m = random_model(unit_space(), 1, 1, rng);
  const SegmentedModel seg = segment(m, 0.5);
  const SplineFunction y1 = draw_left(m, seg, rng);
  const double s2 = 0.3;
  const Eigen::VectorXd a1 = seg.A1.col(0);
  const Eigen::VectorXd expected =
      seg.mu2 + seg.A2.col(0) * a1.dot(y1.coefficients() - seg.mu1) / (a1.squaredNorm() + s2 / m.L_diag[0]);
  EXPECT_LT((predict_ridge(seg, y1, s2).mean.coefficients() - expected).norm(), 1e-12);
  EXPECT_LT((predict_ridge(seg, SplineFunction(seg.left_space, seg.mu1), s2).mean.coefficients() - seg.mu2).norm(),
            1e-15);
}

TEST(Ridge, SmallAndLargeSystemsAgree) {
  NormalSource rng(9);
  const CurveModel m = random_model(unit_space(7, 4), 3, 1, rng);
  const SegmentedModel seg = segment(m, 0.55);
  for (double s2 : {1e-3, 0.1, 2.0}) {
    const Eigen::MatrixXd a = ridge_gain(seg, s2), b = ridge_gain_direct(seg, s2);
    EXPECT_LT((a - b).norm(), 1e-9 * std::max(1.0, b.norm())) << s2;
  }
  expect_error([&] { ridge_gain(seg, 0.0); }, ErrorKind::invalid_variance);
  const SplineFunction y1 = draw_left(m, seg, rng);
  expect_error([&] { predict_ridge(seg, y1, -1.0); }, ErrorKind::invalid_variance);
}

TEST(Ridge, ApproachesTheFactorOnlyPredictorAsNoiseVanishes) {
  NormalSource rng(10);
  const CurveModel m = random_model(unit_space(7, 4), 2, 0, rng);
  const SegmentedModel seg = segment(m, 0.5);
  const SplineFunction y1 = draw_left(m, seg, rng);
  const Eigen::VectorXd blup = predict(seg, y1).mean.coefficients();
  double prev = INFINITY;
  for (double s2 : {1e-2, 1e-4, 1e-6, 1e-8}) {
    const double err = (predict_ridge(seg, y1, s2).mean.coefficients() - blup).norm();
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(Ridge, CovarianceIsPositiveSemidefinite) {
  NormalSource rng(11);
  const CurveModel m = random_model(unit_space(7, 4), 3, 2, rng);
  const SegmentedModel seg = segment(m, 0.5);
  const Prediction pr = predict_ridge(seg, draw_left(m, seg, rng), 0.05);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(pr.cond_cov).eigenvalues().minCoeff(), -1e-12);
  EXPECT_GT(pr.variance(0.75), 0.0);
  // no more uncertain than the unconditional factor part
  EXPECT_LE(pr.cond_cov.trace(), seg.g22.trace() + 1e-12);
}

TEST(Forecast, RidgeFallsBackToTheModelResidualVariance) {
  NormalSource rng(12);
  CurveModel m = random_model(unit_space(), 2, 1, rng);
  m.sigma2 = 0.3;
  const SegmentedModel seg = segment(m, 0.5);
  const SplineFunction y1 = draw_left(m, seg, rng);
  EXPECT_LT((forecast(seg, y1, Method::ridge).mean.coefficients() -
             predict_ridge(seg, y1, 0.3).mean.coefficients()).norm(), 1e-14);
  EXPECT_LT((forecast(seg, y1, Method::mean).mean.coefficients() - seg.mu2).norm(), 1e-15);
}

TEST(Concatenate, SmoothWithoutNoiseComponents) {
  NormalSource rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    const CurveModel m = random_model(unit_space(6 + trial, 4), 1 + trial % 3, 0, rng);
    const SegmentedModel seg = segment(m, 0.37 + 0.05 * trial);
    const SplineFunction y1 = draw_left(m, seg, rng);
    const Concatenation c = concatenate(seg, y1, predict(seg, y1));
    EXPECT_LT(c.max_jump, 1e-8 * std::max(1.0, y1.coefficients().cwiseAbs().maxCoeff()));
    EXPECT_EQ(c.jumps.size(), 3u);
    EXPECT_LT(c.residual, 1e-8);
  }
}

TEST(Concatenate, ReportsJumpsWhenNoiseIsPresent) {
  NormalSource rng(14);
  const CurveModel m = random_model(unit_space(8, 4), 1, 2, rng);
  const SegmentedModel seg = segment(m, 0.5);
  const SplineFunction y1 = draw_left(m, seg, rng);
  const Concatenation c = concatenate(seg, y1, predict(seg, y1));
  EXPECT_GT(c.max_jump, 1e-6);
}
