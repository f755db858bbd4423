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
#include <vector>

#include "curvecast/blup.hpp"
#include "curvecast/synth.hpp"
#include "test_support.hpp"

using namespace curvecast;

namespace {

SplineSpace unit_space(int spans = 6, int order = 4) {
  return SplineSpace(KnotVector::clamped_uniform(0.0, 1.0, spans, order));
}

}  // namespace

TEST(SampleCurves, MomentsMatchTheSpec) {
  NormalSource rng(1);
  const CurveModel m = random_model(unit_space(4, 3), 2, 2, rng);
  const SyntheticSpec spec = SyntheticSpec::from_model(m, 0.0, 77);
  const Eigen::Index n = 50000;
  const Eigen::MatrixXd C = sample_curves(spec, n).draws.coeffs;
  const Eigen::VectorXd mean = C.colwise().mean().transpose();
  const Eigen::MatrixXd cov = m.covariance();
  for (Eigen::Index j = 0; j < mean.size(); ++j)
    EXPECT_NEAR(mean[j], m.mu[j], 4.0 * std::sqrt(cov(j, j) / n)) << j;
  const Eigen::MatrixXd centered = C.rowwise() - mean.transpose();
  const Eigen::MatrixXd sample_cov = centered.transpose() * centered / double(n - 1);
  EXPECT_LT((sample_cov - cov).norm() / cov.norm(), 0.05);
}

TEST(SampleCurves, DegenerateSpecReturnsTheMean) {
  const SplineSpace sp = unit_space();
  NormalSource rng(2);
  const CurveModel m = random_model(sp, 2, 1, rng);
  SyntheticSpec spec = SyntheticSpec::from_model(m, 0.0, 3);
  spec.L_diag.setZero();
  spec.Sigma_diag.setZero();
  const Eigen::MatrixXd C = sample_curves(spec, 5).draws.coeffs;
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_EQ((C.row(i).transpose() - m.mu).norm(), 0.0);
  spec.L_diag[0] = -1.0;
  expect_error([&] { sample_curves(spec, 5); }, ErrorKind::invalid_variance);
}

TEST(SampleCurves, SeedDeterminesTheDraws) {
  NormalSource rng(4);
  const CurveModel m = random_model(unit_space(), 2, 1, rng);
  const std::vector<double> ts{0.0, 0.5, 1.0};
  const auto a = sample_curves(SyntheticSpec::from_model(m, 0.1, 9), 3, ts);
  const auto b = sample_curves(SyntheticSpec::from_model(m, 0.1, 9), 3, ts);
  const auto c = sample_curves(SyntheticSpec::from_model(m, 0.1, 10), 3, ts);
  EXPECT_EQ(a.draws.coeffs, b.draws.coeffs);
  EXPECT_EQ(a.observations[2].values, b.observations[2].values);
  EXPECT_NE(a.draws.coeffs, c.draws.coeffs);
}

TEST(RandomModel, LoadingsAreOrthonormalInTheGramMetric) {
  const SplineSpace sp = unit_space(7, 4);
  NormalSource rng(5);
  const CurveModel m = random_model(sp, 3, 2, rng);
  Eigen::MatrixXd AB(sp.dimension(), 5);
  AB << m.A, m.B;
  EXPECT_LT((AB.transpose() * gram_matrix(sp) * AB - Eigen::MatrixXd::Identity(5, 5)).norm(), 1e-10);
  EXPECT_NO_THROW(m.validate());
  expect_error([&] { random_model(sp, 0, 1, rng); }, ErrorKind::usage);
}

TEST(CollocatedSplit, AgreesWithKnotInsertion) {
  const SplineSpace sp(std::vector<double>{0, 0, 0, 0, 0.2, 0.45, 0.45, 0.7, 1, 1, 1, 1}, 4);
  for (double cut : {0.1, 0.45, 0.6}) {
    const CollocatedSplit s = collocated_split(sp, cut);
    EXPECT_LT((s.R1 - restriction_matrix(sp, cut, Side::left)).cwiseAbs().maxCoeff(), 1e-10) << cut;
    EXPECT_LT((s.R2 - restriction_matrix(sp, cut, Side::right)).cwiseAbs().maxCoeff(), 1e-10) << cut;
  }
}

TEST(DiscreteOracle, BasicIdentities) {
  NormalSource rng(6);
  const CurveModel m = random_model(unit_space(), 1, 0, rng);
  const SyntheticSpec spec = SyntheticSpec::from_model(m, 0.0, 0);
  const CollocatedSplit s = collocated_split(m.space, 0.5);
  EXPECT_LT((discrete_blup_oracle(spec, 0.5, s.R1 * m.mu) - s.R2 * m.mu).norm(), 1e-12);
  // one factor: the prediction projects onto a1
  const Eigen::VectorXd a1 = s.R1 * m.A.col(0), a2 = s.R2 * m.A.col(0);
  const Eigen::VectorXd y1 = s.R1 * m.mu + 1.7 * a1 + 0.3 * rng.normal_vector(a1.size());
  const Eigen::VectorXd expected = s.R2 * m.mu + a2 * a1.dot(y1 - s.R1 * m.mu) / a1.squaredNorm();
  EXPECT_LT((discrete_blup_oracle(spec, 0.5, y1) - expected).norm(), 1e-9);
}

namespace {

// Model whose left segment cannot identify the factors, so the
// conditional variance of the continuation is positive.
struct McCase {
  CurveModel model;
  SegmentedModel seg;
  SplineFunction y1;
  std::vector<double> times;

  static McCase make() {
    NormalSource rng(7);
    const CurveModel m = random_model(unit_space(4, 3), 3, 2, rng);
    const SegmentedModel seg = segment(m, 0.3);
    const CurveDraws d = sample_coefficients(SyntheticSpec::from_model(m, 0.0, 0), 1, rng);
    SplineFunction y1(seg.left_space, seg.R1 * d.coeffs.row(0).transpose());
    return {m, seg, y1, {0.35, 0.5, 0.65, 0.8, 0.95}};
  }
};

}  // namespace

TEST(McConditional, AgreesWithTheClosedForm) {
  const McCase c = McCase::make();
  ASSERT_LT(c.seg.left_dimension(), c.model.p() + c.model.q());
  const Prediction pr = predict(c.seg, c.y1);
  McOptions opt;
  opt.seed = 11;
  const McConditional mc = mc_conditional(SyntheticSpec::from_model(c.model, 0.0, 0), 0.3, c.y1.coefficients(),
                                          c.times, opt);
  EXPECT_EQ(mc.dimension, c.seg.left_dimension());
  EXPECT_GE(mc.effective_n, 2000.0);
  for (std::size_t i = 0; i < c.times.size(); ++i) {
    const double t = c.times[i];
    EXPECT_NEAR(mc.mean[i], pr.mean(t), 3.0 * mc.mean_se[i]) << t;
    EXPECT_NEAR(mc.variance[i], pr.variance(t), 3.0 * mc.variance_se[i]) << t;
  }
}

TEST(McConditional, ErrorShrinksWithTheSampleSize) {
  const McCase c = McCase::make();
  const SyntheticSpec spec = SyntheticSpec::from_model(c.model, 0.0, 0);
  McOptions small;
  small.n = 10000;
  const McConditional a = mc_conditional(spec, 0.3, c.y1.coefficients(), c.times, small);
  McOptions large = small;
  large.n = 100000;
  large.bandwidth = a.bandwidth;
  const McConditional b = mc_conditional(spec, 0.3, c.y1.coefficients(), c.times, large);
  for (std::size_t i = 0; i < c.times.size(); ++i) EXPECT_LT(b.mean_se[i], 0.5 * a.mean_se[i]);
}

TEST(McConditional, TinyBandwidthIsUnreliable) {
  const McCase c = McCase::make();
  McOptions opt;
  opt.n = 10000;
  opt.bandwidth = 1e-3;
  expect_error(
      [&] { mc_conditional(SyntheticSpec::from_model(c.model, 0.0, 0), 0.3, c.y1.coefficients(), c.times, opt); },
      ErrorKind::unreliable_estimate);
  opt.n = 100;
  opt.bandwidth.reset();
  expect_error(
      [&] { mc_conditional(SyntheticSpec::from_model(c.model, 0.0, 0), 0.3, c.y1.coefficients(), c.times, opt); },
      ErrorKind::usage);
}

TEST(ToPanel, ConsecutiveDaysAndClamping) {
  std::vector<CurveSample> curves{{{600, 615, 630}, {1, -2, 3}, "a"}, {{600, 615, 630}, {0.5, 0, -0.1}, "b"}};
  std::size_t clamped = 0;
  const CurvePanel p = to_panel(curves, "2003-12-31", &clamped);
  EXPECT_EQ(clamped, 2u);
  ASSERT_EQ(p.days.size(), 2u);
  EXPECT_EQ(p.days[1].date, "2004-01-01");
  EXPECT_EQ(p.labels, (std::vector<std::string>{"10:00", "10:15", "10:30"}));
  EXPECT_EQ(p.interval_minutes, 15);
  EXPECT_EQ(p.days[0].sample.values, (std::vector<double>{1, 0, 3}));
}

TEST(CallCenter, WeekdaysOnlyAndSeeded) {
  CallCenterOptions opt;
  opt.days = 12;
  const CurvePanel a = call_center_panel(opt);
  const CurvePanel b = call_center_panel(opt);
  ASSERT_EQ(a.days.size(), 12u);
  EXPECT_EQ(a.labels.front(), "07:05");
  EXPECT_EQ(a.labels.back(), "21:05");
  EXPECT_EQ(a.labels.size(), 169u);
  for (const auto& d : a.days) {
    EXPECT_NE(d.weekday, 0);
    EXPECT_NE(d.weekday, 6);
    for (double v : d.sample.values) EXPECT_GE(v, 0.0);
  }
  EXPECT_EQ(a.days[5].date, "2003-01-13");
  EXPECT_EQ(a.days[7].sample.values, b.days[7].sample.values);
  opt.seed = 1;
  EXPECT_NE(call_center_panel(opt).days[7].sample.values, a.days[7].sample.values);
}
