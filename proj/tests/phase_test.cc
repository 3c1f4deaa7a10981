#include "ipromp/phase.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ipromp/error.h"
#include "test_util.h"

namespace ipromp {
namespace {

// Human-only model (P = 1, Q = 1) fitted to noisy time-scaled sines.
PrompModel SineModel(double nominal) {
  std::vector<Trajectory> demos;
  for (int i = 0; i < 8; ++i) {
    Trajectory t = testing::SineDemo(200, nominal * (0.9 + 0.025 * i), 0.02 * i, 1.0);
    demos.push_back(std::move(t));
  }
  InteractionLayout layout;
  FitOptions fit;
  fit.obs_noise = Eigen::VectorXd::Constant(1, 1e-3);
  return FitModel(demos, layout, BasisSystem::Uniform(15), nominal, fit);
}

// Batch of the model mean sampled at elapsed times under scaling alpha.
ObservationBatch MeanBatch(const PrompModel& m, double alpha, double t0, double t1,
                           int samples, double window_start = 0.0) {
  ObservationBatch b;
  b.window_start = window_start;
  b.window_duration = t1 - t0;
  b.raw_times = Eigen::VectorXd::LinSpaced(samples, t0, t1);
  Eigen::VectorXd z = (b.raw_times.array() + window_start) /
                      (alpha * m.phase.nominal_duration);
  z = z.cwiseMin(1.0);
  b.values = Reconstruct(m.weight_mean.head(m.n_basis()), m.basis, z);
  return b;
}

double QuadraticLogDensity(const Eigen::MatrixXd& cov, const Eigen::VectorXd& r) {
  // Independent evaluation through an eigendecomposition.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd proj = eig.eigenvectors().transpose() * r;
  double quad = 0.0, logdet = 0.0;
  for (int i = 0; i < proj.size(); ++i) {
    quad += proj[i] * proj[i] / eig.eigenvalues()[i];
    logdet += std::log(eig.eigenvalues()[i]);
  }
  return -0.5 * (quad + logdet + proj.size() * std::log(2.0 * M_PI));
}

TEST(FitPhaseTest, EqualDurationsFloorStd) {
  const std::vector<double> d = {4.0, 4.0, 4.0};
  const PhaseModel p = FitPhase(d, 4.0);
  EXPECT_DOUBLE_EQ(p.mean_alpha, 1.0);
  EXPECT_DOUBLE_EQ(p.std_alpha, 1e-3);
  EXPECT_TRUE(p.std_floored);
}

TEST(FitPhaseTest, ArithmeticExample) {
  const std::vector<double> d = {2.0, 4.0, 6.0};
  const PhaseModel p = FitPhase(d, 4.0);
  EXPECT_DOUBLE_EQ(p.mean_alpha, 1.0);
  EXPECT_DOUBLE_EQ(p.std_alpha, 0.5);
  EXPECT_FALSE(p.std_floored);
}

TEST(FitPhaseTest, SingleDemoFloorsWithFlag) {
  const std::vector<double> d = {3.0};
  const PhaseModel p = FitPhase(d, 4.0);
  EXPECT_DOUBLE_EQ(p.mean_alpha, 0.75);
  EXPECT_TRUE(p.std_floored);
}

TEST(FitPhaseTest, RejectsNonPositiveDurations) {
  const std::vector<double> d = {3.0, 0.0};
  EXPECT_THROW(FitPhase(d, 4.0), DataError);
  EXPECT_THROW(FitPhase(std::vector<double>{}, 4.0), ConfigError);
}

TEST(CandidateGridTest, SortedPositiveAndCoversThreeSigma) {
  for (double std : {0.01, 0.1, 0.3, 1.0}) {
    const Eigen::VectorXd g = MakeCandidateGrid(1.0, std);
    ASSERT_EQ(g.size(), 61);
    for (int i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
    EXPECT_GT(g[0], 0.0);
    EXPECT_DOUBLE_EQ(g[0], std::max(0.25, 1.0 - 3.0 * std));
    EXPECT_DOUBLE_EQ(g[60], 1.0 + 3.0 * std);
  }
}

TEST(MapToPhaseTest, UsesGlobalElapsedTimeAndClamps) {
  ObservationBatch b;
  b.window_start = 1.0;
  b.raw_times = Eigen::Vector3d(0.0, 0.5, 4.0);
  const Eigen::VectorXd z = MapToPhase(b, 0.5, 4.0);
  EXPECT_DOUBLE_EQ(z[0], 0.5);
  EXPECT_DOUBLE_EQ(z[1], 0.75);
  EXPECT_DOUBLE_EQ(z[2], 1.0);
  const ObservationBatch r = RemapBatch(b, 0.5, 4.0);
  ASSERT_TRUE(r.phase_alpha.has_value());
  EXPECT_EQ(r.z_indices, z);
  EXPECT_THROW(MapToPhase(b, 0.0, 4.0), DataError);
}

TEST(EstimateAlphaTest, SelfConsistentAtAlphaOne) {
  const PrompModel m = SineModel(4.0);
  const PhaseEstimate est = EstimateAlpha(m, MeanBatch(m, 1.0, 0.0, 2.0, 10));
  const Eigen::VectorXd& g = est.candidates;
  int nearest = 0;
  (g.array() - 1.0).abs().minCoeff(&nearest);
  EXPECT_LE(std::abs(est.index - nearest), 1);
}

TEST(EstimateAlphaTest, TwoCandidateRatioMatchesOracle) {
  PrompModel m = SineModel(4.0);
  m.phase.candidate_grid = Eigen::Vector2d(0.5, 2.0);
  m.phase.mean_alpha = 1.0;
  m.phase.std_alpha = 1.0;
  const ObservationBatch b = MeanBatch(m, 0.5, 0.0, 1.0, 6);
  const PhaseEstimate est = EstimateAlpha(m, b);
  EXPECT_DOUBLE_EQ(est.alpha, 0.5);

  double oracle[2];
  for (int c = 0; c < 2; ++c) {
    const Eigen::VectorXd z = MapToPhase(b, m.phase.candidate_grid[c], 4.0);
    const Eigen::MatrixXd h = testing::HumanObservationMatrix(m.basis, m.layout, z);
    Eigen::MatrixXd cov = h * m.weight_cov * h.transpose();
    cov.diagonal().array() += m.obs_noise[0];
    oracle[c] = QuadraticLogDensity(cov, b.values.col(0) - h * m.weight_mean);
  }
  EXPECT_NEAR(est.log_likelihood[0], oracle[0], 1e-8 * std::abs(oracle[0]) + 1e-8);
  EXPECT_NEAR(est.log_likelihood[1], oracle[1], 1e-8 * std::abs(oracle[1]) + 1e-8);
  // Same prior density at both candidates' distances is not assumed; compare
  // the posterior ratio against likelihood ratio times prior ratio.
  const double prior_ratio = LogAlphaPrior(m.phase, 0.5) - LogAlphaPrior(m.phase, 2.0);
  EXPECT_NEAR(est.log_posterior[0] - est.log_posterior[1],
              oracle[0] - oracle[1] + prior_ratio,
              1e-8 * std::abs(oracle[0] - oracle[1]) + 1e-8);
}

TEST(EstimateAlphaTest, PosteriorNormalizedInLogSpace) {
  const PrompModel m = SineModel(4.0);
  const PhaseEstimate est = EstimateAlpha(m, MeanBatch(m, 1.1, 0.0, 1.5, 8));
  EXPECT_NEAR(est.log_posterior.array().exp().sum(), 1.0, 1e-12);
  // Score differences reproduce likelihood ratios once the prior is removed.
  for (int i = 0; i < est.candidates.size(); ++i) {
    const double prior = LogAlphaPrior(m.phase, est.candidates[i]);
    EXPECT_NEAR(est.log_score[i] - prior, est.log_likelihood[i],
                1e-10 * std::abs(est.log_likelihood[i]) + 1e-10);
  }
}

TEST(EstimateAlphaTest, InvariantToWindowShift) {
  const PrompModel m = SineModel(4.0);
  ObservationBatch a = MeanBatch(m, 0.95, 1.0, 2.0, 6);
  ObservationBatch b = a;
  b.window_start = 1.0;
  b.raw_times.array() -= 1.0;
  const PhaseEstimate ea = EstimateAlpha(m, a);
  const PhaseEstimate eb = EstimateAlpha(m, b);
  EXPECT_EQ(ea.index, eb.index);
  EXPECT_LT((ea.log_score - eb.log_score).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(EstimateAlphaTest, FlatPriorIsMaximumLikelihood) {
  const PrompModel m = SineModel(4.0);
  const ObservationBatch b = MeanBatch(m, 1.15, 0.0, 0.6, 3);
  PhaseOptions flat;
  flat.flat_prior = true;
  const PhaseEstimate est = EstimateAlpha(m, b, flat);
  Eigen::Index ml;
  est.log_likelihood.maxCoeff(&ml);
  EXPECT_EQ(est.index, ml);
}

TEST(EstimateAlphaTest, MoreObservationsReduceMedianError) {
  const PrompModel m = SineModel(4.0);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> alpha_dist(m.phase.mean_alpha, 0.08);
  std::normal_distribution<double> noise(0.0, 0.03);
  const std::vector<double> ends = {0.2, 0.6, 2.0};
  std::vector<std::vector<double>> errors(ends.size());
  for (int trial = 0; trial < 40; ++trial) {
    const double alpha = alpha_dist(rng);
    for (size_t w = 0; w < ends.size(); ++w) {
      const int samples = std::max(2, static_cast<int>(ends[w] * 10.0));
      ObservationBatch b = MeanBatch(m, alpha, 0.0, ends[w], samples);
      for (int k = 0; k < b.values.size(); ++k) b.values.data()[k] += noise(rng);
      errors[w].push_back(std::abs(EstimateAlpha(m, b).alpha - alpha));
    }
  }
  std::vector<double> medians;
  for (auto& e : errors) {
    std::nth_element(e.begin(), e.begin() + e.size() / 2, e.end());
    medians.push_back(e[e.size() / 2]);
  }
  EXPECT_GT(medians[0], medians[1]);
  EXPECT_GT(medians[1], medians[2]);
}

TEST(EstimateAlphaTest, EmptyBatchIsConfigError) {
  const PrompModel m = SineModel(4.0);
  EXPECT_THROW(EstimateAlpha(m, ObservationBatch{}), ConfigError);
}

}  // namespace
}  // namespace ipromp
