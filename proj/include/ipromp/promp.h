#ifndef IPROMP_PROMP_H_
#define IPROMP_PROMP_H_

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ipromp/basis.h"
#include "ipromp/phase_model.h"

namespace ipromp {

// P human DoFs followed by Q robot DoFs.
struct InteractionLayout {
  int human_dofs = 1;
  int robot_dofs = 1;
  std::vector<std::string> dof_names;

  int total() const { return human_dofs + robot_dofs; }
  // Throws ConfigError when P < 1, Q < 1 or names do not match P + Q.
  void Validate() const;
};

enum class DofKind { kFull, kHumanOnly };

struct Trajectory {
  Eigen::VectorXd timestamps;  // seconds, strictly increasing
  Eigen::MatrixXd samples;     // T x D
  DofKind kind = DofKind::kFull;

  int steps() const { return static_cast<int>(timestamps.size()); }
  int dofs() const { return static_cast<int>(samples.cols()); }
  double duration() const { return timestamps[timestamps.size() - 1]; }
  // Throws DataError on T < 2, non-monotone time, NaN, or a size mismatch.
  void Validate() const;
};

struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Time-indexed Gaussian over the robot DoFs.
struct PredictedDistribution {
  Eigen::VectorXd z_grid;
  Eigen::MatrixXd means;  // M x Q
  std::vector<Eigen::MatrixXd> covariances;
  std::string source_task;

  int size() const { return static_cast<int>(z_grid.size()); }
  int dofs() const { return static_cast<int>(means.cols()); }
  Gaussian At(int m) const { return {means.row(m).transpose(), covariances[m]}; }
};

// Weight-space Gaussian over the stacked human+robot basis weights
// [w_h1, ..., w_hP, w_r1, ..., w_rQ], each block n_basis long.
struct PrompModel {
  InteractionLayout layout;
  BasisSystem basis = BasisSystem::Uniform(1);
  Eigen::VectorXd weight_mean;
  Eigen::MatrixXd weight_cov;
  Eigen::VectorXd obs_noise;  // per-DoF variance of the training noise
  PhaseModel phase;
  int n_demos = 0;

  int n_basis() const { return basis.size(); }
  int dofs() const { return layout.total(); }
  int human_weights() const { return layout.human_dofs * n_basis(); }
  // Throws DataError when shapes disagree or the covariance is asymmetric.
  void Validate() const;
};

struct FitOptions {
  // Ridge term for the per-demo regression. Zero means plain least squares,
  // falling back to fallback_ridge when the design is rank deficient; with
  // both zero a rank-deficient design is a NumericalError.
  double ridge = 0.0;
  double fallback_ridge = 1e-6;
  // Shrinkage intensity toward the diagonal of the sample covariance.
  double shrinkage = 0.02;
  double jitter = 1e-6;
  // Points of the normalized phase grid every demo is resampled onto.
  int resample_points = 200;
  // Training noise variance per DoF; empty means 1e-4 for every DoF and a
  // single entry applies to all of them.
  Eigen::VectorXd obs_noise;
  PhaseGridOptions phase_grid;
};

// Least-squares basis weights of every DoF, stacked in DoF order. The phase
// of sample t is timestamps[t] / duration.
Eigen::VectorXd FitWeights(const Trajectory& traj, const BasisSystem& basis,
                           double ridge = 0.0, double fallback_ridge = 0.0);

// Samples the mean trajectory encoded by stacked weights on z_values.
Eigen::MatrixXd Reconstruct(const Eigen::VectorXd& weights,
                            const BasisSystem& basis,
                            const Eigen::VectorXd& z_values);

// Linear-interpolation resampling onto `points` equally spaced phases.
Trajectory ResampleToPhaseGrid(const Trajectory& traj, int points);

// Learns the weight distribution from >= 2 full demonstrations.
// nominal_duration is the reference duration of the phase model; pass <= 0
// to use the mean demo duration.
PrompModel FitModel(std::span<const Trajectory> demos,
                    const InteractionLayout& layout, const BasisSystem& basis,
                    double nominal_duration, const FitOptions& options = {});

// Joint marginal over all DoFs at phase z (includes the training noise).
Gaussian Marginal(const PrompModel& model, double z);

struct ConditionOptions {
  // Observation noise variance per human DoF; empty means 1e-4, a single
  // entry applies to every DoF.
  Eigen::VectorXd observation_noise;
  // Apply one Kalman step per sample instead of one stacked step.
  bool sequential = false;
};

// Kalman update of the weight distribution on the human samples of `batch`,
// which must already carry z_indices. Empty batches return the model as is.
PrompModel Condition(const PrompModel& model, const ObservationBatch& batch,
                     const ConditionOptions& options = {});

// log N(values | H mu, H Sigma H^T + Sigma_y) for human samples at phases
// z_values, values being s x P. Returns -inf when the innovation covariance
// is not positive definite.
double ObservationLogLikelihood(const PrompModel& model,
                                const Eigen::VectorXd& z_values,
                                const Eigen::MatrixXd& values);

// Robot-block marginals on z_grid.
PredictedDistribution PredictRobot(const PrompModel& model,
                                   const Eigen::VectorXd& z_grid,
                                   const std::string& task_id = "");

}  // namespace ipromp

#endif  // IPROMP_PROMP_H_
