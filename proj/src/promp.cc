#include "ipromp/promp.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ipromp/error.h"

namespace ipromp {
namespace {

constexpr double kDefaultNoise = 1e-4;

Eigen::VectorXd NoiseOrDefault(const Eigen::VectorXd& noise, int size) {
  if (noise.size() == 0) return Eigen::VectorXd::Constant(size, kDefaultNoise);
  if (noise.size() == 1 && size > 1) {
    return NoiseOrDefault(Eigen::VectorXd::Constant(size, noise[0]), size);
  }
  if (noise.size() != size) {
    throw ConfigError("noise vector has " + std::to_string(noise.size()) +
                      " entries, expected " + std::to_string(size));
  }
  for (Eigen::Index i = 0; i < noise.size(); ++i) {
    if (!(noise[i] > 0.0)) throw ConfigError("noise variances must be positive");
  }
  return noise;
}

// Normalized phase of every sample: t / duration.
Eigen::VectorXd NormalizedTimes(const Trajectory& traj) {
  return traj.timestamps / traj.duration();
}

// Solves min ||Psi W - Y||^2 + ridge ||W||^2 for all columns of Y at once.
Eigen::MatrixXd SolveWeights(const Eigen::MatrixXd& design,
                             const Eigen::MatrixXd& targets, double ridge,
                             double fallback_ridge) {
  const Eigen::Index n = design.cols();
  if (ridge <= 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-12);
    if (qr.rank() == n) return qr.solve(targets);
    if (fallback_ridge <= 0.0) {
      throw NumericalError("fit_weights: design matrix has rank " +
                           std::to_string(qr.rank()) + " < " +
                           std::to_string(n) + " and ridge is disabled");
    }
    ridge = fallback_ridge;
  }
  Eigen::MatrixXd normal = design.transpose() * design;
  normal.diagonal().array() += ridge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("fit_weights: regularized normal equations failed");
  }
  return ldlt.solve(design.transpose() * targets);
}

void Symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

// Rows H Sigma for a block-diagonal H = blockdiag(Psi, ..., Psi) over the
// first `blocks` DoFs (DoF-major ordering of the stacked observations).
Eigen::MatrixXd ProjectRows(const Eigen::MatrixXd& psi,
                            const Eigen::MatrixXd& cov, int blocks) {
  const Eigen::Index s = psi.rows();
  const Eigen::Index n = psi.cols();
  Eigen::MatrixXd out(s * blocks, cov.cols());
  for (int d = 0; d < blocks; ++d) {
    out.middleRows(d * s, s).noalias() = psi * cov.middleRows(d * n, n);
  }
  return out;
}

// (H Sigma) H^T for the same block-diagonal H.
Eigen::MatrixXd ProjectCols(const Eigen::MatrixXd& h_sigma,
                            const Eigen::MatrixXd& psi, int blocks) {
  const Eigen::Index s = psi.rows();
  const Eigen::Index n = psi.cols();
  Eigen::MatrixXd out(h_sigma.rows(), s * blocks);
  for (int e = 0; e < blocks; ++e) {
    out.middleCols(e * s, s).noalias() =
        h_sigma.middleCols(e * n, n) * psi.transpose();
  }
  return out;
}

Eigen::VectorXd StackColumns(const Eigen::MatrixXd& values) {
  return Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
}

PrompModel ConditionJoint(const PrompModel& model, const Eigen::MatrixXd& psi,
                          const Eigen::MatrixXd& values,
                          const Eigen::VectorXd& noise) {
  const int p = model.layout.human_dofs;
  const int n = model.n_basis();
  const Eigen::Index s = psi.rows();

  const Eigen::MatrixXd h_sigma =
      ProjectRows(psi, model.weight_cov.topRows(p * n), p);
  Eigen::MatrixXd innovation = ProjectCols(h_sigma.leftCols(p * n), psi, p);
  for (int d = 0; d < p; ++d) {
    innovation.diagonal().segment(d * s, s).array() += noise[d];
  }
  Symmetrize(innovation);
  Eigen::LLT<Eigen::MatrixXd> llt(innovation);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(
        "condition: innovation covariance is not positive definite (min "
        "diagonal " +
        std::to_string(innovation.diagonal().minCoeff()) + ")");
  }
  const Eigen::VectorXd predicted =
      ProjectRows(psi, model.weight_mean.head(p * n), p);
  const Eigen::VectorXd residual = StackColumns(values) - predicted;

  // K = Sigma H^T S^-1, so K^T = S^-1 (H Sigma).
  const Eigen::MatrixXd gain_t = llt.solve(h_sigma);
  PrompModel out = model;
  out.weight_mean.noalias() += gain_t.transpose() * residual;
  out.weight_cov.noalias() -= gain_t.transpose() * h_sigma;
  Symmetrize(out.weight_cov);
  return out;
}

}  // namespace

void InteractionLayout::Validate() const {
  if (human_dofs < 1 || robot_dofs < 1) {
    throw ConfigError("layout: need at least one human and one robot DoF");
  }
  if (!dof_names.empty() &&
      static_cast<int>(dof_names.size()) != human_dofs + robot_dofs) {
    throw ConfigError("layout: dof_names must have P + Q entries");
  }
}

void Trajectory::Validate() const {
  if (timestamps.size() < 2) {
    throw DataError(DataErrorKind::kDimension,
                    "trajectory: need at least two time steps");
  }
  if (samples.rows() != timestamps.size()) {
    throw DataError(DataErrorKind::kDimension,
                    "trajectory: sample rows do not match timestamps");
  }
  if (!timestamps.allFinite() || !samples.allFinite()) {
    throw DataError(DataErrorKind::kNonFinite, "trajectory: non-finite value");
  }
  for (Eigen::Index t = 1; t < timestamps.size(); ++t) {
    if (!(timestamps[t] > timestamps[t - 1])) {
      throw DataError(DataErrorKind::kSchema,
                      "trajectory: timestamps must be strictly increasing");
    }
  }
}

void PrompModel::Validate() const {
  layout.Validate();
  const Eigen::Index size = static_cast<Eigen::Index>(dofs()) * n_basis();
  if (weight_mean.size() != size || weight_cov.rows() != size ||
      weight_cov.cols() != size) {
    throw DataError(DataErrorKind::kDimension,
                    "model: weight dimensions do not match layout and basis");
  }
  if (obs_noise.size() != dofs()) {
    throw DataError(DataErrorKind::kDimension,
                    "model: obs_noise must have one entry per DoF");
  }
  if (!weight_mean.allFinite() || !weight_cov.allFinite() ||
      !obs_noise.allFinite()) {
    throw DataError(DataErrorKind::kNonFinite, "model: non-finite parameter");
  }
  if ((weight_cov - weight_cov.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw DataError(DataErrorKind::kSchema, "model: weight_cov not symmetric");
  }
}

Eigen::VectorXd FitWeights(const Trajectory& traj, const BasisSystem& basis,
                           double ridge, double fallback_ridge) {
  traj.Validate();
  const Eigen::MatrixXd design = basis.DesignMatrix(NormalizedTimes(traj));
  const Eigen::MatrixXd w =
      SolveWeights(design, traj.samples, ridge, fallback_ridge);
  if (!w.allFinite()) throw NumericalError("fit_weights: non-finite weights");
  return StackColumns(w);
}

Eigen::MatrixXd Reconstruct(const Eigen::VectorXd& weights,
                            const BasisSystem& basis,
                            const Eigen::VectorXd& z_values) {
  const int n = basis.size();
  if (weights.size() % n != 0) {
    throw DataError(DataErrorKind::kDimension,
                    "reconstruct: weight count not a multiple of n_basis");
  }
  const Eigen::Index dofs = weights.size() / n;
  const Eigen::Map<const Eigen::MatrixXd> w(weights.data(), n, dofs);
  return basis.DesignMatrix(z_values) * w;
}

Trajectory ResampleToPhaseGrid(const Trajectory& traj, int points) {
  traj.Validate();
  if (points < 2) throw ConfigError("resample: need at least two points");
  const Eigen::VectorXd u = NormalizedTimes(traj);
  Trajectory out;
  out.kind = traj.kind;
  out.timestamps = Eigen::VectorXd::LinSpaced(points, 0.0, traj.duration());
  out.samples.resize(points, traj.dofs());
  Eigen::Index k = 0;
  for (int i = 0; i < points; ++i) {
    const double z = static_cast<double>(i) / (points - 1);
    while (k + 2 < u.size() && u[k + 1] < z) ++k;
    const double span = u[k + 1] - u[k];
    const double f = std::clamp((z - u[k]) / span, 0.0, 1.0);
    out.samples.row(i) =
        (1.0 - f) * traj.samples.row(k) + f * traj.samples.row(k + 1);
  }
  return out;
}

PrompModel FitModel(std::span<const Trajectory> demos,
                    const InteractionLayout& layout, const BasisSystem& basis,
                    double nominal_duration, const FitOptions& options) {
  layout.Validate();
  if (demos.size() < 2) {
    throw ConfigError("fit_model: need at least two demonstrations, got " +
                      std::to_string(demos.size()));
  }
  const int dofs = layout.total();
  const int n = basis.size();
  const Eigen::Index size = static_cast<Eigen::Index>(dofs) * n;

  Eigen::MatrixXd weights(static_cast<Eigen::Index>(demos.size()), size);
  std::vector<double> durations;
  durations.reserve(demos.size());
  for (size_t i = 0; i < demos.size(); ++i) {
    const Trajectory& demo = demos[i];
    if (demo.kind != DofKind::kFull || demo.dofs() != dofs) {
      throw DataError(DataErrorKind::kDimension,
                      "fit_model: demo " + std::to_string(i) + " has " +
                          std::to_string(demo.dofs()) +
                          " DoFs, layout expects " + std::to_string(dofs));
    }
    const Trajectory aligned = ResampleToPhaseGrid(demo, options.resample_points);
    weights.row(static_cast<Eigen::Index>(i)) =
        FitWeights(aligned, basis, options.ridge, options.fallback_ridge)
            .transpose();
    durations.push_back(demo.duration());
  }

  PrompModel model;
  model.layout = layout;
  model.basis = basis;
  model.n_demos = static_cast<int>(demos.size());
  model.weight_mean = weights.colwise().mean().transpose();
  const Eigen::MatrixXd centered =
      weights.rowwise() - model.weight_mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered /
                        static_cast<double>(demos.size() - 1);
  Symmetrize(cov);
  if (options.shrinkage < 0.0 || options.shrinkage > 1.0) {
    throw ConfigError("fit_model: shrinkage must lie in [0, 1]");
  }
  const Eigen::VectorXd diag = cov.diagonal();
  cov *= 1.0 - options.shrinkage;
  cov.diagonal() += options.shrinkage * diag;
  cov.diagonal().array() += options.jitter;
  model.weight_cov = std::move(cov);
  model.obs_noise = NoiseOrDefault(options.obs_noise, dofs);

  if (nominal_duration <= 0.0) {
    double sum = 0.0;
    for (double d : durations) sum += d;
    nominal_duration = sum / static_cast<double>(durations.size());
  }
  model.phase = FitPhase(durations, nominal_duration, options.phase_grid);
  return model;
}

Gaussian Marginal(const PrompModel& model, double z) {
  const int dofs = model.dofs();
  const Eigen::MatrixXd psi = model.basis.Evaluate(z).transpose();
  Gaussian g;
  g.mean = ProjectRows(psi, model.weight_mean, dofs);
  g.cov = ProjectCols(ProjectRows(psi, model.weight_cov, dofs), psi, dofs);
  Symmetrize(g.cov);
  g.cov.diagonal() += model.obs_noise;
  return g;
}

PrompModel Condition(const PrompModel& model, const ObservationBatch& batch,
                     const ConditionOptions& options) {
  if (batch.empty()) return model;
  const int p = model.layout.human_dofs;
  if (batch.values.cols() != p || batch.values.rows() != batch.size()) {
    throw DataError(DataErrorKind::kDimension,
                    "condition: observation width must equal the human DoFs");
  }
  if (batch.z_indices.size() != batch.size()) {
    throw ConfigError("condition: batch has no phase indices; remap it first");
  }
  if (!batch.values.allFinite()) {
    throw DataError(DataErrorKind::kNonFinite, "condition: non-finite sample");
  }
  const Eigen::VectorXd noise = NoiseOrDefault(options.observation_noise, p);
  const Eigen::MatrixXd psi = model.basis.DesignMatrix(batch.z_indices);
  if (!options.sequential) return ConditionJoint(model, psi, batch.values, noise);

  PrompModel out = model;
  for (int j = 0; j < batch.size(); ++j) {
    out = ConditionJoint(out, psi.row(j), batch.values.row(j), noise);
  }
  return out;
}

double ObservationLogLikelihood(const PrompModel& model,
                                const Eigen::VectorXd& z_values,
                                const Eigen::MatrixXd& values) {
  const int p = model.layout.human_dofs;
  const int n = model.n_basis();
  if (values.cols() != p || values.rows() != z_values.size()) {
    throw DataError(DataErrorKind::kDimension,
                    "likelihood: observation width must equal the human DoFs");
  }
  const Eigen::MatrixXd psi = model.basis.DesignMatrix(z_values);
  const Eigen::Index s = psi.rows();
  Eigen::MatrixXd cov = ProjectCols(
      ProjectRows(psi, model.weight_cov.topLeftCorner(p * n, p * n), p), psi, p);
  for (int d = 0; d < p; ++d) {
    cov.diagonal().segment(d * s, s).array() += model.obs_noise[d];
  }
  Symmetrize(cov);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    return -std::numeric_limits<double>::infinity();
  }
  const Eigen::VectorXd residual =
      StackColumns(values) - ProjectRows(psi, model.weight_mean.head(p * n), p);
  const Eigen::VectorXd whitened = llt.matrixL().solve(residual);
  const double log_det =
      2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (whitened.squaredNorm() + log_det +
                 static_cast<double>(residual.size()) *
                     std::log(2.0 * std::numbers::pi));
}

PredictedDistribution PredictRobot(const PrompModel& model,
                                   const Eigen::VectorXd& z_grid,
                                   const std::string& task_id) {
  const int p = model.layout.human_dofs;
  const int q = model.layout.robot_dofs;
  const int n = model.n_basis();
  const Eigen::Index offset = static_cast<Eigen::Index>(p) * n;
  const Eigen::Index size = static_cast<Eigen::Index>(q) * n;

  PredictedDistribution pred;
  pred.z_grid = z_grid;
  pred.source_task = task_id;
  pred.means.resize(z_grid.size(), q);
  pred.covariances.reserve(z_grid.size());
  const auto mean = model.weight_mean.segment(offset, size);
  const Eigen::MatrixXd cov = model.weight_cov.block(offset, offset, size, size);
  for (Eigen::Index m = 0; m < z_grid.size(); ++m) {
    const Eigen::MatrixXd psi = model.basis.Evaluate(z_grid[m]).transpose();
    pred.means.row(m) = ProjectRows(psi, mean, q).transpose();
    Eigen::MatrixXd c = ProjectCols(ProjectRows(psi, cov, q), psi, q);
    Symmetrize(c);
    c.diagonal() += model.obs_noise.tail(q);
    pred.covariances.push_back(std::move(c));
  }
  return pred;
}

}  // namespace ipromp
