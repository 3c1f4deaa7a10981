#include "ipromp/phase.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ipromp/error.h"

namespace ipromp {

Eigen::VectorXd MakeCandidateGrid(double mean_alpha, double std_alpha,
                                  const PhaseGridOptions& options) {
  if (options.grid_points < 1) {
    throw ConfigError("phase: grid_points must be positive");
  }
  if (!(options.span_sigmas > 0.0) || !(options.min_alpha > 0.0)) {
    throw ConfigError("phase: grid span and min_alpha must be positive");
  }
  const double lo = std::max(options.min_alpha,
                             mean_alpha - options.span_sigmas * std_alpha);
  const double hi = std::max(lo, mean_alpha + options.span_sigmas * std_alpha);
  if (options.grid_points == 1 || hi <= lo) {
    return Eigen::VectorXd::Constant(1, std::max(mean_alpha, lo));
  }
  Eigen::VectorXd grid(options.grid_points);
  const double log_lo = std::log(lo);
  const double step = (std::log(hi) - log_lo) / (options.grid_points - 1);
  for (int i = 0; i < options.grid_points; ++i) {
    grid[i] = std::exp(log_lo + step * i);
  }
  grid[0] = lo;
  grid[options.grid_points - 1] = hi;
  return grid;
}

PhaseModel FitPhase(std::span<const double> durations, double nominal_duration,
                    const PhaseGridOptions& options) {
  if (durations.empty()) throw ConfigError("phase: no demo durations");
  if (!(nominal_duration > 0.0)) {
    throw DataError(DataErrorKind::kDomain,
                    "phase: nominal duration must be positive");
  }
  const double n = static_cast<double>(durations.size());
  double mean = 0.0;
  for (double d : durations) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw DataError(DataErrorKind::kDomain,
                      "phase: demo durations must be positive");
    }
    mean += d / nominal_duration;
  }
  mean /= n;
  double var = 0.0;
  for (double d : durations) {
    const double a = d / nominal_duration - mean;
    var += a * a;
  }
  var = durations.size() > 1 ? var / (n - 1.0) : 0.0;

  PhaseModel model;
  model.mean_alpha = mean;
  model.std_alpha = std::sqrt(var);
  model.nominal_duration = nominal_duration;
  if (!(model.std_alpha >= options.std_floor)) {
    model.std_alpha = options.std_floor;
    model.std_floored = true;
  }
  model.candidate_grid =
      MakeCandidateGrid(model.mean_alpha, model.std_alpha, options);
  return model;
}

Eigen::VectorXd MapToPhase(const ObservationBatch& batch, double alpha,
                           double nominal_duration) {
  if (!(alpha > 0.0) || !(nominal_duration > 0.0)) {
    throw DataError(DataErrorKind::kDomain,
                    "phase: alpha and nominal duration must be positive");
  }
  const double scale = 1.0 / (alpha * nominal_duration);
  Eigen::VectorXd z(batch.raw_times.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    z[j] = std::clamp((batch.window_start + batch.raw_times[j]) * scale, 0.0,
                      1.0);
  }
  return z;
}

ObservationBatch RemapBatch(const ObservationBatch& batch, double alpha,
                            double nominal_duration) {
  ObservationBatch out = batch;
  out.phase_alpha = alpha;
  out.z_indices = MapToPhase(batch, alpha, nominal_duration);
  return out;
}

double LogAlphaPrior(const PhaseModel& phase, double alpha) {
  const double d = (alpha - phase.mean_alpha) / phase.std_alpha;
  return -0.5 * d * d - std::log(phase.std_alpha) -
         0.5 * std::log(2.0 * std::numbers::pi);
}

PhaseEstimate EstimateAlpha(const PrompModel& model,
                            const ObservationBatch& batch,
                            const PhaseOptions& options) {
  if (batch.empty()) throw ConfigError("phase: empty observation batch");
  const PhaseModel& phase = model.phase;
  const Eigen::VectorXd& grid = phase.candidate_grid;
  if (grid.size() == 0) throw ConfigError("phase: empty candidate grid");

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  PhaseEstimate est;
  est.candidates = grid;
  est.log_likelihood.resize(grid.size());
  est.log_score.resize(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const Eigen::VectorXd z = MapToPhase(batch, grid[i], phase.nominal_duration);
    est.log_likelihood[i] = ObservationLogLikelihood(model, z, batch.values);
    est.log_score[i] = est.log_likelihood[i];
    if (!options.flat_prior) est.log_score[i] += LogAlphaPrior(phase, grid[i]);
  }

  int best = -1;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double s = est.log_score[i];
    if (s == kNegInf || std::isnan(s)) continue;
    if (best < 0 || s > est.log_score[best]) {
      best = static_cast<int>(i);
    } else if (s == est.log_score[best] &&
               std::abs(grid[i] - phase.mean_alpha) <
                   std::abs(grid[best] - phase.mean_alpha)) {
      best = static_cast<int>(i);
    }
  }
  if (best < 0) {
    throw NumericalError(
        "phase: every alpha candidate has zero likelihood; check the "
        "observation noise and the log-space evaluation");
  }

  const double top = est.log_score[best];
  double sum = 0.0;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (est.log_score[i] != kNegInf) sum += std::exp(est.log_score[i] - top);
  }
  est.log_posterior = est.log_score.array() - (top + std::log(sum));
  est.index = best;
  est.alpha = grid[best];
  est.best_log_likelihood = est.log_likelihood[best];
  return est;
}

}  // namespace ipromp
