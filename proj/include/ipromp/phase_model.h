#ifndef IPROMP_PHASE_MODEL_H_
#define IPROMP_PHASE_MODEL_H_

#include <optional>
#include <span>

#include <Eigen/Dense>

namespace ipromp {

// Search grid settings for the temporal scaling factor.
struct PhaseGridOptions {
  int grid_points = 61;
  double span_sigmas = 3.0;
  double min_alpha = 0.25;
  double std_floor = 1e-3;
};

// Distribution of temporal scaling factors alpha = T_i / T_nom across the
// training demonstrations, plus the grid searched at test time.
struct PhaseModel {
  double mean_alpha = 1.0;
  double std_alpha = 1e-3;
  // Reference duration (seconds) that phase 1.0 corresponds to at alpha = 1.
  double nominal_duration = 1.0;
  Eigen::VectorXd candidate_grid;
  // Set when std_alpha had to be raised to the floor (one demo, or all
  // durations identical).
  bool std_floored = false;
};

// Geometric grid over [max(min_alpha, mean - k*std), mean + k*std].
Eigen::VectorXd MakeCandidateGrid(double mean_alpha, double std_alpha,
                                  const PhaseGridOptions& options = {});

// Fits alpha statistics from demonstration durations. Throws DataError for
// non-positive durations and ConfigError for an empty list.
PhaseModel FitPhase(std::span<const double> durations, double nominal_duration,
                    const PhaseGridOptions& options = {});

// A slice of the human stream. raw_times are relative to the window start;
// window_start is the elapsed time of the stream when the window opened.
struct ObservationBatch {
  Eigen::VectorXd raw_times;
  Eigen::MatrixXd values;  // s x P
  double window_start = 0.0;
  double window_duration = 0.0;
  int window_index = 0;
  std::optional<double> phase_alpha;
  Eigen::VectorXd z_indices;

  int size() const { return static_cast<int>(raw_times.size()); }
  bool empty() const { return raw_times.size() == 0; }
};

// Phases of the batch samples under scaling factor alpha:
//   z = (window_start + raw_time) / (alpha * nominal_duration),
// clamped to [0, 1].
Eigen::VectorXd MapToPhase(const ObservationBatch& batch, double alpha,
                           double nominal_duration);

// Copy of the batch with phase_alpha and z_indices filled in.
ObservationBatch RemapBatch(const ObservationBatch& batch, double alpha,
                            double nominal_duration);

}  // namespace ipromp

#endif  // IPROMP_PHASE_MODEL_H_
