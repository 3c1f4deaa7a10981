#ifndef IPROMP_METRICS_H_
#define IPROMP_METRICS_H_

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ipromp/promp.h"

namespace ipromp {

// Maps a robot joint vector to an end-effector position.
class ForwardKinematics {
 public:
  // Robot DoFs already are Cartesian coordinates.
  static ForwardKinematics Passthrough();
  // Planar serial chain; joint i rotates link i relative to link i-1.
  static ForwardKinematics PlanarChain(std::vector<double> link_lengths);

  bool passthrough() const { return links_.empty(); }
  const std::vector<double>& link_lengths() const { return links_; }

  // Throws NumericalError for non-finite joints and DataError when the
  // joint count does not match the chain.
  Eigen::VectorXd operator()(const Eigen::VectorXd& q) const;

 private:
  explicit ForwardKinematics(std::vector<double> links)
      : links_(std::move(links)) {}
  std::vector<double> links_;
};

enum class Formulation { kStatic, kDynamic };

const char* FormulationName(Formulation f);

struct ErrorContext {
  Formulation formulation = Formulation::kDynamic;
  double window = 0.0;  // dow_t seconds or sow_f ratio
  std::string task_id;
  int fold = 0;
};

struct ErrorReport {
  double e_p = 0.0;    // final Cartesian goal error
  double e_q = 0.0;    // joint trajectory error
  double e_phi = 0.0;  // phase error, seconds
  ErrorContext context;
};

enum class JointErrorMode {
  kRms,  // sqrt(mean_t ||dq_t||^2)
  kSum,  // sum_t ||dq_t||
};

// Values of a trajectory at normalized phases (t / duration), linearly
// interpolated.
Eigen::MatrixXd SampleAtPhases(const Trajectory& traj,
                               const Eigen::VectorXd& z_values);

// ground_truth holds the robot DoFs of the held-out demonstration.
// e_phi = |alpha_est - alpha_true| * reference_duration.
ErrorReport ComputeErrors(const PredictedDistribution& predicted,
                          const Trajectory& ground_truth, double alpha_est,
                          double alpha_true, double reference_duration,
                          const ForwardKinematics& kinematics,
                          JointErrorMode mode = JointErrorMode::kRms);

struct ErrorDelta {
  double d_p = 0.0;
  double d_q = 0.0;
  double d_phi = 0.0;
};

// Static minus dynamic; positive means the dynamic formulation did better.
// Throws ConfigError when task or fold differ.
ErrorDelta ErrorDifference(const ErrorReport& static_report,
                           const ErrorReport& dynamic_report);

struct MetricConfig {
  double gamma_p = 1.0 / 3.0;
  double gamma_q = 1.0 / 3.0;
  double gamma_phi = 1.0 / 3.0;
  // Throws ConfigError for negative weights or a sum other than one.
  void Validate() const;
};

struct WindowSelection {
  double best_window = 0.0;
  std::vector<double> windows;  // ascending
  std::vector<double> m;        // aligned with windows
  bool degenerate = false;      // fewer than two windows
};

// m(w) = sum_i gamma_i e_i(w) / max_w' e_i(w'); a measure whose maximum is
// zero contributes nothing. Ties go to the shortest window.
WindowSelection SelectWindow(const std::map<double, ErrorReport>& reports,
                             const MetricConfig& config);

}  // namespace ipromp

#endif  // IPROMP_METRICS_H_
