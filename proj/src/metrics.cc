#include "ipromp/metrics.h"

#include <algorithm>
#include <cmath>

#include "ipromp/error.h"

namespace ipromp {

ForwardKinematics ForwardKinematics::Passthrough() { return ForwardKinematics({}); }

ForwardKinematics ForwardKinematics::PlanarChain(std::vector<double> link_lengths) {
  if (link_lengths.empty()) {
    throw ConfigError("kinematics: planar chain needs at least one link");
  }
  for (double l : link_lengths) {
    if (!(l > 0.0)) throw ConfigError("kinematics: link lengths must be positive");
  }
  return ForwardKinematics(std::move(link_lengths));
}

Eigen::VectorXd ForwardKinematics::operator()(const Eigen::VectorXd& q) const {
  if (!q.allFinite()) {
    throw NumericalError("kinematics: non-finite joint vector");
  }
  if (passthrough()) return q;
  if (q.size() != static_cast<Eigen::Index>(links_.size())) {
    throw DataError(DataErrorKind::kDimension,
                    "kinematics: joint count does not match the chain");
  }
  Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
  double angle = 0.0;
  for (size_t i = 0; i < links_.size(); ++i) {
    angle += q[static_cast<Eigen::Index>(i)];
    p[0] += links_[i] * std::cos(angle);
    p[1] += links_[i] * std::sin(angle);
  }
  return p;
}

const char* FormulationName(Formulation f) {
  return f == Formulation::kStatic ? "static" : "dynamic";
}

Eigen::MatrixXd SampleAtPhases(const Trajectory& traj,
                               const Eigen::VectorXd& z_values) {
  traj.Validate();
  const Eigen::VectorXd u = traj.timestamps / traj.duration();
  Eigen::MatrixXd out(z_values.size(), traj.dofs());
  for (Eigen::Index m = 0; m < z_values.size(); ++m) {
    const double z = std::clamp(z_values[m], 0.0, 1.0);
    const auto it = std::upper_bound(u.data(), u.data() + u.size(), z);
    Eigen::Index k = std::clamp<Eigen::Index>(it - u.data() - 1, 0, u.size() - 2);
    const double f = std::clamp((z - u[k]) / (u[k + 1] - u[k]), 0.0, 1.0);
    out.row(m) = (1.0 - f) * traj.samples.row(k) + f * traj.samples.row(k + 1);
  }
  return out;
}

ErrorReport ComputeErrors(const PredictedDistribution& predicted,
                          const Trajectory& ground_truth, double alpha_est,
                          double alpha_true, double reference_duration,
                          const ForwardKinematics& kinematics,
                          JointErrorMode mode) {
  if (ground_truth.dofs() != predicted.dofs()) {
    throw DataError(DataErrorKind::kDimension,
                    "metrics: ground truth and prediction differ in DoFs");
  }
  if (predicted.size() == 0) {
    throw DataError(DataErrorKind::kDimension, "metrics: empty prediction");
  }
  const Eigen::MatrixXd truth = SampleAtPhases(ground_truth, predicted.z_grid);
  const Eigen::Index last = predicted.size() - 1;

  ErrorReport r;
  r.e_p = (kinematics(predicted.means.row(last).transpose()) -
           kinematics(truth.row(last).transpose()))
              .norm();
  const Eigen::VectorXd step_errors = (predicted.means - truth).rowwise().norm();
  r.e_q = mode == JointErrorMode::kRms
              ? std::sqrt(step_errors.squaredNorm() /
                          static_cast<double>(step_errors.size()))
              : step_errors.sum();
  r.e_phi = std::abs(alpha_est - alpha_true) * reference_duration;
  if (!std::isfinite(r.e_p) || !std::isfinite(r.e_q) || !std::isfinite(r.e_phi)) {
    throw NumericalError("metrics: non-finite error value");
  }
  return r;
}

ErrorDelta ErrorDifference(const ErrorReport& static_report,
                           const ErrorReport& dynamic_report) {
  if (static_report.context.task_id != dynamic_report.context.task_id ||
      static_report.context.fold != dynamic_report.context.fold) {
    throw ConfigError("metrics: reports belong to different task/fold pairs");
  }
  return {static_report.e_p - dynamic_report.e_p,
          static_report.e_q - dynamic_report.e_q,
          static_report.e_phi - dynamic_report.e_phi};
}

void MetricConfig::Validate() const {
  if (gamma_p < 0.0 || gamma_q < 0.0 || gamma_phi < 0.0) {
    throw ConfigError("metric: weights must be non-negative");
  }
  if (std::abs(gamma_p + gamma_q + gamma_phi - 1.0) > 1e-9) {
    throw ConfigError("metric: weights must sum to one");
  }
}

WindowSelection SelectWindow(const std::map<double, ErrorReport>& reports,
                             const MetricConfig& config) {
  config.Validate();
  if (reports.empty()) throw ConfigError("metric: no windows to select from");
  WindowSelection sel;
  double max_p = 0.0, max_q = 0.0, max_phi = 0.0;
  for (const auto& [w, r] : reports) {
    sel.windows.push_back(w);
    max_p = std::max(max_p, r.e_p);
    max_q = std::max(max_q, r.e_q);
    max_phi = std::max(max_phi, r.e_phi);
  }
  auto term = [](double gamma, double e, double max) {
    return max > 0.0 ? gamma * e / max : 0.0;
  };
  for (const auto& [w, r] : reports) {
    sel.m.push_back(term(config.gamma_p, r.e_p, max_p) +
                    term(config.gamma_q, r.e_q, max_q) +
                    term(config.gamma_phi, r.e_phi, max_phi));
  }
  // Windows are ascending, so the first minimum is the shortest window.
  const auto best = std::min_element(sel.m.begin(), sel.m.end());
  sel.best_window = sel.windows[static_cast<size_t>(best - sel.m.begin())];
  sel.degenerate = reports.size() < 2;
  return sel;
}

}  // namespace ipromp
