#include "ipromp/blending.h"

#include <cmath>
#include <limits>

#include "ipromp/error.h"

namespace ipromp {
namespace {

constexpr double kMinActivation = 1e-6;

Eigen::MatrixXd Precision(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) {
    return llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
  }
  Eigen::MatrixXd jittered = cov;
  jittered.diagonal().array() += 1e-9 + 1e-9 * cov.diagonal().cwiseAbs().maxCoeff();
  llt.compute(jittered);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("blend: covariance is not positive definite");
  }
  return llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
}

bool SameGrid(const PredictedDistribution& a, const PredictedDistribution& b) {
  return a.z_grid.size() == b.z_grid.size() && a.dofs() == b.dofs() &&
         (a.z_grid - b.z_grid).cwiseAbs().maxCoeff() <= 1e-12;
}

Eigen::VectorXd StdDev(const Eigen::MatrixXd& cov) {
  return cov.diagonal().cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

ActivationProfile ActivationProfile::Mirrored() const {
  ActivationProfile m = *this;
  m.kind = kind == ActivationKind::kRise ? ActivationKind::kFall
                                         : ActivationKind::kRise;
  return m;
}

double Activation(const ActivationProfile& profile, double t) {
  const double x = profile.gradient * (t - profile.switch_time);
  const double a = profile.kind == ActivationKind::kRise
                       ? 1.0 / (1.0 + std::exp(-x))
                       : 1.0 / (1.0 + std::exp(x));
  // Keep the value inside the open interval even when exp saturates.
  constexpr double kTiny = std::numeric_limits<double>::min();
  return std::clamp(a, kTiny, 1.0 - std::numeric_limits<double>::epsilon() / 2);
}

Gaussian ProductStep(std::span<const Gaussian> dists,
                     std::span<const double> activations) {
  if (dists.empty() || dists.size() != activations.size()) {
    throw ConfigError("blend: need one activation per distribution");
  }
  const Eigen::Index dim = dists.front().mean.size();
  bool any_active = false;
  for (size_t i = 0; i < dists.size(); ++i) {
    const double a = activations[i];
    if (!(a >= 0.0 && a <= 1.0)) {
      throw ConfigError("blend: activations must lie in [0, 1]");
    }
    if (dists[i].mean.size() != dim || dists[i].cov.rows() != dim ||
        dists[i].cov.cols() != dim) {
      throw DataError(DataErrorKind::kDimension,
                      "blend: distributions differ in dimension");
    }
    if (a > kMinActivation) any_active = true;
  }
  if (!any_active) {
    throw NumericalError("blend: every activation is below 1e-6");
  }

  Eigen::MatrixXd precision = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd info = Eigen::VectorXd::Zero(dim);
  for (size_t i = 0; i < dists.size(); ++i) {
    if (activations[i] == 0.0) continue;
    const Eigen::MatrixXd p = activations[i] * Precision(dists[i].cov);
    precision += p;
    info.noalias() += p * dists[i].mean;
  }
  precision = 0.5 * (precision + precision.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("blend: combined precision is singular");
  }
  Gaussian out;
  out.cov = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  out.mean = llt.solve(info);
  return out;
}

BlendState StartBlend(PredictedDistribution initial) {
  BlendState state;
  state.current = std::move(initial);
  return state;
}

BlendState BlendUpdate(const BlendState& state,
                       const PredictedDistribution& incoming,
                       const ActivationProfile& schedule, double now) {
  if (!SameGrid(state.current, incoming)) {
    throw DataError(DataErrorKind::kDimension,
                    "blend: current and incoming grids differ");
  }
  BlendState next = state;
  next.rise = schedule;
  next.rise.kind = ActivationKind::kRise;
  next.fall = next.rise.Mirrored();
  next.incoming = incoming;
  next.executed_until = std::max(state.executed_until, now);
  next.current.source_task = incoming.source_task;

  std::array<Gaussian, 2> pair;
  std::array<double, 2> act;
  for (int m = 0; m < incoming.size(); ++m) {
    const double z = incoming.z_grid[m];
    if (z < now) continue;
    pair[0] = state.current.At(m);
    pair[1] = incoming.At(m);
    act[0] = Activation(next.fall, z);
    act[1] = Activation(next.rise, z);
    const Gaussian g = ProductStep(pair, act);
    next.current.means.row(m) = g.mean.transpose();
    next.current.covariances[m] = g.cov;
  }
  ++next.blend_count;
  return next;
}

std::vector<BlendTraceRow> TraceBlend(const BlendState& before,
                                      const BlendState& after) {
  std::vector<BlendTraceRow> rows;
  if (!after.incoming) return rows;
  const PredictedDistribution& in = *after.incoming;
  rows.reserve(in.size());
  for (int m = 0; m < in.size(); ++m) {
    BlendTraceRow r;
    r.z = in.z_grid[m];
    const bool active = r.z >= after.executed_until;
    r.a_fall = active ? Activation(after.fall, r.z) : 1.0;
    r.a_rise = active ? Activation(after.rise, r.z) : 0.0;
    r.current_mean = before.current.means.row(m).transpose();
    r.current_std = StdDev(before.current.covariances[m]);
    r.incoming_mean = in.means.row(m).transpose();
    r.incoming_std = StdDev(in.covariances[m]);
    r.blended_mean = after.current.means.row(m).transpose();
    r.blended_std = StdDev(after.current.covariances[m]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace ipromp
