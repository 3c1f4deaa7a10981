#ifndef IPROMP_BLENDING_H_
#define IPROMP_BLENDING_H_

#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "ipromp/promp.h"

namespace ipromp {

enum class ActivationKind { kRise, kFall };

// Logistic activation centered at switch_time:
//   rise(t) = 1 / (1 + exp(-l (t - switch_time)))
//   fall(t) = 1 / (1 + exp( l (t - switch_time)))
struct ActivationProfile {
  double gradient = 20.0;
  double switch_time = 0.5;
  ActivationKind kind = ActivationKind::kRise;

  ActivationProfile Mirrored() const;
};

double Activation(const ActivationProfile& profile, double t);

// Activation-weighted product of Gaussians:
//   Sigma* = (sum_i a_i Sigma_i^-1)^-1,  mu* = Sigma* sum_i a_i Sigma_i^-1 mu_i.
// Throws NumericalError when every activation is <= 1e-6 or a covariance
// cannot be inverted, ConfigError for activations outside [0, 1].
Gaussian ProductStep(std::span<const Gaussian> dists,
                     std::span<const double> activations);

struct BlendState {
  PredictedDistribution current;
  std::optional<PredictedDistribution> incoming;
  ActivationProfile rise;
  ActivationProfile fall{20.0, 0.5, ActivationKind::kFall};
  int blend_count = 0;
  // Grid phases strictly below this value are already executed.
  double executed_until = 0.0;
};

BlendState StartBlend(PredictedDistribution initial);

// Co-activates state.current (falling edge) with `incoming` (rising edge
// `schedule`) at every grid phase >= now. Executed phases keep the current
// distribution. Throws DataError(kDimension) when the grids differ.
BlendState BlendUpdate(const BlendState& state,
                       const PredictedDistribution& incoming,
                       const ActivationProfile& schedule, double now);

// Per-phase snapshot of one co-activation for plotting.
struct BlendTraceRow {
  double z = 0.0;
  double a_fall = 0.0;
  double a_rise = 0.0;
  Eigen::VectorXd current_mean, current_std;
  Eigen::VectorXd incoming_mean, incoming_std;
  Eigen::VectorXd blended_mean, blended_std;
};

std::vector<BlendTraceRow> TraceBlend(const BlendState& before,
                                      const BlendState& after);

}  // namespace ipromp

#endif  // IPROMP_BLENDING_H_
