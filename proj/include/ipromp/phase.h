#ifndef IPROMP_PHASE_H_
#define IPROMP_PHASE_H_

#include <Eigen/Dense>

#include "ipromp/phase_model.h"
#include "ipromp/promp.h"

namespace ipromp {

struct PhaseOptions {
  // Ignore the Gaussian prior on alpha (pure maximum likelihood).
  bool flat_prior = false;
};

struct PhaseEstimate {
  double alpha = 1.0;
  int index = 0;
  Eigen::VectorXd candidates;
  Eigen::VectorXd log_likelihood;  // per candidate
  Eigen::VectorXd log_score;       // log likelihood + log prior
  Eigen::VectorXd log_posterior;   // log_score normalized over the grid
  double best_log_likelihood = 0.0;
};

// MAP temporal scaling factor of `batch` under `model` over the model's
// candidate grid. Ties go to the candidate closest to mean_alpha.
// Throws ConfigError for an empty batch and NumericalError when every
// candidate scores -inf.
PhaseEstimate EstimateAlpha(const PrompModel& model,
                            const ObservationBatch& batch,
                            const PhaseOptions& options = {});

// log N(alpha | mean, std).
double LogAlphaPrior(const PhaseModel& phase, double alpha);

}  // namespace ipromp

#endif  // IPROMP_PHASE_H_
