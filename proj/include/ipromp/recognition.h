#ifndef IPROMP_RECOGNITION_H_
#define IPROMP_RECOGNITION_H_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ipromp/phase.h"
#include "ipromp/promp.h"

namespace ipromp {

struct TaskEntry {
  std::string task_id;
  PrompModel model;
};

struct TaskLibrary {
  std::vector<TaskEntry> tasks;
  Eigen::VectorXd priors;  // p(k); empty means uniform

  int size() const { return static_cast<int>(tasks.size()); }
  // Throws ConfigError on an empty library, duplicate ids, or priors that
  // are negative or do not sum to one.
  void Validate() const;
  // Index of task_id or -1.
  int Find(const std::string& task_id) const;
  // Priors with the uniform default filled in.
  Eigen::VectorXd EffectivePriors() const;
};

struct RecognitionOptions {
  // Estimate one alpha (the joint best over tasks and candidates) and
  // compare every task at it, instead of each task at its own alpha.
  bool global_alpha = false;
  PhaseOptions phase;
  // Overrides the library priors when non-empty (must sum to one).
  Eigen::VectorXd priors;
};

struct RecognitionResult {
  int best = 0;
  std::string task_id;
  Eigen::VectorXd log_posterior;  // normalized over tasks
  Eigen::VectorXd log_evidence;   // log p(y | theta_k, alpha_k)
  Eigen::VectorXd alphas;         // alpha used per task
  std::vector<PhaseEstimate> phase;
  bool tie = false;

  Eigen::VectorXd Posterior() const { return log_posterior.array().exp(); }
};

RecognitionResult Recognize(const TaskLibrary& library,
                            const ObservationBatch& batch,
                            const RecognitionOptions& options = {});

}  // namespace ipromp

#endif  // IPROMP_RECOGNITION_H_
