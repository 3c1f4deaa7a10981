#include "ipromp/recognition.h"

#include <cmath>
#include <limits>
#include <set>

#include "ipromp/error.h"

namespace ipromp {
namespace {

void CheckPriors(const Eigen::VectorXd& priors, int tasks) {
  if (priors.size() != tasks) {
    throw ConfigError("recognition: need one prior per task");
  }
  if ((priors.array() < 0.0).any() || !priors.allFinite()) {
    throw ConfigError("recognition: priors must be non-negative");
  }
  if (std::abs(priors.sum() - 1.0) > 1e-12) {
    throw ConfigError("recognition: priors must sum to one");
  }
}

}  // namespace

void TaskLibrary::Validate() const {
  if (tasks.empty()) throw ConfigError("recognition: empty task library");
  std::set<std::string> ids;
  for (const TaskEntry& t : tasks) {
    if (!ids.insert(t.task_id).second) {
      throw ConfigError("recognition: duplicate task id '" + t.task_id + "'");
    }
  }
  if (priors.size() != 0) CheckPriors(priors, size());
}

int TaskLibrary::Find(const std::string& task_id) const {
  for (int k = 0; k < size(); ++k) {
    if (tasks[k].task_id == task_id) return k;
  }
  return -1;
}

Eigen::VectorXd TaskLibrary::EffectivePriors() const {
  if (priors.size() != 0) return priors;
  return Eigen::VectorXd::Constant(size(), 1.0 / size());
}

RecognitionResult Recognize(const TaskLibrary& library,
                            const ObservationBatch& batch,
                            const RecognitionOptions& options) {
  library.Validate();
  if (batch.empty()) throw ConfigError("recognition: empty observation batch");
  Eigen::VectorXd priors = library.EffectivePriors();
  if (options.priors.size() != 0) {
    CheckPriors(options.priors, library.size());
    priors = options.priors;
  }

  const int k_count = library.size();
  RecognitionResult result;
  result.phase.reserve(k_count);
  for (const TaskEntry& task : library.tasks) {
    result.phase.push_back(EstimateAlpha(task.model, batch, options.phase));
  }

  result.alphas.resize(k_count);
  result.log_evidence.resize(k_count);
  if (!options.global_alpha) {
    for (int k = 0; k < k_count; ++k) {
      result.alphas[k] = result.phase[k].alpha;
      result.log_evidence[k] = result.phase[k].best_log_likelihood;
    }
  } else {
    int owner = 0;
    for (int k = 1; k < k_count; ++k) {
      const PhaseEstimate& e = result.phase[k];
      if (e.log_score[e.index] >
          result.phase[owner].log_score[result.phase[owner].index]) {
        owner = k;
      }
    }
    const double alpha = result.phase[owner].alpha;
    for (int k = 0; k < k_count; ++k) {
      const PrompModel& m = library.tasks[k].model;
      result.alphas[k] = alpha;
      result.log_evidence[k] = ObservationLogLikelihood(
          m, MapToPhase(batch, alpha, m.phase.nominal_duration), batch.values);
    }
  }

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd score(k_count);
  for (int k = 0; k < k_count; ++k) {
    score[k] = priors[k] > 0.0 ? result.log_evidence[k] + std::log(priors[k])
                               : kNegInf;
  }
  int best = -1;
  for (int k = 0; k < k_count; ++k) {
    if (score[k] == kNegInf || std::isnan(score[k])) continue;
    if (best < 0 || score[k] > score[best]) best = k;
  }
  if (best < 0) {
    throw NumericalError("recognition: every task has zero evidence");
  }
  // Near-equal evidences resolve to the lowest index and raise the flag.
  constexpr double kTieTolerance = 1e-9;
  for (int k = 0; k < k_count; ++k) {
    if (k != best && score[k] != kNegInf &&
        score[best] - score[k] <= kTieTolerance) {
      result.tie = true;
      if (k < best) best = k;
    }
  }
  double sum = 0.0;
  for (int k = 0; k < k_count; ++k) {
    if (score[k] != kNegInf) sum += std::exp(score[k] - score[best]);
  }
  result.log_posterior = score.array() - (score[best] + std::log(sum));
  result.best = best;
  result.task_id = library.tasks[best].task_id;
  return result;
}

}  // namespace ipromp
