#ifndef IPROMP_PIPELINE_H_
#define IPROMP_PIPELINE_H_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ipromp/blending.h"
#include "ipromp/metrics.h"
#include "ipromp/promp.h"
#include "ipromp/recognition.h"
#include "ipromp/synthgen.h"

namespace ipromp {

struct WindowConfig {
  Formulation mode = Formulation::kDynamic;
  // dow_t in seconds for dynamic runs, sow_f ratio in (0, 1] for static.
  double window = 1.0;
  // Keep one of every `subsample_stride` samples of the stream.
  int subsample_stride = 5;
};

struct PipelineOptions {
  int grid_points = 101;
  double blend_gradient = 20.0;
  // The rising edge is centered this many windows after the arrival phase.
  // The default centers it on the newest window.
  double switch_offset_windows = -0.5;
  // Estimate alpha from every observation so far instead of the newest
  // window only.
  bool cumulative_alpha = false;
  // Extra prior mass (as a multiplier 1 + sticky_prior) on the task that
  // won the previous window. Zero keeps recognition memoryless.
  double sticky_prior = 0.0;
  RecognitionOptions recognition;
  ConditionOptions condition;
  bool keep_blend_traces = false;
  // Record the blended-mean continuity check for every co-activation.
  bool check_continuity = true;
};

struct WindowTrace {
  int index = 0;
  double start = 0.0;
  double end = 0.0;
  int samples = 0;
  bool skipped = false;
  std::string task_id;
  Eigen::VectorXd log_posterior;
  Eigen::VectorXd alphas;
  double alpha = 1.0;
  double now = 0.0;
  bool tie = false;
};

// Largest step-to-step change of the blended mean against the bound
//   max_step(current) + max_step(incoming)
//     + 2 G (a_rise(now) + l dz / 4),
// G being the largest current/incoming mean gap over the blended phases.
struct ContinuityCheck {
  double max_step = 0.0;
  double bound = 0.0;
  bool ok() const { return max_step <= bound; }
};

ContinuityCheck CheckContinuity(const BlendState& before,
                                const BlendState& after);

struct RunRecord {
  ErrorContext context;
  std::vector<WindowTrace> windows;
  int expected_windows = 0;
  std::vector<std::vector<BlendTraceRow>> blend_traces;
  std::vector<ContinuityCheck> continuity;
  PredictedDistribution prediction;
  std::string recognized_task;
  double alpha_est = 1.0;
  double reference_duration = 1.0;
  ErrorReport errors;
  double wall_ms = 0.0;
};

// Number of dynamic windows for a stream of the given duration.
int WindowCount(double duration, double window);

// Human-only copy of the first P columns of a full demonstration.
Trajectory HumanPart(const Trajectory& demo, int human_dofs);
// Robot columns of a full demonstration.
Trajectory RobotPart(const Trajectory& demo, int human_dofs);

RunRecord RunDynamic(const TaskLibrary& library, const Trajectory& human,
                     const WindowConfig& config,
                     const PipelineOptions& options = {});

RunRecord RunStatic(const TaskLibrary& library, const Trajectory& human,
                    const WindowConfig& config,
                    const PipelineOptions& options = {});

// Fills record.errors against the held-out full demonstration.
void ScoreRun(RunRecord& record, const Trajectory& demo, int human_dofs,
              const ForwardKinematics& kinematics,
              JointErrorMode mode = JointErrorMode::kRms);

struct SweepConfig {
  std::vector<double> dynamic_windows = {1.0, 0.5, 0.2, 0.1};
  std::vector<double> static_ratios = {0.1, 0.2, 0.3, 0.4, 0.5,
                                       0.6, 0.7, 0.8, 0.9};
  int subsample_stride = 5;
};

struct LoocvOptions {
  int n_basis = 31;
  double basis_overlap = 1.0;
  FitOptions fit;
  PipelineOptions pipeline;
  SweepConfig sweep;
  JointErrorMode joint_error = JointErrorMode::kRms;
  // Folds whose dynamic runs keep blend traces.
  std::vector<int> trace_folds;
  // Worker threads; results are ordered by (fold, task, window) regardless.
  int jobs = 1;
  // Limit on folds (<= 0 means one per demo).
  int max_folds = 0;
};

struct AggregateRow {
  std::string experiment;
  std::string task;  // "all" averages every task
  Formulation formulation = Formulation::kDynamic;
  double window = 0.0;
  int n = 0;
  double e_p = 0.0;
  double e_q = 0.0;
  double e_phi = 0.0;
  double recognition_rate = 0.0;
};

// One flattened record as persisted in records.csv.
struct RecordRow {
  std::string experiment;
  std::string task;
  int fold = 0;
  Formulation formulation = Formulation::kDynamic;
  double window = 0.0;
  double e_p = 0.0;
  double e_q = 0.0;
  double e_phi = 0.0;
  std::string recognized;
  double alpha_est = 0.0;
  double alpha_true = 0.0;
  int n_windows = 0;
  double wall_ms = 0.0;

  bool correct() const { return recognized == task; }
};

RecordRow Flatten(const std::string& experiment, const RunRecord& record,
                  double alpha_true);

// Mean over folds per (task, formulation, window), plus "all" rows.
// Row order follows first appearance in `rows`.
std::vector<AggregateRow> Aggregate(const std::vector<RecordRow>& rows);

struct SelectionRow {
  std::string experiment;
  std::string task;
  MetricConfig gamma;
  WindowSelection selection;
};

// Window selection over the dynamic aggregate rows of every task for each
// gamma setting.
std::vector<SelectionRow> SelectWindows(const std::vector<AggregateRow>& rows,
                                        const std::vector<MetricConfig>& gammas);

// {1/3,1/3,1/3} and every permutation of {0.5,0.25,0.25}.
std::vector<MetricConfig> DefaultGammaSets();

struct LoocvResult {
  std::string experiment;
  std::vector<RunRecord> records;
  std::vector<RecordRow> rows;
  std::vector<AggregateRow> aggregate;
  std::vector<SelectionRow> selection;
  int folds = 0;
  int failed_folds = 0;
};

LoocvResult RunLoocv(const Experiment& experiment,
                     const LoocvOptions& options = {});

// Library trained on every demo of every task except `held_out` (-1 keeps
// all demos).
TaskLibrary TrainLibrary(const Experiment& experiment, int held_out,
                         const LoocvOptions& options = {});

}  // namespace ipromp

#endif  // IPROMP_PIPELINE_H_
