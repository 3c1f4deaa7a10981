#include "ipromp/pipeline.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <thread>
#include <tuple>

#include "ipromp/error.h"
#include "ipromp/phase.h"

namespace ipromp {
namespace {

constexpr double kTimeEps = 1e-9;

struct Sample {
  double t;
  Eigen::Index row;
};

// Kept sample indices (every stride-th row of the stream).
std::vector<Sample> Subsample(const Trajectory& human, int stride) {
  if (stride < 1) throw ConfigError("pipeline: subsample_stride must be >= 1");
  std::vector<Sample> out;
  for (Eigen::Index k = 0; k < human.steps(); k += stride) {
    out.push_back({human.timestamps[k], k});
  }
  return out;
}

ObservationBatch MakeBatch(const Trajectory& human,
                           const std::vector<Sample>& samples,
                           double window_start, double window_duration,
                           int index) {
  ObservationBatch batch;
  batch.window_start = window_start;
  batch.window_duration = window_duration;
  batch.window_index = index;
  batch.raw_times.resize(static_cast<Eigen::Index>(samples.size()));
  batch.values.resize(static_cast<Eigen::Index>(samples.size()), human.dofs());
  for (size_t j = 0; j < samples.size(); ++j) {
    const auto r = static_cast<Eigen::Index>(j);
    batch.raw_times[r] = std::max(0.0, samples[j].t - window_start);
    batch.values.row(r) = human.samples.row(samples[j].row);
  }
  return batch;
}

void CheckHuman(const TaskLibrary& library, const Trajectory& human) {
  library.Validate();
  human.Validate();
  const int p = library.tasks.front().model.layout.human_dofs;
  if (human.dofs() != p) {
    throw DataError(DataErrorKind::kDimension,
                    "pipeline: stream width does not match the human DoFs");
  }
}

Eigen::VectorXd StickyPriors(const TaskLibrary& library, int previous,
                             double sticky) {
  Eigen::VectorXd priors = library.EffectivePriors();
  if (previous < 0 || sticky <= 0.0) return priors;
  priors[previous] *= 1.0 + sticky;
  return priors / priors.sum();
}

struct Step {
  WindowTrace trace;
  PredictedDistribution prediction;
  double reference_duration = 1.0;
  int task = 0;
};

// Recognize, condition, and predict on one observation batch.
Step Process(const TaskLibrary& library, const ObservationBatch& batch,
             const ObservationBatch* alpha_batch, const Eigen::VectorXd& z_grid,
             const PipelineOptions& options, int previous) {
  RecognitionOptions ro = options.recognition;
  if (options.sticky_prior > 0.0) {
    ro.priors = StickyPriors(library, previous, options.sticky_prior);
  }
  const RecognitionResult rec = Recognize(library, batch, ro);
  const PrompModel& model = library.tasks[rec.best].model;
  double alpha = rec.alphas[rec.best];
  if (alpha_batch != nullptr) {
    alpha = EstimateAlpha(model, *alpha_batch, ro.phase).alpha;
  }
  const ObservationBatch remapped =
      RemapBatch(batch, alpha, model.phase.nominal_duration);
  const PrompModel posterior = Condition(model, remapped, options.condition);

  Step step;
  step.task = rec.best;
  step.reference_duration = model.phase.nominal_duration;
  step.prediction = PredictRobot(posterior, z_grid, rec.task_id);
  step.trace.index = batch.window_index;
  step.trace.samples = batch.size();
  step.trace.task_id = rec.task_id;
  step.trace.log_posterior = rec.log_posterior;
  step.trace.alphas = rec.alphas;
  step.trace.alpha = alpha;
  step.trace.tie = rec.tie;
  return step;
}

double MaxStep(const Eigen::MatrixXd& means) {
  double worst = 0.0;
  for (Eigen::Index m = 1; m < means.rows(); ++m) {
    worst = std::max(worst,
                     (means.row(m) - means.row(m - 1)).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace

ContinuityCheck CheckContinuity(const BlendState& before,
                                const BlendState& after) {
  ContinuityCheck check;
  if (!after.incoming) return check;
  const PredictedDistribution& in = *after.incoming;
  const Eigen::VectorXd& z = in.z_grid;
  check.max_step = MaxStep(after.current.means);

  double gap = 0.0;
  double dz = 0.0;
  for (Eigen::Index m = 0; m < z.size(); ++m) {
    if (m > 0) dz = std::max(dz, z[m] - z[m - 1]);
    if (z[m] < after.executed_until) continue;
    gap = std::max(gap, (in.means.row(m) - before.current.means.row(m))
                            .cwiseAbs()
                            .maxCoeff());
  }
  const double entry = Activation(after.rise, after.executed_until);
  check.bound = MaxStep(before.current.means) + MaxStep(in.means) +
                2.0 * gap * (entry + after.rise.gradient * dz / 4.0);
  return check;
}

int WindowCount(double duration, double window) {
  if (!(window > 0.0)) throw ConfigError("pipeline: window must be positive");
  return std::max(1, static_cast<int>(std::ceil(duration / window - kTimeEps)));
}

Trajectory HumanPart(const Trajectory& demo, int human_dofs) {
  Trajectory t;
  t.timestamps = demo.timestamps;
  t.samples = demo.samples.leftCols(human_dofs);
  t.kind = DofKind::kHumanOnly;
  return t;
}

Trajectory RobotPart(const Trajectory& demo, int human_dofs) {
  Trajectory t;
  t.timestamps = demo.timestamps;
  t.samples = demo.samples.rightCols(demo.dofs() - human_dofs);
  t.kind = DofKind::kFull;
  return t;
}

RunRecord RunDynamic(const TaskLibrary& library, const Trajectory& human,
                     const WindowConfig& config,
                     const PipelineOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  if (config.mode != Formulation::kDynamic) {
    throw ConfigError("pipeline: RunDynamic needs a dynamic window config");
  }
  CheckHuman(library, human);
  const double dow = config.window;
  const double duration = human.duration();
  const int n_windows = WindowCount(duration, dow);
  const Eigen::VectorXd z_grid =
      Eigen::VectorXd::LinSpaced(options.grid_points, 0.0, 1.0);

  std::vector<std::vector<Sample>> slices(static_cast<size_t>(n_windows));
  for (const Sample& s : Subsample(human, config.subsample_stride)) {
    const int w = std::min(n_windows - 1,
                           static_cast<int>(std::floor(s.t / dow + kTimeEps)));
    slices[static_cast<size_t>(w)].push_back(s);
  }

  RunRecord record;
  record.context = {Formulation::kDynamic, dow, "", 0};
  record.expected_windows = n_windows;
  std::optional<BlendState> state;
  std::vector<Sample> seen;
  int previous = -1;
  for (int w = 0; w < n_windows; ++w) {
    const double start = w * dow;
    const double end = std::min((w + 1) * dow, duration);
    const auto& slice = slices[static_cast<size_t>(w)];
    seen.insert(seen.end(), slice.begin(), slice.end());
    if (slice.empty()) {
      WindowTrace skipped;
      skipped.index = w;
      skipped.start = start;
      skipped.end = end;
      skipped.skipped = true;
      record.windows.push_back(std::move(skipped));
      continue;
    }
    const ObservationBatch batch = MakeBatch(human, slice, start, dow, w);
    std::optional<ObservationBatch> history;
    if (options.cumulative_alpha) history = MakeBatch(human, seen, 0.0, end, w);
    Step step = Process(library, batch, history ? &*history : nullptr, z_grid,
                        options, previous);
    previous = step.task;
    step.trace.start = start;
    step.trace.end = end;
    const double scale = 1.0 / (step.trace.alpha * step.reference_duration);
    step.trace.now = std::clamp(end * scale, 0.0, 1.0);

    if (!state) {
      state = StartBlend(std::move(step.prediction));
    } else {
      ActivationProfile schedule;
      schedule.gradient = options.blend_gradient;
      schedule.switch_time =
          step.trace.now + options.switch_offset_windows * dow * scale;
      BlendState next =
          BlendUpdate(*state, step.prediction, schedule, step.trace.now);
      if (options.keep_blend_traces) {
        record.blend_traces.push_back(TraceBlend(*state, next));
      }
      if (options.check_continuity) {
        record.continuity.push_back(CheckContinuity(*state, next));
      }
      state = std::move(next);
    }
    record.recognized_task = step.trace.task_id;
    record.alpha_est = step.trace.alpha;
    record.reference_duration = step.reference_duration;
    record.windows.push_back(std::move(step.trace));
  }
  if (!state) {
    throw DataError(DataErrorKind::kDimension,
                    "pipeline: no window kept any sample");
  }
  record.prediction = std::move(state->current);
  record.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - started)
                       .count();
  return record;
}

RunRecord RunStatic(const TaskLibrary& library, const Trajectory& human,
                    const WindowConfig& config,
                    const PipelineOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  if (config.mode != Formulation::kStatic) {
    throw ConfigError("pipeline: RunStatic needs a static window config");
  }
  if (!(config.window > 0.0 && config.window <= 1.0)) {
    throw ConfigError("pipeline: static ratio must lie in (0, 1]");
  }
  CheckHuman(library, human);
  const double horizon = config.window * human.duration();
  std::vector<Sample> kept;
  for (const Sample& s : Subsample(human, config.subsample_stride)) {
    if (s.t <= horizon + kTimeEps) kept.push_back(s);
  }
  if (kept.empty()) {
    throw DataError(DataErrorKind::kDimension,
                    "pipeline: static window kept no sample");
  }
  // The whole observation is one window starting at the stream origin, so
  // a dynamic run with one window takes exactly the same path.
  const ObservationBatch batch = MakeBatch(human, kept, 0.0, horizon, 0);
  const Eigen::VectorXd z_grid =
      Eigen::VectorXd::LinSpaced(options.grid_points, 0.0, 1.0);
  Step step = Process(library, batch, nullptr, z_grid, options, -1);
  step.trace.start = 0.0;
  step.trace.end = horizon;
  step.trace.now = std::clamp(
      horizon / (step.trace.alpha * step.reference_duration), 0.0, 1.0);

  RunRecord record;
  record.context = {Formulation::kStatic, config.window, "", 0};
  record.expected_windows = 1;
  record.prediction = std::move(step.prediction);
  record.recognized_task = step.trace.task_id;
  record.alpha_est = step.trace.alpha;
  record.reference_duration = step.reference_duration;
  record.windows.push_back(std::move(step.trace));
  record.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - started)
                       .count();
  return record;
}

void ScoreRun(RunRecord& record, const Trajectory& demo, int human_dofs,
              const ForwardKinematics& kinematics, JointErrorMode mode) {
  const double alpha_true = demo.duration() / record.reference_duration;
  ErrorReport r = ComputeErrors(record.prediction, RobotPart(demo, human_dofs),
                                record.alpha_est, alpha_true,
                                record.reference_duration, kinematics, mode);
  r.context = record.context;
  record.errors = r;
}

RecordRow Flatten(const std::string& experiment, const RunRecord& record,
                  double alpha_true) {
  RecordRow row;
  row.experiment = experiment;
  row.task = record.context.task_id;
  row.fold = record.context.fold;
  row.formulation = record.context.formulation;
  row.window = record.context.window;
  row.e_p = record.errors.e_p;
  row.e_q = record.errors.e_q;
  row.e_phi = record.errors.e_phi;
  row.recognized = record.recognized_task;
  row.alpha_est = record.alpha_est;
  row.alpha_true = alpha_true;
  row.n_windows = static_cast<int>(record.windows.size());
  row.wall_ms = record.wall_ms;
  return row;
}

std::vector<AggregateRow> Aggregate(const std::vector<RecordRow>& rows) {
  using Key = std::tuple<std::string, std::string, int, double>;
  std::vector<Key> order;
  std::map<Key, AggregateRow> acc;
  std::vector<std::string> tasks;
  auto add = [&](const Key& key, const RecordRow& r) {
    auto [it, inserted] = acc.try_emplace(key);
    AggregateRow& a = it->second;
    if (inserted) {
      order.push_back(key);
      a.experiment = std::get<0>(key);
      a.task = std::get<1>(key);
      a.formulation = static_cast<Formulation>(std::get<2>(key));
      a.window = std::get<3>(key);
    }
    ++a.n;
    a.e_p += r.e_p;
    a.e_q += r.e_q;
    a.e_phi += r.e_phi;
    a.recognition_rate += r.correct() ? 1.0 : 0.0;
  };
  for (const RecordRow& r : rows) {
    add({r.experiment, r.task, static_cast<int>(r.formulation), r.window}, r);
  }
  for (const RecordRow& r : rows) {
    add({r.experiment, "all", static_cast<int>(r.formulation), r.window}, r);
  }
  std::vector<AggregateRow> out;
  out.reserve(order.size());
  for (const Key& key : order) {
    AggregateRow a = acc.at(key);
    const double n = static_cast<double>(a.n);
    a.e_p /= n;
    a.e_q /= n;
    a.e_phi /= n;
    a.recognition_rate /= n;
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<MetricConfig> DefaultGammaSets() {
  return {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
          {0.5, 0.25, 0.25},
          {0.25, 0.5, 0.25},
          {0.25, 0.25, 0.5}};
}

std::vector<SelectionRow> SelectWindows(const std::vector<AggregateRow>& rows,
                                        const std::vector<MetricConfig>& gammas) {
  std::vector<std::pair<std::string, std::string>> groups;
  std::map<std::pair<std::string, std::string>, std::map<double, ErrorReport>>
      tables;
  for (const AggregateRow& a : rows) {
    if (a.formulation != Formulation::kDynamic) continue;
    const auto key = std::make_pair(a.experiment, a.task);
    if (!tables.count(key)) groups.push_back(key);
    ErrorReport r;
    r.e_p = a.e_p;
    r.e_q = a.e_q;
    r.e_phi = a.e_phi;
    r.context = {Formulation::kDynamic, a.window, a.task, -1};
    tables[key][a.window] = r;
  }
  std::vector<SelectionRow> out;
  for (const auto& key : groups) {
    for (const MetricConfig& g : gammas) {
      out.push_back({key.first, key.second, g, SelectWindow(tables.at(key), g)});
    }
  }
  return out;
}

TaskLibrary TrainLibrary(const Experiment& experiment, int held_out,
                         const LoocvOptions& options) {
  const BasisSystem basis =
      BasisSystem::Uniform(options.n_basis, options.basis_overlap);
  TaskLibrary lib;
  for (const TaskDataset& t : experiment.tasks) {
    std::vector<Trajectory> train;
    for (size_t i = 0; i < t.demos.size(); ++i) {
      if (static_cast<int>(i) != held_out) train.push_back(t.demos[i]);
    }
    lib.tasks.push_back(
        {t.spec.task_id,
         FitModel(train, experiment.layout, basis, -1.0, options.fit)});
  }
  return lib;
}

LoocvResult RunLoocv(const Experiment& experiment, const LoocvOptions& options) {
  if (experiment.tasks.empty()) throw ConfigError("loocv: no tasks");
  size_t n_demos = experiment.tasks.front().demos.size();
  for (const TaskDataset& t : experiment.tasks) {
    n_demos = std::min(n_demos, t.demos.size());
  }
  if (n_demos < 3) throw ConfigError("loocv: need at least 3 demos per task");
  int folds = static_cast<int>(n_demos);
  if (options.max_folds > 0) folds = std::min(folds, options.max_folds);
  const int p = experiment.layout.human_dofs;

  struct FoldOutput {
    std::vector<RunRecord> records;
    std::vector<double> alpha_true;
    bool failed = false;
  };
  std::vector<FoldOutput> outputs(static_cast<size_t>(folds));

  auto run_fold = [&](int fold) {
    FoldOutput& out = outputs[static_cast<size_t>(fold)];
    TaskLibrary lib;
    try {
      lib = TrainLibrary(experiment, fold, options);
    } catch (const Error&) {
      out.failed = true;
      return;
    }
    PipelineOptions dyn = options.pipeline;
    dyn.keep_blend_traces =
        std::find(options.trace_folds.begin(), options.trace_folds.end(),
                  fold) != options.trace_folds.end();
    for (const TaskDataset& t : experiment.tasks) {
      const Trajectory& demo = t.demos[static_cast<size_t>(fold)];
      const Trajectory human = HumanPart(demo, p);
      auto finish = [&](RunRecord rec) {
        rec.context.task_id = t.spec.task_id;
        rec.context.fold = fold;
        ScoreRun(rec, demo, p, experiment.kinematics, options.joint_error);
        out.alpha_true.push_back(demo.duration() / rec.reference_duration);
        out.records.push_back(std::move(rec));
      };
      for (double w : options.sweep.dynamic_windows) {
        finish(RunDynamic(lib, human,
                          {Formulation::kDynamic, w, options.sweep.subsample_stride},
                          dyn));
      }
      for (double r : options.sweep.static_ratios) {
        finish(RunStatic(lib, human,
                         {Formulation::kStatic, r, options.sweep.subsample_stride},
                         options.pipeline));
      }
    }
  };

  const int jobs = std::max(1, std::min(options.jobs, folds));
  if (jobs == 1) {
    for (int f = 0; f < folds; ++f) run_fold(f);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    for (int j = 0; j < jobs; ++j) {
      workers.emplace_back([&] {
        for (int f = next++; f < folds; f = next++) run_fold(f);
      });
    }
    for (std::thread& w : workers) w.join();
  }

  LoocvResult result;
  result.experiment = experiment.name;
  result.folds = folds;
  for (FoldOutput& out : outputs) {
    if (out.failed) {
      ++result.failed_folds;
      continue;
    }
    for (size_t i = 0; i < out.records.size(); ++i) {
      result.rows.push_back(
          Flatten(experiment.name, out.records[i], out.alpha_true[i]));
      result.records.push_back(std::move(out.records[i]));
    }
  }
  result.aggregate = Aggregate(result.rows);
  result.selection = SelectWindows(result.aggregate, DefaultGammaSets());
  return result;
}

}  // namespace ipromp
