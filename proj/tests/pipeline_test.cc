#include "ipromp/pipeline.h"

#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "ipromp/error.h"
#include "ipromp/io.h"

namespace ipromp {
namespace {

// Small shared fixture: experiment 1 with a library trained without demo 0.
class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    exp_ = new Experiment(MakeExperiment1(42));
    lib_ = new TaskLibrary(TrainLibrary(*exp_, 0));
  }
  static void TearDownTestSuite() {
    delete lib_;
    delete exp_;
  }
  const Trajectory& Demo(int task = 0, int index = 0) const {
    return exp_->tasks[task].demos[index];
  }
  Trajectory Human(int task = 0, int index = 0) const {
    return HumanPart(Demo(task, index), exp_->layout.human_dofs);
  }
  static Experiment* exp_;
  static TaskLibrary* lib_;
};

Experiment* PipelineTest::exp_ = nullptr;
TaskLibrary* PipelineTest::lib_ = nullptr;

TEST(WindowCountTest, Arithmetic) {
  EXPECT_EQ(WindowCount(4.0, 1.0), 4);
  EXPECT_EQ(WindowCount(4.0, 0.2), 20);
  EXPECT_EQ(WindowCount(4.02, 1.0), 5);
  EXPECT_EQ(WindowCount(4.0, 10.0), 1);
  EXPECT_THROW(WindowCount(4.0, 0.0), ConfigError);
}

TEST_F(PipelineTest, FourSecondStreamWithOneSecondWindows) {
  Trajectory human = Human(0, 0);
  // Pick a demo long enough to trim to four seconds.
  for (int i = 0; i < 10 && human.duration() < 4.0; ++i) human = Human(0, i);
  ASSERT_GE(human.duration(), 4.0);
  human.timestamps = human.timestamps.head(201).eval();
  human.samples = human.samples.topRows(201).eval();
  const RunRecord r = RunDynamic(*lib_, human, {Formulation::kDynamic, 1.0, 5});
  EXPECT_EQ(r.expected_windows, 4);
  EXPECT_EQ(r.windows.size(), 4u);
  EXPECT_EQ(r.continuity.size(), 3u);
}

TEST_F(PipelineTest, ShortWindowsHoldTwoSamples) {
  Trajectory human = Human(0, 0);
  for (int i = 0; i < 10 && human.duration() < 4.0; ++i) human = Human(0, i);
  human.timestamps = human.timestamps.head(201).eval();
  human.samples = human.samples.topRows(201).eval();
  const RunRecord r = RunDynamic(*lib_, human, {Formulation::kDynamic, 0.2, 5});
  ASSERT_EQ(r.windows.size(), 20u);
  for (int w = 0; w < 19; ++w) EXPECT_EQ(r.windows[w].samples, 2) << w;
  // The closing sample at exactly four seconds joins the last window.
  EXPECT_EQ(r.windows[19].samples, 3);
  EXPECT_EQ(r.continuity.size(), 19u);
}

TEST_F(PipelineTest, SingleWindowEqualsStaticFullRatio) {
  for (int task = 0; task < 3; ++task) {
    const Trajectory human = Human(task, 0);
    const RunRecord dyn =
        RunDynamic(*lib_, human, {Formulation::kDynamic, 100.0, 5});
    const RunRecord st = RunStatic(*lib_, human, {Formulation::kStatic, 1.0, 5});
    ASSERT_EQ(dyn.windows.size(), 1u);
    EXPECT_EQ(dyn.recognized_task, st.recognized_task);
    EXPECT_LT((dyn.prediction.means - st.prediction.means).cwiseAbs().maxCoeff(), 1e-9);
    for (int m = 0; m < dyn.prediction.size(); ++m) {
      EXPECT_LT((dyn.prediction.covariances[m] - st.prediction.covariances[m])
                    .cwiseAbs()
                    .maxCoeff(),
                1e-9);
    }
  }
}

TEST_F(PipelineTest, StaticFullRatioOnTrainingDemoIsAccurate) {
  const TaskLibrary full = TrainLibrary(*exp_, -1);
  const RunRecord r = RunStatic(full, Human(1, 3), {Formulation::kStatic, 1.0, 1});
  RunRecord scored = r;
  ScoreRun(scored, Demo(1, 3), exp_->layout.human_dofs, exp_->kinematics);
  EXPECT_EQ(r.recognized_task, "glasses");
  // Robot noise std is 0.02; conditioning on the full stream stays near it.
  EXPECT_LT(scored.errors.e_q, 0.06);
}

TEST_F(PipelineTest, TraceCountMatchesWindowCount) {
  for (double w : {1.0, 0.5, 0.2, 0.1}) {
    const Trajectory human = Human(2, 0);
    const RunRecord r = RunDynamic(*lib_, human, {Formulation::kDynamic, w, 5});
    EXPECT_EQ(static_cast<int>(r.windows.size()), WindowCount(human.duration(), w));
    EXPECT_EQ(r.expected_windows, static_cast<int>(r.windows.size()));
    for (size_t i = 0; i < r.windows.size(); ++i) {
      EXPECT_EQ(r.windows[i].index, static_cast<int>(i));
    }
  }
}

TEST_F(PipelineTest, EmptyWindowsAreFlagged) {
  // Stride 50 at 50 Hz keeps one sample per second; 0.5 s windows alternate.
  const RunRecord r = RunDynamic(*lib_, Human(0, 0), {Formulation::kDynamic, 0.5, 50});
  int skipped = 0;
  for (const WindowTrace& w : r.windows) {
    if (w.skipped) {
      ++skipped;
      EXPECT_EQ(w.samples, 0);
    }
  }
  EXPECT_GT(skipped, 0);
  EXPECT_EQ(static_cast<int>(r.windows.size()), r.expected_windows);
}

TEST_F(PipelineTest, ContinuityBoundHolds) {
  for (double w : {1.0, 0.5, 0.2, 0.1}) {
    const RunRecord r = RunDynamic(*lib_, Human(1, 0), {Formulation::kDynamic, w, 5});
    for (const ContinuityCheck& c : r.continuity) {
      EXPECT_TRUE(c.ok()) << "window " << w << " step " << c.max_step
                          << " bound " << c.bound;
    }
  }
}

TEST_F(PipelineTest, BlendTracesKeptOnRequest) {
  PipelineOptions opts;
  opts.keep_blend_traces = true;
  const RunRecord r = RunDynamic(*lib_, Human(0, 0), {Formulation::kDynamic, 1.0, 5}, opts);
  ASSERT_EQ(r.blend_traces.size(), r.windows.size() - 1);
  EXPECT_EQ(static_cast<int>(r.blend_traces[0].size()), opts.grid_points);
}

TEST_F(PipelineTest, StaticRejectsBadRatioAndMode) {
  EXPECT_THROW(RunStatic(*lib_, Human(), {Formulation::kStatic, 0.0, 5}), ConfigError);
  EXPECT_THROW(RunStatic(*lib_, Human(), {Formulation::kStatic, 1.5, 5}), ConfigError);
  EXPECT_THROW(RunStatic(*lib_, Human(), {Formulation::kDynamic, 0.5, 5}), ConfigError);
  EXPECT_THROW(RunDynamic(*lib_, Human(), {Formulation::kStatic, 0.5, 5}), ConfigError);
  EXPECT_THROW(RunDynamic(*lib_, Demo(), {Formulation::kDynamic, 0.5, 5}), DataError);
}

TEST_F(PipelineTest, ScoreUsesGeneratorDuration) {
  RunRecord r = RunStatic(*lib_, Human(0, 0), {Formulation::kStatic, 0.5, 5});
  ScoreRun(r, Demo(0, 0), exp_->layout.human_dofs, exp_->kinematics);
  const double alpha_true = Demo(0, 0).duration() / r.reference_duration;
  EXPECT_NEAR(r.errors.e_phi, std::abs(r.alpha_est - alpha_true) * r.reference_duration,
              1e-12);
}

TEST(LoocvTest, FoldsSweepsAndAggregates) {
  const Experiment exp = MakeExperiment1(3, Profile::kToy, 5);
  LoocvOptions opts;
  opts.sweep.dynamic_windows = {1.0, 0.5};
  const LoocvResult r = RunLoocv(exp, opts);
  EXPECT_EQ(r.folds, 5);
  EXPECT_EQ(r.failed_folds, 0);
  // 3 tasks x (2 dynamic + 9 static) per fold.
  EXPECT_EQ(r.rows.size(), 5u * 3u * 11u);
  std::set<std::tuple<int, std::string, int, double>> keys;
  int statics_fold0 = 0;
  for (const RecordRow& row : r.rows) {
    keys.insert({row.fold, row.task, static_cast<int>(row.formulation), row.window});
    if (row.fold == 0 && row.task == "box" && row.formulation == Formulation::kStatic) {
      ++statics_fold0;
    }
  }
  EXPECT_EQ(keys.size(), r.rows.size());
  EXPECT_EQ(statics_fold0, 9);
  // Per task and "all" rows for 11 window settings.
  EXPECT_EQ(r.aggregate.size(), 4u * 11u);
  EXPECT_EQ(r.selection.size(), 4u * DefaultGammaSets().size());
}

TEST(LoocvTest, PersistedRecordsReaggregateExactly) {
  const Experiment exp = MakeExperiment2(4, Profile::kToy, 4);
  LoocvOptions opts;
  opts.sweep.dynamic_windows = {1.0, 0.2};
  opts.sweep.static_ratios = {0.3, 0.9};
  const LoocvResult r = RunLoocv(exp, opts);
  const std::vector<RecordRow> parsed = ParseRecordsCsv(RecordsCsv(r.rows));
  EXPECT_EQ(AggregateCsv(Aggregate(parsed)), AggregateCsv(r.aggregate));
  const std::vector<AggregateRow> again = Aggregate(parsed);
  ASSERT_EQ(again.size(), r.aggregate.size());
  for (size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(again[i].e_p, r.aggregate[i].e_p);
    EXPECT_EQ(again[i].e_q, r.aggregate[i].e_q);
    EXPECT_EQ(again[i].e_phi, r.aggregate[i].e_phi);
    EXPECT_EQ(again[i].recognition_rate, r.aggregate[i].recognition_rate);
  }
}

TEST(LoocvTest, ThreadCountDoesNotChangeResults) {
  const Experiment exp = MakeExperiment1(8, Profile::kToy, 4);
  LoocvOptions opts;
  opts.sweep.dynamic_windows = {0.5};
  opts.sweep.static_ratios = {0.5};
  const LoocvResult one = RunLoocv(exp, opts);
  opts.jobs = 3;
  const LoocvResult three = RunLoocv(exp, opts);
  EXPECT_EQ(AggregateCsv(one.aggregate), AggregateCsv(three.aggregate));
  ASSERT_EQ(one.rows.size(), three.rows.size());
  for (size_t i = 0; i < one.rows.size(); ++i) {
    EXPECT_EQ(one.rows[i].fold, three.rows[i].fold);
    EXPECT_EQ(one.rows[i].task, three.rows[i].task);
    EXPECT_EQ(one.rows[i].e_q, three.rows[i].e_q);
  }
}

TEST(LoocvTest, MaxFoldsAndMinimumDemos) {
  const Experiment exp = MakeExperiment1(2, Profile::kToy, 6);
  LoocvOptions opts;
  opts.max_folds = 2;
  opts.sweep.dynamic_windows = {1.0};
  opts.sweep.static_ratios = {0.5};
  EXPECT_EQ(RunLoocv(exp, opts).folds, 2);
  Experiment small = exp;
  for (TaskDataset& t : small.tasks) t.demos.resize(2);
  EXPECT_THROW(RunLoocv(small, opts), ConfigError);
}

TEST(AggregateTest, MeansAndRecognitionRate) {
  std::vector<RecordRow> rows(3);
  for (int i = 0; i < 3; ++i) {
    rows[i].experiment = "e";
    rows[i].task = "a";
    rows[i].fold = i;
    rows[i].window = 0.5;
    rows[i].e_p = i + 1.0;
    rows[i].recognized = i == 0 ? "b" : "a";
  }
  const std::vector<AggregateRow> agg = Aggregate(rows);
  ASSERT_EQ(agg.size(), 2u);
  EXPECT_EQ(agg[0].task, "a");
  EXPECT_EQ(agg[1].task, "all");
  EXPECT_DOUBLE_EQ(agg[0].e_p, 2.0);
  EXPECT_DOUBLE_EQ(agg[0].recognition_rate, 2.0 / 3.0);
  EXPECT_EQ(agg[0].n, 3);
}

}  // namespace
}  // namespace ipromp
