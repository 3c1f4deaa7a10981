// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ipromp/blending.h"
#include "ipromp/io.h"
#include "ipromp/metrics.h"
#include "ipromp/pipeline.h"
#include "ipromp/promp.h"
#include "ipromp/synthgen.h"
#include "test_util.h"

namespace ipromp {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void Report(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string Format(const char* fmt, double a, double b = 0.0, double c = 0.0,
                   double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c, d);
  return buf;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Conditioning oracle: explicit joint Gaussian over (w, y).
Gaussian JointConditionOracle(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                              const Eigen::MatrixXd& h, const Eigen::VectorXd& noise,
                              const Eigen::VectorXd& y) {
  const Eigen::MatrixXd cov_wy = sigma * h.transpose();
  Eigen::MatrixXd cov_yy = h * sigma * h.transpose();
  cov_yy.diagonal() += noise;
  const Eigen::MatrixXd inv = cov_yy.fullPivLu().inverse();
  return {mu + cov_wy * inv * (y - h * mu), sigma - cov_wy * inv * cov_wy.transpose()};
}

void CheckConditioning() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> n_basis(1, 3);
  std::uniform_int_distribution<int> n_samples(1, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const PrompModel m = testing::RandomModel(n_basis(rng), 1, 1, rng);
    const int s = n_samples(rng);
    ObservationBatch b;
    b.raw_times.resize(s);
    for (int i = 0; i < s; ++i) b.raw_times[i] = u(rng);
    b.z_indices = b.raw_times;
    b.phase_alpha = 1.0;
    b.values = testing::RandomVector(s, rng).reshaped(s, 1);
    ConditionOptions opts;
    opts.observation_noise = Eigen::VectorXd::Constant(1, 0.01 + u(rng));
    const PrompModel post = Condition(m, b, opts);
    const Eigen::MatrixXd h = testing::HumanObservationMatrix(m.basis, m.layout, b.z_indices);
    const Gaussian oracle =
        JointConditionOracle(m.weight_mean, m.weight_cov, h,
                             Eigen::VectorXd::Constant(s, opts.observation_noise[0]),
                             b.values.reshaped());
    worst = std::max({worst, (post.weight_mean - oracle.mean).cwiseAbs().maxCoeff(),
                      (post.weight_cov - oracle.cov).cwiseAbs().maxCoeff()});
  }
  const double secs = Seconds(start);
  Report("AC1", worst <= 1e-8 && secs < 5.0,
         Format("50 instances, max deviation %.3g (tol 1e-8), %.3f s (limit 5 s)", worst,
                secs));
}

// Moments of the activation-weighted product density on a dense grid.
Gaussian GridProduct(const std::array<Gaussian, 2>& d, const std::array<double, 2>& a,
                     const Gaussian& around) {
  const Eigen::Vector2d sd(std::sqrt(around.cov(0, 0)), std::sqrt(around.cov(1, 1)));
  const int n = 300;
  const std::array<Eigen::Matrix2d, 2> prec = {Eigen::Matrix2d(d[0].cov.inverse()),
                                               Eigen::Matrix2d(d[1].cov.inverse())};
  double mass = 0.0;
  Eigen::Vector2d m1 = Eigen::Vector2d::Zero();
  Eigen::Matrix2d m2 = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d x(around.mean[0] + sd[0] * (-8.0 + 16.0 * i / (n - 1)),
                              around.mean[1] + sd[1] * (-8.0 + 16.0 * j / (n - 1)));
      double logp = 0.0;
      for (int k = 0; k < 2; ++k) {
        const Eigen::Vector2d r = x - d[k].mean;
        logp -= 0.5 * a[k] * r.dot(prec[k] * r);
      }
      const double w = std::exp(logp);
      mass += w;
      m1 += w * x;
      m2 += w * x * x.transpose();
    }
  }
  m1 /= mass;
  return {m1, m2 / mass - m1 * m1.transpose()};
}

void CheckBlending(const LoocvResult& exp2) {
  const std::array<Gaussian, 2> unit = {
      Gaussian{Eigen::VectorXd::Constant(1, 0.0), Eigen::MatrixXd::Constant(1, 1, 1.0)},
      Gaussian{Eigen::VectorXd::Constant(1, 2.0), Eigen::MatrixXd::Constant(1, 1, 1.0)}};
  const std::array<double, 2> ones = {1.0, 1.0};
  const Gaussian p = ProductStep(unit, ones);
  const double closed = std::max(std::abs(p.mean[0] - 1.0), std::abs(p.cov(0, 0) - 0.5));

  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> act(0.1, 1.0);
  double grid = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::array<Gaussian, 2> d = {
        Gaussian{testing::RandomVector(2, rng), testing::RandomSpd(2, rng, 0.3)},
        Gaussian{testing::RandomVector(2, rng), testing::RandomSpd(2, rng, 0.3)}};
    const std::array<double, 2> a = {act(rng), act(rng)};
    const Gaussian g = ProductStep(d, a);
    const Gaussian o = GridProduct(d, a, g);
    grid = std::max({grid, (g.mean - o.mean).cwiseAbs().maxCoeff(),
                     (g.cov - o.cov).cwiseAbs().maxCoeff()});
  }

  int checks = 0;
  int violations = 0;
  for (const RunRecord& r : exp2.records) {
    for (const ContinuityCheck& c : r.continuity) {
      ++checks;
      if (!c.ok()) ++violations;
    }
  }
  Report("AC2", closed <= 1e-12 && grid <= 1e-3 && violations == 0 && checks > 0,
         Format("closed-form deviation %.3g (tol 1e-12), grid oracle %.3g (tol 1e-3), "
                "continuity violations %.0f of %.0f co-activations",
                closed, grid, violations, checks));
}

// Experiment 1 geometry with uniform time scaling, so the whole execution
// shares one alpha drawn around 1 with standard deviation 0.1.
Experiment UniformlyScaledExperiment(std::uint64_t seed) {
  Experiment exp = MakeExperiment1(seed);
  for (size_t k = 0; k < exp.tasks.size(); ++k) {
    TaskDataset& t = exp.tasks[k];
    t.spec.segment_timing_std = 0.0;
    t.spec.duration_std = 0.1 * t.spec.duration_mean;
    t.demos = Generate(t.spec, static_cast<int>(t.demos.size()), seed * 31 + k);
  }
  return exp;
}

// Spacing of the candidate interval that contains alpha.
double GridSpacing(const Eigen::VectorXd& grid, double alpha) {
  for (int i = 0; i + 1 < grid.size(); ++i) {
    if (alpha <= grid[i + 1]) return grid[i + 1] - grid[i];
  }
  return grid[grid.size() - 1] - grid[grid.size() - 2];
}

void CheckPhaseRecovery() {
  const Experiment exp = UniformlyScaledExperiment(42);
  // The synthetic sensor noise is known, so training and test-time noise
  // variances are set to it.
  const double noise = exp.tasks.front().spec.spatial_noise[0];
  LoocvOptions opts;
  opts.fit.obs_noise = Eigen::VectorXd::Constant(1, noise * noise);
  opts.pipeline.condition.observation_noise = opts.fit.obs_noise;
  opts.sweep.static_ratios = {1.0};
  const LoocvResult res = RunLoocv(exp, opts);

  // Alpha error of every complete window, keyed by window length.
  std::map<double, std::vector<double>> errors;
  int within = 0;
  int total = 0;
  for (int fold = 0; fold < res.folds; ++fold) {
    const TaskLibrary lib = TrainLibrary(exp, fold, opts);
    for (size_t i = 0; i < res.records.size(); ++i) {
      const RunRecord& r = res.records[i];
      if (r.context.fold != fold || r.context.formulation != Formulation::kDynamic) continue;
      const double alpha_true = res.rows[i].alpha_true;
      for (const WindowTrace& w : r.windows) {
        if (w.skipped || w.end - w.start < r.context.window - 1e-9) continue;
        const double err = std::abs(w.alpha - alpha_true);
        errors[r.context.window].push_back(err);
        if (r.context.window != 1.0) continue;
        const PrompModel& model = lib.tasks[lib.Find(w.task_id)].model;
        ++total;
        if (err <= GridSpacing(model.phase.candidate_grid, alpha_true) + 0.05) ++within;
      }
    }
  }
  const double fraction = total ? static_cast<double>(within) / total : 0.0;

  // Longer windows hold more observations; errors are listed short to long.
  bool monotone = errors.size() >= 2;
  std::string trend;
  double previous = INFINITY;
  for (const auto& [w, e] : errors) {
    const double m = Median(e);
    if (!(m < previous)) monotone = false;
    previous = m;
    trend += Format(" %.1f s: %.4f", w, m);
  }
  Report("AC3", fraction >= 0.9 && monotone,
         Format("%.1f%% of %.0f complete 1.0 s windows within grid spacing + 0.05 "
                "(need 90%%); median |alpha error| by window:",
                100.0 * fraction, total) +
             trend + (monotone ? ", decreasing with window length" : ", NOT decreasing"));
}

void CheckStaticReduction() {
  double worst = 0.0;
  int runs = 0;
  for (const Experiment& exp : {MakeExperiment1(42), MakeExperiment2(42)}) {
    const TaskLibrary lib = TrainLibrary(exp, 0);
    for (const TaskDataset& t : exp.tasks) {
      const Trajectory human = HumanPart(t.demos[0], exp.layout.human_dofs);
      const double window = std::ceil(human.duration()) + 1.0;
      const RunRecord dyn = RunDynamic(lib, human, {Formulation::kDynamic, window, 5});
      const RunRecord st = RunStatic(lib, human, {Formulation::kStatic, 1.0, 5});
      worst = std::max(worst, (dyn.prediction.means - st.prediction.means).cwiseAbs().maxCoeff());
      for (size_t m = 0; m < dyn.prediction.covariances.size(); ++m) {
        worst = std::max(worst, (dyn.prediction.covariances[m] - st.prediction.covariances[m])
                                    .cwiseAbs()
                                    .maxCoeff());
      }
      ++runs;
    }
  }
  Report("AC4", worst <= 1e-9,
         Format("%.0f streams, window longer than the stream vs static ratio 1.0: "
                "max deviation %.3g (tol 1e-9)",
                runs, worst));
}

const AggregateRow* Find(const std::vector<AggregateRow>& rows, const std::string& task,
                         Formulation f, double window) {
  for (const AggregateRow& r : rows) {
    if (r.task == task && r.formulation == f && std::abs(r.window - window) < 1e-12) {
      return &r;
    }
  }
  return nullptr;
}

void CheckRecognitionTrend(const LoocvResult& res, double secs) {
  std::vector<double> low;
  bool low_ok = true;
  std::string detail = "static rate at ratio <= 0.5:";
  for (double ratio : {0.1, 0.2, 0.3, 0.4, 0.5}) {
    const AggregateRow* r = Find(res.aggregate, "all", Formulation::kStatic, ratio);
    const double rate = r ? r->recognition_rate : -1.0;
    if (!r || std::abs(rate - 0.25) > 0.15) low_ok = false;
    detail += Format(" %.2f", rate);
  }
  const AggregateRow* late = Find(res.aggregate, "all", Formulation::kStatic, 0.9);
  const double late_rate = late ? late->recognition_rate : -1.0;
  bool dyn_ok = true;
  detail += Format(" (chance 0.25 +- 0.15); at 0.9: %.2f (need 0.95); final dynamic:",
                   late_rate);
  for (double w : SweepConfig{}.dynamic_windows) {
    const AggregateRow* r = Find(res.aggregate, "all", Formulation::kDynamic, w);
    const double rate = r ? r->recognition_rate : -1.0;
    if (rate < 0.95) dyn_ok = false;
    detail += Format(" %.2f", rate);
  }
  detail += Format(" (need 0.95); %.1f s (limit 120 s)", secs);
  Report("AC5", low_ok && late_rate >= 0.95 && dyn_ok && secs < 120.0, detail);
}

void CheckDynamicBeatsStatic(const LoocvResult& res) {
  std::vector<const AggregateRow*> dyn;
  for (const AggregateRow& r : res.aggregate) {
    if (r.task == "all" && r.formulation == Formulation::kDynamic) dyn.push_back(&r);
  }
  const auto mean = [&](double AggregateRow::*field) {
    double s = 0.0;
    for (const AggregateRow* r : dyn) s += r->*field;
    return s / static_cast<double>(dyn.size());
  };
  const double dyn_p = mean(&AggregateRow::e_p);
  const double dyn_q = mean(&AggregateRow::e_q);
  const double dyn_phi = mean(&AggregateRow::e_phi);
  bool mean_ok = !dyn.empty();
  bool strict_ok = !dyn.empty();
  double min_diff = INFINITY;
  double low_ratio_p = INFINITY;
  for (double ratio : {0.1, 0.2, 0.3, 0.4, 0.5}) {
    const AggregateRow* s = Find(res.aggregate, "all", Formulation::kStatic, ratio);
    if (!s) {
      mean_ok = strict_ok = false;
      continue;
    }
    for (double d : {s->e_p - dyn_p, s->e_q - dyn_q, s->e_phi - dyn_phi}) {
      min_diff = std::min(min_diff, d);
      if (d <= 0.0) mean_ok = false;
    }
    for (const AggregateRow* r : dyn) {
      if (s->e_p <= r->e_p || s->e_q <= r->e_q || s->e_phi <= r->e_phi) strict_ok = false;
    }
    if (ratio <= 0.2) low_ratio_p = std::min(low_ratio_p, s->e_p - dyn_p);
  }
  const bool double_ok = low_ratio_p > 2.0 * dyn_p;
  Report("AC6", mean_ok && double_ok,
         Format("smallest static-minus-dynamic-mean difference over ratios <= 0.5 and "
                "all measures %.4f (need > 0); e_p difference at ratios <= 0.2 is %.2fx "
                "the dynamic mean e_p (need > 2x)",
                min_diff, low_ratio_p / dyn_p) +
             (strict_ok ? "; also positive against every single dynamic window"
                        : "; not positive against every single dynamic window"));
}

std::string GammaName(const MetricConfig& g) {
  return Format("(%.2f,%.2f,%.2f)", g.gamma_p, g.gamma_q, g.gamma_phi);
}

void CheckWindowSelection(const LoocvResult& exp1) {
  std::map<double, ErrorReport> reports;
  for (const AggregateRow& r : exp1.aggregate) {
    if (r.task != "all" || r.formulation != Formulation::kDynamic) continue;
    ErrorReport e;
    e.e_p = r.e_p;
    e.e_q = r.e_q;
    e.e_phi = r.e_phi;
    reports[r.window] = e;
  }
  bool unique = reports.size() >= 2;
  bool invariant = true;
  bool soft = true;
  std::string detail;
  for (const MetricConfig& g : DefaultGammaSets()) {
    const WindowSelection sel = SelectWindow(reports, g);
    const WindowSelection again = SelectWindow(reports, g);
    if (again.best_window != sel.best_window || sel.degenerate) unique = false;
    double best_m = INFINITY;
    double m_one = INFINITY;
    for (size_t i = 0; i < sel.windows.size(); ++i) {
      if (sel.windows[i] == sel.best_window) best_m = sel.m[i];
      if (sel.windows[i] == 1.0) m_one = sel.m[i];
    }
    for (size_t i = 0; i < sel.windows.size(); ++i) {
      if (sel.windows[i] != sel.best_window && std::abs(sel.m[i] - best_m) < 1e-12) {
        unique = false;
      }
    }
    for (double c : {1e-3, 7.0, 1e3}) {
      for (int measure = 0; measure < 3; ++measure) {
        std::map<double, ErrorReport> scaled = reports;
        for (auto& [w, e] : scaled) {
          (measure == 0 ? e.e_p : measure == 1 ? e.e_q : e.e_phi) *= c;
        }
        const WindowSelection s = SelectWindow(scaled, g);
        if (s.best_window != sel.best_window) invariant = false;
        for (size_t i = 0; i < s.m.size(); ++i) {
          if (std::abs(s.m[i] - sel.m[i]) > 1e-12) invariant = false;
        }
      }
    }
    const double gap = m_one - best_m;
    if (gap > 0.05) soft = false;
    detail += " " + GammaName(g) + Format(" winner %.1f s, m(1.0)-m(best)=%.3f;",
                                          sel.best_window, gap);
  }
  Report("AC7", unique && invariant && soft,
         std::string("exp1 'all':") + detail +
             (unique ? " unique winner per gamma;" : " winner not unique;") +
             (invariant ? " m scale-invariant per measure" : " m NOT scale-invariant") +
             " (soft limit 0.05 on the 1.0 s gap)");
}

void CheckDeterminism() {
  const fs::path root = fs::temp_directory_path() / "ipromp_acceptance_determinism";
  fs::remove_all(root);
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("\"") + IPROMP_CLI_PATH +
                            "\" eval --seed 42 --out-dir \"" + root.string() +
                            "\" --run-id " + run + " > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) ok = false;
  }
  std::string detail;
  for (const char* exp : {"exp1", "exp2"}) {
    const fs::path a = root / exp / "a" / "aggregate.csv";
    const fs::path b = root / exp / "b" / "aggregate.csv";
    if (!fs::exists(a) || !fs::exists(b)) {
      ok = false;
      detail += std::string(" ") + exp + " missing;";
      continue;
    }
    const std::string ca = ReadFile(a);
    const bool same = !ca.empty() && ca == ReadFile(b);
    ok = ok && same;
    detail += std::string(" ") + exp + (same ? " identical" : " DIFFERENT") +
              Format(" (%.0f bytes);", static_cast<double>(ca.size()));
  }
  fs::remove_all(root);
  Report("AC8", ok, "two runs of eval --seed 42, aggregate.csv:" + detail);
}

int Run() {
  CheckConditioning();

  const auto t1 = Clock::now();
  const LoocvResult exp1 = RunLoocv(MakeExperiment1(42));
  const double secs1 = Seconds(t1);
  const auto t2 = Clock::now();
  LoocvOptions opts2;
  const LoocvResult exp2 = RunLoocv(MakeExperiment2(42), opts2);
  const double secs2 = Seconds(t2);

  CheckBlending(exp2);
  CheckPhaseRecovery();
  CheckStaticReduction();
  CheckRecognitionTrend(exp2, secs2);
  CheckDynamicBeatsStatic(exp2);
  CheckWindowSelection(exp1);
  CheckDeterminism();

  const bool complete = exp1.failed_folds == 0 && exp2.failed_folds == 0 &&
                        exp1.folds == 10 && exp2.folds == 10;
  Report("AC9", complete && secs1 + secs2 < 300.0,
         Format("toy loocv, %.0f + %.0f folds, all windows and ratios: exp1 %.1f s, "
                "exp2 %.1f s",
                exp1.folds, exp2.folds, secs1, secs2) +
             Format(", total %.1f s (limit 300 s)", secs1 + secs2));
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace ipromp

int main() {
  try {
    return ipromp::Run();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }
}
