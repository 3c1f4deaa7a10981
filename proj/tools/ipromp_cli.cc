// Command-line front end: gen, train, predict, eval, report.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ipromp/error.h"
#include "ipromp/io.h"
#include "ipromp/pipeline.h"
#include "ipromp/synthgen.h"

namespace fs = std::filesystem;
using namespace ipromp;

namespace {

struct Globals {
  std::uint64_t seed = 42;
  bool seed_set = false;
  std::string config;
  std::string out_dir = "runs";
  std::string run_id;
  int jobs = 0;
};

std::string Timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

ExperimentConfig Config(const Globals& g) {
  ExperimentConfig cfg;
  cfg.loocv.trace_folds = {0};
  if (!g.config.empty()) cfg = LoadConfig(g.config);
  if (g.seed_set || !cfg.seed) cfg.seed = g.seed;
  if (g.jobs > 0) cfg.loocv.jobs = g.jobs;
  return cfg;
}

Experiment MakeExperiment(const std::string& name, const ExperimentConfig& cfg) {
  if (name == "exp1") return MakeExperiment1(*cfg.seed, cfg.profile, cfg.n_demos);
  if (name == "exp2") return MakeExperiment2(*cfg.seed, cfg.profile, cfg.n_demos);
  throw ConfigError("unknown experiment '" + name + "' (use exp1 or exp2)");
}

std::string Tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void WritePrediction(const PredictedDistribution& p, const fs::path& path) {
  std::string out = "z";
  for (int d = 0; d < p.dofs(); ++d) {
    out += ",mean_" + std::to_string(d) + ",std_" + std::to_string(d);
  }
  out += '\n';
  char buf[64];
  for (int m = 0; m < p.size(); ++m) {
    std::snprintf(buf, sizeof buf, "%.17g", p.z_grid[m]);
    out += buf;
    for (int d = 0; d < p.dofs(); ++d) {
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g", p.means(m, d),
                    std::sqrt(p.covariances[m](d, d)));
      out += buf;
    }
    out += '\n';
  }
  WriteFileAtomic(path, out);
}

void WriteBlendTraces(const RunRecord& rec, const fs::path& dir,
                      const std::string& prefix) {
  for (size_t k = 0; k < rec.blend_traces.size(); ++k) {
    WriteFileAtomic(dir / (prefix + "_update" + std::to_string(k + 1) + ".csv"),
                    BlendTraceCsv(rec.blend_traces[k]));
  }
}

int RunGen(const Globals& g, const std::string& exp_name, bool binary) {
  const ExperimentConfig cfg = Config(g);
  const Experiment exp = MakeExperiment(exp_name, cfg);
  const fs::path path = fs::path(g.out_dir) / (exp_name + ".json");
  SaveDataset(ToDatasetFile(exp), path, binary);
  std::cout << "wrote " << path.string() << " (" << exp.tasks.size()
            << " tasks, " << exp.tasks.front().demos.size() << " demos each)\n";
  return 0;
}

Experiment LoadOrGenerate(const std::string& dataset, const std::string& exp_name,
                          const ExperimentConfig& cfg) {
  if (!dataset.empty()) return ToExperiment(LoadDataset(dataset));
  return MakeExperiment(exp_name, cfg);
}

int RunTrain(const Globals& g, const std::string& dataset,
             const std::string& exp_name, std::string output) {
  const ExperimentConfig cfg = Config(g);
  const Experiment exp = LoadOrGenerate(dataset, exp_name, cfg);
  const TaskLibrary lib = TrainLibrary(exp, -1, cfg.loocv);
  if (output.empty()) output = (fs::path(g.out_dir) / (exp.name + "_library.json")).string();
  SaveLibrary(lib, output);
  std::cout << "wrote " << output << " (" << lib.size() << " tasks)\n";
  return 0;
}

int RunPredict(const Globals& g, const std::string& library,
               const std::string& stream, const std::string& dataset,
               const std::string& task, int demo, double window,
               double static_ratio) {
  const ExperimentConfig cfg = Config(g);
  const TaskLibrary lib = LoadLibrary(library);
  Trajectory human;
  if (!stream.empty()) {
    human = LoadStreamCsv(stream);
  } else if (!dataset.empty()) {
    const Experiment exp = ToExperiment(LoadDataset(dataset));
    for (const TaskDataset& t : exp.tasks) {
      if (t.spec.task_id != task) continue;
      if (demo < 0 || demo >= static_cast<int>(t.demos.size())) {
        throw ConfigError("--demo out of range");
      }
      human = HumanPart(t.demos[static_cast<size_t>(demo)], exp.layout.human_dofs);
    }
    if (human.steps() == 0) throw ConfigError("task '" + task + "' not in dataset");
  } else {
    throw ConfigError("predict needs --stream or --dataset with --task");
  }

  PipelineOptions opts = cfg.loocv.pipeline;
  opts.keep_blend_traces = true;
  const int stride = cfg.loocv.sweep.subsample_stride;
  const RunRecord rec =
      static_ratio > 0.0
          ? RunStatic(lib, human, {Formulation::kStatic, static_ratio, stride}, opts)
          : RunDynamic(lib, human, {Formulation::kDynamic, window, stride}, opts);

  const fs::path dir = fs::path(g.out_dir) / "predict" /
                       (g.run_id.empty() ? Timestamp() : g.run_id);
  WritePrediction(rec.prediction, dir / "prediction.csv");
  WriteFileAtomic(dir / "recognition_trace.csv", RecognitionTraceCsv(rec));
  WriteBlendTraces(rec, dir / "blend_traces", "blend");
  std::cout << "recognized " << rec.recognized_task << ", alpha "
            << rec.alpha_est << ", " << rec.windows.size() << " windows -> "
            << dir.string() << "\n";
  return 0;
}

void PrintSummary(const LoocvResult& r) {
  std::printf("%s: %d folds (%d failed)\n", r.experiment.c_str(), r.folds,
              r.failed_folds);
  std::printf("  %-9s %-7s %6s %10s %10s %10s %6s\n", "task", "form", "window",
              "e_p", "e_q", "e_phi", "rec");
  for (const AggregateRow& a : r.aggregate) {
    if (a.task != "all") continue;
    std::printf("  %-9s %-7s %6g %10.4g %10.4g %10.4g %6.2f\n", a.task.c_str(),
                FormulationName(a.formulation), a.window, a.e_p, a.e_q, a.e_phi,
                a.recognition_rate);
  }
  for (const SelectionRow& s : r.selection) {
    if (s.task != "all") continue;
    std::printf("  gamma (%.3g, %.3g, %.3g) selects %g s\n", s.gamma.gamma_p,
                s.gamma.gamma_q, s.gamma.gamma_phi, s.selection.best_window);
  }
}

int RunEval(const Globals& g, const std::vector<std::string>& experiments) {
  ExperimentConfig cfg = Config(g);
  if (!experiments.empty()) cfg.experiments = experiments;
  const std::string run_id = g.run_id.empty() ? Timestamp() : g.run_id;

  std::vector<Experiment> exps;
  if (!cfg.datasets.empty()) {
    for (const std::string& p : cfg.datasets) exps.push_back(ToExperiment(LoadDataset(p)));
  } else {
    for (const std::string& name : cfg.experiments) exps.push_back(MakeExperiment(name, cfg));
  }
  for (const Experiment& exp : exps) {
    LoocvResult r = RunLoocv(exp, cfg.loocv);
    r.selection = SelectWindows(r.aggregate, cfg.gammas);
    const fs::path dir = fs::path(g.out_dir) / exp.name / run_id;
    WriteFileAtomic(dir / "records.csv", RecordsCsv(r.rows));
    WriteFileAtomic(dir / "aggregate.csv", AggregateCsv(r.aggregate));
    WriteFileAtomic(dir / "selection.csv", SelectionCsv(r.selection));
    for (const RunRecord& rec : r.records) {
      if (rec.blend_traces.empty()) continue;
      const std::string prefix = rec.context.task_id + "_fold" +
                                 std::to_string(rec.context.fold) + "_dow" +
                                 Tag(rec.context.window);
      WriteBlendTraces(rec, dir / "blend_traces", prefix);
      WriteFileAtomic(dir / "blend_traces" / (prefix + "_recognition.csv"),
                      RecognitionTraceCsv(rec));
    }
    PrintSummary(r);
    std::printf("  -> %s\n", dir.string().c_str());
  }
  return 0;
}

int RunReport(const Globals& g, const std::string& records) {
  const ExperimentConfig cfg = Config(g);
  const fs::path path(records);
  const std::vector<AggregateRow> agg = Aggregate(ParseRecordsCsv(ReadFile(path)));
  const fs::path dir = path.parent_path() / "report";
  WriteFileAtomic(dir / "aggregate.csv", AggregateCsv(agg));
  WriteFileAtomic(dir / "curves.csv", CurvesCsv(agg));
  WriteFileAtomic(dir / "recognition.csv", RecognitionTableCsv(agg));
  WriteFileAtomic(dir / "selection.csv", SelectionCsv(SelectWindows(agg, cfg.gammas)));
  std::cout << "wrote report to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interaction ProMPs with phase estimation and dynamic observation windows"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option_function<std::uint64_t>(
         "--seed", [&](std::uint64_t s) { g.seed = s; g.seed_set = true; },
         "Seed for all randomness (default 42)")
      ->trigger_on_parse();
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--out-dir", g.out_dir, "Output root")->capture_default_str();
  app.add_option("--run-id", g.run_id, "Run directory name (default: UTC timestamp)");
  app.add_option("--jobs", g.jobs, "Worker threads for loocv folds");

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  std::string gen_exp = "exp1";
  bool binary = false;
  gen->add_option("--exp", gen_exp, "exp1 or exp2")->capture_default_str();
  gen->add_flag("--binary", binary, "Store samples in a binary sidecar");

  auto* train = app.add_subcommand("train", "Train a task library");
  std::string train_dataset, train_exp = "exp1", train_out;
  train->add_option("--dataset", train_dataset, "Dataset file (default: generate)");
  train->add_option("--exp", train_exp, "Synthetic experiment when no dataset is given");
  train->add_option("-o,--output", train_out, "Library file");

  auto* predict = app.add_subcommand("predict", "Run one stream through the pipeline");
  std::string lib_path, stream, pred_dataset, task;
  int demo = 0;
  double window = 1.0, static_ratio = 0.0;
  predict->add_option("--library", lib_path, "Library file")->required();
  predict->add_option("--stream", stream, "Human stream CSV (t, dofs...)");
  predict->add_option("--dataset", pred_dataset, "Take the human part of a dataset demo");
  predict->add_option("--task", task, "Task id of the dataset demo");
  predict->add_option("--demo", demo, "Demo index within the task");
  predict->add_option("--window", window, "Dynamic window in seconds")->capture_default_str();
  predict->add_option("--static", static_ratio, "Static observation ratio instead of windows");

  auto* eval = app.add_subcommand("eval", "Leave-one-out sweep");
  std::vector<std::string> eval_exps;
  eval->add_option("--exp", eval_exps, "Experiments to run (default from config)");

  auto* report = app.add_subcommand("report", "Aggregate and curve tables from records.csv");
  std::string records;
  report->add_option("--records", records, "records.csv of an eval run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorCategory::kConfig);
  }

  try {
    if (*gen) return RunGen(g, gen_exp, binary);
    if (*train) return RunTrain(g, train_dataset, train_exp, train_out);
    if (*predict) {
      return RunPredict(g, lib_path, stream, pred_dataset, task, demo, window,
                        static_ratio);
    }
    if (*eval) return RunEval(g, eval_exps);
    if (*report) return RunReport(g, records);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::kConfig);
  }
  return 0;
}
