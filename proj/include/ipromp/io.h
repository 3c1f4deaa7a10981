#ifndef IPROMP_IO_H_
#define IPROMP_IO_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ipromp/blending.h"
#include "ipromp/pipeline.h"
#include "ipromp/promp.h"
#include "ipromp/recognition.h"
#include "ipromp/synthgen.h"

namespace ipromp {

inline constexpr int kSchemaVersion = 1;

struct DemoRecord {
  std::string task_id;
  double sample_rate = 50.0;
  Trajectory trajectory;  // full P + Q columns
};

struct DatasetFile {
  std::string name;
  InteractionLayout layout;
  std::vector<std::string> units;  // one per DoF
  ForwardKinematics kinematics = ForwardKinematics::Passthrough();
  std::vector<DemoRecord> demos;
};

DatasetFile ToDatasetFile(const Experiment& experiment);
// Groups demos by task id in order of first appearance. Task specs only
// carry the id.
Experiment ToExperiment(const DatasetFile& dataset);

// Writes the JSON dataset. With binary_sidecar the sample matrices go to
// `<path>.bin` and the JSON holds byte offsets into it.
void SaveDataset(const DatasetFile& dataset, const std::filesystem::path& path,
                 bool binary_sidecar = false);
// Loads and validates the whole file before returning; nothing is returned
// on error.
DatasetFile LoadDataset(const std::filesystem::path& path);

void SaveModel(const PrompModel& model, const std::filesystem::path& path);
PrompModel LoadModel(const std::filesystem::path& path);
void SaveLibrary(const TaskLibrary& library, const std::filesystem::path& path);
TaskLibrary LoadLibrary(const std::filesystem::path& path);

// Plain human stream: header `t,<dof>...` then one row per sample.
Trajectory LoadStreamCsv(const std::filesystem::path& path);

// Writes through a temporary file in the same directory and renames it.
void WriteFileAtomic(const std::filesystem::path& path,
                     const std::string& contents);
std::string ReadFile(const std::filesystem::path& path);

// CSV tables. Floating-point cells use 17 significant digits so parsing a
// file back reproduces the values exactly.
std::string RecordsCsv(const std::vector<RecordRow>& rows);
std::vector<RecordRow> ParseRecordsCsv(const std::string& text);
std::string AggregateCsv(const std::vector<AggregateRow>& rows);
std::string SelectionCsv(const std::vector<SelectionRow>& rows);
std::string BlendTraceCsv(const std::vector<BlendTraceRow>& rows);
// One row per (window, task) with the log posterior and alpha.
std::string RecognitionTraceCsv(const RunRecord& record);
// static-minus-dynamic differences for every (static ratio, dynamic window)
// pair of every task.
std::string CurvesCsv(const std::vector<AggregateRow>& rows);
// Recognition rate per task and static ratio, plus the final dynamic rate.
std::string RecognitionTableCsv(const std::vector<AggregateRow>& rows);

struct ExperimentConfig {
  std::vector<std::string> experiments = {"exp1", "exp2"};
  Profile profile = Profile::kToy;
  std::optional<std::uint64_t> seed;
  int n_demos = -1;
  // Dataset files replace the synthetic generator when set.
  std::vector<std::string> datasets;
  LoocvOptions loocv;
  std::vector<MetricConfig> gammas = DefaultGammaSets();
};

// Strict JSON config: unknown keys and bad values are ConfigErrors.
ExperimentConfig ParseConfig(const std::string& json_text);
ExperimentConfig LoadConfig(const std::filesystem::path& path);

}  // namespace ipromp

#endif  // IPROMP_IO_H_
