#include "ipromp/io.h"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ipromp/error.h"

namespace ipromp {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr char kSidecarMagic[4] = {'I', 'P', 'R', 'B'};

[[noreturn]] void Schema(const std::string& what) {
  throw DataError(DataErrorKind::kSchema, what);
}

const json& Field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    Schema(std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

// Numbers, with JSON null standing for a value that was NaN/Inf on save.
double Number(const json& j, const char* what) {
  if (j.is_null()) {
    throw DataError(DataErrorKind::kNonFinite, std::string(what) + " is not finite");
  }
  if (!j.is_number()) Schema(std::string(what) + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) {
    throw DataError(DataErrorKind::kNonFinite, std::string(what) + " is not finite");
  }
  return v;
}

int Integer(const json& j, const char* what) {
  if (!j.is_number_integer()) Schema(std::string(what) + " must be an integer");
  return j.get<int>();
}

std::string String(const json& j, const char* what) {
  if (!j.is_string()) Schema(std::string(what) + " must be a string");
  return j.get<std::string>();
}

void CheckVersion(const json& j, const char* kind) {
  const int v = Integer(Field(j, "schema_version"), "schema_version");
  if (v != kSchemaVersion) {
    throw DataError(DataErrorKind::kVersion,
                    std::string(kind) + ": unsupported schema_version " +
                        std::to_string(v) + " (expected " +
                        std::to_string(kSchemaVersion) + ")");
  }
  if (String(Field(j, "kind"), "kind") != kind) {
    Schema(std::string("file is not an ") + kind);
  }
}

json Vector(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd Vector(const json& j, const char* what) {
  if (!j.is_array()) Schema(std::string(what) + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = Number(j[i], what);
  }
  return v;
}

// Row-major nested arrays.
json Matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(Vector(m.row(r).transpose()));
  return rows;
}

Eigen::MatrixXd Matrix(const json& j, Eigen::Index cols, const char* what) {
  if (!j.is_array()) Schema(std::string(what) + " must be an array of rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    const Eigen::VectorXd row = Vector(j[r], what);
    if (row.size() != cols) {
      throw DataError(DataErrorKind::kDimension,
                      std::string(what) + ": row width " +
                          std::to_string(row.size()) + ", expected " +
                          std::to_string(cols));
    }
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

json LayoutJson(const InteractionLayout& layout) {
  return {{"human_dofs", layout.human_dofs},
          {"robot_dofs", layout.robot_dofs},
          {"dof_names", layout.dof_names}};
}

InteractionLayout LayoutFrom(const json& j) {
  InteractionLayout layout;
  layout.human_dofs = Integer(Field(j, "human_dofs"), "human_dofs");
  layout.robot_dofs = Integer(Field(j, "robot_dofs"), "robot_dofs");
  const json& names = Field(j, "dof_names");
  if (!names.is_array()) Schema("dof_names must be an array");
  for (const json& n : names) layout.dof_names.push_back(String(n, "dof name"));
  try {
    layout.Validate();
  } catch (const ConfigError& e) {
    throw DataError(DataErrorKind::kDimension, e.what());
  }
  return layout;
}

json KinematicsJson(const ForwardKinematics& kin) {
  if (kin.passthrough()) return {{"mode", "passthrough"}};
  return {{"mode", "planar"}, {"link_lengths", kin.link_lengths()}};
}

ForwardKinematics KinematicsFrom(const json& j) {
  const std::string mode = String(Field(j, "mode"), "kinematics.mode");
  if (mode == "passthrough") return ForwardKinematics::Passthrough();
  if (mode != "planar") Schema("kinematics.mode must be passthrough or planar");
  const Eigen::VectorXd l = Vector(Field(j, "link_lengths"), "link_lengths");
  return ForwardKinematics::PlanarChain({l.data(), l.data() + l.size()});
}

json ModelJson(const PrompModel& model) {
  json j;
  j["layout"] = LayoutJson(model.layout);
  j["basis"] = {{"centers", Vector(model.basis.centers())},
                {"width", model.basis.width()},
                {"normalize", model.basis.normalize()}};
  j["weight_mean"] = Vector(model.weight_mean);
  j["weight_cov"] = Matrix(model.weight_cov);
  j["obs_noise"] = Vector(model.obs_noise);
  j["phase"] = {{"mean_alpha", model.phase.mean_alpha},
                {"std_alpha", model.phase.std_alpha},
                {"nominal_duration", model.phase.nominal_duration},
                {"candidate_grid", Vector(model.phase.candidate_grid)},
                {"std_floored", model.phase.std_floored}};
  j["n_demos"] = model.n_demos;
  return j;
}

PrompModel ModelFrom(const json& j) {
  PrompModel model;
  model.layout = LayoutFrom(Field(j, "layout"));
  const json& b = Field(j, "basis");
  const json& norm = Field(b, "normalize");
  if (!norm.is_boolean()) Schema("basis.normalize must be a boolean");
  try {
    model.basis = BasisSystem(Vector(Field(b, "centers"), "basis.centers"),
                              Number(Field(b, "width"), "basis.width"),
                              norm.get<bool>());
  } catch (const ConfigError& e) {
    throw DataError(DataErrorKind::kDomain, e.what());
  }
  model.weight_mean = Vector(Field(j, "weight_mean"), "weight_mean");
  model.weight_cov = Matrix(Field(j, "weight_cov"), model.weight_mean.size(),
                            "weight_cov");
  model.obs_noise = Vector(Field(j, "obs_noise"), "obs_noise");
  const json& ph = Field(j, "phase");
  model.phase.mean_alpha = Number(Field(ph, "mean_alpha"), "mean_alpha");
  model.phase.std_alpha = Number(Field(ph, "std_alpha"), "std_alpha");
  model.phase.nominal_duration =
      Number(Field(ph, "nominal_duration"), "nominal_duration");
  model.phase.candidate_grid =
      Vector(Field(ph, "candidate_grid"), "candidate_grid");
  const json& floored = Field(ph, "std_floored");
  if (!floored.is_boolean()) Schema("phase.std_floored must be a boolean");
  model.phase.std_floored = floored.get<bool>();
  model.n_demos = Integer(Field(j, "n_demos"), "n_demos");
  model.Validate();
  return model;
}

json ParseJson(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    Schema(origin + ": " + e.what());
  }
}

// Little-endian IEEE-754 doubles; the only byte order this build targets.
void AppendDoubles(std::string& out, const double* data, size_t n) {
  static_assert(sizeof(double) == 8);
  out.append(reinterpret_cast<const char*>(data), n * sizeof(double));
}

std::string Format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double ParseDouble(const std::string& s, const char* what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    Schema(std::string("csv: bad number in ") + what + ": '" + s + "'");
  }
  return v;
}

Formulation ParseFormulation(const std::string& s) {
  if (s == "static") return Formulation::kStatic;
  if (s == "dynamic") return Formulation::kDynamic;
  Schema("csv: unknown formulation '" + s + "'");
}

}  // namespace

DatasetFile ToDatasetFile(const Experiment& experiment) {
  DatasetFile d;
  d.name = experiment.name;
  d.layout = experiment.layout;
  d.units.assign(static_cast<size_t>(experiment.layout.human_dofs), "m");
  d.units.insert(d.units.end(), static_cast<size_t>(experiment.layout.robot_dofs),
                 experiment.kinematics.passthrough() ? "m" : "rad");
  d.kinematics = experiment.kinematics;
  for (const TaskDataset& t : experiment.tasks) {
    for (const Trajectory& demo : t.demos) {
      d.demos.push_back({t.spec.task_id, t.spec.sample_rate, demo});
    }
  }
  return d;
}

Experiment ToExperiment(const DatasetFile& dataset) {
  Experiment exp;
  exp.name = dataset.name;
  exp.layout = dataset.layout;
  exp.kinematics = dataset.kinematics;
  std::map<std::string, size_t> index;
  for (const DemoRecord& d : dataset.demos) {
    auto [it, inserted] = index.try_emplace(d.task_id, exp.tasks.size());
    if (inserted) {
      TaskDataset t;
      t.spec.task_id = d.task_id;
      t.spec.sample_rate = d.sample_rate;
      exp.tasks.push_back(std::move(t));
    }
    exp.tasks[it->second].demos.push_back(d.trajectory);
  }
  return exp;
}

void WriteFileAtomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw ConfigError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void SaveDataset(const DatasetFile& dataset, const fs::path& path,
                 bool binary_sidecar) {
  dataset.layout.Validate();
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "dataset";
  j["name"] = dataset.name;
  j["layout"] = LayoutJson(dataset.layout);
  j["layout"]["units"] = dataset.units;
  j["kinematics"] = KinematicsJson(dataset.kinematics);

  std::string blob;
  fs::path sidecar = path;
  sidecar += ".bin";
  if (binary_sidecar) {
    blob.append(kSidecarMagic, 4);
    const std::uint32_t version = kSchemaVersion;
    blob.append(reinterpret_cast<const char*>(&version), sizeof version);
    j["sidecar"] = sidecar.filename().string();
  }
  json demos = json::array();
  for (const DemoRecord& d : dataset.demos) {
    json e;
    e["task_id"] = d.task_id;
    e["duration_s"] = d.trajectory.duration();
    e["sample_rate_hz"] = d.sample_rate;
    e["rows"] = d.trajectory.steps();
    e["cols"] = d.trajectory.dofs();
    if (binary_sidecar) {
      e["offset"] = blob.size();
      AppendDoubles(blob, d.trajectory.timestamps.data(),
                    static_cast<size_t>(d.trajectory.steps()));
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
          rm = d.trajectory.samples;
      AppendDoubles(blob, rm.data(), static_cast<size_t>(rm.size()));
    } else {
      e["timestamps"] = Vector(d.trajectory.timestamps);
      e["samples"] = Matrix(d.trajectory.samples);
    }
    demos.push_back(std::move(e));
  }
  j["demos"] = std::move(demos);
  if (binary_sidecar) WriteFileAtomic(sidecar, blob);
  WriteFileAtomic(path, j.dump(1) + "\n");
}

DatasetFile LoadDataset(const fs::path& path) {
  const json j = ParseJson(ReadFile(path), path.string());
  CheckVersion(j, "dataset");
  DatasetFile d;
  d.name = String(Field(j, "name"), "name");
  d.layout = LayoutFrom(Field(j, "layout"));
  const json& units = Field(Field(j, "layout"), "units");
  if (!units.is_array()) Schema("units must be an array");
  for (const json& u : units) d.units.push_back(String(u, "unit"));
  if (static_cast<int>(d.units.size()) != d.layout.total()) {
    throw DataError(DataErrorKind::kDimension, "dataset: one unit per DoF required");
  }
  d.kinematics = KinematicsFrom(Field(j, "kinematics"));

  std::string blob;
  if (j.contains("sidecar")) {
    blob = ReadFile(path.parent_path() / String(j["sidecar"], "sidecar"));
    std::uint32_t version = 0;
    if (blob.size() < 8 || std::memcmp(blob.data(), kSidecarMagic, 4) != 0) {
      Schema("dataset: sidecar has no IPRB header");
    }
    std::memcpy(&version, blob.data() + 4, sizeof version);
    if (version != static_cast<std::uint32_t>(kSchemaVersion)) {
      throw DataError(DataErrorKind::kVersion, "dataset: sidecar version mismatch");
    }
  }

  const json& demos = Field(j, "demos");
  if (!demos.is_array()) Schema("demos must be an array");
  for (const json& e : demos) {
    DemoRecord rec;
    rec.task_id = String(Field(e, "task_id"), "task_id");
    rec.sample_rate = Number(Field(e, "sample_rate_hz"), "sample_rate_hz");
    const double duration = Number(Field(e, "duration_s"), "duration_s");
    const int rows = Integer(Field(e, "rows"), "rows");
    const int cols = Integer(Field(e, "cols"), "cols");
    if (cols != d.layout.total()) {
      throw DataError(DataErrorKind::kDimension,
                      "dataset: demo has " + std::to_string(cols) +
                          " columns, layout declares P + Q = " +
                          std::to_string(d.layout.total()));
    }
    if (rows < 2) throw DataError(DataErrorKind::kDimension, "dataset: demo too short");
    Trajectory& t = rec.trajectory;
    if (blob.empty()) {
      t.timestamps = Vector(Field(e, "timestamps"), "timestamps");
      t.samples = Matrix(Field(e, "samples"), cols, "samples");
    } else {
      const json& off = Field(e, "offset");
      if (!off.is_number_unsigned()) Schema("dataset: sidecar offset must be a byte count");
      const size_t offset = off.get<size_t>();
      const size_t count = static_cast<size_t>(rows) * (1 + static_cast<size_t>(cols));
      if (offset + count * sizeof(double) > blob.size()) {
        Schema("dataset: sidecar offset out of range");
      }
      t.timestamps.resize(rows);
      std::memcpy(t.timestamps.data(), blob.data() + offset, rows * sizeof(double));
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
      std::memcpy(rm.data(), blob.data() + offset + rows * sizeof(double),
                  static_cast<size_t>(rows) * cols * sizeof(double));
      t.samples = rm;
      if (!t.timestamps.allFinite() || !t.samples.allFinite()) {
        throw DataError(DataErrorKind::kNonFinite, "dataset: NaN in sidecar samples");
      }
    }
    if (t.steps() != rows || t.samples.rows() != rows) {
      throw DataError(DataErrorKind::kDimension, "dataset: row count mismatch");
    }
    t.Validate();
    const double expected = duration * rec.sample_rate + 1.0;
    if (std::abs(rows - expected) > 1.0 + 1e-9) {
      throw DataError(DataErrorKind::kDimension,
                      "dataset: " + std::to_string(rows) +
                          " samples do not match duration x rate");
    }
    d.demos.push_back(std::move(rec));
  }
  return d;
}

void SaveModel(const PrompModel& model, const fs::path& path) {
  model.Validate();
  json j = ModelJson(model);
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "model";
  WriteFileAtomic(path, j.dump(1) + "\n");
}

PrompModel LoadModel(const fs::path& path) {
  const json j = ParseJson(ReadFile(path), path.string());
  CheckVersion(j, "model");
  return ModelFrom(j);
}

void SaveLibrary(const TaskLibrary& library, const fs::path& path) {
  library.Validate();
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "library";
  j["priors"] = Vector(library.priors);
  json tasks = json::array();
  for (const TaskEntry& t : library.tasks) {
    tasks.push_back({{"task_id", t.task_id}, {"model", ModelJson(t.model)}});
  }
  j["tasks"] = std::move(tasks);
  WriteFileAtomic(path, j.dump(1) + "\n");
}

TaskLibrary LoadLibrary(const fs::path& path) {
  const json j = ParseJson(ReadFile(path), path.string());
  CheckVersion(j, "library");
  TaskLibrary lib;
  lib.priors = Vector(Field(j, "priors"), "priors");
  const json& tasks = Field(j, "tasks");
  if (!tasks.is_array()) Schema("tasks must be an array");
  for (const json& t : tasks) {
    lib.tasks.push_back({String(Field(t, "task_id"), "task_id"),
                         ModelFrom(Field(t, "model"))});
  }
  try {
    lib.Validate();
  } catch (const ConfigError& e) {
    Schema(e.what());
  }
  return lib;
}

Trajectory LoadStreamCsv(const fs::path& path) {
  std::istringstream in(ReadFile(path));
  std::string line;
  if (!std::getline(in, line)) Schema("stream csv: empty file");
  const size_t cols = SplitCsvLine(line).size();
  if (cols < 2) Schema("stream csv: need a time column and at least one DoF");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = SplitCsvLine(line);
    if (cells.size() != cols) {
      throw DataError(DataErrorKind::kDimension, "stream csv: ragged row");
    }
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(ParseDouble(c, "stream"));
    rows.push_back(std::move(r));
  }
  Trajectory t;
  t.kind = DofKind::kHumanOnly;
  t.timestamps.resize(static_cast<Eigen::Index>(rows.size()));
  t.samples.resize(static_cast<Eigen::Index>(rows.size()),
                   static_cast<Eigen::Index>(cols - 1));
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    t.timestamps[r] = rows[i][0];
    for (size_t c = 1; c < cols; ++c) {
      t.samples(r, static_cast<Eigen::Index>(c - 1)) = rows[i][c];
    }
  }
  if (!t.timestamps.allFinite() || !t.samples.allFinite()) {
    throw DataError(DataErrorKind::kNonFinite, "stream csv: non-finite value");
  }
  t.Validate();
  return t;
}

std::string RecordsCsv(const std::vector<RecordRow>& rows) {
  std::string out =
      "experiment,task,fold,formulation,window,e_p,e_q,e_phi,recognized,"
      "alpha_est,alpha_true,n_windows\n";
  for (const RecordRow& r : rows) {
    out += r.experiment + ',' + r.task + ',' + std::to_string(r.fold) + ',' +
           FormulationName(r.formulation) + ',' + Format(r.window) + ',' +
           Format(r.e_p) + ',' + Format(r.e_q) + ',' + Format(r.e_phi) + ',' +
           r.recognized + ',' + Format(r.alpha_est) + ',' +
           Format(r.alpha_true) + ',' + std::to_string(r.n_windows) + '\n';
  }
  return out;
}

std::vector<RecordRow> ParseRecordsCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || SplitCsvLine(line).size() != 12) {
    Schema("records csv: unexpected header");
  }
  std::vector<RecordRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = SplitCsvLine(line);
    if (c.size() != 12) Schema("records csv: row with " + std::to_string(c.size()) + " cells");
    RecordRow r;
    r.experiment = c[0];
    r.task = c[1];
    r.fold = static_cast<int>(ParseDouble(c[2], "fold"));
    r.formulation = ParseFormulation(c[3]);
    r.window = ParseDouble(c[4], "window");
    r.e_p = ParseDouble(c[5], "e_p");
    r.e_q = ParseDouble(c[6], "e_q");
    r.e_phi = ParseDouble(c[7], "e_phi");
    r.recognized = c[8];
    r.alpha_est = ParseDouble(c[9], "alpha_est");
    r.alpha_true = ParseDouble(c[10], "alpha_true");
    r.n_windows = static_cast<int>(ParseDouble(c[11], "n_windows"));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string AggregateCsv(const std::vector<AggregateRow>& rows) {
  std::string out =
      "experiment,task,formulation,window,n,e_p,e_q,e_phi,recognition_rate\n";
  for (const AggregateRow& a : rows) {
    out += a.experiment + ',' + a.task + ',' + FormulationName(a.formulation) +
           ',' + Format(a.window) + ',' + std::to_string(a.n) + ',' +
           Format(a.e_p) + ',' + Format(a.e_q) + ',' + Format(a.e_phi) + ',' +
           Format(a.recognition_rate) + '\n';
  }
  return out;
}

std::string SelectionCsv(const std::vector<SelectionRow>& rows) {
  std::string out = "experiment,task,gamma_p,gamma_q,gamma_phi,window,m,selected\n";
  for (const SelectionRow& s : rows) {
    for (size_t i = 0; i < s.selection.windows.size(); ++i) {
      const double w = s.selection.windows[i];
      out += s.experiment + ',' + s.task + ',' + Format(s.gamma.gamma_p) + ',' +
             Format(s.gamma.gamma_q) + ',' + Format(s.gamma.gamma_phi) + ',' +
             Format(w) + ',' + Format(s.selection.m[i]) + ',' +
             (w == s.selection.best_window ? "1" : "0") + '\n';
    }
  }
  return out;
}

std::string BlendTraceCsv(const std::vector<BlendTraceRow>& rows) {
  std::string out = "z,a_fall,a_rise";
  const Eigen::Index q = rows.empty() ? 0 : rows.front().blended_mean.size();
  for (const char* part : {"current", "incoming", "blended"}) {
    for (Eigen::Index d = 0; d < q; ++d) {
      out += std::string(",") + part + "_mean_" + std::to_string(d) + ',' +
             part + "_std_" + std::to_string(d);
    }
  }
  out += '\n';
  for (const BlendTraceRow& r : rows) {
    out += Format(r.z) + ',' + Format(r.a_fall) + ',' + Format(r.a_rise);
    for (const auto* pair : {&r.current_mean, &r.incoming_mean, &r.blended_mean}) {
      const Eigen::VectorXd& mean = *pair;
      const Eigen::VectorXd& sd = pair == &r.current_mean    ? r.current_std
                                  : pair == &r.incoming_mean ? r.incoming_std
                                                             : r.blended_std;
      for (Eigen::Index d = 0; d < q; ++d) {
        out += ',' + Format(mean[d]) + ',' + Format(sd[d]);
      }
    }
    out += '\n';
  }
  return out;
}

std::string RecognitionTraceCsv(const RunRecord& record) {
  std::string out = "window,start,end,samples,skipped,winner,task_index,log_posterior,alpha\n";
  for (const WindowTrace& w : record.windows) {
    const std::string head = std::to_string(w.index) + ',' + Format(w.start) +
                             ',' + Format(w.end) + ',' +
                             std::to_string(w.samples) + ',' +
                             (w.skipped ? "1" : "0") + ',' + w.task_id;
    if (w.skipped) {
      out += head + ",,,\n";
      continue;
    }
    for (Eigen::Index k = 0; k < w.log_posterior.size(); ++k) {
      out += head + ',' + std::to_string(k) + ',' + Format(w.log_posterior[k]) +
             ',' + Format(w.alphas[k]) + '\n';
    }
  }
  return out;
}

std::string CurvesCsv(const std::vector<AggregateRow>& rows) {
  std::string out =
      "experiment,task,static_ratio,dynamic_window,d_p,d_q,d_phi,"
      "dynamic_e_p,dynamic_e_q,dynamic_e_phi\n";
  for (const AggregateRow& s : rows) {
    if (s.formulation != Formulation::kStatic) continue;
    for (const AggregateRow& d : rows) {
      if (d.formulation != Formulation::kDynamic || d.task != s.task ||
          d.experiment != s.experiment) {
        continue;
      }
      out += s.experiment + ',' + s.task + ',' + Format(s.window) + ',' +
             Format(d.window) + ',' + Format(s.e_p - d.e_p) + ',' +
             Format(s.e_q - d.e_q) + ',' + Format(s.e_phi - d.e_phi) + ',' +
             Format(d.e_p) + ',' + Format(d.e_q) + ',' + Format(d.e_phi) + '\n';
    }
  }
  return out;
}

std::string RecognitionTableCsv(const std::vector<AggregateRow>& rows) {
  std::string out = "experiment,task,formulation,window,recognition_rate\n";
  for (const AggregateRow& a : rows) {
    out += a.experiment + ',' + a.task + ',' + FormulationName(a.formulation) +
           ',' + Format(a.window) + ',' + Format(a.recognition_rate) + '\n';
  }
  return out;
}

namespace {

// Reads keys from a JSON object and rejects any left unread.
class StrictObject {
 public:
  StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + " must be an object");
  }
  ~StrictObject() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) {
        throw ConfigError("config: unknown key '" + where_ + "." + it.key() + "'");
      }
    }
  }
  const json* Get(const std::string& key) {
    used_[key] = true;
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  void Number(const std::string& key, double& out) {
    if (const json* v = Get(key)) {
      if (!v->is_number()) throw ConfigError("config: " + where_ + "." + key + " must be a number");
      out = v->get<double>();
    }
  }
  void Int(const std::string& key, int& out) {
    if (const json* v = Get(key)) {
      if (!v->is_number_integer()) throw ConfigError("config: " + where_ + "." + key + " must be an integer");
      out = v->get<int>();
    }
  }
  void Bool(const std::string& key, bool& out) {
    if (const json* v = Get(key)) {
      if (!v->is_boolean()) throw ConfigError("config: " + where_ + "." + key + " must be a boolean");
      out = v->get<bool>();
    }
  }
  void Numbers(const std::string& key, std::vector<double>& out) {
    if (const json* v = Get(key)) {
      if (!v->is_array()) throw ConfigError("config: " + where_ + "." + key + " must be an array");
      out.clear();
      for (const json& x : *v) {
        if (!x.is_number()) throw ConfigError("config: " + where_ + "." + key + " must hold numbers");
        out.push_back(x.get<double>());
      }
    }
  }
  void Noise(const std::string& key, Eigen::VectorXd& out) {
    if (const json* v = Get(key)) {
      std::vector<double> vals;
      if (v->is_number()) {
        vals.push_back(v->get<double>());
      } else {
        Numbers(key, vals);
      }
      out = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::map<std::string, bool> used_;
};

}  // namespace

ExperimentConfig ParseConfig(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig cfg;
  LoocvOptions& lo = cfg.loocv;
  lo.trace_folds = {0};
  {
    StrictObject root(j, "config");
    const json* version = root.Get("schema_version");
    if (version == nullptr || !version->is_number_integer() ||
        version->get<int>() != kSchemaVersion) {
      throw ConfigError("config: schema_version must be " + std::to_string(kSchemaVersion));
    }
    if (const json* v = root.Get("experiments")) {
      if (!v->is_array() || v->empty()) throw ConfigError("config: experiments must be a non-empty array");
      cfg.experiments.clear();
      for (const json& e : *v) {
        if (!e.is_string() || (e != "exp1" && e != "exp2")) {
          throw ConfigError("config: experiments entries must be exp1 or exp2");
        }
        cfg.experiments.push_back(e.get<std::string>());
      }
    }
    if (const json* v = root.Get("profile")) {
      if (!v->is_string()) throw ConfigError("config: profile must be a string");
      cfg.profile = ParseProfile(v->get<std::string>());
    }
    if (const json* v = root.Get("seed")) {
      if (!v->is_number_unsigned()) throw ConfigError("config: seed must be a non-negative integer");
      cfg.seed = v->get<std::uint64_t>();
    }
    root.Int("n_demos", cfg.n_demos);
    if (const json* v = root.Get("datasets")) {
      if (!v->is_array()) throw ConfigError("config: datasets must be an array");
      for (const json& p : *v) {
        if (!p.is_string()) throw ConfigError("config: dataset paths must be strings");
        cfg.datasets.push_back(p.get<std::string>());
      }
    }
    root.Int("jobs", lo.jobs);
    root.Int("max_folds", lo.max_folds);
    if (const json* v = root.Get("trace_folds")) {
      if (!v->is_array()) throw ConfigError("config: trace_folds must be an array");
      lo.trace_folds.clear();
      for (const json& f : *v) {
        if (!f.is_number_integer()) throw ConfigError("config: trace_folds must hold integers");
        lo.trace_folds.push_back(f.get<int>());
      }
    }
    if (const json* v = root.Get("basis")) {
      StrictObject o(*v, "basis");
      o.Int("n_basis", lo.n_basis);
      o.Number("overlap", lo.basis_overlap);
    }
    if (const json* v = root.Get("fit")) {
      StrictObject o(*v, "fit");
      o.Number("ridge", lo.fit.ridge);
      o.Number("fallback_ridge", lo.fit.fallback_ridge);
      o.Number("shrinkage", lo.fit.shrinkage);
      o.Number("jitter", lo.fit.jitter);
      o.Int("resample_points", lo.fit.resample_points);
      o.Noise("obs_noise", lo.fit.obs_noise);
    }
    if (const json* v = root.Get("phase")) {
      StrictObject o(*v, "phase");
      o.Int("grid_points", lo.fit.phase_grid.grid_points);
      o.Number("grid_span_sigmas", lo.fit.phase_grid.span_sigmas);
      o.Number("min_alpha", lo.fit.phase_grid.min_alpha);
      o.Number("std_floor", lo.fit.phase_grid.std_floor);
      o.Bool("flat_prior", lo.pipeline.recognition.phase.flat_prior);
    }
    if (const json* v = root.Get("condition")) {
      StrictObject o(*v, "condition");
      o.Noise("observation_noise", lo.pipeline.condition.observation_noise);
      o.Bool("sequential", lo.pipeline.condition.sequential);
    }
    if (const json* v = root.Get("pipeline")) {
      StrictObject o(*v, "pipeline");
      o.Int("grid_points", lo.pipeline.grid_points);
      o.Number("blend_gradient", lo.pipeline.blend_gradient);
      o.Number("switch_offset_windows", lo.pipeline.switch_offset_windows);
      o.Bool("cumulative_alpha", lo.pipeline.cumulative_alpha);
      o.Number("sticky_prior", lo.pipeline.sticky_prior);
      o.Bool("global_alpha", lo.pipeline.recognition.global_alpha);
    }
    if (const json* v = root.Get("sweep")) {
      StrictObject o(*v, "sweep");
      o.Numbers("dynamic", lo.sweep.dynamic_windows);
      o.Numbers("static", lo.sweep.static_ratios);
      o.Int("subsample_stride", lo.sweep.subsample_stride);
    }
    if (const json* v = root.Get("metric")) {
      StrictObject o(*v, "metric");
      if (const json* mode = o.Get("joint_error")) {
        if (*mode == "rms") {
          lo.joint_error = JointErrorMode::kRms;
        } else if (*mode == "sum") {
          lo.joint_error = JointErrorMode::kSum;
        } else {
          throw ConfigError("config: metric.joint_error must be rms or sum");
        }
      }
      if (const json* g = o.Get("gammas")) {
        if (!g->is_array() || g->empty()) throw ConfigError("config: metric.gammas must be a non-empty array");
        cfg.gammas.clear();
        for (const json& t : *g) {
          if (!t.is_array() || t.size() != 3) throw ConfigError("config: each gamma set has three weights");
          MetricConfig m;
          m.gamma_p = t[0].get<double>();
          m.gamma_q = t[1].get<double>();
          m.gamma_phi = t[2].get<double>();
          m.Validate();
          cfg.gammas.push_back(m);
        }
      }
    }
  }
  if (lo.n_basis < 1) throw ConfigError("config: basis.n_basis must be >= 1");
  if (lo.sweep.subsample_stride < 1) throw ConfigError("config: sweep.subsample_stride must be >= 1");
  if (lo.fit.phase_grid.grid_points < 1) throw ConfigError("config: phase.grid_points must be >= 1");
  for (double w : lo.sweep.dynamic_windows) {
    if (!(w > 0.0)) throw ConfigError("config: dynamic windows must be positive");
  }
  for (double r : lo.sweep.static_ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("config: static ratios must lie in (0, 1]");
  }
  return cfg;
}

ExperimentConfig LoadConfig(const fs::path& path) {
  return ParseConfig(ReadFile(path));
}

}  // namespace ipromp
