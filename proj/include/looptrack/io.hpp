#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "looptrack/classifier.hpp"
#include "looptrack/pipeline.hpp"
#include "looptrack/predictor.hpp"

namespace looptrack {

using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kModelFormatVersion = 1;

void to_json(json& j, const CurveModel& m);
void from_json(const json& j, CurveModel& m);
void to_json(json& j, const PlaneFrame& f);
void from_json(const json& j, PlaneFrame& f);
void to_json(json& j, const FitResult& r);
void from_json(const json& j, FitResult& r);
void to_json(json& j, const SimulationSpec& s);
void from_json(const json& j, SimulationSpec& s);
void to_json(json& j, const GroundTruth& g);
void from_json(const json& j, GroundTruth& g);
void to_json(json& j, const FilterConfig& c);
void to_json(json& j, const PredictionHorizon& h);
void to_json(json& j, const Metrics& m);

json probabilities_json(const ClassProbabilities& p);
/// Report as JSON; per-stage timings are included only on request because
/// they vary between otherwise identical runs.
json report_json(const PipelineReport& r, bool include_timings = false);
/// Inverse of report_json, enough to evaluate a saved report.
PipelineReport report_from_json(const json& j);

json model_json(const NetworkModel& net);
NetworkModel model_from_json(const json& j);
void save_model(const std::filesystem::path& path, const NetworkModel& net, const json& meta);
NetworkModel load_model(const std::filesystem::path& path);

/// Shortest text that parses back to the same double.
std::string format_number(double v);

/// A table of named numeric columns, written as CSV after '#' comment lines
/// carrying `meta` as compact JSON.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

void write_csv(const std::filesystem::path& path, const Table& table, const json& meta);
Table read_csv(const std::filesystem::path& path);
/// Table as JSON: {"meta": ..., "columns": [...], "rows": [[...], ...]}.
void write_table_json(const std::filesystem::path& path, const Table& table, const json& meta);
Table read_table_json(const std::filesystem::path& path);
/// Picks the reader from the extension (.json or CSV otherwise).
Table read_table(const std::filesystem::path& path);

Table trajectory_table(const TrajectoryRecord& tr);
/// Uses the t, x, y and optional z columns; other columns are ignored.
TrajectoryRecord trajectory_from_table(const Table& table);

/// Trajectory CSV with header t,x,y,z. A missing z column reads as z = 0.
void write_trajectory(const std::filesystem::path& path, const TrajectoryRecord& tr, const json& meta);
/// Reads a trajectory table (CSV or JSON) and, when present, the ground-truth sidecar next to it.
TrajectoryRecord read_trajectory(const std::filesystem::path& path);

/// "run.csv" -> "run.truth.json".
std::filesystem::path sidecar_path(const std::filesystem::path& csv);
void write_sidecar(const std::filesystem::path& path, const TrajectoryRecord& tr, const json& meta);

void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

/// Dataset CSV: label followed by the 2m feature columns.
void write_dataset(const std::filesystem::path& path, const Dataset& data, const json& meta);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace looptrack
