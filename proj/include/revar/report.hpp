#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "revar/metrics.hpp"

namespace revar {

struct SweepResult;

/// Scalars, replicate count and configuration; curves go to CSV.
nlohmann::json to_json(const EvaluationReport& report);
nlohmann::json to_json(const EvaluationConfig& config);

/// `frequency_hz,reference,synthetic` (synthetic column omitted when empty).
std::string spectrum_csv(const SpectrumEstimate& reference, const SpectrumEstimate* synthetic);
/// `dx,dy,reference,synthetic,count`, one row per offset.
std::string structure_csv(const StructureFunction2D& reference,
                          const StructureFunction2D* synthetic);
std::string sweep_csv(const SweepResult& sweep);

struct Series2D {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
};

/// Self-contained SVG line chart. Non-positive values are skipped on log axes.
std::string svg_line_chart(const std::vector<Series2D>& series, const ChartOptions& options);
/// Self-contained SVG heatmap of a row-major grid.
std::string svg_heatmap(const std::vector<double>& values, std::size_t width, std::size_t height,
                        const std::string& title);

/// Writes report.json, the CSV curves and SVG plots into `dir` (created if needed).
void write_evaluation_outputs(const EvaluationReport& report, const std::filesystem::path& dir);
void write_sweep_outputs(const SweepResult& sweep, const std::filesystem::path& dir);

}  // namespace revar
