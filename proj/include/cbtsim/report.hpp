#pragma once
// Table and figure-data emitters: Table-1-style fit summary, radar chart
// means, and box-plot five-number summaries.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cbtsim/ctrs.hpp"
#include "cbtsim/lmm.hpp"

namespace cbtsim {

// Linear interpolation between order statistics: position (n-1)*p.
double quantile(std::vector<double> values, double p);

struct BoxStats {
  double median = 0.0, q1 = 0.0, q3 = 0.0;
  double whisker_low = 0.0, whisker_high = 0.0;  // 1.5*IQR rule, clamped to data
  std::vector<double> outliers;
};

BoxStats box_stats(const std::vector<double>& values);

struct FigureData {
  // radar: "model/variant" -> per-category mean (rubric order), in [1, 10]
  std::map<std::string, std::array<double, kCategoryCount>> radar;
  // boxplot: "model/variant" -> five-number summary of total scores
  std::map<std::string, BoxStats> boxplot;
};

FigureData figure_data(const std::vector<ScoreRow>& rows);

void to_json(nlohmann::json& j, const LmmFit& fit);
void from_json(const nlohmann::json& j, LmmFit& fit);

// Human-readable rendering mirroring the two-block fit summary layout.
std::string format_table1(const LmmFit& fit);

void write_fit_json(const LmmFit& fit, const std::filesystem::path& path);
LmmFit read_fit_json(const std::filesystem::path& path);

void write_figure_data(const FigureData& fd, const std::filesystem::path& out_dir);
void write_diagnostics_csv(const DiagnosticsBundle& d, const std::filesystem::path& path);

}  // namespace cbtsim
