#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "cbtsim/report.hpp"

using namespace cbtsim;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ScoreRow row(const std::string& model, const std::string& variant, const std::string& pid,
             int session, int per_category) {
  ScoreRow r{model, variant, pid, session, {}, 0};
  r.category_scores.fill(per_category);
  r.total_score = per_category * kCategoryCount;
  return r;
}

LmmFit sample_fit() {
  LmmFit fit;
  fit.beta = {69.508, -8.054, -4.160, -11.326, 0.179};
  fit.se = {0.948, 1.050, 1.041, 0.855, 0.428};
  fit.sigma2 = 108.3379;
  fit.tau2 = 0.873;
  fit.loglik = -2232.2854;
  fit.converged = true;
  fit.n_obs = 593;
  fit.n_groups = 5;
  fit.min_group_size = 117;
  fit.max_group_size = 120;
  fit.mean_group_size = 118.6;
  wald_tests(fit);
  auto [aic, bic] = information_criteria(fit.loglik, 7, fit.n_obs);
  fit.aic = aic;
  fit.bic = bic;
  return fit;
}

}  // namespace

TEST_CASE("quantiles interpolate between order statistics") {
  std::vector<double> v{1, 2, 3, 4};
  CHECK(quantile(v, 0.0) == doctest::Approx(1.0));
  CHECK(quantile(v, 1.0) == doctest::Approx(4.0));
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({7.0}, 0.5) == doctest::Approx(7.0));
  // unsorted input is handled
  CHECK(quantile({4, 1, 3, 2}, 0.5) == doctest::Approx(2.5));
  CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
}

TEST_CASE("box statistics flag 1.5 IQR outliers and clamp whiskers to data") {
  std::vector<double> v{50, 52, 54, 55, 56, 58, 60, 11};
  BoxStats b = box_stats(v);
  // sorted: 11 50 52 54 55 56 58 60; q1 = 51.5, median = 54.5, q3 = 56.5
  CHECK(b.q1 == doctest::Approx(51.5));
  CHECK(b.median == doctest::Approx(54.5));
  CHECK(b.q3 == doctest::Approx(56.5));
  // fences: 51.5 - 7.5 = 44, 56.5 + 7.5 = 64; 11 is the only outlier
  REQUIRE(b.outliers.size() == 1);
  CHECK(b.outliers[0] == doctest::Approx(11.0));
  CHECK(b.whisker_low == doctest::Approx(50.0));
  CHECK(b.whisker_high == doctest::Approx(60.0));

  BoxStats clean = box_stats({1, 2, 3, 4, 5});
  CHECK(clean.outliers.empty());
  CHECK(clean.whisker_low == doctest::Approx(1.0));
  CHECK(clean.whisker_high == doctest::Approx(5.0));
}

TEST_CASE("figure data aggregates radar means and box summaries per arm") {
  std::vector<ScoreRow> rows{
      row("Llama", "cbt", "a", 1, 6), row("Llama", "cbt", "b", 1, 8),
      row("Mistral", "instruct", "a", 1, 4),
  };
  rows[1].category_scores[0] = 10;  // perturb Agenda for Llama/cbt
  rows[1].total_score = 8 * kCategoryCount + 2;

  FigureData fd = figure_data(rows);
  REQUIRE(fd.radar.count("Llama/cbt") == 1);
  REQUIRE(fd.radar.count("Mistral/instruct") == 1);
  CHECK(fd.radar["Llama/cbt"][0] == doctest::Approx(8.0));   // (6 + 10) / 2
  CHECK(fd.radar["Llama/cbt"][1] == doctest::Approx(7.0));   // (6 + 8) / 2
  CHECK(fd.radar["Mistral/instruct"][10] == doctest::Approx(4.0));
  CHECK(fd.boxplot["Llama/cbt"].median == doctest::Approx((66 + 90) / 2.0));
  CHECK_THROWS_AS(figure_data({}), std::invalid_argument);
}

TEST_CASE("fit summaries serialize to JSON and back losslessly") {
  LmmFit fit = sample_fit();
  auto path = std::filesystem::temp_directory_path() / "cbtsim_fit.json";
  write_fit_json(fit, path);
  LmmFit back = read_fit_json(path);
  for (std::size_t i = 0; i < kFixedEffects; ++i) {
    CHECK(back.beta[i] == fit.beta[i]);
    CHECK(back.se[i] == fit.se[i]);
    CHECK(back.p[i] == fit.p[i]);
    CHECK(back.ci_low[i] == fit.ci_low[i]);
  }
  CHECK(back.sigma2 == fit.sigma2);
  CHECK(back.tau2 == fit.tau2);
  CHECK(back.loglik == fit.loglik);
  CHECK(back.n_obs == 593);
  CHECK(back.mean_group_size == doctest::Approx(118.6));

  std::ifstream in(path);
  nlohmann::json j;
  in >> j;
  CHECK(j.at("method") == "ML");
  CHECK(j.at("optimizer") == "lbfgs");
  CHECK(j.at("fixed_effects").size() == 5);
  CHECK(j.at("fixed_effects")[0].at("name") == "Intercept");
  CHECK(j.at("fixed_effects")[3].at("name") == "variant[T.instruct]");
}

TEST_CASE("the text table carries the headline numbers") {
  std::string table = format_table1(sample_fit());
  CHECK(table.find("MixedLM") != std::string::npos);
  CHECK(table.find("total_score") != std::string::npos);
  CHECK(table.find("593") != std::string::npos);
  CHECK(table.find("108.3379") != std::string::npos);
  CHECK(table.find("-2232.2854") != std::string::npos);
  CHECK(table.find("118.6") != std::string::npos);
  CHECK(table.find("Intercept") != std::string::npos);
  CHECK(table.find("model[T.Mistral]") != std::string::npos);
  CHECK(table.find("session_centered") != std::string::npos);
  CHECK(table.find("69.508") != std::string::npos);
  CHECK(table.find("-11.326") != std::string::npos);
  CHECK(table.find("Converged           Yes") != std::string::npos);
}

TEST_CASE("figure files are written in stable formats") {
  std::vector<ScoreRow> rows{
      row("Llama", "cbt", "a", 1, 6), row("Qwen", "instruct", "b", 2, 5),
  };
  auto dir = fresh_dir("cbtsim_figs");
  write_figure_data(figure_data(rows), dir);
  CHECK(std::filesystem::exists(dir / "radar.csv"));
  CHECK(std::filesystem::exists(dir / "boxplot.csv"));
  CHECK(std::filesystem::exists(dir / "figures.json"));

  std::ifstream radar(dir / "radar.csv");
  std::string header;
  std::getline(radar, header);
  CHECK(header == "model,variant,category,mean");
  std::size_t lines = 0;
  std::string line;
  while (std::getline(radar, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 2 * kCategoryCount);

  std::ifstream figs(dir / "figures.json");
  nlohmann::json j;
  figs >> j;
  CHECK(j.at("radar").at("Llama/cbt").at("Agenda") == doctest::Approx(6.0));
  CHECK(j.at("boxplot").at("Qwen/instruct").at("median") == doctest::Approx(55.0));
}

TEST_CASE("diagnostics export mirrors the bundle row by row") {
  DiagnosticsBundle d;
  d.fitted = {60.0, 62.5, 58.25};
  d.residuals = {1.5, -2.0, 0.25};
  d.sorted_residuals = {-2.0, 0.25, 1.5};
  d.theoretical_quantiles = {-0.9674, 0.0, 0.9674};
  d.explained_variance = 0.4321;
  auto dir = fresh_dir("cbtsim_diag");
  auto path = dir / "diagnostics.csv";
  write_diagnostics_csv(d, path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "fitted,residual,sorted_residual,theoretical_quantile");
  std::string first;
  std::getline(in, first);
  CHECK(first == "60,1.5,-2,-0.9674");
  std::size_t rows = 1;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);

  std::ifstream meta(dir / "diagnostics_summary.json");
  nlohmann::json j;
  meta >> j;
  CHECK(j.at("explained_variance") == doctest::Approx(0.4321));
}
