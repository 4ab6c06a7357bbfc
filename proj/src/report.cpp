#include "cbtsim/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cbtsim {

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of empty data");
  std::sort(values.begin(), values.end());
  double pos = p * static_cast<double>(values.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

BoxStats box_stats(const std::vector<double>& values) {
  BoxStats b;
  b.q1 = quantile(values, 0.25);
  b.median = quantile(values, 0.5);
  b.q3 = quantile(values, 0.75);
  double iqr = b.q3 - b.q1;
  double lo_fence = b.q1 - 1.5 * iqr;
  double hi_fence = b.q3 + 1.5 * iqr;
  // Whiskers extend to the most extreme data points inside the fences.
  b.whisker_low = b.q3;
  b.whisker_high = b.q1;
  bool any_inside = false;
  for (double v : values) {
    if (v >= lo_fence && v <= hi_fence) {
      if (!any_inside) {
        b.whisker_low = b.whisker_high = v;
        any_inside = true;
      } else {
        b.whisker_low = std::min(b.whisker_low, v);
        b.whisker_high = std::max(b.whisker_high, v);
      }
    } else {
      b.outliers.push_back(v);
    }
  }
  std::sort(b.outliers.begin(), b.outliers.end());
  return b;
}

FigureData figure_data(const std::vector<ScoreRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("figure_data requires evaluations");
  FigureData fd;
  std::map<std::string, std::vector<double>> totals;
  std::map<std::string, std::array<std::pair<double, std::size_t>, kCategoryCount>> sums;
  for (const auto& r : rows) {
    std::string key = r.model + "/" + r.variant;
    totals[key].push_back(r.total_score);
    auto& acc = sums[key];
    for (std::size_t i = 0; i < kCategoryCount; ++i) {
      acc[i].first += r.category_scores[i];
      acc[i].second += 1;
    }
  }
  for (const auto& [key, acc] : sums) {
    std::array<double, kCategoryCount> means{};
    for (std::size_t i = 0; i < kCategoryCount; ++i)
      means[i] = acc[i].first / static_cast<double>(acc[i].second);
    fd.radar[key] = means;
  }
  for (const auto& [key, v] : totals) fd.boxplot[key] = box_stats(v);
  return fd;
}

void to_json(nlohmann::json& j, const LmmFit& fit) {
  nlohmann::json coefs = nlohmann::json::array();
  for (std::size_t i = 0; i < kFixedEffects; ++i) {
    coefs.push_back({{"name", kCoefNames[i]},
                     {"coef", fit.beta[i]},
                     {"se", fit.se[i]},
                     {"z", fit.z[i]},
                     {"p", fit.p[i]},
                     {"ci_low", fit.ci_low[i]},
                     {"ci_high", fit.ci_high[i]}});
  }
  j = nlohmann::json{{"fixed_effects", coefs},
                     {"scale", fit.sigma2},
                     {"group_variance", fit.tau2},
                     {"loglik", fit.loglik},
                     {"aic", fit.aic},
                     {"bic", fit.bic},
                     {"converged", fit.converged},
                     {"optimizer", fit.optimizer_used == OptimizerUsed::Lbfgs ? "lbfgs" : "powell"},
                     {"n_obs", fit.n_obs},
                     {"n_groups", fit.n_groups},
                     {"min_group_size", fit.min_group_size},
                     {"max_group_size", fit.max_group_size},
                     {"mean_group_size", fit.mean_group_size},
                     {"method", "ML"}};
}

void from_json(const nlohmann::json& j, LmmFit& fit) {
  const auto& coefs = j.at("fixed_effects");
  for (std::size_t i = 0; i < kFixedEffects; ++i) {
    const auto& c = coefs.at(i);
    fit.beta[i] = c.at("coef").get<double>();
    fit.se[i] = c.at("se").get<double>();
    fit.z[i] = c.at("z").get<double>();
    fit.p[i] = c.at("p").get<double>();
    fit.ci_low[i] = c.at("ci_low").get<double>();
    fit.ci_high[i] = c.at("ci_high").get<double>();
  }
  fit.sigma2 = j.at("scale").get<double>();
  fit.tau2 = j.at("group_variance").get<double>();
  fit.loglik = j.at("loglik").get<double>();
  fit.aic = j.at("aic").get<double>();
  fit.bic = j.at("bic").get<double>();
  fit.converged = j.at("converged").get<bool>();
  fit.optimizer_used =
      j.at("optimizer").get<std::string>() == "powell" ? OptimizerUsed::Powell : OptimizerUsed::Lbfgs;
  fit.n_obs = j.at("n_obs").get<std::size_t>();
  fit.n_groups = j.at("n_groups").get<std::size_t>();
  fit.min_group_size = j.at("min_group_size").get<std::size_t>();
  fit.max_group_size = j.at("max_group_size").get<std::size_t>();
  fit.mean_group_size = j.at("mean_group_size").get<double>();
}

std::string format_table1(const LmmFit& fit) {
  std::ostringstream os;
  os << std::fixed;
  os << "Model Type            MixedLM    Dependent Variable  total_score\n"
     << "No. Observations      " << std::setw(7) << fit.n_obs << "    Method              ML\n"
     << "No. Groups            " << std::setw(7) << fit.n_groups << "    Scale               "
     << std::setprecision(4) << fit.sigma2 << "\n"
     << "Min. group size       " << std::setw(7) << fit.min_group_size
     << "    Log-Likelihood      " << std::setprecision(4) << fit.loglik << "\n"
     << "Max. group size       " << std::setw(7) << fit.max_group_size
     << "    Converged           " << (fit.converged ? "Yes" : "No") << "\n"
     << "Mean group size       " << std::setw(7) << std::setprecision(1) << fit.mean_group_size
     << "    Group variance      " << std::setprecision(4) << fit.tau2 << "\n\n";
  os << std::setprecision(3);
  os << std::left << std::setw(24) << "Fixed Effects" << std::right << std::setw(9) << "Coef."
     << std::setw(10) << "Std.Err." << std::setw(9) << "z" << std::setw(9) << "P>|z|"
     << std::setw(10) << "[0.025" << std::setw(9) << "0.975]" << "\n";
  for (std::size_t i = 0; i < kFixedEffects; ++i) {
    os << std::left << std::setw(24) << kCoefNames[i] << std::right << std::setw(9) << fit.beta[i]
       << std::setw(10) << fit.se[i] << std::setw(9) << fit.z[i] << std::setw(9) << fit.p[i]
       << std::setw(10) << fit.ci_low[i] << std::setw(9) << fit.ci_high[i] << "\n";
  }
  return os.str();
}

void write_fit_json(const LmmFit& fit, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write fit json: " + path.string());
  out << nlohmann::json(fit).dump(2) << "\n";
}

LmmFit read_fit_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read fit json: " + path.string());
  nlohmann::json j;
  in >> j;
  return j.get<LmmFit>();
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

void write_figure_data(const FigureData& fd, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "radar.csv");
    out << "model,variant,category,mean\n";
    for (const auto& [key, means] : fd.radar) {
      auto slash = key.find('/');
      for (std::size_t i = 0; i < kCategoryCount; ++i) {
        std::string cat = category_name(all_categories()[i]);
        std::replace(cat.begin(), cat.end(), ',', ';');
        out << key.substr(0, slash) << "," << key.substr(slash + 1) << "," << cat << ","
            << fmt(means[i]) << "\n";
      }
    }
  }
  {
    std::ofstream out(out_dir / "boxplot.csv");
    out << "model,variant,q1,median,q3,whisker_low,whisker_high,outliers\n";
    for (const auto& [key, b] : fd.boxplot) {
      auto slash = key.find('/');
      out << key.substr(0, slash) << "," << key.substr(slash + 1) << "," << fmt(b.q1) << ","
          << fmt(b.median) << "," << fmt(b.q3) << "," << fmt(b.whisker_low) << ","
          << fmt(b.whisker_high) << ",";
      for (std::size_t i = 0; i < b.outliers.size(); ++i)
        out << (i ? ";" : "") << fmt(b.outliers[i]);
      out << "\n";
    }
  }
  {
    nlohmann::json j;
    for (const auto& [key, means] : fd.radar) {
      nlohmann::json cats = nlohmann::json::object();
      for (std::size_t i = 0; i < kCategoryCount; ++i)
        cats[category_name(all_categories()[i])] = means[i];
      j["radar"][key] = cats;
    }
    for (const auto& [key, b] : fd.boxplot) {
      j["boxplot"][key] = {{"q1", b.q1},
                           {"median", b.median},
                           {"q3", b.q3},
                           {"whisker_low", b.whisker_low},
                           {"whisker_high", b.whisker_high},
                           {"outliers", b.outliers}};
    }
    std::ofstream out(out_dir / "figures.json");
    out << j.dump(2) << "\n";
  }
}

void write_diagnostics_csv(const DiagnosticsBundle& d, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write diagnostics csv: " + path.string());
  out << "fitted,residual,sorted_residual,theoretical_quantile\n";
  for (std::size_t i = 0; i < d.fitted.size(); ++i) {
    out << fmt(d.fitted[i]) << "," << fmt(d.residuals[i]) << "," << fmt(d.sorted_residuals[i])
        << "," << fmt(d.theoretical_quantiles[i]) << "\n";
  }
  std::ofstream meta(path.parent_path() / (path.stem().string() + "_summary.json"));
  meta << nlohmann::json{{"explained_variance", d.explained_variance}}.dump(2) << "\n";
}

}  // namespace cbtsim
