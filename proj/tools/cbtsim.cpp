// Command-line front door for the CBT simulation/evaluation pipeline.
//
// Subcommands: profiles, gen-data, export-dataset, simulate, evaluate,
// analyze, report. Exit codes: 0 success, 2 usage error, 3 invalid
// configuration, 4 runtime failure.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cbtsim/ctrs.hpp"
#include "cbtsim/lmm.hpp"
#include "cbtsim/profile.hpp"
#include "cbtsim/report.hpp"
#include "cbtsim/simulator.hpp"
#include "cbtsim/synth.hpp"

namespace {

using namespace cbtsim;

constexpr int kExitConfig = 3;
constexpr int kExitRuntime = 4;

struct RunConfig {
  AttributeCatalog catalog = default_catalog();
  PhaseAssets phases = default_phase_assets();
  RatingLadder ladder = default_ladder();
  std::filesystem::path cache_dir;
  std::map<std::string, EndpointConfig> endpoints;  // by role
  SimConfig sim;
  std::vector<CampaignVariant> variants;
  std::size_t n_profiles = 5;
  int sessions_per_profile = kSessionsPerCourse;
  int bonferroni_m = 4;
};

RunConfig load_config(const std::filesystem::path& path) {
  RunConfig cfg;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config file not found: " + path.string());
  nlohmann::json j;
  in >> j;
  auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  if (j.contains("paths")) {
    const auto& paths = j["paths"];
    if (paths.contains("catalog")) cfg.catalog = load_catalog(resolve(paths["catalog"]));
    if (paths.contains("phases")) cfg.phases = load_phase_assets(resolve(paths["phases"]));
    if (paths.contains("rubric")) cfg.ladder = load_ladder(resolve(paths["rubric"]));
    if (paths.contains("cache")) cfg.cache_dir = resolve(paths["cache"]);
  }
  if (j.contains("endpoints")) {
    for (const auto& [role, ep] : j["endpoints"].items()) {
      EndpointConfig e = ep.get<EndpointConfig>();
      if (e.name.empty()) e.name = role;
      e.validate();
      cfg.endpoints[role] = std::move(e);
    }
  }
  if (j.contains("sim")) {
    const auto& s = j["sim"];
    cfg.sim.max_turns = s.value("max_turns", 50);
    cfg.sim.max_words = s.value("max_words", 5000);
    cfg.sim.summary_sentinel = s.value("sentinel", std::string(markers::kDefaultSentinel));
  }
  if (j.contains("campaign")) {
    const auto& c = j["campaign"];
    cfg.n_profiles = c.value("n_profiles", std::size_t{5});
    cfg.sessions_per_profile = c.value("sessions_per_profile", kSessionsPerCourse);
    if (c.contains("variants")) {
      for (const auto& v : c["variants"]) {
        CampaignVariant cv;
        cv.model = v.at("model").get<std::string>();
        cv.variant = v.at("variant").get<std::string>();
        cv.therapist = v.at("therapist").get<EndpointConfig>();
        if (cv.therapist.name.empty()) cv.therapist.name = cv.model + "-" + cv.variant;
        cv.therapist.validate();
        cfg.variants.push_back(std::move(cv));
      }
    }
  }
  if (j.contains("analysis")) cfg.bonferroni_m = j["analysis"].value("bonferroni_m", 4);
  return cfg;
}

const EndpointConfig& require_endpoint(const RunConfig& cfg, const std::string& role) {
  auto it = cfg.endpoints.find(role);
  if (it == cfg.endpoints.end())
    throw std::runtime_error("config is missing the '" + role + "' endpoint");
  return it->second;
}

int run(int argc, char** argv) {
  CLI::App app{"CBT dialogue simulation and evaluation pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 42;
  bool dry_run = false;
  app.add_option("--config", config_path, "Path to the JSON run configuration");
  app.add_option("--seed", seed, "Base seed for profile sampling");
  app.add_flag("--dry-run", dry_run, "Validate configuration without endpoint calls");

  auto* cmd_profiles = app.add_subcommand("profiles", "Sample a patient cohort");
  std::size_t n_profiles = 5;
  std::string out_path = "out";
  cmd_profiles->add_option("--n", n_profiles, "Cohort size");
  cmd_profiles->add_option("--out", out_path, "Output file (JSON)");

  auto* cmd_gen = app.add_subcommand("gen-data", "Generate synthetic training courses");
  std::size_t gen_profiles = 2;
  std::string gen_out = "courses";
  cmd_gen->add_option("--n-profiles", gen_profiles, "Number of courses to generate");
  cmd_gen->add_option("--out", gen_out, "Course output directory");

  auto* cmd_export = app.add_subcommand("export-dataset", "Export fine-tuning chat dataset");
  std::string export_courses = "courses";
  std::string export_out = "dataset.jsonl";
  cmd_export->add_option("--courses", export_courses, "Course directory");
  cmd_export->add_option("--out", export_out, "Output .jsonl path");

  auto* cmd_sim = app.add_subcommand("simulate", "Run the simulation campaign");
  std::string store_path = "store";
  bool resume = false;
  cmd_sim->add_option("--store", store_path, "Transcript store root");
  cmd_sim->add_flag("--resume", resume, "Skip transcripts already in the store");

  auto* cmd_eval = app.add_subcommand("evaluate", "Score stored transcripts on the CTRS");
  std::string eval_store = "store";
  std::string eval_out = "scores.csv";
  std::string eval_json_dir;
  cmd_eval->add_option("--store", eval_store, "Transcript store root");
  cmd_eval->add_option("--out", eval_out, "scores.csv output path");
  cmd_eval->add_option("--evaluations", eval_json_dir, "Directory for per-transcript JSON");

  auto* cmd_analyze = app.add_subcommand("analyze", "Fit the mixed-effects model");
  std::string scores_path = "scores.csv";
  std::string fit_path = "fit.json";
  std::string diag_path;
  cmd_analyze->add_option("--scores", scores_path, "scores.csv input");
  cmd_analyze->add_option("--out", fit_path, "fit.json output");
  cmd_analyze->add_option("--diagnostics", diag_path, "diagnostics.csv output");

  auto* cmd_report = app.add_subcommand("report", "Emit tables and figure data");
  std::string rep_scores = "scores.csv";
  std::string rep_fit = "fit.json";
  std::string rep_out = "report";
  cmd_report->add_option("--scores", rep_scores, "scores.csv input");
  cmd_report->add_option("--fit", rep_fit, "fit.json input");
  cmd_report->add_option("--out", rep_out, "Report output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    cfg.catalog.validate();
    cfg.phases.validate();
    cfg.ladder.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (dry_run) {
    std::cout << "configuration OK (" << cfg.endpoints.size() << " endpoints, "
              << cfg.variants.size() << " campaign variants)\n";
    return 0;
  }

  ChatClient client(cfg.cache_dir);
  try {
    if (*cmd_profiles) {
      auto cohort = sample_cohort(n_profiles, seed, cfg.catalog);
      nlohmann::json j = cohort;
      std::filesystem::path out(out_path);
      if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
      std::ofstream o(out);
      o << j.dump(2) << "\n";
      std::cout << "wrote " << cohort.size() << " profiles to " << out_path << "\n";
    } else if (*cmd_gen) {
      const auto& teacher = require_endpoint(cfg, "teacher");
      auto cohort = sample_cohort(gen_profiles, seed, cfg.catalog);
      std::size_t sessions = 0;
      for (const auto& profile : cohort) {
        CourseTranscripts course = generate_course(client, profile, teacher, cfg.phases);
        save_course(course, gen_out);
        sessions += course.sessions.size();
      }
      std::cout << "generated " << cohort.size() << " courses (" << sessions << " sessions) in "
                << gen_out << "\n";
    } else if (*cmd_export) {
      std::vector<CourseTranscripts> courses;
      for (const auto& entry : std::filesystem::directory_iterator(export_courses)) {
        if (!entry.is_directory()) continue;
        CourseTranscripts course;
        std::ifstream pin(entry.path() / "profile.json");
        if (!pin) continue;
        nlohmann::json pj;
        pin >> pj;
        course.profile = pj.get<PatientProfile>();
        for (int s = 1; s <= kSessionsPerCourse; ++s) {
          char name[32];
          std::snprintf(name, sizeof(name), "session_%02d.json", s);
          auto sp = entry.path() / name;
          if (std::filesystem::exists(sp)) course.sessions.push_back(load_transcript(sp));
        }
        if (!course.sessions.empty()) courses.push_back(std::move(course));
      }
      ExportStats stats = export_finetune_dataset(courses, export_out);
      std::cout << "exported " << stats.records << " records (" << stats.merged_utterances
                << " merged utterances) to " << export_out << "\n";
    } else if (*cmd_sim) {
      if (cfg.variants.empty()) throw std::runtime_error("campaign has no variants configured");
      SimConfig sim = cfg.sim;
      sim.patient = require_endpoint(cfg, "patient");
      sim.summarizer = require_endpoint(cfg, "summarizer");
      CampaignSpec spec;
      spec.variants = cfg.variants;
      spec.profiles = sample_cohort(cfg.n_profiles, seed, cfg.catalog);
      spec.sessions_per_profile = cfg.sessions_per_profile;
      TranscriptStore store{store_path};
      if (!resume && std::filesystem::exists(store.root))
        std::filesystem::remove_all(store.root);
      CampaignResult result = run_campaign(client, spec, sim, store);
      std::cout << "campaign: " << result.sessions_run << " sessions run, "
                << result.sessions_skipped << " skipped, " << result.failures.size()
                << " failures\n";
      for (const auto& f : result.failures) std::cerr << "  " << f << "\n";
      if (!result.failures.empty()) return kExitRuntime;
    } else if (*cmd_eval) {
      const auto& judge = require_endpoint(cfg, "judge");
      TranscriptStore store{eval_store};
      JudgeOptions options;
      options.ladder = cfg.ladder;
      EvaluationBatch batch = evaluate_store(client, store, judge, options);
      write_scores_csv(batch.rows, eval_out);
      if (!eval_json_dir.empty()) {
        std::filesystem::create_directories(eval_json_dir);
        for (const auto& e : batch.evaluations) {
          std::string name = e.key.model + "_" + e.key.variant + "_" + e.key.patient_id + "_" +
                             std::to_string(e.key.session) + ".json";
          std::ofstream o(std::filesystem::path(eval_json_dir) / name);
          o << nlohmann::json(e).dump(2) << "\n";
        }
      }
      std::cout << "evaluated " << batch.rows.size() << " transcripts ("
                << batch.exclusions.size() << " excluded) -> " << eval_out << "\n";
      for (const auto& x : batch.exclusions) std::cerr << "  excluded " << x << "\n";
    } else if (*cmd_analyze) {
      auto rows = read_scores_csv(scores_path);
      auto [records, vreport] = validate_dataset(raw_from_rows(rows));
      LmmData data = design_matrix(records);
      LmmFit fit = fit_lmm(data);
      write_fit_json(fit, fit_path);
      if (!diag_path.empty()) write_diagnostics_csv(diagnostics(fit, data), diag_path);
      std::cout << "fit " << vreport.n_clean << " rows (" << vreport.dropped << " dropped, "
                << fit.n_groups << " groups) -> " << fit_path << "\n"
                << format_table1(fit);
    } else if (*cmd_report) {
      auto rows = read_scores_csv(rep_scores);
      std::filesystem::path out(rep_out);
      std::filesystem::create_directories(out);
      FigureData fd = figure_data(rows);
      write_figure_data(fd, out);
      Descriptives desc = descriptive_stats(rows);
      nlohmann::json dj;
      for (const auto& [key, g] : desc.totals) {
        dj["totals"][key] = {{"n", g.n}, {"mean", g.mean}, {"min", g.min}, {"max", g.max}};
        if (g.sd) dj["totals"][key]["sd"] = *g.sd;
      }
      for (const auto& [key, c] : desc.categories) {
        dj["categories"][key] = {{"n", c.n}, {"mean", c.mean}};
        if (c.sd) dj["categories"][key]["sd"] = *c.sd;
      }
      std::ofstream dout(out / "descriptives.json");
      dout << dj.dump(2) << "\n";
      if (std::filesystem::exists(rep_fit)) {
        LmmFit fit = read_fit_json(rep_fit);
        std::ofstream tout(out / "table1.txt");
        tout << format_table1(fit);
        std::ofstream jout(out / "table1.json");
        jout << nlohmann::json(fit).dump(2) << "\n";
        // Bonferroni-adjusted p-values for the non-intercept fixed effects.
        std::vector<double> pvals(fit.p.begin() + 1, fit.p.end());
        nlohmann::json bj;
        auto adjusted = bonferroni(pvals, cfg.bonferroni_m);
        for (std::size_t i = 0; i < adjusted.size(); ++i)
          bj[kCoefNames[i + 1]] = {{"p", pvals[i]}, {"p_bonferroni", adjusted[i]}};
        std::ofstream bout(out / "bonferroni.json");
        bout << bj.dump(2) << "\n";
      }
      std::cout << "report written to " << rep_out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
