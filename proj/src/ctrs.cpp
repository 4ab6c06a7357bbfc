#include "cbtsim/ctrs.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cbtsim/markers.hpp"

namespace cbtsim {

const char* category_name(CtrsCategory c) {
  switch (c) {
    case CtrsCategory::Agenda: return "Agenda";
    case CtrsCategory::Feedback: return "Feedback";
    case CtrsCategory::Understanding: return "Understanding";
    case CtrsCategory::InterpersonalEffectiveness: return "Interpersonal Effectiveness";
    case CtrsCategory::Collaboration: return "Collaboration";
    case CtrsCategory::PacingAndEfficientUseOfTime: return "Pacing and Efficient Use of Time";
    case CtrsCategory::GuidedDiscovery: return "Guided Discovery";
    case CtrsCategory::FocusingOnKeyCognitionsOrBehaviors:
      return "Focusing on Key Cognitions or Behaviors";
    case CtrsCategory::StrategyForChange: return "Strategy for Change";
    case CtrsCategory::ApplicationOfCognitiveBehavioralTechniques:
      return "Application of Cognitive-Behavioral Techniques";
    case CtrsCategory::Homework: return "Homework";
  }
  return "?";
}

const std::array<CtrsCategory, kCategoryCount>& all_categories() {
  static const std::array<CtrsCategory, kCategoryCount> cats = {
      CtrsCategory::Agenda,
      CtrsCategory::Feedback,
      CtrsCategory::Understanding,
      CtrsCategory::InterpersonalEffectiveness,
      CtrsCategory::Collaboration,
      CtrsCategory::PacingAndEfficientUseOfTime,
      CtrsCategory::GuidedDiscovery,
      CtrsCategory::FocusingOnKeyCognitionsOrBehaviors,
      CtrsCategory::StrategyForChange,
      CtrsCategory::ApplicationOfCognitiveBehavioralTechniques,
      CtrsCategory::Homework};
  return cats;
}

namespace {

std::string normalize(const std::string& s) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out += ' ';
      pending_space = false;
      out += static_cast<char>(std::tolower(c));
    }
  }
  return out;
}

}  // namespace

void RatingLadder::validate() const {
  std::vector<std::string> seen;
  for (const auto& l : labels) {
    std::string n = normalize(l);
    if (n.empty()) throw CtrsError("rating ladder contains an empty label");
    if (std::find(seen.begin(), seen.end(), n) != seen.end())
      throw CtrsError("rating ladder labels must be unique (duplicate '" + l + "')");
    seen.push_back(n);
  }
  if (normalize(labels.front()) != "severely deficient" ||
      normalize(labels.back()) != "outstanding")
    throw CtrsError("ladder endpoints must be 'Severely Deficient' (1) and 'Outstanding' (10)");
}

int RatingLadder::word_to_score(const std::string& label) const {
  std::string n = normalize(label);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (normalize(labels[i]) == n) return static_cast<int>(i) + 1;
  throw CtrsError("unknown rating label: '" + label + "'");
}

const std::string& RatingLadder::score_to_word(int score) const {
  if (score < 1 || score > 10) throw CtrsError("score out of range 1..10");
  return labels[static_cast<std::size_t>(score - 1)];
}

RatingLadder default_ladder() {
  return RatingLadder{{"Severely Deficient", "Very Poor", "Poor", "Below Average", "Adequate",
                       "Satisfactory", "Good", "Very Good", "Excellent", "Outstanding"}};
}

RatingLadder load_ladder(const std::filesystem::path& rubric_path) {
  std::ifstream in(rubric_path);
  if (!in) throw CtrsError("rubric file not found: " + rubric_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CtrsError("rubric parse error: " + std::string(e.what()));
  }
  auto labels = j.at("rating_labels").get<std::vector<std::string>>();
  if (labels.size() != 10) throw CtrsError("rubric must list exactly 10 rating labels");
  RatingLadder ladder;
  std::copy(labels.begin(), labels.end(), ladder.labels.begin());
  ladder.validate();
  return ladder;
}

void CtrsEvaluation::recompute_total() {
  total_score = 0;
  for (const auto& c : categories) total_score += c.score;
}

CleanedTranscript clean_transcript(const SessionTranscript& t) {
  CleanedTranscript out;
  std::optional<std::size_t> first_patient;
  std::optional<std::size_t> last_therapist;
  for (std::size_t i = 0; i < t.utterances.size(); ++i) {
    if (t.utterances[i].speaker == Speaker::patient && !first_patient) first_patient = i;
    if (t.utterances[i].speaker == Speaker::therapist) last_therapist = i;
  }
  for (std::size_t i = 0; i < t.utterances.size(); ++i) {
    if (first_patient && i == *first_patient) continue;
    if (last_therapist && i == *last_therapist) continue;
    Utterance u = t.utterances[i];
    u.index = static_cast<int>(out.utterances.size());
    out.utterances.push_back(std::move(u));
  }
  out.excluded = out.utterances.empty();
  out.cleaned = true;
  return out;
}

std::pair<std::string, std::string> parse_judge_response(const std::string& text) {
  std::size_t open = text.find("```");
  if (open == std::string::npos) throw CtrsError("judge response has no fenced block");
  std::size_t start = text.find('\n', open);
  if (start == std::string::npos) throw CtrsError("judge response has no fenced block body");
  std::size_t close = text.find("```", start);
  if (close == std::string::npos) throw CtrsError("judge response fenced block is unterminated");
  std::string block = text.substr(start + 1, close - start - 1);

  std::string rating, justification;
  std::istringstream is(block);
  std::string line;
  bool in_justification = false;
  while (std::getline(is, line)) {
    if (line.rfind("rating:", 0) == 0) {
      rating = line.substr(7);
      in_justification = false;
    } else if (line.rfind("justification:", 0) == 0) {
      justification = line.substr(14);
      in_justification = true;
    } else if (in_justification) {
      justification += "\n" + line;
    }
  }
  auto trim = [](std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    std::size_t b = s.find_last_not_of(" \t\r\n");
    s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
  };
  trim(rating);
  trim(justification);
  if (rating.empty()) throw CtrsError("judge response block has no rating field");
  return {rating, justification};
}

namespace {

std::string judge_prompt(const CleanedTranscript& c, CtrsCategory category,
                         const RatingLadder& ladder) {
  std::ostringstream os;
  os << "Rate the therapist in the transcript below on one category of the Cognitive Therapy "
        "Rating Scale.\n"
     << markers::kJudgeCategory << category_name(category) << "\n"
     << "Use exactly one of these labels, from worst to best: ";
  for (std::size_t i = 0; i < ladder.labels.size(); ++i)
    os << (i ? ", " : "") << ladder.labels[i];
  os << ".\nAnchors: '" << ladder.labels[0]
     << "' = the skill is absent or harmful; '" << ladder.labels[4]
     << "' = the skill is present but inconsistent; '" << ladder.labels[9]
     << "' = the skill is executed expertly throughout.\n"
     << "Reply with a fenced block:\n```\nrating: <label>\njustification: <justification with "
        "specific examples>\n```\n\nTRANSCRIPT:\n";
  for (const auto& u : c.utterances)
    os << (u.speaker == Speaker::therapist ? "Therapist: " : "Patient: ") << u.text << "\n";
  return os.str();
}

}  // namespace

CtrsEvaluation rate_transcript(const ChatClient& client, const CleanedTranscript& c,
                               const TranscriptKey& key, const EndpointConfig& judge,
                               const JudgeOptions& options) {
  if (c.excluded) throw CtrsError("cannot rate an excluded (empty) transcript");
  if (!c.cleaned) throw CtrsError("transcript must be cleaned before rating");
  options.ladder.validate();

  CtrsEvaluation eval;
  eval.key = key;
  int failures = 0;
  for (std::size_t i = 0; i < all_categories().size(); ++i) {
    CtrsCategory cat = all_categories()[i];
    CategoryResult& res = eval.categories[i];
    std::string base_prompt = judge_prompt(c, cat, options.ladder);
    std::string last_error;
    bool ok = false;
    for (int attempt = 0; attempt <= options.max_retries && !ok; ++attempt) {
      std::string prompt = base_prompt;
      if (attempt > 0) prompt += "\n[retry " + std::to_string(attempt) + "]";
      ++res.attempts;
      try {
        std::vector<ChatMessage> messages{
            {ChatRole::system, "You are a strict CBT fidelity rater."},
            {ChatRole::user, prompt}};
        CompletionResult r = client.complete(judge, messages);
        auto [word, justification] = parse_judge_response(r.text);
        res.score = options.ladder.word_to_score(word);
        res.word = options.ladder.score_to_word(res.score);
        res.justification = justification;
        ok = true;
      } catch (const std::exception& e) {
        last_error = e.what();
      }
    }
    if (!ok) {
      // Conservative fallback: lowest possible score, failure documented.
      res.failed = true;
      res.score = 1;
      res.word = options.ladder.score_to_word(1);
      res.justification = "Category evaluation failed after " + std::to_string(res.attempts) +
                          " attempts: " + last_error;
      ++failures;
    }
  }
  if (failures == kCategoryCount)
    throw CtrsError("judge unreachable: all 11 categories failed for " + key.model + "/" +
                    key.variant + "/" + key.patient_id + "/" + std::to_string(key.session));
  eval.recompute_total();
  return eval;
}

EvaluationBatch evaluate_store(const ChatClient& client, const TranscriptStore& store,
                               const EndpointConfig& judge, const JudgeOptions& options) {
  EvaluationBatch batch;
  for (const auto& entry : store.list()) {
    SessionTranscript t = load_transcript(entry.path);
    CleanedTranscript c = clean_transcript(t);
    std::string tag = entry.model + "/" + entry.variant + "/" + entry.patient_id + "/" +
                      std::to_string(entry.session);
    if (c.excluded) {
      batch.exclusions.push_back(tag + ": no utterances remain after cleaning");
      continue;
    }
    TranscriptKey key{entry.model, entry.variant, entry.patient_id, entry.session};
    try {
      CtrsEvaluation eval = rate_transcript(client, c, key, judge, options);
      ScoreRow row{key.model, key.variant, key.patient_id, key.session, {}, eval.total_score};
      for (std::size_t i = 0; i < eval.categories.size(); ++i)
        row.category_scores[i] = eval.categories[i].score;
      batch.evaluations.push_back(std::move(eval));
      batch.rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      batch.exclusions.push_back(tag + ": evaluation error: " + e.what());
    }
  }
  return batch;
}

void to_json(nlohmann::json& j, const CtrsEvaluation& e) {
  nlohmann::json cats = nlohmann::json::object();
  for (std::size_t i = 0; i < e.categories.size(); ++i) {
    const auto& c = e.categories[i];
    cats[category_name(all_categories()[i])] = {{"word", c.word},
                                                {"score", c.score},
                                                {"justification", c.justification},
                                                {"failed", c.failed},
                                                {"attempts", c.attempts}};
  }
  j = nlohmann::json{{"model", e.key.model},
                     {"variant", e.key.variant},
                     {"patient_id", e.key.patient_id},
                     {"session", e.key.session},
                     {"categories", cats},
                     {"total_score", e.total_score}};
}

void from_json(const nlohmann::json& j, CtrsEvaluation& e) {
  e.key = {j.at("model").get<std::string>(), j.at("variant").get<std::string>(),
           j.at("patient_id").get<std::string>(), j.at("session").get<int>()};
  const auto& cats = j.at("categories");
  for (std::size_t i = 0; i < e.categories.size(); ++i) {
    const auto& c = cats.at(category_name(all_categories()[i]));
    e.categories[i] = {c.at("word").get<std::string>(), c.at("score").get<int>(),
                       c.at("justification").get<std::string>(), c.at("failed").get<bool>(),
                       c.at("attempts").get<int>()};
  }
  e.total_score = j.at("total_score").get<int>();
}

namespace {

std::string csv_header() {
  std::string h = "model,variant,patient_id,session";
  for (CtrsCategory c : all_categories()) {
    std::string name = category_name(c);
    std::replace(name.begin(), name.end(), ' ', '_');
    std::replace(name.begin(), name.end(), ',', '_');
    h += "," + name;
  }
  return h + ",total_score";
}

}  // namespace

void write_scores_csv(const std::vector<ScoreRow>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw CtrsError("cannot write scores csv: " + path.string());
  out << csv_header() << "\n";
  for (const auto& r : rows) {
    out << r.model << "," << r.variant << "," << r.patient_id << "," << r.session;
    for (int s : r.category_scores) out << "," << s;
    out << "," << r.total_score << "\n";
  }
}

std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CtrsError("cannot read scores csv: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw CtrsError("scores csv is empty: " + path.string());
  std::vector<ScoreRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(is, field, ',')) fields.push_back(field);
    if (fields.size() != 5 + kCategoryCount)
      throw CtrsError("malformed scores csv row: " + line);
    ScoreRow r;
    r.model = fields[0];
    r.variant = fields[1];
    r.patient_id = fields[2];
    r.session = std::atoi(fields[3].c_str());
    for (int i = 0; i < kCategoryCount; ++i)
      r.category_scores[static_cast<std::size_t>(i)] = std::atoi(fields[4 + i].c_str());
    r.total_score = std::atoi(fields[4 + kCategoryCount].c_str());
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace cbtsim
