#pragma once
// Modified 11-category CTRS evaluation: transcript cleaning, judge calls with
// retry/fallback, word-label to score conversion, and score export.

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cbtsim/gateway.hpp"
#include "cbtsim/simulator.hpp"
#include "cbtsim/transcript.hpp"

namespace cbtsim {

struct CtrsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kCategoryCount = 11;

enum class CtrsCategory {
  Agenda,
  Feedback,
  Understanding,
  InterpersonalEffectiveness,
  Collaboration,
  PacingAndEfficientUseOfTime,
  GuidedDiscovery,
  FocusingOnKeyCognitionsOrBehaviors,
  StrategyForChange,
  ApplicationOfCognitiveBehavioralTechniques,
  Homework,
};

const char* category_name(CtrsCategory c);
const std::array<CtrsCategory, kCategoryCount>& all_categories();

// Ten ordered labels mapping to 1..10; endpoints fixed by the rubric
// ("Severely Deficient" = 1, "Outstanding" = 10). Labels are a versioned
// rubric asset; intermediate labels are our construction.
struct RatingLadder {
  std::array<std::string, 10> labels;

  void validate() const;
  // Case-insensitive, whitespace-normalized. Throws on unknown labels.
  int word_to_score(const std::string& label) const;
  const std::string& score_to_word(int score) const;
};

RatingLadder default_ladder();
RatingLadder load_ladder(const std::filesystem::path& rubric_path);

struct CategoryResult {
  std::string word;
  int score = 1;
  std::string justification;
  bool failed = false;
  int attempts = 0;
};

struct TranscriptKey {
  std::string model, variant, patient_id;
  int session = 0;
};

struct CtrsEvaluation {
  TranscriptKey key;
  std::array<CategoryResult, kCategoryCount> categories;
  int total_score = 0;  // always the category sum, in [11, 110]

  void recompute_total();
};

struct CleanedTranscript {
  std::vector<Utterance> utterances;
  bool excluded = false;  // true iff nothing remains after cleaning
  bool cleaned = true;    // guards against double application
};

// Removes the patient's first and the therapist's last statement.
CleanedTranscript clean_transcript(const SessionTranscript& t);

// Extracts (rating label, justification) from the judge's fenced block.
std::pair<std::string, std::string> parse_judge_response(const std::string& text);

struct JudgeOptions {
  int max_retries = 3;  // retries after the first attempt, then fallback
  RatingLadder ladder = default_ladder();
};

CtrsEvaluation rate_transcript(const ChatClient& client, const CleanedTranscript& c,
                               const TranscriptKey& key, const EndpointConfig& judge,
                               const JudgeOptions& options = {});

struct ScoreRow {
  std::string model, variant, patient_id;
  int session = 0;
  std::array<int, kCategoryCount> category_scores{};
  int total_score = 0;
};

struct EvaluationBatch {
  std::vector<CtrsEvaluation> evaluations;
  std::vector<ScoreRow> rows;
  std::vector<std::string> exclusions;  // "model/variant/patient/session: reason"
};

EvaluationBatch evaluate_store(const ChatClient& client, const TranscriptStore& store,
                               const EndpointConfig& judge, const JudgeOptions& options = {});

void to_json(nlohmann::json& j, const CtrsEvaluation& e);
void from_json(const nlohmann::json& j, CtrsEvaluation& e);

// Flat CSV: model,variant,patient_id,session,<11 category columns>,total_score
void write_scores_csv(const std::vector<ScoreRow>& rows, const std::filesystem::path& path);
std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path);

}  // namespace cbtsim
