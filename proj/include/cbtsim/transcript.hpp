#pragma once
// Transcript data model shared by the synthetic-data generator, the session
// simulator and the evaluator.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cbtsim/protocol.hpp"

namespace cbtsim {

enum class Speaker { therapist, patient };

const char* speaker_name(Speaker s);

struct Utterance {
  int index = 0;  // contiguous from 0
  Speaker speaker = Speaker::patient;
  std::string text;

  bool operator==(const Utterance&) const = default;
};

enum class Termination { SummaryDetected, TurnLimit, WordLimit, TeacherComplete };

const char* termination_name(Termination t);

struct TranscriptMeta {
  std::string therapist_model;
  std::string patient_model;
  int word_count = 0;

  bool operator==(const TranscriptMeta&) const = default;
};

struct SessionTranscript {
  std::string profile_id;
  int session_index = 1;  // 1..20
  Phase phase = Phase::Assessment;
  std::vector<Utterance> utterances;
  std::optional<std::string> final_summary;
  Termination termination = Termination::TeacherComplete;
  TranscriptMeta metadata;

  bool operator==(const SessionTranscript&) const = default;
};

struct CourseTranscripts {
  PatientProfile profile;
  std::vector<SessionTranscript> sessions;  // exactly 20, in order
};

void to_json(nlohmann::json& j, const Utterance& u);
void from_json(const nlohmann::json& j, Utterance& u);
void to_json(nlohmann::json& j, const SessionTranscript& t);
void from_json(const nlohmann::json& j, SessionTranscript& t);

// Whitespace-delimited tokens across all utterances of both speakers.
int count_words(const SessionTranscript& t);
int count_words_of(const std::string& text);

void save_transcript(const SessionTranscript& t, const std::filesystem::path& path);
SessionTranscript load_transcript(const std::filesystem::path& path);

}  // namespace cbtsim
