#include "cbtsim/transcript.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cbtsim {

const char* speaker_name(Speaker s) {
  return s == Speaker::therapist ? "therapist" : "patient";
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::SummaryDetected: return "summary_detected";
    case Termination::TurnLimit: return "turn_limit";
    case Termination::WordLimit: return "word_limit";
    case Termination::TeacherComplete: return "teacher_complete";
  }
  return "?";
}

namespace {

Speaker speaker_from(const std::string& s) {
  if (s == "therapist") return Speaker::therapist;
  if (s == "patient") return Speaker::patient;
  throw std::runtime_error("unknown speaker: " + s);
}

Termination termination_from(const std::string& s) {
  if (s == "summary_detected") return Termination::SummaryDetected;
  if (s == "turn_limit") return Termination::TurnLimit;
  if (s == "word_limit") return Termination::WordLimit;
  if (s == "teacher_complete") return Termination::TeacherComplete;
  throw std::runtime_error("unknown termination: " + s);
}

}  // namespace

void to_json(nlohmann::json& j, const Utterance& u) {
  j = nlohmann::json{{"index", u.index}, {"speaker", speaker_name(u.speaker)}, {"text", u.text}};
}

void from_json(const nlohmann::json& j, Utterance& u) {
  j.at("index").get_to(u.index);
  u.speaker = speaker_from(j.at("speaker").get<std::string>());
  j.at("text").get_to(u.text);
}

void to_json(nlohmann::json& j, const SessionTranscript& t) {
  j = nlohmann::json{{"profile_id", t.profile_id},
                     {"session_index", t.session_index},
                     {"phase", phase_name(t.phase)},
                     {"utterances", t.utterances},
                     {"termination", termination_name(t.termination)},
                     {"metadata",
                      {{"therapist_model", t.metadata.therapist_model},
                       {"patient_model", t.metadata.patient_model},
                       {"word_count", t.metadata.word_count}}}};
  if (t.final_summary) j["final_summary"] = *t.final_summary;
}

void from_json(const nlohmann::json& j, SessionTranscript& t) {
  j.at("profile_id").get_to(t.profile_id);
  j.at("session_index").get_to(t.session_index);
  t.phase = phase_of(t.session_index);
  j.at("utterances").get_to(t.utterances);
  t.termination = termination_from(j.at("termination").get<std::string>());
  if (j.contains("final_summary")) t.final_summary = j["final_summary"].get<std::string>();
  else t.final_summary.reset();
  const auto& m = j.at("metadata");
  m.at("therapist_model").get_to(t.metadata.therapist_model);
  m.at("patient_model").get_to(t.metadata.patient_model);
  m.at("word_count").get_to(t.metadata.word_count);
}

int count_words_of(const std::string& text) {
  std::istringstream is(text);
  std::string tok;
  int n = 0;
  while (is >> tok) ++n;
  return n;
}

int count_words(const SessionTranscript& t) {
  int n = 0;
  for (const auto& u : t.utterances) n += count_words_of(u.text);
  return n;
}

void save_transcript(const SessionTranscript& t, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write transcript: " + path.string());
    out << nlohmann::json(t).dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

SessionTranscript load_transcript(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read transcript: " + path.string());
  nlohmann::json j;
  in >> j;
  return j.get<SessionTranscript>();
}

}  // namespace cbtsim
