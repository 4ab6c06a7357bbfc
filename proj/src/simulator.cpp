#include "cbtsim/simulator.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cbtsim {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Identical content for CBT-tuned and instruct arms; only the endpoint
// differs (prompting parity).
std::string therapist_system_prompt(const SimConfig& config, const PatientProfile& profile,
                                    int session_index) {
  std::ostringstream os;
  os << "You are an AI therapist delivering cognitive behavioral therapy for depression.\n"
     << markers::kSessionHeader << session_index << "/20 ("
     << phase_name(phase_of(session_index)) << " phase)\n"
     << markers::kPatientHeader << profile.profile_id << "\n"
     << "Follow CBT structure: check-in, agenda, homework review, technique work, and close with "
        "a summary and homework. Acknowledge your limitations as an AI (possible hallucinations, "
        "no non-verbal cues) and direct the patient to emergency services for thoughts of "
        "self-harm. When you are ready to end the session, emit the marker "
     << config.summary_sentinel << " followed by your closing summary.";
  return os.str();
}

std::string patient_system_prompt(const PatientProfile& profile, int session_index,
                                  const std::optional<std::string>& prev_summary) {
  std::ostringstream os;
  os << "You are role-playing a therapy patient with depression.\n"
     << markers::kSessionHeader << session_index << "/20\n"
     << markers::kPatientHeader << profile.profile_id << "\n"
     << "Character: " << profile.describe() << "\n"
     << "Respond naturally, with mild resistance at times, clarification questions and "
        "expression of your own preferences.";
  if (prev_summary) {
    os << "\n" << markers::kPrevSummaryHeader << "\n" << *prev_summary << "\nEND\n"
       << "Open the session by paraphrasing that summary in your own words.";
  } else {
    os << "\nThis is your first session; open by introducing yourself and why you are here.";
  }
  return os.str();
}

}  // namespace

void SimConfig::validate() const {
  if (max_turns < 2) throw SimError("max_turns must be >= 2");
  if (max_words < 100) throw SimError("max_words must be >= 100");
  if (summary_sentinel.empty()) throw SimError("summary sentinel must be non-empty");
}

bool detect_summary(const Utterance& u, const std::string& sentinel) {
  if (u.speaker != Speaker::therapist) return false;
  return lower(u.text).find(lower(sentinel)) != std::string::npos;
}

SessionTranscript run_session(const ChatClient& client, const SimConfig& config,
                              const PatientProfile& profile, int session_index,
                              const std::optional<std::string>& prev_summary) {
  config.validate();
  if (session_index == 1 && prev_summary)
    throw SimError("session 1 must not carry a previous-session summary");
  if (session_index >= 2 && !prev_summary)
    throw SimError("session " + std::to_string(session_index) +
                   " requires the previous session's summary");

  SessionTranscript t;
  t.profile_id = profile.profile_id;
  t.session_index = session_index;
  t.phase = phase_of(session_index);
  t.metadata.therapist_model = config.therapist.model_id;
  t.metadata.patient_model = config.patient.model_id;

  const std::string therapist_sys = therapist_system_prompt(config, profile, session_index);
  const std::string patient_sys = patient_system_prompt(profile, session_index, prev_summary);

  int cumulative_words = 0;
  std::optional<Termination> terminated;
  while (!terminated) {
    bool patient_turn = t.utterances.size() % 2 == 0;  // patient speaks first
    // Each endpoint sees the dialogue from its own side: its utterances as
    // assistant turns, the other party's as user turns.
    std::vector<ChatMessage> messages{
        {ChatRole::system, patient_turn ? patient_sys : therapist_sys}};
    if (patient_turn && t.utterances.empty())
      messages.push_back({ChatRole::user, "(The session begins.)"});
    for (const auto& u : t.utterances) {
      bool own = (u.speaker == Speaker::patient) == patient_turn;
      messages.push_back({own ? ChatRole::assistant : ChatRole::user, u.text});
    }
    CompletionResult r =
        client.complete(patient_turn ? config.patient : config.therapist, messages);
    Utterance u{static_cast<int>(t.utterances.size()),
                patient_turn ? Speaker::patient : Speaker::therapist, r.text};
    cumulative_words += count_words_of(u.text);
    t.utterances.push_back(std::move(u));

    // Fixed check order after every utterance.
    if (detect_summary(t.utterances.back(), config.summary_sentinel))
      terminated = Termination::SummaryDetected;
    else if (static_cast<int>(t.utterances.size()) >= config.max_turns)
      terminated = Termination::TurnLimit;
    else if (cumulative_words > config.max_words)
      terminated = Termination::WordLimit;
  }
  t.termination = *terminated;
  t.metadata.word_count = cumulative_words;
  t.final_summary = summarize_session(client, t, config.summarizer);
  return t;
}

std::string summarize_session(const ChatClient& client, const SessionTranscript& t,
                              const EndpointConfig& summarizer) {
  if (t.utterances.empty()) throw SimError("cannot summarize an empty transcript");
  std::ostringstream req;
  req << "Summarize the following therapy session: key points discussed, techniques used, and "
         "homework assigned.\n"
      << markers::kSummarizeRequest << "\n";
  for (const auto& u : t.utterances)
    req << (u.speaker == Speaker::therapist ? "Therapist: " : "Patient: ") << u.text << "\n";
  std::vector<ChatMessage> messages{
      {ChatRole::system, "You write concise therapy session summaries."},
      {ChatRole::user, req.str()}};
  return client.complete(summarizer, messages).text;
}

std::filesystem::path TranscriptStore::path_for(const std::string& model,
                                                const std::string& variant,
                                                const std::string& patient_id,
                                                int session) const {
  char name[16];
  std::snprintf(name, sizeof(name), "%02d.json", session);
  return root / model / variant / patient_id / name;
}

std::vector<TranscriptStore::Entry> TranscriptStore::list() const {
  std::vector<Entry> out;
  if (!std::filesystem::exists(root)) return out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().extension() != ".json") continue;
    auto rel = std::filesystem::relative(e.path(), root);
    std::vector<std::string> parts;
    for (const auto& p : rel) parts.push_back(p.string());
    if (parts.size() != 4) continue;  // manifest etc.
    Entry entry;
    entry.model = parts[0];
    entry.variant = parts[1];
    entry.patient_id = parts[2];
    entry.session = std::atoi(parts[3].c_str());
    entry.path = e.path();
    out.push_back(std::move(entry));
  }
  std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.model, a.variant, a.patient_id, a.session) <
           std::tie(b.model, b.variant, b.patient_id, b.session);
  });
  return out;
}

CampaignResult run_campaign(const ChatClient& client, const CampaignSpec& spec,
                            const SimConfig& base_config, const TranscriptStore& store) {
  CampaignResult result;
  nlohmann::json manifest = nlohmann::json::object();
  for (const auto& variant : spec.variants) {
    SimConfig config = base_config;
    config.therapist = variant.therapist;
    for (const auto& profile : spec.profiles) {
      std::optional<std::string> prev_summary;
      for (int s = 1; s <= spec.sessions_per_profile; ++s) {
        auto path = store.path_for(variant.model, variant.variant, profile.profile_id, s);
        std::string key = variant.model + "/" + variant.variant + "/" + profile.profile_id + "/" +
                          std::to_string(s);
        if (std::filesystem::exists(path)) {
          prev_summary = load_transcript(path).final_summary;
          ++result.sessions_skipped;
          manifest[key] = "skipped";
          continue;
        }
        try {
          SessionTranscript t = run_session(client, config, profile, s,
                                            s == 1 ? std::nullopt : prev_summary);
          save_transcript(t, path);
          prev_summary = t.final_summary;
          ++result.sessions_run;
          manifest[key] = "done";
        } catch (const std::exception& e) {
          result.failures.push_back(key + ": " + e.what());
          manifest[key] = std::string("failed: ") + e.what();
          break;  // remaining sessions of this course depend on continuity
        }
      }
    }
  }
  std::filesystem::create_directories(store.root);
  std::ofstream out(store.root / "manifest.json");
  out << manifest.dump(2) << "\n";
  return result;
}

}  // namespace cbtsim
