#include "cbtsim/synth.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cbtsim/markers.hpp"

namespace cbtsim {

namespace {

constexpr int kMaxRegens = 2;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool contains_disclosure(const std::string& text) {
  return lower(text).find(markers::kDisclosureToken) != std::string::npos;
}

std::string teacher_system_prompt(const PatientProfile& profile, const SessionPlan& plan) {
  std::ostringstream os;
  os << "You are writing a realistic CBT therapy session transcript between an AI therapist and "
        "a patient with depression.\n"
     << markers::kSessionHeader << plan.session_index << "/20 (" << phase_name(plan.phase)
     << " phase)\n"
     << markers::kPatientHeader << profile.profile_id << "\n"
     << "Patient description: " << profile.describe() << "\n"
     << "Write dialogue as lines starting with 'Therapist: ' or 'Patient: '. "
        "The therapist must mention the possibility of hallucinations, the inability to read "
        "non-verbal cues, and ask the patient to seek emergency assistance for ongoing thoughts "
        "of self-harm or suicide. Conclude the final part with a line starting '"
     << markers::kSynthSummaryPrefix
     << "' summarizing key points discussed, techniques used, and homework assigned.";
  return os.str();
}

// Dialogue lines -> utterances. Lines without a speaker prefix continue the
// previous utterance; the summary line is captured separately.
void parse_dialogue(const std::string& text, std::vector<Utterance>& out,
                    std::optional<std::string>& summary) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    if (line.rfind(markers::kSynthSummaryPrefix, 0) == 0) {
      std::string s = line.substr(std::string(markers::kSynthSummaryPrefix).size());
      while (!s.empty() && s.front() == ' ') s.erase(s.begin());
      summary = s;
      // The summary is also spoken to the patient.
      out.push_back({static_cast<int>(out.size()), Speaker::therapist, s});
      continue;
    }
    if (line.rfind("Therapist:", 0) == 0) {
      std::string s = line.substr(10);
      while (!s.empty() && s.front() == ' ') s.erase(s.begin());
      out.push_back({static_cast<int>(out.size()), Speaker::therapist, s});
    } else if (line.rfind("Patient:", 0) == 0) {
      std::string s = line.substr(8);
      while (!s.empty() && s.front() == ' ') s.erase(s.begin());
      out.push_back({static_cast<int>(out.size()), Speaker::patient, s});
    } else if (!out.empty()) {
      out.back().text += " " + line;
    }
  }
}

std::string dialogue_so_far(const std::vector<Utterance>& utterances) {
  std::ostringstream os;
  for (const auto& u : utterances)
    os << (u.speaker == Speaker::therapist ? "Therapist: " : "Patient: ") << u.text << "\n";
  return os.str();
}

}  // namespace

SessionTranscript generate_session(const ChatClient& client, const SessionPlan& plan,
                                   const PatientProfile& profile, const EndpointConfig& teacher) {
  SessionTranscript t;
  t.profile_id = profile.profile_id;
  t.session_index = plan.session_index;
  t.phase = plan.phase;
  t.termination = Termination::TeacherComplete;
  t.metadata.therapist_model = teacher.model_id;
  t.metadata.patient_model = teacher.model_id;

  std::string system = teacher_system_prompt(profile, plan);

  if (plan.prev_summary) {
    std::string opener = "Last time " + *plan.prev_summary;
    t.utterances.push_back({0, Speaker::patient, opener});
  }

  for (int part = 1; part <= 4; ++part) {
    const SessionPart& sp = plan.parts[static_cast<std::size_t>(part - 1)];
    bool ok = false;
    std::string failure;
    for (int attempt = 0; attempt <= kMaxRegens && !ok; ++attempt) {
      std::ostringstream req;
      req << markers::kPartRequest << part << " of 4: " << sp.title << ".\n" << sp.instructions
          << "\nDialogue so far:\n" << dialogue_so_far(t.utterances);
      if (attempt > 0) req << "\n[regeneration attempt " << attempt << "]";
      std::vector<ChatMessage> messages{{ChatRole::system, system},
                                        {ChatRole::user, req.str()}};
      CompletionResult r = client.complete(teacher, messages);

      std::vector<Utterance> part_utts;
      std::optional<std::string> summary;
      parse_dialogue(r.text, part_utts, summary);
      if (part_utts.empty()) {
        failure = "teacher produced no dialogue lines";
        continue;
      }
      if (part == 1 && plan.disclosure_required && !contains_disclosure(r.text)) {
        failure = "missing AI-limitation disclosure in part 1";
        continue;
      }
      if (part == 4 && !summary) {
        failure = "missing closing session summary in part 4";
        continue;
      }
      int base = static_cast<int>(t.utterances.size());
      for (auto& u : part_utts) {
        u.index = base++;
        t.utterances.push_back(std::move(u));
      }
      if (summary) t.final_summary = summary;
      ok = true;
    }
    if (!ok)
      throw SynthError("structural validation failed for session " +
                       std::to_string(plan.session_index) + " part " + std::to_string(part) +
                       " after " + std::to_string(kMaxRegens) + " regenerations: " + failure);
  }
  t.metadata.word_count = count_words(t);
  return t;
}

std::string inject_continuity(const ChatClient& client, const SessionTranscript& prev,
                              const EndpointConfig& teacher) {
  if (!prev.final_summary)
    throw SynthError("cannot build continuity opener: session " +
                     std::to_string(prev.session_index) + " has no final summary");
  std::ostringstream req;
  req << "Paraphrase the following session summary in the patient's voice, as the opening "
         "message of the next therapy session.\n"
      << markers::kParaphraseRequest << "\n" << *prev.final_summary << "\nEND";
  std::vector<ChatMessage> messages{
      {ChatRole::system, "You rewrite therapy session summaries in the patient's voice."},
      {ChatRole::user, req.str()}};
  CompletionResult r = client.complete(teacher, messages);
  if (r.text.empty()) throw SynthError("teacher returned an empty continuity paraphrase");
  return r.text;
}

CourseTranscripts generate_course(const ChatClient& client, const PatientProfile& profile,
                                  const EndpointConfig& teacher, const PhaseAssets& assets) {
  CourseTranscripts course;
  course.profile = profile;
  std::optional<std::string> prev_summary;
  for (int s = 1; s <= kSessionsPerCourse; ++s) {
    std::optional<std::string> opener_summary;
    if (s >= 2) {
      // Paraphrase of the previous summary becomes the patient's opener.
      opener_summary = inject_continuity(client, course.sessions.back(), teacher);
    }
    SessionPlan plan = session_plan(s, profile, opener_summary, assets);
    course.sessions.push_back(generate_session(client, plan, profile, teacher));
  }
  return course;
}

void save_course(const CourseTranscripts& course, const std::filesystem::path& out_dir) {
  auto dir = out_dir / course.profile.profile_id;
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "profile.json");
    out << nlohmann::json(course.profile).dump(2) << "\n";
  }
  for (const auto& s : course.sessions) {
    char name[32];
    std::snprintf(name, sizeof(name), "session_%02d.json", s.session_index);
    save_transcript(s, dir / name);
  }
}

ExportStats export_finetune_dataset(const std::vector<CourseTranscripts>& courses,
                                    const std::filesystem::path& out_path) {
  if (courses.empty()) throw SynthError("no courses to export");
  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  std::ofstream out(out_path);
  if (!out) throw SynthError("cannot write dataset: " + out_path.string());

  ExportStats stats;
  for (const auto& course : courses) {
    for (const auto& session : course.sessions) {
      nlohmann::json messages = nlohmann::json::array();
      messages.push_back(
          {{"role", "system"},
           {"content", "You are an AI therapist delivering cognitive behavioral therapy for "
                       "depression. This is session " +
                           std::to_string(session.session_index) + " of 20."}});
      // Adjacent same-speaker utterances are merged so roles strictly alternate.
      std::optional<Speaker> last;
      for (const auto& u : session.utterances) {
        if (last && *last == u.speaker) {
          messages.back()["content"] =
              messages.back()["content"].get<std::string>() + " " + u.text;
          ++stats.merged_utterances;
          continue;
        }
        messages.push_back(
            {{"role", u.speaker == Speaker::patient ? "user" : "assistant"}, {"content", u.text}});
        last = u.speaker;
      }
      out << nlohmann::json{{"messages", messages}}.dump() << "\n";
      ++stats.records;
    }
  }
  return stats;
}

}  // namespace cbtsim
