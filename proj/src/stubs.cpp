// Scripted responders behind stub:// endpoints. Each stub is a deterministic
// pure function of the request, so cached and uncached runs agree byte for
// byte. Behavior is selected by the stub host name and tuned by query
// parameters, e.g. stub://therapist?sentinel_at=2&words=30.

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "cbtsim/gateway.hpp"
#include "cbtsim/markers.hpp"

namespace cbtsim {

namespace {

struct StubSpec {
  std::string name;
  std::map<std::string, std::string> params;

  std::string get(const std::string& key, const std::string& fallback = "") const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
  int get_int(const std::string& key, int fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : std::stoi(it->second);
  }
};

std::string url_decode(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+') {
      out += ' ';
    } else if (s[i] == '%' && i + 2 < s.size()) {
      out += static_cast<char>(std::stoi(s.substr(i + 1, 2), nullptr, 16));
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

StubSpec parse_stub_url(const std::string& url) {
  StubSpec spec;
  std::string rest = url.substr(7);  // past "stub://"
  std::size_t q = rest.find('?');
  spec.name = rest.substr(0, q);
  if (q != std::string::npos) {
    std::istringstream qs(rest.substr(q + 1));
    std::string kv;
    while (std::getline(qs, kv, '&')) {
      std::size_t eq = kv.find('=');
      if (eq == std::string::npos)
        spec.params[url_decode(kv)] = "1";
      else
        spec.params[url_decode(kv.substr(0, eq))] = url_decode(kv.substr(eq + 1));
    }
  }
  return spec;
}

const ChatMessage* last_user(const std::vector<ChatMessage>& messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it)
    if (it->role == ChatRole::user) return &*it;
  return nullptr;
}

const ChatMessage* system_message(const std::vector<ChatMessage>& messages) {
  for (const auto& m : messages)
    if (m.role == ChatRole::system) return &m;
  return nullptr;
}

int count_assistant(const std::vector<ChatMessage>& messages) {
  int n = 0;
  for (const auto& m : messages)
    if (m.role == ChatRole::assistant) ++n;
  return n;
}

std::string filler(int words, const std::string& tag) {
  static const char* kBank[] = {"we",      "talked",  "about",  "how",    "these",
                                "thoughts", "shape",   "mood",   "and",    "what",
                                "small",   "steps",   "could",  "help",   "this",
                                "week",    "with",    "the",    "current", "exercise"};
  std::ostringstream os;
  for (int i = 0; i < words; ++i) {
    if (i) os << ' ';
    if (i == 0 && !tag.empty())
      os << tag;
    else
      os << kBank[i % (sizeof(kBank) / sizeof(kBank[0]))];
  }
  return os.str();
}

// Parses "SESSION {k}" out of the system prompt; 0 when absent.
int session_from_system(const std::vector<ChatMessage>& messages) {
  const ChatMessage* sys = system_message(messages);
  if (!sys) return 0;
  std::size_t pos = sys->content.find(markers::kSessionHeader);
  if (pos == std::string::npos) return 0;
  return std::atoi(sys->content.c_str() + pos + std::string(markers::kSessionHeader).size());
}

std::string field_from_system(const std::vector<ChatMessage>& messages, const char* header) {
  const ChatMessage* sys = system_message(messages);
  if (!sys) return "";
  std::size_t pos = sys->content.find(header);
  if (pos == std::string::npos) return "";
  pos += std::string(header).size();
  std::size_t end = sys->content.find('\n', pos);
  return sys->content.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
}

std::string extract_after_line(const std::string& text, const std::string& marker) {
  std::size_t pos = text.find(marker);
  if (pos == std::string::npos) return "";
  pos += marker.size();
  while (pos < text.size() && (text[pos] == '\n' || text[pos] == ' ')) ++pos;
  std::size_t end = text.find("\nEND", pos);
  std::string out = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
  while (!out.empty() && (out.back() == '\n' || out.back() == ' ')) out.pop_back();
  return out;
}

std::string hex_tag(const std::string& s) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%08llx",
                static_cast<unsigned long long>(fnv1a64(s) & 0xFFFFFFFFULL));
  return buf;
}

std::string teacher_respond(const StubSpec& spec, const std::vector<ChatMessage>& messages) {
  const ChatMessage* req = last_user(messages);
  if (!req) return "Therapist: Hello.";
  // Paraphrase requests return the summary verbatim (identity paraphrase).
  if (req->content.find(markers::kParaphraseRequest) != std::string::npos)
    return extract_after_line(req->content, markers::kParaphraseRequest);

  std::size_t pos = req->content.find(markers::kPartRequest);
  int part = pos == std::string::npos
                 ? 1
                 : std::atoi(req->content.c_str() + pos + std::string(markers::kPartRequest).size());
  std::string tag = hex_tag(req->content);
  std::ostringstream os;
  switch (part) {
    case 1:
      os << "Patient: Hi, I'm here for our session. Things have been up and down.\n";
      os << "Therapist: Welcome back, let's check in and set an agenda for today.";
      if (spec.get("omit_disclosure").empty()) {
        os << " Before we start, a reminder: as an AI I can produce hallucinations and I cannot "
              "read non-verbal cues. If you have ongoing thoughts of self-harm or suicide, "
              "please seek emergency assistance right away.";
      }
      os << "\nPatient: Understood. I'd like to talk about my week.";
      break;
    case 2:
      os << "Therapist: Let's review your homework and continue our work. " << filler(14, "")
         << "\nPatient: I tried the exercise, here is what I noticed " << tag << ".";
      break;
    case 3:
      os << "Therapist: Building on that, let's go one level deeper. " << filler(14, "")
         << "\nPatient: That framing makes sense to me.";
      break;
    default:
      os << "Therapist: Let's review the key points from today and set homework.\n"
         << markers::kSynthSummaryPrefix << " Key points: progress review " << tag
         << ". Techniques used: phase-appropriate CBT work. Homework assigned: practice task "
         << tag << ".";
      break;
  }
  return os.str();
}

std::string therapist_respond(const StubSpec& spec, const std::vector<ChatMessage>& messages) {
  int turn = count_assistant(messages) + 1;  // this therapist utterance
  int sentinel_at = spec.get_int("sentinel_at", 0);
  int words = spec.get_int("words", 24);
  std::string degen_patient = spec.get("degen_patient");
  if (!degen_patient.empty()) {
    int upto = spec.get_int("degen_upto", 0);
    int session = session_from_system(messages);
    std::string patient = field_from_system(messages, markers::kPatientHeader);
    if (patient == degen_patient && session >= 1 && session <= upto) sentinel_at = 1;
  }
  // The tag folds in the session and patient headers so distinct sessions
  // produce distinct transcript text (single token, word count unchanged).
  std::string text = filler(
      words, "therapist" + std::to_string(turn) + "-s" +
                 std::to_string(session_from_system(messages)) + "-" +
                 hex_tag(field_from_system(messages, markers::kPatientHeader)));
  if (sentinel_at > 0 && turn >= sentinel_at) {
    text += std::string(" ") + markers::kDefaultSentinel +
            " Today we reviewed your progress and assigned homework.";
  }
  return text;
}

std::string patient_respond(const StubSpec& spec, const std::vector<ChatMessage>& messages) {
  int turn = count_assistant(messages) + 1;
  int words = spec.get_int("words", 20);
  std::string text = filler(
      words, "patient" + std::to_string(turn) + "-s" +
                 std::to_string(session_from_system(messages)) + "-" +
                 hex_tag(field_from_system(messages, markers::kPatientHeader)));
  if (turn == 1) {
    const ChatMessage* sys = system_message(messages);
    if (sys && sys->content.find(markers::kPrevSummaryHeader) != std::string::npos) {
      std::string prev = extract_after_line(sys->content, markers::kPrevSummaryHeader);
      if (!prev.empty()) text = "Last time " + prev + " " + text;
    }
  }
  return text;
}

std::string summarizer_respond(const std::vector<ChatMessage>& messages) {
  const ChatMessage* req = last_user(messages);
  std::string tag = hex_tag(req ? req->content : "");
  return "Key points: session review " + tag +
         ". Techniques used: structured CBT work. Homework assigned: practice task " + tag + ".";
}

std::string judge_respond(const StubSpec& spec, const std::vector<ChatMessage>& messages) {
  const ChatMessage* req = last_user(messages);
  std::string category;
  if (req) {
    std::size_t pos = req->content.find(markers::kJudgeCategory);
    if (pos != std::string::npos) {
      pos += std::string(markers::kJudgeCategory).size();
      std::size_t end = req->content.find('\n', pos);
      category = req->content.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    }
  }
  std::string fail_cat = spec.get("fail_category");
  if (!fail_cat.empty() && category == fail_cat)
    return "I am unable to produce a structured rating for this one, apologies.";
  std::string rating = spec.get("rating", "Good");
  if (!spec.get("vary").empty()) {
    // Deterministic per-request label choice so scored datasets have spread.
    static const char* kLabels[] = {"Severely Deficient", "Very Poor",  "Poor",
                                    "Below Average",      "Adequate",   "Satisfactory",
                                    "Good",               "Very Good",  "Excellent",
                                    "Outstanding"};
    rating = kLabels[fnv1a64(req ? req->content : "") % 10];
  }
  return "Here is my assessment of the " + category +
         " category.\n```\nrating: " + rating +
         "\njustification: The therapist handled " + category +
         " consistently across the cleaned transcript.\n```\n";
}

}  // namespace

std::string stub_respond(const EndpointConfig& endpoint, const std::vector<ChatMessage>& messages) {
  StubSpec spec = parse_stub_url(endpoint.base_url);
  if (spec.name == "echo") {
    const ChatMessage* u = last_user(messages);
    return u ? u->content : "";
  }
  if (spec.name == "teacher") return teacher_respond(spec, messages);
  if (spec.name == "therapist") return therapist_respond(spec, messages);
  if (spec.name == "patient") return patient_respond(spec, messages);
  if (spec.name == "summarizer") return summarizer_respond(messages);
  if (spec.name == "judge") return judge_respond(spec, messages);
  throw GatewayError(GatewayErrorKind::Config, "unknown stub endpoint '" + spec.name + "'");
}

}  // namespace cbtsim
