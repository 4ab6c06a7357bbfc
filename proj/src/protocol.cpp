#include "cbtsim/protocol.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace cbtsim {

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Assessment: return "assessment";
    case Phase::Initial: return "initial";
    case Phase::Middle: return "middle";
    case Phase::Termination: return "termination";
  }
  return "?";
}

Phase phase_of(int session_index) {
  if (session_index < 1 || session_index > kSessionsPerCourse)
    throw ProtocolError("session index out of range 1..20: " + std::to_string(session_index));
  if (session_index <= 3) return Phase::Assessment;
  if (session_index <= 7) return Phase::Initial;
  if (session_index <= 17) return Phase::Middle;
  return Phase::Termination;
}

int phase_first_session(Phase p) {
  switch (p) {
    case Phase::Assessment: return 1;
    case Phase::Initial: return 4;
    case Phase::Middle: return 8;
    case Phase::Termination: return 18;
  }
  return 1;
}

void PhaseAssets::validate() const {
  for (std::size_t i = 0; i < plans.size(); ++i) {
    if (plans[i].goals.empty() || plans[i].techniques.empty())
      throw ProtocolError(std::string("phase asset '") + phase_name(static_cast<Phase>(i)) +
                          "' must list at least one goal and one technique");
  }
  auto has = [](const std::vector<std::string>& v, const std::string& s) {
    for (const auto& e : v)
      if (e.find(s) != std::string::npos) return true;
    return false;
  };
  const auto& mid = plan(Phase::Middle).techniques;
  if (!has(mid, "thought record") || !has(mid, "behavioral experiment") ||
      !has(mid, "cognitive restructuring"))
    throw ProtocolError(
        "middle phase techniques must include thought records, behavioral experiments and "
        "cognitive restructuring");
  const auto& term = plan(Phase::Termination).goals;
  if (!has(term, "relapse prevention") || !has(term, "consolidat"))
    throw ProtocolError(
        "termination phase goals must include relapse prevention and consolidating gains");
}

void to_json(nlohmann::json& j, const PhaseAssets& a) {
  j = nlohmann::json::object();
  for (std::size_t i = 0; i < a.plans.size(); ++i) {
    j[phase_name(static_cast<Phase>(i))] = {{"goals", a.plans[i].goals},
                                            {"techniques", a.plans[i].techniques}};
  }
}

void from_json(const nlohmann::json& j, PhaseAssets& a) {
  for (std::size_t i = 0; i < a.plans.size(); ++i) {
    Phase p = static_cast<Phase>(i);
    const auto& block = j.at(phase_name(p));
    a.plans[i].phase = p;
    block.at("goals").get_to(a.plans[i].goals);
    block.at("techniques").get_to(a.plans[i].techniques);
  }
}

PhaseAssets default_phase_assets() {
  PhaseAssets a;
  a.plans[0] = {Phase::Assessment,
                {"gather detailed information about depression symptoms, life circumstances and "
                 "treatment history",
                 "begin establishing the therapeutic relationship",
                 "orient the patient to the structure of therapy"},
                {"clinical interviewing", "symptom inventory review", "goal setting",
                 "psychoeducation about depression"}};
  a.plans[1] = {Phase::Initial,
                {"introduce the cognitive conceptualization framework",
                 "socialize the patient to CBT principles and techniques",
                 "build a shared problem list"},
                {"cognitive model introduction", "activity monitoring",
                 "behavioral activation", "identifying automatic thoughts"}};
  a.plans[2] = {Phase::Middle,
                {"deepen exploration and modification of cognitive distortions",
                 "modify maladaptive beliefs",
                 "strengthen independent use of CBT skills"},
                {"thought records", "behavioral experiments", "cognitive restructuring",
                 "identifying cognitive distortions", "Socratic questioning",
                 "core belief work"}};
  a.plans[3] = {Phase::Termination,
                {"consolidating gains from therapy", "planning for future challenges",
                 "exploring relapse prevention"},
                {"relapse prevention planning", "skill review and consolidation",
                 "self-therapy session planning"}};
  return a;
}

PhaseAssets load_phase_assets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ProtocolError("phase asset file not found: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError("phase asset parse error in " + path.string() + ": " + e.what());
  }
  PhaseAssets a = j.get<PhaseAssets>();
  a.validate();
  return a;
}

SessionPlan session_plan(int session_index, const PatientProfile& profile,
                         std::optional<std::string> prev_summary, const PhaseAssets& assets) {
  Phase phase = phase_of(session_index);
  if (session_index == 1 && prev_summary)
    throw ProtocolError("session 1 must not carry a previous-session summary");
  if (session_index >= 2 && !prev_summary)
    throw ProtocolError("session " + std::to_string(session_index) +
                        " requires the previous session's summary");
  assets.validate();
  const PhasePlan& pp = assets.plan(phase);

  SessionPlan plan;
  plan.session_index = session_index;
  plan.phase = phase;
  plan.prev_summary = std::move(prev_summary);
  plan.disclosure_required = true;

  // Deterministic rotation through the phase's technique list: one technique
  // introduced per session, plus the previous one carried forward.
  std::size_t offset = static_cast<std::size_t>(session_index - phase_first_session(phase));
  plan.techniques.push_back(pp.techniques[offset % pp.techniques.size()]);
  if (offset > 0) {
    const std::string& carry = pp.techniques[(offset - 1) % pp.techniques.size()];
    if (carry != plan.techniques.front()) plan.techniques.push_back(carry);
  }

  std::string tech_list;
  for (std::size_t i = 0; i < plan.techniques.size(); ++i)
    tech_list += (i ? ", " : "") + plan.techniques[i];
  std::string goal_list;
  for (std::size_t i = 0; i < pp.goals.size(); ++i) goal_list += (i ? "; " : "") + pp.goals[i];

  plan.parts[0].title = "check-in and agenda";
  plan.parts[0].instructions =
      "Brief check-in with the patient and collaborative agenda setting. "
      "The therapist must acknowledge AI limitations: possibility of hallucinations, "
      "inability to read non-verbal cues, and a request to seek emergency assistance for "
      "ongoing thoughts of self-harm or suicide.";
  if (plan.prev_summary) {
    plan.parts[0].instructions +=
        " The patient opens the session by paraphrasing last session's summary: \"" +
        *plan.prev_summary + "\"";
  } else {
    plan.parts[0].instructions +=
        " This is the first session: conduct an intake-style introduction instead of reviewing "
        "homework.";
  }
  plan.parts[1].title = "homework review and technique work";
  plan.parts[1].instructions =
      session_index == 1
          ? "Continue the intake: explore symptoms, history and current circumstances (" +
                goal_list + ")."
          : "Review the previous session's homework, then work with: " + tech_list + ".";
  plan.parts[2].title = "technique work continued";
  plan.parts[2].instructions =
      "Deepen the work on " + tech_list + ", serving the phase goals: " + goal_list + ".";
  plan.parts[3].title = "review, summary and homework assignment";
  plan.parts[3].instructions =
      "Review key points, provide a session summary to the patient, and assign homework for the "
      "next meeting. The patient is " + profile.profile_id + ".";
  return plan;
}

}  // namespace cbtsim
