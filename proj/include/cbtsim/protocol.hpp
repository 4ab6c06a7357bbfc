#pragma once
// The 20-session CBT course structure: phases, phase goals and techniques,
// and the four-part session skeleton.

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cbtsim/profile.hpp"

namespace cbtsim {

inline constexpr int kSessionsPerCourse = 20;

enum class Phase { Assessment, Initial, Middle, Termination };

const char* phase_name(Phase p);

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Phase ranges partition 1..20: 1-3, 4-7, 8-17, 18-20.
Phase phase_of(int session_index);
int phase_first_session(Phase p);

struct PhasePlan {
  Phase phase = Phase::Assessment;
  std::vector<std::string> goals;
  std::vector<std::string> techniques;
};

struct PhaseAssets {
  std::array<PhasePlan, 4> plans;  // indexed by Phase

  const PhasePlan& plan(Phase p) const { return plans[static_cast<std::size_t>(p)]; }
  void validate() const;
};

struct SessionPart {
  std::string title;
  std::string instructions;
};

struct SessionPlan {
  int session_index = 1;
  Phase phase = Phase::Assessment;
  std::array<SessionPart, 4> parts;
  std::vector<std::string> techniques;  // subset of the phase's technique list
  std::optional<std::string> prev_summary;
  bool disclosure_required = true;  // true for every session
};

void to_json(nlohmann::json& j, const PhaseAssets& a);
void from_json(const nlohmann::json& j, PhaseAssets& a);

PhaseAssets default_phase_assets();
PhaseAssets load_phase_assets(const std::filesystem::path& path);

// Session 1 must not carry a prev_summary; sessions 2-20 require one.
SessionPlan session_plan(int session_index, const PatientProfile& profile,
                         std::optional<std::string> prev_summary,
                         const PhaseAssets& assets = default_phase_assets());

}  // namespace cbtsim
