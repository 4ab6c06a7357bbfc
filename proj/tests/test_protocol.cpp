#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cbtsim/protocol.hpp"

using namespace cbtsim;

TEST_CASE("phase ranges match the course structure") {
  CHECK(phase_of(1) == Phase::Assessment);
  CHECK(phase_of(3) == Phase::Assessment);
  CHECK(phase_of(4) == Phase::Initial);
  CHECK(phase_of(7) == Phase::Initial);
  CHECK(phase_of(8) == Phase::Middle);
  CHECK(phase_of(17) == Phase::Middle);
  CHECK(phase_of(18) == Phase::Termination);
  CHECK(phase_of(20) == Phase::Termination);
  CHECK_THROWS_AS(phase_of(0), ProtocolError);
  CHECK_THROWS_AS(phase_of(21), ProtocolError);
}

TEST_CASE("phases partition 1..20 with no gaps or overlaps") {
  int counts[4] = {0, 0, 0, 0};
  for (int s = 1; s <= 20; ++s) counts[static_cast<int>(phase_of(s))]++;
  CHECK(counts[0] == 3);
  CHECK(counts[1] == 4);
  CHECK(counts[2] == 10);
  CHECK(counts[3] == 3);
}

TEST_CASE("bundled phase assets load and validate") {
  PhaseAssets a = load_phase_assets(std::filesystem::path(CBTSIM_ASSET_DIR) / "phases.json");
  CHECK(!a.plan(Phase::Middle).techniques.empty());
  CHECK(!a.plan(Phase::Termination).goals.empty());
}

TEST_CASE("asset validation enforces the middle-phase technique set") {
  PhaseAssets a = default_phase_assets();
  a.plans[2].techniques = {"breathing exercises"};
  CHECK_THROWS_AS(a.validate(), ProtocolError);
}

TEST_CASE("session plans carry the four-part skeleton") {
  PatientProfile p = sample_profile(1, default_catalog());

  SessionPlan first = session_plan(1, p, std::nullopt);
  CHECK(first.phase == Phase::Assessment);
  CHECK(first.parts.size() == 4);
  CHECK(first.disclosure_required);
  CHECK(!first.prev_summary.has_value());
  CHECK(first.parts[0].instructions.find("first session") != std::string::npos);
  CHECK(first.parts[3].instructions.find("homework") != std::string::npos);

  SessionPlan mid = session_plan(10, p, std::string("summary text"));
  CHECK(mid.phase == Phase::Middle);
  PhaseAssets assets = default_phase_assets();
  const auto& allowed = assets.plan(Phase::Middle).techniques;
  for (const auto& t : mid.techniques)
    CHECK(std::find(allowed.begin(), allowed.end(), t) != allowed.end());
  CHECK(mid.parts[0].instructions.find("summary text") != std::string::npos);
}

TEST_CASE("continuity preconditions") {
  PatientProfile p = sample_profile(1, default_catalog());
  CHECK_THROWS_AS(session_plan(2, p, std::nullopt), ProtocolError);
  CHECK_THROWS_AS(session_plan(1, p, std::string("s")), ProtocolError);
  CHECK_THROWS_AS(session_plan(25, p, std::string("s")), ProtocolError);
}

TEST_CASE("technique rotation is deterministic in the session index") {
  PatientProfile p = sample_profile(1, default_catalog());
  SessionPlan a = session_plan(9, p, std::string("s"));
  SessionPlan b = session_plan(9, p, std::string("s"));
  CHECK(a.techniques == b.techniques);
  SessionPlan c = session_plan(10, p, std::string("s"));
  CHECK(a.techniques != c.techniques);
}
