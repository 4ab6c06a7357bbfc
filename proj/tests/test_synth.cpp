#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cctype>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cbtsim/markers.hpp"
#include "cbtsim/synth.hpp"

using namespace cbtsim;

namespace {

EndpointConfig teacher_endpoint(const std::string& url = "stub://teacher") {
  return EndpointConfig{.name = "teacher", .base_url = url, .model_id = "teacher-stub"};
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

TEST_CASE("first session has the four-part structure with disclosure and summary") {
  ChatClient client;
  PatientProfile p = sample_profile(5, default_catalog());
  SessionPlan plan = session_plan(1, p, std::nullopt);
  SessionTranscript t = generate_session(client, plan, p, teacher_endpoint());

  CHECK(t.profile_id == p.profile_id);
  CHECK(t.session_index == 1);
  CHECK(t.phase == Phase::Assessment);
  CHECK(t.termination == Termination::TeacherComplete);
  CHECK(t.utterances.size() == 9);
  CHECK(t.utterances.front().speaker == Speaker::patient);
  for (std::size_t i = 0; i < t.utterances.size(); ++i)
    CHECK(t.utterances[i].index == static_cast<int>(i));

  bool disclosed = false;
  for (const auto& u : t.utterances)
    if (u.speaker == Speaker::therapist &&
        lower(u.text).find(markers::kDisclosureToken) != std::string::npos)
      disclosed = true;
  CHECK(disclosed);

  REQUIRE(t.final_summary.has_value());
  CHECK(t.utterances.back().speaker == Speaker::therapist);
  CHECK(t.utterances.back().text == *t.final_summary);
  CHECK(t.metadata.word_count == count_words(t));
}

TEST_CASE("missing disclosure fails structural validation after regenerations") {
  ChatClient client;
  PatientProfile p = sample_profile(5, default_catalog());
  SessionPlan plan = session_plan(1, p, std::nullopt);
  CHECK_THROWS_WITH_AS(
      generate_session(client, plan, p, teacher_endpoint("stub://teacher?omit_disclosure=1")),
      doctest::Contains("part 1"), SynthError);
}

TEST_CASE("later sessions open with the patient recalling the previous summary") {
  ChatClient client;
  PatientProfile p = sample_profile(5, default_catalog());
  SessionPlan plan = session_plan(2, p, std::string("we practiced thought records"));
  SessionTranscript t = generate_session(client, plan, p, teacher_endpoint());
  REQUIRE(!t.utterances.empty());
  CHECK(t.utterances[0].speaker == Speaker::patient);
  CHECK(t.utterances[0].text == "Last time we practiced thought records");
}

TEST_CASE("continuity paraphrase carries the previous summary forward") {
  ChatClient client;
  PatientProfile p = sample_profile(5, default_catalog());
  SessionPlan plan = session_plan(1, p, std::nullopt);
  SessionTranscript t = generate_session(client, plan, p, teacher_endpoint());
  std::string opener = inject_continuity(client, t, teacher_endpoint());
  // The teacher stub paraphrases by identity, which pins the content exactly.
  CHECK(opener == *t.final_summary);

  SessionTranscript no_summary = t;
  no_summary.final_summary.reset();
  CHECK_THROWS_AS(inject_continuity(client, no_summary, teacher_endpoint()), SynthError);
}

TEST_CASE("a full course has 20 linked sessions with correct phases") {
  ChatClient client;
  PatientProfile p = sample_profile(11, default_catalog());
  CourseTranscripts course = generate_course(client, p, teacher_endpoint());
  REQUIRE(course.sessions.size() == 20);
  for (int s = 1; s <= 20; ++s) {
    const auto& t = course.sessions[static_cast<std::size_t>(s - 1)];
    CHECK(t.session_index == s);
    CHECK(t.phase == phase_of(s));
    CHECK(t.final_summary.has_value());
    if (s >= 2) {
      const std::string& prev = *course.sessions[static_cast<std::size_t>(s - 2)].final_summary;
      CHECK(t.utterances[0].text.find(prev) != std::string::npos);
    }
  }
}

TEST_CASE("saved courses round-trip through disk") {
  ChatClient client;
  PatientProfile p = sample_profile(3, default_catalog());
  SessionPlan plan = session_plan(1, p, std::nullopt);
  SessionTranscript t = generate_session(client, plan, p, teacher_endpoint());
  CourseTranscripts course{p, {t}};
  auto dir = fresh_dir("cbtsim_course_save");
  save_course(course, dir);
  CHECK(std::filesystem::exists(dir / p.profile_id / "profile.json"));
  CHECK(std::filesystem::exists(dir / p.profile_id / "session_01.json"));
  SessionTranscript back = load_transcript(dir / p.profile_id / "session_01.json");
  CHECK(back == t);
}

TEST_CASE("transcript JSON serialization is lossless") {
  ChatClient client;
  PatientProfile p = sample_profile(9, default_catalog());
  SessionPlan plan = session_plan(8, p, std::string("prior work"));
  SessionTranscript t = generate_session(client, plan, p, teacher_endpoint());
  auto path = std::filesystem::temp_directory_path() / "cbtsim_roundtrip.json";
  save_transcript(t, path);
  CHECK(load_transcript(path) == t);
}

TEST_CASE("dataset export maps speakers to chat roles and merges adjacent turns") {
  ChatClient client;
  PatientProfile p = sample_profile(17, default_catalog());
  CourseTranscripts course = generate_course(client, p, teacher_endpoint());
  CourseTranscripts course2 = generate_course(client, sample_profile(18, default_catalog()),
                                              teacher_endpoint());
  auto path = std::filesystem::temp_directory_path() / "cbtsim_export.jsonl";
  std::filesystem::remove(path);
  ExportStats stats = export_finetune_dataset({course, course2}, path);
  CHECK(stats.records == 40);
  // Under the teacher stub every session merges the closing therapist pair and
  // sessions 2..20 also merge the continuity opener into the scripted greeting.
  CHECK(stats.merged_utterances == 2 * (20 + 19));

  std::ifstream in(path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    auto j = nlohmann::json::parse(line);
    const auto& msgs = j.at("messages");
    REQUIRE(msgs.size() >= 3);
    CHECK(msgs[0].at("role") == "system");
    // Strict alternation beginning with the patient.
    for (std::size_t i = 1; i < msgs.size(); ++i) {
      std::string expected = (i % 2 == 1) ? "user" : "assistant";
      CHECK(msgs[i].at("role") == expected);
    }
  }
  CHECK(lines == 40);

  CHECK_THROWS_AS(export_finetune_dataset({}, path), SynthError);
}
