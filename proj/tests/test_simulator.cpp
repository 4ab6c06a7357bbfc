#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cbtsim/simulator.hpp"

using namespace cbtsim;

namespace {

EndpointConfig ep(const std::string& name, const std::string& url) {
  return EndpointConfig{.name = name, .base_url = url, .model_id = name + "-stub"};
}

SimConfig stub_config(const std::string& therapist_url) {
  SimConfig c;
  c.therapist = ep("therapist", therapist_url);
  c.patient = ep("patient", "stub://patient");
  c.summarizer = ep("summarizer", "stub://summarizer");
  return c;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("word counting is whitespace-token based") {
  CHECK(count_words_of("") == 0);
  CHECK(count_words_of("   ") == 0);
  CHECK(count_words_of("one") == 1);
  CHECK(count_words_of("a b  c") == 3);
  CHECK(count_words_of("line one\nline two\ttabbed") == 5);
}

TEST_CASE("summary detection is therapist-only and case-insensitive") {
  std::string sentinel = "[SESSION SUMMARY]";
  CHECK(detect_summary({0, Speaker::therapist, "closing [SESSION SUMMARY] now"}, sentinel));
  CHECK(detect_summary({0, Speaker::therapist, "closing [session summary] now"}, sentinel));
  CHECK(!detect_summary({0, Speaker::patient, "closing [SESSION SUMMARY] now"}, sentinel));
  CHECK(!detect_summary({0, Speaker::therapist, "no marker here"}, sentinel));
}

TEST_CASE("sentinel emission ends the session immediately") {
  ChatClient client;
  SimConfig config = stub_config("stub://therapist?sentinel_at=2");
  PatientProfile p = sample_profile(1, default_catalog());
  SessionTranscript t = run_session(client, config, p, 1, std::nullopt);
  // patient, therapist, patient, therapist-with-sentinel
  CHECK(t.utterances.size() == 4);
  CHECK(t.termination == Termination::SummaryDetected);
  CHECK(t.utterances.back().speaker == Speaker::therapist);
  CHECK(t.utterances.back().text.find(config.summary_sentinel) != std::string::npos);
  CHECK(t.final_summary.has_value());
  CHECK(t.final_summary->find("Key points:") == 0);
}

TEST_CASE("turn limit caps the session at exactly max_turns utterances") {
  ChatClient client;
  SimConfig config = stub_config("stub://therapist");
  PatientProfile p = sample_profile(1, default_catalog());
  SessionTranscript t = run_session(client, config, p, 1, std::nullopt);
  CHECK(t.utterances.size() == 50);
  CHECK(t.termination == Termination::TurnLimit);
}

TEST_CASE("word limit uses a strict inequality over both speakers") {
  ChatClient client;
  SimConfig config = stub_config("stub://therapist?words=600");
  config.patient = ep("patient", "stub://patient?words=600");
  PatientProfile p = sample_profile(1, default_catalog());
  SessionTranscript t = run_session(client, config, p, 1, std::nullopt);
  // 600 words per utterance: the 8th reaches 4800, the 9th reaches 5400 > 5000.
  CHECK(t.utterances.size() == 9);
  CHECK(t.termination == Termination::WordLimit);
  CHECK(t.metadata.word_count == 5400);

  // Landing exactly on the limit does not trigger the word rule.
  SimConfig boundary = stub_config("stub://therapist?words=500");
  boundary.patient = ep("patient", "stub://patient?words=500");
  boundary.max_turns = 10;
  SessionTranscript b = run_session(client, boundary, p, 1, std::nullopt);
  CHECK(b.utterances.size() == 10);
  CHECK(b.metadata.word_count == 5000);
  CHECK(b.termination == Termination::TurnLimit);
}

TEST_CASE("continuity summary reaches the patient's opening line") {
  ChatClient client;
  SimConfig config = stub_config("stub://therapist?sentinel_at=2");
  PatientProfile p = sample_profile(1, default_catalog());
  SessionTranscript t = run_session(client, config, p, 2, std::string("we mapped core beliefs"));
  CHECK(t.utterances[0].speaker == Speaker::patient);
  CHECK(t.utterances[0].text.find("Last time we mapped core beliefs") == 0);
}

TEST_CASE("session index and summary pairing is validated") {
  ChatClient client;
  SimConfig config = stub_config("stub://therapist?sentinel_at=2");
  PatientProfile p = sample_profile(1, default_catalog());
  CHECK_THROWS_AS(run_session(client, config, p, 1, std::string("s")), SimError);
  CHECK_THROWS_AS(run_session(client, config, p, 2, std::nullopt), SimError);
  SimConfig bad = config;
  bad.max_turns = 1;
  CHECK_THROWS_AS(run_session(client, bad, p, 1, std::nullopt), SimError);
}

TEST_CASE("simulated sessions are deterministic under the stubs") {
  ChatClient client;
  SimConfig config = stub_config("stub://therapist?sentinel_at=3");
  PatientProfile p = sample_profile(2, default_catalog());
  SessionTranscript a = run_session(client, config, p, 1, std::nullopt);
  SessionTranscript b = run_session(client, config, p, 1, std::nullopt);
  CHECK(a == b);
}

TEST_CASE("campaigns run, persist, resume and report failures") {
  ChatClient client;
  SimConfig base = stub_config("stub://therapist?sentinel_at=2");
  TranscriptStore store{fresh_dir("cbtsim_campaign")};

  CampaignSpec spec;
  spec.profiles = sample_cohort(2, 50, default_catalog());
  spec.sessions_per_profile = 3;
  spec.variants = {
      {"Llama", "cbt", ep("therapist", "stub://therapist?sentinel_at=2")},
      {"Llama", "instruct", ep("therapist", "stub://therapist?sentinel_at=3")},
  };

  CampaignResult r1 = run_campaign(client, spec, base, store);
  CHECK(r1.sessions_run == 12);
  CHECK(r1.sessions_skipped == 0);
  CHECK(r1.failures.empty());
  CHECK(std::filesystem::exists(store.root / "manifest.json"));

  auto entries = store.list();
  REQUIRE(entries.size() == 12);
  CHECK(std::is_sorted(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.model, a.variant, a.patient_id, a.session) <
           std::tie(b.model, b.variant, b.patient_id, b.session);
  }));
  // The variant's therapist endpoint overrides the base config.
  SessionTranscript instr = load_transcript(
      store.path_for("Llama", "instruct", spec.profiles[0].profile_id, 1));
  CHECK(instr.utterances.size() == 6);  // sentinel on the third therapist turn

  CampaignResult r2 = run_campaign(client, spec, base, store);
  CHECK(r2.sessions_run == 0);
  CHECK(r2.sessions_skipped == 12);

  // An unreachable endpoint fails that course but leaves others intact.
  CampaignSpec bad = spec;
  bad.variants = {{"Mistral", "cbt", ep("therapist", "stub://nosuch")}};
  CampaignResult r3 = run_campaign(client, bad, base, store);
  CHECK(r3.sessions_run == 0);
  CHECK(r3.failures.size() == 2);  // one per profile, breaking at session 1
  CHECK(store.list().size() == 12);
}
