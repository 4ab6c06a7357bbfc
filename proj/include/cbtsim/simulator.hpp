#pragma once
// Evaluation-time dialogue simulation: therapist endpoint vs patient endpoint
// with sentinel/turn/word termination rules, a separate summarizer, and
// cross-session continuity.

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbtsim/gateway.hpp"
#include "cbtsim/markers.hpp"
#include "cbtsim/profile.hpp"
#include "cbtsim/transcript.hpp"

namespace cbtsim {

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimConfig {
  int max_turns = 50;      // utterances by either party
  int max_words = 5000;    // strict inequality: terminate once exceeded
  std::string summary_sentinel = markers::kDefaultSentinel;
  EndpointConfig therapist;
  EndpointConfig patient;
  EndpointConfig summarizer;

  void validate() const;
};

struct CampaignVariant {
  std::string model;    // Llama | Mistral | Qwen
  std::string variant;  // cbt | instruct
  EndpointConfig therapist;
};

struct CampaignSpec {
  std::vector<CampaignVariant> variants;
  std::vector<PatientProfile> profiles;  // the shared cohort, identical across variants
  int sessions_per_profile = kSessionsPerCourse;
};

// True iff a therapist utterance contains the sentinel (case-insensitive).
bool detect_summary(const Utterance& u, const std::string& sentinel);

// Alternating utterances starting with the patient; termination is the first
// rule triggered, checked after every utterance in the order
// SummaryDetected -> TurnLimit -> WordLimit.
SessionTranscript run_session(const ChatClient& client, const SimConfig& config,
                              const PatientProfile& profile, int session_index,
                              const std::optional<std::string>& prev_summary);

std::string summarize_session(const ChatClient& client, const SessionTranscript& t,
                              const EndpointConfig& summarizer);

struct TranscriptStore {
  std::filesystem::path root;

  std::filesystem::path path_for(const std::string& model, const std::string& variant,
                                 const std::string& patient_id, int session) const;
  // All transcripts, tagged (model, variant, patient_id, session).
  struct Entry {
    std::string model, variant, patient_id;
    int session = 0;
    std::filesystem::path path;
  };
  std::vector<Entry> list() const;
};

struct CampaignResult {
  std::size_t sessions_run = 0;
  std::size_t sessions_skipped = 0;  // already present (resume)
  std::vector<std::string> failures;
};

// 3 models x 2 variants x 5 profiles x 20 sessions in the full configuration.
// Existing transcripts are skipped, which makes interrupted campaigns
// resumable; a manifest.json under the store root records completion status.
CampaignResult run_campaign(const ChatClient& client, const CampaignSpec& spec,
                            const SimConfig& base_config, const TranscriptStore& store);

}  // namespace cbtsim
