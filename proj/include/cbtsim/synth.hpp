#pragma once
// Synthetic training-course generation via a teacher endpoint, plus export of
// a fine-tuning-ready chat dataset (.jsonl).

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbtsim/gateway.hpp"
#include "cbtsim/protocol.hpp"
#include "cbtsim/transcript.hpp"

namespace cbtsim {

struct SynthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Four sequential teacher calls, one per session part, with accumulated
// context. Validates disclosure and the closing summary; each part gets up to
// 2 regeneration attempts before a structural error is raised.
SessionTranscript generate_session(const ChatClient& client, const SessionPlan& plan,
                                   const PatientProfile& profile, const EndpointConfig& teacher);

// Patient-voice opening for the next session, embedding prev.final_summary
// (teacher paraphrase; identity under the teacher stub).
std::string inject_continuity(const ChatClient& client, const SessionTranscript& prev,
                              const EndpointConfig& teacher);

CourseTranscripts generate_course(const ChatClient& client, const PatientProfile& profile,
                                  const EndpointConfig& teacher,
                                  const PhaseAssets& assets = default_phase_assets());

void save_course(const CourseTranscripts& course, const std::filesystem::path& out_dir);

struct ExportStats {
  std::size_t records = 0;
  std::size_t merged_utterances = 0;  // adjacent same-speaker merges applied
};

// One line-delimited JSON chat record per session: system prompt followed by
// strictly alternating user(patient)/assistant(therapist) messages.
ExportStats export_finetune_dataset(const std::vector<CourseTranscripts>& courses,
                                    const std::filesystem::path& out_path);

}  // namespace cbtsim
