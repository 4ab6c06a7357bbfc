#pragma once
// Marker strings shared between prompt templates, response parsers and the
// scripted stub endpoints. Changing one of these means regenerating caches.

namespace cbtsim::markers {

inline constexpr const char* kDefaultSentinel = "[SESSION SUMMARY]";
inline constexpr const char* kDisclosureToken = "hallucinat";  // case-insensitive substring
inline constexpr const char* kPartRequest = "Generate part ";
inline constexpr const char* kParaphraseRequest = "SUMMARY TO PARAPHRASE:";
inline constexpr const char* kSummarizeRequest = "TRANSCRIPT TO SUMMARIZE:";
inline constexpr const char* kJudgeCategory = "CATEGORY: ";
inline constexpr const char* kSessionHeader = "SESSION ";   // "SESSION {k}/20"
inline constexpr const char* kPatientHeader = "PATIENT: ";  // "PATIENT: {profile_id}"
inline constexpr const char* kPrevSummaryHeader = "PREVIOUS SESSION SUMMARY:";
inline constexpr const char* kSynthSummaryPrefix = "SESSION SUMMARY:";

}  // namespace cbtsim::markers
