#pragma once
// Synthetic patient profiles sampled from an attribute catalog.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cbtsim {

struct CatalogError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One option list per profile dimension; age is a list of inclusive year
// ranges, the four plural dimensions sample 1-3 options each.
struct AttributeCatalog {
  std::vector<std::pair<int, int>> age_ranges;
  std::vector<std::string> gender;
  std::vector<std::string> ethnicity;
  std::vector<std::string> education_level;
  std::vector<std::string> occupation;
  std::vector<std::string> symptom_severity;
  std::vector<std::string> engagement_level;
  std::vector<std::string> family_background;
  std::vector<std::string> social_support;
  std::vector<std::string> life_events;
  std::vector<std::string> hobbies;
  std::vector<std::string> personality_traits;
  std::vector<std::string> coping_mechanisms;

  static constexpr int kDimensionCount = 13;

  // Throws CatalogError naming the offending dimension.
  void validate() const;
};

struct PatientProfile {
  std::string profile_id;
  std::uint64_t seed = 0;
  int age = 0;
  std::string gender;
  std::string ethnicity;
  std::string education_level;
  std::string occupation;
  std::string symptom_severity;
  std::string engagement_level;
  std::string family_background;
  std::string social_support;
  std::vector<std::string> life_events;
  std::vector<std::string> hobbies;
  std::vector<std::string> personality_traits;
  std::vector<std::string> coping_mechanisms;

  bool operator==(const PatientProfile&) const = default;

  // One-paragraph rendering used inside prompts.
  std::string describe() const;
};

void to_json(nlohmann::json& j, const PatientProfile& p);
void from_json(const nlohmann::json& j, PatientProfile& p);
void to_json(nlohmann::json& j, const AttributeCatalog& c);
void from_json(const nlohmann::json& j, AttributeCatalog& c);

// Built-in catalog covering all 13 dimensions; identical content ships as
// assets/catalog.json for user editing.
AttributeCatalog default_catalog();

AttributeCatalog load_catalog(const std::filesystem::path& path);

PatientProfile sample_profile(std::uint64_t seed, const AttributeCatalog& catalog);

// Seeds are base_seed + index; profile ids are derived from the seed and thus
// stable across re-runs.
std::vector<PatientProfile> sample_cohort(std::size_t n, std::uint64_t base_seed,
                                          const AttributeCatalog& catalog);

}  // namespace cbtsim
