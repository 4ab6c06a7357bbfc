#include "cbtsim/profile.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cbtsim/prng.hpp"

namespace cbtsim {

namespace {

void require_nonempty(const std::vector<std::string>& v, const char* name) {
  if (v.empty()) throw CatalogError(std::string("catalog dimension '") + name + "' is empty");
}

std::vector<std::string> pick_many(SplitMix64& rng, const std::vector<std::string>& options) {
  std::size_t k = 1 + static_cast<std::size_t>(rng.bounded(3));  // 1-3 options
  k = std::min(k, options.size());
  std::vector<std::string> out;
  for (std::size_t idx : rng.sample_without_replacement(options.size(), k))
    out.push_back(options[idx]);
  return out;
}

std::string pick_one(SplitMix64& rng, const std::vector<std::string>& options) {
  return options[static_cast<std::size_t>(rng.bounded(options.size()))];
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += v[i];
  }
  return out;
}

}  // namespace

void AttributeCatalog::validate() const {
  if (age_ranges.empty()) throw CatalogError("catalog dimension 'age' is empty");
  for (const auto& [lo, hi] : age_ranges) {
    if (lo > hi) {
      throw CatalogError("catalog dimension 'age' has an empty range [" + std::to_string(lo) +
                         ", " + std::to_string(hi) + "]");
    }
  }
  auto ranges = age_ranges;
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].first <= ranges[i - 1].second)
      throw CatalogError("catalog dimension 'age' has overlapping ranges");
  }
  require_nonempty(gender, "gender");
  require_nonempty(ethnicity, "ethnicity");
  require_nonempty(education_level, "education_level");
  require_nonempty(occupation, "occupation");
  require_nonempty(symptom_severity, "symptom_severity");
  require_nonempty(engagement_level, "engagement_level");
  require_nonempty(family_background, "family_background");
  require_nonempty(social_support, "social_support");
  require_nonempty(life_events, "life_events");
  require_nonempty(hobbies, "hobbies");
  require_nonempty(personality_traits, "personality_traits");
  require_nonempty(coping_mechanisms, "coping_mechanisms");
}

std::string PatientProfile::describe() const {
  std::ostringstream os;
  os << "Age " << age << ", " << gender << ", " << ethnicity << ". Education: " << education_level
     << ". Occupation: " << occupation << ". Depression severity: " << symptom_severity
     << ". Engagement with treatment: " << engagement_level
     << ". Family background: " << family_background << ". Social support: " << social_support
     << ". Recent life events: " << join(life_events) << ". Hobbies: " << join(hobbies)
     << ". Personality: " << join(personality_traits)
     << ". Coping mechanisms: " << join(coping_mechanisms) << ".";
  return os.str();
}

void to_json(nlohmann::json& j, const PatientProfile& p) {
  j = nlohmann::json{{"profile_id", p.profile_id},
                     {"seed", p.seed},
                     {"age", p.age},
                     {"gender", p.gender},
                     {"ethnicity", p.ethnicity},
                     {"education_level", p.education_level},
                     {"occupation", p.occupation},
                     {"symptom_severity", p.symptom_severity},
                     {"engagement_level", p.engagement_level},
                     {"family_background", p.family_background},
                     {"social_support", p.social_support},
                     {"life_events", p.life_events},
                     {"hobbies", p.hobbies},
                     {"personality_traits", p.personality_traits},
                     {"coping_mechanisms", p.coping_mechanisms}};
}

void from_json(const nlohmann::json& j, PatientProfile& p) {
  j.at("profile_id").get_to(p.profile_id);
  j.at("seed").get_to(p.seed);
  j.at("age").get_to(p.age);
  j.at("gender").get_to(p.gender);
  j.at("ethnicity").get_to(p.ethnicity);
  j.at("education_level").get_to(p.education_level);
  j.at("occupation").get_to(p.occupation);
  j.at("symptom_severity").get_to(p.symptom_severity);
  j.at("engagement_level").get_to(p.engagement_level);
  j.at("family_background").get_to(p.family_background);
  j.at("social_support").get_to(p.social_support);
  j.at("life_events").get_to(p.life_events);
  j.at("hobbies").get_to(p.hobbies);
  j.at("personality_traits").get_to(p.personality_traits);
  j.at("coping_mechanisms").get_to(p.coping_mechanisms);
}

void to_json(nlohmann::json& j, const AttributeCatalog& c) {
  j = nlohmann::json{{"age", c.age_ranges},
                     {"gender", c.gender},
                     {"ethnicity", c.ethnicity},
                     {"education_level", c.education_level},
                     {"occupation", c.occupation},
                     {"symptom_severity", c.symptom_severity},
                     {"engagement_level", c.engagement_level},
                     {"family_background", c.family_background},
                     {"social_support", c.social_support},
                     {"life_events", c.life_events},
                     {"hobbies", c.hobbies},
                     {"personality_traits", c.personality_traits},
                     {"coping_mechanisms", c.coping_mechanisms}};
}

void from_json(const nlohmann::json& j, AttributeCatalog& c) {
  auto dim = [&j](const char* name) -> std::vector<std::string> {
    if (!j.contains(name))
      throw CatalogError(std::string("catalog is missing dimension '") + name + "'");
    return j.at(name).get<std::vector<std::string>>();
  };
  if (!j.contains("age")) throw CatalogError("catalog is missing dimension 'age'");
  c.age_ranges = j.at("age").get<std::vector<std::pair<int, int>>>();
  c.gender = dim("gender");
  c.ethnicity = dim("ethnicity");
  c.education_level = dim("education_level");
  c.occupation = dim("occupation");
  c.symptom_severity = dim("symptom_severity");
  c.engagement_level = dim("engagement_level");
  c.family_background = dim("family_background");
  c.social_support = dim("social_support");
  c.life_events = dim("life_events");
  c.hobbies = dim("hobbies");
  c.personality_traits = dim("personality_traits");
  c.coping_mechanisms = dim("coping_mechanisms");
}

AttributeCatalog default_catalog() {
  AttributeCatalog c;
  c.age_ranges = {{18, 29}, {30, 44}, {45, 64}, {65, 80}};
  c.gender = {"female", "male", "non-binary"};
  c.ethnicity = {"White", "Black", "Hispanic", "East Asian", "South Asian",
                 "Middle Eastern", "Indigenous", "Mixed heritage"};
  c.education_level = {"high school", "some college", "associate degree",
                       "bachelor's degree", "graduate degree", "trade certification"};
  c.occupation = {"retail worker", "software developer", "nurse", "teacher",
                  "construction worker", "accountant", "graduate student",
                  "restaurant server", "unemployed", "retired", "warehouse associate",
                  "graphic designer"};
  c.symptom_severity = {"mild", "moderate", "moderately severe", "severe"};
  c.engagement_level = {"highly engaged", "engaged but skeptical", "ambivalent",
                        "reluctant"};
  c.family_background = {"supportive family nearby", "estranged from family",
                         "family history of depression", "recently relocated away from family",
                         "caretaker for an aging parent", "single parent household"};
  c.social_support = {"strong friend network", "a few close friends", "mostly online friendships",
                      "socially isolated", "active in a community group"};
  c.life_events = {"job loss", "divorce", "bereavement", "chronic illness diagnosis",
                   "financial strain", "recent breakup", "workplace conflict",
                   "new parenthood", "housing instability", "academic failure"};
  c.hobbies = {"reading", "hiking", "video games", "cooking", "gardening", "painting",
               "playing guitar", "running", "photography", "board games", "knitting"};
  c.personality_traits = {"perfectionistic", "introverted", "people-pleasing",
                          "self-critical", "conscientious", "impulsive", "avoidant",
                          "optimistic despite symptoms", "irritable", "ruminating"};
  c.coping_mechanisms = {"social withdrawal", "overworking", "comfort eating",
                         "excessive sleep", "alcohol use", "exercise", "journaling",
                         "distraction through screens", "talking to friends",
                         "avoidance of responsibilities"};
  return c;
}

AttributeCatalog load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CatalogError("catalog file not found: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CatalogError("catalog parse error in " + path.string() + ": " + e.what());
  }
  AttributeCatalog c = j.get<AttributeCatalog>();
  c.validate();
  return c;
}

PatientProfile sample_profile(std::uint64_t seed, const AttributeCatalog& catalog) {
  catalog.validate();
  SplitMix64 rng(seed);
  PatientProfile p;
  p.seed = seed;
  {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "patient_%016llx", static_cast<unsigned long long>(seed));
    p.profile_id = buf;
  }
  const auto& range = catalog.age_ranges[static_cast<std::size_t>(rng.bounded(catalog.age_ranges.size()))];
  p.age = range.first + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(range.second - range.first + 1)));
  p.gender = pick_one(rng, catalog.gender);
  p.ethnicity = pick_one(rng, catalog.ethnicity);
  p.education_level = pick_one(rng, catalog.education_level);
  p.occupation = pick_one(rng, catalog.occupation);
  p.symptom_severity = pick_one(rng, catalog.symptom_severity);
  p.engagement_level = pick_one(rng, catalog.engagement_level);
  p.family_background = pick_one(rng, catalog.family_background);
  p.social_support = pick_one(rng, catalog.social_support);
  p.life_events = pick_many(rng, catalog.life_events);
  p.hobbies = pick_many(rng, catalog.hobbies);
  p.personality_traits = pick_many(rng, catalog.personality_traits);
  p.coping_mechanisms = pick_many(rng, catalog.coping_mechanisms);
  return p;
}

std::vector<PatientProfile> sample_cohort(std::size_t n, std::uint64_t base_seed,
                                          const AttributeCatalog& catalog) {
  std::vector<PatientProfile> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(sample_profile(base_seed + i, catalog));
  return out;
}

}  // namespace cbtsim
