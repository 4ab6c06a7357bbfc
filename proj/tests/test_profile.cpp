#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "cbtsim/profile.hpp"

using namespace cbtsim;

namespace {

bool member(const std::vector<std::string>& options, const std::string& v) {
  return std::find(options.begin(), options.end(), v) != options.end();
}

bool subset(const std::vector<std::string>& options, const std::vector<std::string>& vs) {
  for (const auto& v : vs)
    if (!member(options, v)) return false;
  return true;
}

}  // namespace

TEST_CASE("bundled default catalog loads with 13 dimensions") {
  AttributeCatalog c = load_catalog(std::filesystem::path(CBTSIM_ASSET_DIR) / "catalog.json");
  CHECK(AttributeCatalog::kDimensionCount == 13);
  CHECK(!c.age_ranges.empty());
  CHECK(!c.coping_mechanisms.empty());
  // Round-trip through JSON preserves option counts.
  nlohmann::json j = c;
  AttributeCatalog back = j.get<AttributeCatalog>();
  CHECK(back.gender.size() == c.gender.size());
  CHECK(back.life_events.size() == c.life_events.size());
}

TEST_CASE("catalog with an empty dimension names it") {
  AttributeCatalog c = default_catalog();
  c.hobbies.clear();
  nlohmann::json j = c;
  auto tmp = std::filesystem::temp_directory_path() / "cbtsim_empty_hobbies.json";
  std::ofstream(tmp) << j.dump();
  CHECK_THROWS_WITH_AS(load_catalog(tmp), doctest::Contains("hobbies"), CatalogError);
}

TEST_CASE("missing catalog file is an error") {
  CHECK_THROWS_AS(load_catalog("/nonexistent/catalog.json"), CatalogError);
}

TEST_CASE("sampling is deterministic in the seed") {
  AttributeCatalog c = default_catalog();
  PatientProfile a = sample_profile(42, c);
  PatientProfile b = sample_profile(42, c);
  CHECK(a == b);
  CHECK(nlohmann::json(a).dump() == nlohmann::json(b).dump());
  PatientProfile other = sample_profile(43, c);
  CHECK(a.profile_id != other.profile_id);
}

TEST_CASE("degenerate single-option catalog forces the profile") {
  AttributeCatalog c;
  c.age_ranges = {{30, 30}};
  c.gender = {"female"};
  c.ethnicity = {"White"};
  c.education_level = {"high school"};
  c.occupation = {"nurse"};
  c.symptom_severity = {"moderate"};
  c.engagement_level = {"engaged but skeptical"};
  c.family_background = {"supportive family nearby"};
  c.social_support = {"a few close friends"};
  c.life_events = {"job loss"};
  c.hobbies = {"reading"};
  c.personality_traits = {"introverted"};
  c.coping_mechanisms = {"journaling"};
  PatientProfile p = sample_profile(7, c);
  CHECK(p.age == 30);
  CHECK(p.gender == "female");
  CHECK(p.life_events == std::vector<std::string>{"job loss"});
  CHECK(p.hobbies == std::vector<std::string>{"reading"});
}

TEST_CASE("sampled values are members of the catalog") {
  AttributeCatalog c = default_catalog();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    PatientProfile p = sample_profile(seed, c);
    bool age_ok = false;
    for (const auto& [lo, hi] : c.age_ranges) age_ok |= (p.age >= lo && p.age <= hi);
    CHECK(age_ok);
    CHECK(member(c.gender, p.gender));
    CHECK(member(c.occupation, p.occupation));
    CHECK(subset(c.life_events, p.life_events));
    CHECK(subset(c.hobbies, p.hobbies));
    CHECK(subset(c.personality_traits, p.personality_traits));
    CHECK(subset(c.coping_mechanisms, p.coping_mechanisms));
    CHECK(p.life_events.size() >= 1);
    CHECK(p.life_events.size() <= 3);
    // no repeats within a list-valued dimension
    std::set<std::string> uniq(p.life_events.begin(), p.life_events.end());
    CHECK(uniq.size() == p.life_events.size());
  }
}

TEST_CASE("single-valued dimension frequencies are near-uniform over 10k samples") {
  AttributeCatalog c = default_catalog();
  CHECK(c.symptom_severity.size() == 4);
  const int n = 10000;
  std::map<std::string, int> counts;
  for (int i = 0; i < n; ++i) counts[sample_profile(1000 + i, c).symptom_severity]++;
  // Binomial sd around the uniform expectation; 5 sigma tolerance.
  double expect = n / 4.0;
  double sd = std::sqrt(n * 0.25 * 0.75);
  for (const auto& opt : c.symptom_severity) {
    CHECK(std::abs(counts[opt] - expect) < 5.0 * sd);
  }
}

TEST_CASE("cohorts have distinct, stable ids and derived seeds") {
  AttributeCatalog c = default_catalog();
  auto cohort = sample_cohort(58, 99, c);
  CHECK(cohort.size() == 58);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    ids.insert(cohort[i].profile_id);
    CHECK(cohort[i].seed == 99 + i);
  }
  CHECK(ids.size() == 58);
  auto again = sample_cohort(58, 99, c);
  for (std::size_t i = 0; i < cohort.size(); ++i) CHECK(cohort[i] == again[i]);

  auto five = sample_cohort(5, 99, c);
  CHECK(five.size() == 5);
  auto one = sample_cohort(1, 7, c);
  CHECK(one.size() == 1);
  CHECK(one[0] == sample_profile(7, c));
}
