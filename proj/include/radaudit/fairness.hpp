#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radaudit/core.hpp"

namespace radaudit {

enum class Axis { sex_race, sex_age };
std::string_view to_string(Axis axis);  // "sex-race" / "sex-age"
Axis parse_axis(std::string_view token);

// One intersectional subgroup: sex plus either race or an adult age bin.
struct SubgroupKey {
  Axis axis = Axis::sex_race;
  Sex sex = Sex::male;
  std::optional<Race> race;
  std::optional<AgeBin> age_bin;

  // Canonical position: attribute-major, male before female
  // (Asian male, Asian female, Black male, ...).
  int rank() const;
  std::string label() const;  // "Asian male", "female 60-80"

  friend bool operator==(const SubgroupKey& a, const SubgroupKey& b) {
    return a.axis == b.axis && a.rank() == b.rank();
  }
  friend std::strong_ordering operator<=>(const SubgroupKey& a, const SubgroupKey& b) {
    if (auto c = a.axis <=> b.axis; c != 0) return c;
    return a.rank() <=> b.rank();
  }
};

struct PartitionExclusions {
  std::vector<std::size_t> missing_demographics;
  std::vector<std::size_t> missing_race;  // sex x race axis only
  std::vector<std::size_t> under_18;      // sex x age axis only

  std::size_t count() const {
    return missing_demographics.size() + missing_race.size() + under_18.size();
  }
};

struct Subgroup {
  SubgroupKey key;
  std::vector<std::size_t> rows;  // cohort row indices (may repeat in resamples)
};

struct Partition {
  Axis axis = Axis::sex_race;
  std::vector<Subgroup> groups;  // non-empty groups in canonical order
  PartitionExclusions exclusions;
};

// Splits `rows` (a multiset of cohort row indices) into subgroups. Rows
// without the attributes the axis needs, and under-18 rows on the age axis,
// go to the exclusion report. InputError when the race axis is requested and
// no row has race metadata.
Partition partition_rows(const Cohort& cohort, Axis axis,
                         std::span<const std::size_t> rows);
Partition partition_subgroups(const Cohort& cohort, Axis axis);

// Metric over a set of cohort rows. Throwing UndefinedMetricError marks the
// subgroup undefined.
using SubgroupMetricFn =
    std::function<double(const Cohort&, std::span<const std::size_t> rows)>;

struct SubgroupValue {
  SubgroupKey key;
  std::size_t size = 0;
  std::optional<double> value;
  std::string note;  // reason when undefined
};
using SubgroupTable = std::vector<SubgroupValue>;

SubgroupTable subgroup_metric_table(const Cohort& cohort, const Partition& partition,
                                    const SubgroupMetricFn& metric);

// Macro AUROC over `labels` within a subgroup; labels lacking a class inside
// the subgroup are dropped, and the subgroup is undefined if none remain.
SubgroupMetricFn subgroup_macro_auroc(std::vector<std::string> labels);

struct GapResult {
  double gap = 0.0;
  SubgroupKey best;
  SubgroupKey worst;
  std::vector<SubgroupKey> undefined;  // entries left out of the gap
};

// max - min over defined AUROC entries; best is the highest.
GapResult fairness_gap(const SubgroupTable& table);

// Per subgroup: FPR of "No Finding" binarized at `threshold`, among studies
// whose ground truth has some finding (No Finding negative).
SubgroupTable underdiagnosis_rates(const Cohort& cohort, const Partition& partition,
                                   double no_finding_threshold);

// max - min over defined FPRs; best is the lowest rate.
GapResult underdiagnosis_gap(const SubgroupTable& rates);

}  // namespace radaudit
