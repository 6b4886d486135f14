#include "radaudit/fairness.hpp"

#include <algorithm>
#include <map>

#include "radaudit/clf_eval.hpp"
#include "radaudit/error.hpp"
#include "radaudit/numeric.hpp"

namespace radaudit {

std::string_view to_string(Axis axis) {
  return axis == Axis::sex_race ? "sex-race" : "sex-age";
}

Axis parse_axis(std::string_view token) {
  if (token == "sex-race") return Axis::sex_race;
  if (token == "sex-age") return Axis::sex_age;
  throw InputError("unknown axis '" + std::string(token) +
                   "' (expected sex-race|sex-age)");
}

int SubgroupKey::rank() const {
  const int attribute = axis == Axis::sex_race
                            ? static_cast<int>(race.value_or(Race::asian))
                            : static_cast<int>(age_bin.value_or(AgeBin::under18));
  return attribute * 2 + (sex == Sex::male ? 0 : 1);
}

std::string SubgroupKey::label() const {
  if (axis == Axis::sex_race) {
    return std::string(race ? to_string(*race) : "?") + " " + std::string(to_string(sex));
  }
  return std::string(to_string(sex)) + " " +
         std::string(age_bin ? to_string(*age_bin) : "?");
}

Partition partition_rows(const Cohort& cohort, Axis axis,
                         std::span<const std::size_t> rows) {
  if (axis == Axis::sex_race) {
    const bool any_race = std::any_of(
        cohort.records().begin(), cohort.records().end(), [](const StudyRecord& r) {
          return r.demographics && r.demographics->race.has_value();
        });
    if (!any_race) {
      throw InputError("the sex-race axis needs race metadata, which this cohort lacks");
    }
  }
  Partition p;
  p.axis = axis;
  std::map<SubgroupKey, std::vector<std::size_t>> groups;
  for (std::size_t row : rows) {
    if (row >= cohort.size()) throw InputError("row index out of range");
    const auto& d = cohort[row].demographics;
    if (!d) {
      p.exclusions.missing_demographics.push_back(row);
      continue;
    }
    SubgroupKey key;
    key.axis = axis;
    key.sex = d->sex;
    if (axis == Axis::sex_race) {
      if (!d->race) {
        p.exclusions.missing_race.push_back(row);
        continue;
      }
      key.race = d->race;
    } else {
      const AgeBin bin = age_bin(d->age);
      if (bin == AgeBin::under18) {
        p.exclusions.under_18.push_back(row);
        continue;
      }
      key.age_bin = bin;
    }
    groups[key].push_back(row);
  }
  for (auto& [key, members] : groups) p.groups.push_back({key, std::move(members)});
  return p;
}

Partition partition_subgroups(const Cohort& cohort, Axis axis) {
  std::vector<std::size_t> rows(cohort.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return partition_rows(cohort, axis, rows);
}

SubgroupTable subgroup_metric_table(const Cohort& cohort, const Partition& partition,
                                    const SubgroupMetricFn& metric) {
  SubgroupTable table;
  table.reserve(partition.groups.size());
  for (const auto& g : partition.groups) {
    SubgroupValue v;
    v.key = g.key;
    v.size = g.rows.size();
    try {
      v.value = metric(cohort, g.rows);
    } catch (const UndefinedMetricError& e) {
      v.note = e.what();
    }
    table.push_back(std::move(v));
  }
  return table;
}

SubgroupMetricFn subgroup_macro_auroc(std::vector<std::string> labels) {
  return [labels = std::move(labels)](const Cohort& cohort,
                                      std::span<const std::size_t> rows) {
    const auto cols = resolve_subset(cohort.schema(), labels);
    std::vector<double> defined;
    const auto n = static_cast<Eigen::Index>(rows.size());
    for (std::size_t col : cols) {
      Eigen::VectorXd s(n);
      Eigen::VectorXi l(n);
      Eigen::Index k = 0;
      for (std::size_t row : rows) {
        const auto& rec = cohort[row];
        if (!rec.scores) throw InputError("study '" + rec.study_id + "' has no scores");
        s[k] = (*rec.scores)[static_cast<Eigen::Index>(col)];
        l[k] = static_cast<int>(rec.labels[col]);
        ++k;
      }
      auto [ds, dl] = defined_entries(s, l);
      try {
        defined.push_back(binary_auroc(ds, dl));
      } catch (const UndefinedMetricError&) {
      }
    }
    if (defined.empty()) {
      throw UndefinedMetricError("no label has both classes in this subgroup");
    }
    return mean(defined);
  };
}

namespace {

GapResult spread(const SubgroupTable& table, bool higher_is_better,
                 const char* what) {
  GapResult r;
  const SubgroupValue* hi = nullptr;
  const SubgroupValue* lo = nullptr;
  std::size_t defined = 0;
  for (const auto& v : table) {
    if (!v.value) {
      r.undefined.push_back(v.key);
      continue;
    }
    ++defined;
    if (!hi || *v.value > *hi->value) hi = &v;
    if (!lo || *v.value < *lo->value) lo = &v;
  }
  if (defined < 2) {
    throw UndefinedMetricError(std::string(what) + " needs at least 2 defined subgroups, found " +
                               std::to_string(defined));
  }
  r.gap = *hi->value - *lo->value;
  r.best = higher_is_better ? hi->key : lo->key;
  r.worst = higher_is_better ? lo->key : hi->key;
  return r;
}

}  // namespace

GapResult fairness_gap(const SubgroupTable& table) {
  return spread(table, true, "fairness gap");
}

SubgroupTable underdiagnosis_rates(const Cohort& cohort, const Partition& partition,
                                   double no_finding_threshold) {
  const auto col = cohort.schema().index_of(kNoFinding);
  if (!col) throw InputError("cohort schema has no '" + kNoFinding + "' label");
  return subgroup_metric_table(
      cohort, partition,
      [col = *col, no_finding_threshold](const Cohort& c,
                                         std::span<const std::size_t> rows) {
        std::size_t fp = 0;
        std::size_t eligible = 0;
        for (std::size_t row : rows) {
          const auto& rec = c[row];
          if (!rec.scores) throw InputError("study '" + rec.study_id + "' has no scores");
          if (rec.labels[col] != Label::negative) continue;
          ++eligible;
          if ((*rec.scores)[static_cast<Eigen::Index>(col)] >= no_finding_threshold) ++fp;
        }
        if (eligible == 0) {
          throw UndefinedMetricError("no studies with a finding in this subgroup");
        }
        return static_cast<double>(fp) / static_cast<double>(eligible);
      });
}

GapResult underdiagnosis_gap(const SubgroupTable& rates) {
  return spread(rates, false, "underdiagnosis gap");
}

}  // namespace radaudit
