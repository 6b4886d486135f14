#include "radaudit/qc.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "radaudit/error.hpp"
#include "radaudit/parallel.hpp"
#include "radaudit/random.hpp"

namespace radaudit {

void QcPolicy::validate() const {
  if (!(age_tolerance >= 0.0)) throw InputError("age_tolerance must be >= 0");
  if (max_regenerations < 0) throw InputError("max_regenerations must be >= 0");
}

Verdict judge(const AuditReadout& readout, const Demographics& target,
              const QcPolicy& policy) {
  Verdict v;
  v.sex = readout.sex == target.sex;
  v.race = target.race.has_value() && readout.race == *target.race;
  v.age = std::abs(readout.age - static_cast<double>(target.age)) <=
          policy.age_tolerance;
  return v;
}

Verdict audit_sample(const Sample& sample, const Demographics& target,
                     const QcPolicy& policy, AuditorBackend& auditor,
                     AuditReadout* readout) {
  AuditReadout r;
  try {
    r.sex = auditor.predict_sex(sample);
    r.race = auditor.predict_race(sample);
    r.age = auditor.predict_age(sample);
  } catch (const std::exception& e) {
    throw BackendError("auditor failed on sample '" + sample.sample_id +
                       "': " + e.what());
  }
  if (!std::isfinite(r.age)) {
    throw BackendError("auditor returned a non-finite age for sample '" +
                       sample.sample_id + "'");
  }
  if (readout) *readout = r;
  return judge(r, target, policy);
}

std::string_view to_string(TerminalStatus status) {
  switch (status) {
    case TerminalStatus::accepted: return "accepted";
    case TerminalStatus::discarded: return "discarded";
    case TerminalStatus::backend_failure: return "backend_failure";
  }
  return "";
}

std::uint64_t attempt_seed(std::uint64_t campaign_seed, std::size_t prompt_index,
                           std::size_t attempt_index) {
  return derive_seed(campaign_seed, {static_cast<std::uint64_t>(prompt_index),
                                     static_cast<std::uint64_t>(attempt_index)});
}

CampaignResult run_campaign(const std::vector<PromptSpec>& prompts,
                            GeneratorBackend& generator, AuditorBackend& auditor,
                            const QcPolicy& policy, std::uint64_t seed) {
  policy.validate();
  if (prompts.empty()) throw InputError("campaign has no prompts");
  CampaignResult result;
  result.ledger.seed = seed;
  result.ledger.policy = policy;
  auto& entries = result.ledger.entries;
  entries.resize(prompts.size());
  const std::size_t max_attempts = static_cast<std::size_t>(policy.max_attempts());

  parallel_for(prompts.size(), [&](std::size_t i) {
    const PromptSpec& prompt = prompts[i];
    LedgerEntry& entry = entries[i];
    entry.prompt_index = i;
    entry.prompt_text = prompt.prompt_text;
    entry.target = prompt.target;
    entry.source_impression_id = prompt.source_impression_id;
    entry.status = TerminalStatus::discarded;
    for (std::size_t a = 0; a < max_attempts; ++a) {
      Attempt attempt;
      attempt.seed = attempt_seed(seed, i, a);
      try {
        Sample sample;
        try {
          sample = generator.generate(prompt.prompt_text, attempt.seed);
        } catch (const BackendError&) {
          throw;
        } catch (const std::exception& e) {
          throw BackendError(std::string("generator failed: ") + e.what());
        }
        attempt.sample_id = sample.sample_id;
        attempt.verdict =
            audit_sample(sample, prompt.target, policy, auditor, &attempt.readout);
      } catch (const BackendError& e) {
        entry.status = TerminalStatus::backend_failure;
        entry.error = e.what();
        return;
      }
      const bool passed = attempt.verdict.passed();
      entry.attempts.push_back(std::move(attempt));
      if (passed) {
        entry.status = TerminalStatus::accepted;
        return;
      }
    }
  });

  for (const auto& entry : entries) {
    if (entry.status != TerminalStatus::accepted) continue;
    result.accepted.push_back({entry.prompt_index, entry.attempts.back().sample_id,
                               entry.target, entry.source_impression_id});
  }
  return result;
}

std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::race: return "race";
    case Criterion::age: return "age";
    case Criterion::sex: return "sex";
  }
  return "";
}

std::size_t& CriterionCounts::operator[](Criterion c) {
  return c == Criterion::race ? race : c == Criterion::age ? age : sex;
}

std::size_t CriterionCounts::operator[](Criterion c) const {
  return c == Criterion::race ? race : c == Criterion::age ? age : sex;
}

double LedgerSummary::headline_fraction(Criterion c) const {
  return total == 0 ? 0.0
                    : static_cast<double>(headline[c]) / static_cast<double>(total);
}

LedgerSummary ledger_summary(const CampaignLedger& ledger) {
  LedgerSummary s;
  s.total = ledger.entries.size();
  for (const auto& e : ledger.entries) {
    switch (e.status) {
      case TerminalStatus::accepted: ++s.accepted; break;
      case TerminalStatus::backend_failure: ++s.backend_failed; break;
      case TerminalStatus::discarded: {
        ++s.discarded;
        if (e.attempts.empty()) break;
        const Verdict& v = e.attempts.back().verdict;
        const bool failed[3] = {!v.race, !v.age, !v.sex};
        bool attributed = false;
        for (std::size_t k = 0; k < kAllCriteria.size(); ++k) {
          if (!failed[k]) continue;
          ++s.detailed[kAllCriteria[k]];
          if (!attributed) {
            ++s.headline[kAllCriteria[k]];
            attributed = true;
          }
        }
        break;
      }
    }
  }
  s.discard_rate =
      s.total == 0 ? 0.0 : static_cast<double>(s.discarded) / static_cast<double>(s.total);
  return s;
}

// ---------------------------------------------------------------------------

void GroupTallies::add(const Demographics& d) {
  ++total;
  ++sex[d.sex == Sex::male ? 0 : 1];
  if (d.race) ++race[static_cast<std::size_t>(*d.race)];
  ++age_bin[static_cast<std::size_t>(radaudit::age_bin(d.age))];
}

namespace {

template <std::size_t N, typename Names>
std::vector<GroupBalance> balance_rows(const std::array<std::size_t, N>& accepted,
                                       const std::array<std::size_t, N>& reference,
                                       const Names& names) {
  std::vector<GroupBalance> rows;
  for (std::size_t i = 0; i < N; ++i) {
    GroupBalance g;
    g.group = std::string(to_string(names[i]));
    g.accepted = accepted[i];
    g.reference = reference[i];
    if (g.reference > 0) {
      g.amplification =
          static_cast<double>(g.accepted) / static_cast<double>(g.reference);
    }
    rows.push_back(std::move(g));
  }
  return rows;
}

}  // namespace

BalanceReport compute_balance(const GroupTallies& accepted,
                              const GroupTallies& reference) {
  BalanceReport r;
  r.accepted_total = accepted.total;
  r.reference_total = reference.total;
  r.by_race = balance_rows(accepted.race, reference.race, kAllRaces);
  r.by_sex = balance_rows(accepted.sex, reference.sex, kAllSexes);
  r.by_age_bin = balance_rows(accepted.age_bin, reference.age_bin, kAllAgeBins);
  return r;
}

BalanceReport balance_report(const std::vector<AcceptedSample>& accepted,
                             const Cohort& reference, const Cohort* source_labels) {
  GroupTallies acc;
  GroupTallies ref;
  for (const auto& s : accepted) acc.add(s.target);
  for (const auto& rec : reference.records()) {
    if (rec.demographics) ref.add(*rec.demographics);
  }
  BalanceReport report = compute_balance(acc, ref);
  if (source_labels) {
    const auto& schema = source_labels->schema();
    std::vector<std::size_t> positives(schema.size(), 0);
    for (const auto& s : accepted) {
      auto idx = source_labels->find(s.source_impression_id);
      if (!idx) {
        throw InputError("no labels for source impression '" +
                         s.source_impression_id + "'");
      }
      const auto& labels = (*source_labels)[*idx].labels;
      for (std::size_t j = 0; j < schema.size(); ++j) {
        if (labels[j] == Label::positive) ++positives[j];
      }
    }
    const auto ref_labels = reference.schema() == schema && !reference.empty();
    for (std::size_t j = 0; j < schema.size(); ++j) {
      LabelPrevalence p;
      p.label = schema.name(j);
      p.accepted = accepted.empty() ? 0.0
                                    : static_cast<double>(positives[j]) /
                                          static_cast<double>(accepted.size());
      if (ref_labels) {
        std::size_t ref_pos = 0;
        for (const auto& rec : reference.records()) {
          if (rec.labels.size() > j && rec.labels[j] == Label::positive) ++ref_pos;
        }
        p.reference = static_cast<double>(ref_pos) /
                      static_cast<double>(reference.size());
      }
      report.prevalence.push_back(std::move(p));
    }
  }
  return report;
}

std::string ledger_to_jsonl(const CampaignLedger& ledger) {
  std::string out;
  for (const auto& e : ledger.entries) {
    nlohmann::ordered_json j;
    j["prompt_index"] = e.prompt_index;
    j["prompt_text"] = e.prompt_text;
    j["source_impression_id"] = e.source_impression_id;
    j["target"] = {{"sex", to_string(e.target.sex)},
                   {"race", e.target.race ? std::string(to_string(*e.target.race)) : ""},
                   {"age", e.target.age}};
    j["status"] = to_string(e.status);
    auto attempts = nlohmann::ordered_json::array();
    for (std::size_t a = 0; a < e.attempts.size(); ++a) {
      const Attempt& at = e.attempts[a];
      nlohmann::ordered_json aj;
      aj["attempt"] = a;
      aj["seed"] = at.seed;
      aj["sample_id"] = at.sample_id;
      aj["predicted"] = {{"sex", to_string(at.readout.sex)},
                         {"race", to_string(at.readout.race)},
                         {"age", at.readout.age}};
      aj["pass"] = {{"sex", at.verdict.sex},
                    {"race", at.verdict.race},
                    {"age", at.verdict.age}};
      attempts.push_back(std::move(aj));
    }
    j["attempts"] = std::move(attempts);
    if (!e.error.empty()) j["error"] = e.error;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

// ---------------------------------------------------------------------------

StubBackend::StubBackend(StubBehavior behavior, GeneratorConfig config)
    : behavior_(behavior), config_(config) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(behavior_.sex_accuracy) || !prob(behavior_.race_accuracy)) {
    throw InputError("stub accuracies must lie in [0, 1]");
  }
  if (!(behavior_.age_error_sd >= 0.0)) {
    throw InputError("stub age_error_sd must be >= 0");
  }
}

namespace {

std::uint64_t sample_key(const Sample& s) {
  return derive_seed(s.seed, {fnv1a64(s.prompt_text)});
}

}  // namespace

Sample StubBackend::generate(std::string_view prompt_text, std::uint64_t seed) {
  parse_prompt(prompt_text);  // reject prompts the auditor could not read back
  Sample s{"", std::string(prompt_text), seed};
  char id[24];
  std::snprintf(id, sizeof(id), "stub-%016llx",
                static_cast<unsigned long long>(sample_key(s)));
  s.sample_id = id;
  return s;
}

Sex StubBackend::predict_sex(const Sample& sample) {
  const Sex target = parse_prompt(sample.prompt_text).demographics.sex;
  Rng rng(derive_seed(sample_key(sample), {1}));
  if (rng.bernoulli(behavior_.sex_accuracy)) return target;
  return target == Sex::male ? Sex::female : Sex::male;
}

Race StubBackend::predict_race(const Sample& sample) {
  const Race target = *parse_prompt(sample.prompt_text).demographics.race;
  Rng rng(derive_seed(sample_key(sample), {2}));
  if (rng.bernoulli(behavior_.race_accuracy)) return target;
  // one of the three other races, uniformly
  auto k = static_cast<std::size_t>(rng.below(3));
  if (k >= static_cast<std::size_t>(target)) ++k;
  return kAllRaces[k];
}

double StubBackend::predict_age(const Sample& sample) {
  const int target = parse_prompt(sample.prompt_text).demographics.age;
  Rng rng(derive_seed(sample_key(sample), {3}));
  return static_cast<double>(target) + behavior_.age_bias +
         behavior_.age_error_sd * rng.normal();
}

}  // namespace radaudit
