#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "radaudit/core.hpp"
#include "radaudit/prompt.hpp"

namespace radaudit {

// Handle to one generated image. The pixels themselves never pass through
// this library; auditors resolve the handle.
struct Sample {
  std::string sample_id;
  std::string prompt_text;
  std::uint64_t seed = 0;
};

struct GeneratorConfig {
  double guidance_scale = 4.0;
  int inference_steps = 75;
};

// Must be deterministic in (prompt_text, seed) and safe to call from several
// threads at once.
class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual Sample generate(std::string_view prompt_text, std::uint64_t seed) = 0;
  virtual GeneratorConfig config() const { return {}; }
};

// Demographic auditors (sex / race / age classifiers). Thread-safe.
class AuditorBackend {
 public:
  virtual ~AuditorBackend() = default;
  virtual Sex predict_sex(const Sample& sample) = 0;
  virtual Race predict_race(const Sample& sample) = 0;
  virtual double predict_age(const Sample& sample) = 0;
};

struct QcPolicy {
  double age_tolerance = 7.0;  // years
  int max_regenerations = 3;   // retries after the first attempt

  int max_attempts() const { return 1 + max_regenerations; }
  void validate() const;
};

struct AuditReadout {
  Sex sex = Sex::male;
  Race race = Race::white;
  double age = 0.0;
};

struct Verdict {
  bool sex = false;
  bool race = false;
  bool age = false;

  bool passed() const { return sex && race && age; }
};

// Pure judgement of auditor output against the prompt's targets.
Verdict judge(const AuditReadout& readout, const Demographics& target,
              const QcPolicy& policy);

// Queries the auditor and judges. Auditor failures are rethrown as
// BackendError naming the sample.
Verdict audit_sample(const Sample& sample, const Demographics& target,
                     const QcPolicy& policy, AuditorBackend& auditor,
                     AuditReadout* readout = nullptr);

enum class TerminalStatus { accepted, discarded, backend_failure };
std::string_view to_string(TerminalStatus status);

struct Attempt {
  std::uint64_t seed = 0;
  std::string sample_id;
  AuditReadout readout;
  Verdict verdict;
};

struct LedgerEntry {
  std::size_t prompt_index = 0;
  std::string prompt_text;
  Demographics target;
  std::string source_impression_id;
  std::vector<Attempt> attempts;
  TerminalStatus status = TerminalStatus::discarded;
  std::string error;  // backend failure message
};

struct CampaignLedger {
  std::uint64_t seed = 0;
  QcPolicy policy;
  std::vector<LedgerEntry> entries;  // ordered by prompt index
};

struct AcceptedSample {
  std::size_t prompt_index = 0;
  std::string sample_id;
  Demographics target;
  std::string source_impression_id;
};

struct CampaignResult {
  CampaignLedger ledger;
  std::vector<AcceptedSample> accepted;  // ordered by prompt index
};

// Seed of attempt `attempt_index` (0-based) for prompt `prompt_index`.
std::uint64_t attempt_seed(std::uint64_t campaign_seed, std::size_t prompt_index,
                           std::size_t attempt_index);

// Generates and audits each prompt until an attempt passes every criterion or
// policy.max_attempts() attempts are spent. Prompts run on the worker pool;
// the ledger is ordered by prompt index whatever the schedule. A backend error
// ends only its own prompt, with status backend_failure.
CampaignResult run_campaign(const std::vector<PromptSpec>& prompts,
                            GeneratorBackend& generator, AuditorBackend& auditor,
                            const QcPolicy& policy, std::uint64_t seed);

enum class Criterion { race, age, sex };
inline constexpr std::array<Criterion, 3> kAllCriteria = {
    Criterion::race, Criterion::age, Criterion::sex};
std::string_view to_string(Criterion c);

struct CriterionCounts {
  std::size_t race = 0;
  std::size_t age = 0;
  std::size_t sex = 0;

  std::size_t& operator[](Criterion c);
  std::size_t operator[](Criterion c) const;
};

struct LedgerSummary {
  std::size_t total = 0;
  std::size_t accepted = 0;
  std::size_t discarded = 0;
  std::size_t backend_failed = 0;
  double discard_rate = 0.0;  // discarded / total
  // Each discarded prompt counted once per criterion failing on its final
  // attempt.
  CriterionCounts detailed;
  // Each discarded prompt counted once, under the first failing criterion in
  // the order race > age > sex.
  CriterionCounts headline;

  double headline_fraction(Criterion c) const;  // of all prompts
};

LedgerSummary ledger_summary(const CampaignLedger& ledger);

struct GroupBalance {
  std::string group;
  std::size_t accepted = 0;
  std::size_t reference = 0;
  std::optional<double> amplification;  // undefined when reference == 0
};

struct LabelPrevalence {
  std::string label;
  double accepted = 0.0;                 // fraction of the accepted set
  std::optional<double> reference;       // fraction of the reference cohort
};

struct BalanceReport {
  std::size_t accepted_total = 0;
  std::size_t reference_total = 0;
  std::vector<GroupBalance> by_race;
  std::vector<GroupBalance> by_sex;
  std::vector<GroupBalance> by_age_bin;
  std::vector<LabelPrevalence> prevalence;
};

struct GroupTallies {
  std::array<std::size_t, 4> race{};  // indexed like kAllRaces
  std::array<std::size_t, 2> sex{};
  std::array<std::size_t, 5> age_bin{};
  std::size_t total = 0;

  void add(const Demographics& d);
};

// Amplification per group = accepted / reference.
BalanceReport compute_balance(const GroupTallies& accepted,
                              const GroupTallies& reference);

// Tallies the accepted set against the reference cohort. With `source_labels`
// (rows keyed by impression id), adds per-label prevalence of the accepted
// set; missing labels count as not positive.
BalanceReport balance_report(const std::vector<AcceptedSample>& accepted,
                             const Cohort& reference,
                             const Cohort* source_labels = nullptr);

std::string ledger_to_jsonl(const CampaignLedger& ledger);

// Deterministic stand-in for both backends. The auditor reads the target
// demographics back out of the prompt text and reports them correctly with
// the configured probabilities; every draw is derived from the sample's
// (prompt, seed), so repeated calls agree.
struct StubBehavior {
  double sex_accuracy = 1.0;
  double race_accuracy = 1.0;
  double age_bias = 0.0;
  double age_error_sd = 0.0;
};

class StubBackend : public GeneratorBackend, public AuditorBackend {
 public:
  explicit StubBackend(StubBehavior behavior = {}, GeneratorConfig config = {});

  Sample generate(std::string_view prompt_text, std::uint64_t seed) override;
  GeneratorConfig config() const override { return config_; }
  Sex predict_sex(const Sample& sample) override;
  Race predict_race(const Sample& sample) override;
  double predict_age(const Sample& sample) override;

 private:
  StubBehavior behavior_;
  GeneratorConfig config_;
};

}  // namespace radaudit
