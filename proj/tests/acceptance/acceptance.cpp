// Acceptance suite: one PASS/FAIL line per criterion.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli_fixtures.hpp"
#include "oracles.hpp"
#include "radaudit/clf_eval.hpp"
#include "radaudit/core.hpp"
#include "radaudit/csv.hpp"
#include "radaudit/error.hpp"
#include "radaudit/fairness.hpp"
#include "radaudit/gen_quality.hpp"
#include "radaudit/image.hpp"
#include "radaudit/probe.hpp"
#include "radaudit/prompt.hpp"
#include "radaudit/qc.hpp"
#include "radaudit/random.hpp"
#include "radaudit/stats.hpp"

namespace fs = std::filesystem;
using namespace radaudit;

namespace {

// Collects failed checks for one criterion.
struct Check {
  std::vector<std::string> failures;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
      std::ostringstream os;
      os.precision(17);
      os << what << ": got " << got << ", want " << want << " +- " << tol;
      failures.push_back(os.str());
    }
  }
};

std::string str(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Random scores on a coarse grid so ties are common; both classes present.
void random_fixture(Rng& rng, std::size_t n, std::vector<double>& s, std::vector<int>& y) {
  s.resize(n);
  y.resize(n);
  const int grid = 2 + static_cast<int>(rng.below(40));
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.bernoulli(0.3) ? 1 : 0;
    s[i] = static_cast<double>(rng.below(grid)) / grid + 0.05 * y[i];
  }
  y[0] = 1;
  y[1] = 0;
}

Eigen::VectorXd vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
Eigen::VectorXi vec(const std::vector<int>& v) {
  return Eigen::Map<const Eigen::VectorXi>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// --- 1 ---
void auroc_oracle(Check& c) {
  Rng rng(101);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> s;
    std::vector<int> y;
    random_fixture(rng, 2 + rng.below(499), s, y);
    const double got = binary_auroc(vec(s), vec(y));
    const double want = oracle::auroc(s, y);
    c.expect(got == want, "fixture " + std::to_string(t) + ": " + str(got) + " vs " + str(want));
  }
}

// --- 2 ---
void auprc_oracle(Check& c) {
  Rng rng(202);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> s;
    std::vector<int> y;
    random_fixture(rng, 2 + rng.below(499), s, y);
    c.near(average_precision(vec(s), vec(y)), oracle::average_precision(s, y), 1e-12,
           "fixture " + std::to_string(t));
  }
}

// --- 3 ---
void fid_closed_form(Check& c) {
  struct Pair {
    double mu1, s1, mu2, s2;
  };
  const std::vector<Pair> pairs = {{0, 1, 1, 1}, {0, 1, 2, 1}, {0, 1, 0, 2}, {1, 2, -1, 0.5}};
  Rng rng(303);
  const Eigen::Index n = 100000;
  for (const auto& p : pairs) {
    Eigen::MatrixXd x(n, 1), y(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, 0) = rng.normal(p.mu1, p.s1);
      y(i, 0) = rng.normal(p.mu2, p.s2);
    }
    const double want = (p.mu1 - p.mu2) * (p.mu1 - p.mu2) + p.s1 * p.s1 + p.s2 * p.s2 -
                        2 * p.s1 * p.s2;
    const double got = fid(x, y).distance;
    c.near(got, want, 0.02 * want, "1-D pair mu=" + str(p.mu1) + "/" + str(p.mu2));
    c.expect(fid(x, x).distance < 1e-9, "fid(X,X) = " + str(fid(x, x).distance));
  }

  const int d = 8;
  Eigen::MatrixXd a(3000, d), b(3000, d);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < d; ++j) {
      a(i, j) = rng.normal(0.1 * j, 1.0 + 0.1 * j);
      b(i, j) = rng.normal(0.0, 1.5) + 0.3 * a(i, 0);
    }
  }
  c.expect(fid(a, a).distance < 1e-9, "fid(A,A) = " + str(fid(a, a).distance));
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = rng.normal();
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  const double base = fid(a, b).distance;
  const double rotated = fid((a * q).eval(), (b * q).eval()).distance;
  c.near(rotated, base, 1e-8, "rotation invariance");
}

// --- 4 ---
void ms_ssim_checks(Check& c) {
  const auto na = read_pgm(RADAUDIT_TEST_DATA "/noise_a.pgm");
  const auto nb = read_pgm(RADAUDIT_TEST_DATA "/noise_b.pgm");
  const auto sa = read_pgm(RADAUDIT_TEST_DATA "/scene_a.pgm");
  const auto sb = read_pgm(RADAUDIT_TEST_DATA "/scene_b.pgm");
  for (const auto* img : {&na, &nb, &sa, &sb}) {
    const double self = ms_ssim(*img, *img);
    c.expect(self == 1.0, "self-similarity " + str(self));
  }
  c.near(ms_ssim(na, nb), ms_ssim(nb, na), 1e-12, "noise symmetry");
  c.near(ms_ssim(sa, sb), ms_ssim(sb, sa), 1e-12, "scene symmetry");
  const double noise = ms_ssim(na, nb);
  c.expect(noise < 0.25, "independent noise scores " + str(noise));
}

std::vector<PromptSpec> campaign_prompts(int impressions) {
  std::vector<PromptSpec> out;
  for (int i = 0; i < impressions; ++i) {
    auto v = expand_demographics("imp" + std::to_string(i), "Clear lungs.", 25 + i % 60, 11);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

void campaign_invariants(Check& c, const CampaignResult& r, const QcPolicy& policy,
                         std::size_t prompts) {
  c.expect(r.ledger.entries.size() == prompts, "ledger size");
  std::size_t accepted = 0;
  bool ok = true;
  for (std::size_t i = 0; i < r.ledger.entries.size(); ++i) {
    const auto& e = r.ledger.entries[i];
    ok = ok && e.prompt_index == i;
    ok = ok && e.attempts.size() <= static_cast<std::size_t>(policy.max_attempts());
    if (e.status == TerminalStatus::accepted) {
      ++accepted;
      ok = ok && !e.attempts.empty() && e.attempts.back().verdict.passed();
      for (std::size_t k = 0; k + 1 < e.attempts.size(); ++k) {
        ok = ok && !e.attempts[k].verdict.passed();
      }
    } else if (e.status == TerminalStatus::discarded) {
      ok = ok && e.attempts.size() == static_cast<std::size_t>(policy.max_attempts());
      for (const auto& a : e.attempts) ok = ok && !a.verdict.passed();
    }
  }
  c.expect(ok, "attempt bound / terminal status invariant");
  c.expect(accepted == r.accepted.size(), "accepted set matches ledger");
  const auto s = ledger_summary(r.ledger);
  c.expect(s.accepted + s.discarded + s.backend_failed == s.total && s.total == prompts,
           "conservation");
}

// --- 5 ---
void campaign_analytics(Check& c) {
  const auto prompts = campaign_prompts(1250);
  c.expect(prompts.size() == 10000, "prompt count " + std::to_string(prompts.size()));
  const QcPolicy policy;
  StubBackend coin(StubBehavior{1.0, 0.5});
  const auto r = run_campaign(prompts, coin, coin, policy, 42);
  campaign_invariants(c, r, policy, prompts.size());
  const auto s = ledger_summary(r.ledger);
  const double p = 1.0 - std::pow(0.5, policy.max_attempts());
  const double rate = static_cast<double>(s.accepted) / static_cast<double>(s.total);
  const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(s.total));
  c.near(rate, p, 3 * sigma, "acceptance rate");
  c.expect(s.headline.race == s.discarded && s.headline.age == 0 && s.headline.sex == 0,
           "discards attributed to race only");

  StubBackend never(StubBehavior{1.0, 0.0});
  const std::vector<PromptSpec> few(prompts.begin(), prompts.begin() + 400);
  const auto z = run_campaign(few, never, never, policy, 43);
  campaign_invariants(c, z, policy, few.size());
  const auto zs = ledger_summary(z.ledger);
  c.expect(zs.discarded == few.size() && zs.headline.race == few.size(),
           "always-failing race criterion discards everything");
}

// --- 6 ---
void campaign_accounting(Check& c) {
  struct Group {
    Race race;
    std::size_t accepted, reference;
    double reported, unit;
  };
  const std::vector<Group> groups = {{Race::asian, 97903, 2452, 40, 1},
                                     {Race::hispanic, 155870, 5521, 28, 1},
                                     {Race::black, 155653, 13685, 11, 1},
                                     {Race::white, 155728, 45102, 3.5, 0.1}};
  const std::size_t total = 623712;
  const std::size_t discarded = 58558;

  CampaignLedger ledger;
  ledger.entries.reserve(total);
  std::vector<AcceptedSample> accepted;
  std::size_t idx = 0;
  for (const auto& g : groups) {
    for (std::size_t k = 0; k < g.accepted; ++k, ++idx) {
      LedgerEntry e;
      e.prompt_index = idx;
      e.target = Demographics{Sex::female, 50, g.race};
      e.attempts.resize(1);
      e.attempts[0].verdict = Verdict{true, true, true};
      e.status = TerminalStatus::accepted;
      accepted.push_back(AcceptedSample{idx, {}, e.target, {}});
      ledger.entries.push_back(std::move(e));
    }
  }
  for (std::size_t k = 0; k < discarded; ++k, ++idx) {
    LedgerEntry e;
    e.prompt_index = idx;
    e.target = Demographics{Sex::male, 50, Race::white};
    e.attempts.resize(static_cast<std::size_t>(ledger.policy.max_attempts()));
    for (auto& a : e.attempts) a.verdict = Verdict{true, false, true};
    ledger.entries.push_back(std::move(e));
  }
  c.expect(accepted.size() + discarded == total, "published counts add up");

  const auto s = ledger_summary(ledger);
  c.expect(s.total == total && s.discarded == discarded, "summary totals");
  c.near(100.0 * s.discard_rate, 9.39, 0.005, "discard rate (2 dp)");
  c.near(100.0 * s.discard_rate, 9.4, 0.05, "discard rate vs reported");

  std::vector<StudyRecord> ref;
  LabelSchema schema({kNoFinding});
  for (const auto& g : groups) {
    for (std::size_t k = 0; k < g.reference; ++k) {
      StudyRecord rec;
      rec.study_id = "ref" + std::to_string(ref.size());
      rec.demographics = Demographics{Sex::female, 50, g.race};
      rec.labels = {Label::missing};
      ref.push_back(std::move(rec));
    }
  }
  const Cohort reference(schema, std::move(ref));
  const auto b = balance_report(accepted, reference);
  for (const auto& g : groups) {
    const std::string name(to_string(g.race));
    const GroupBalance* row = nullptr;
    for (const auto& r : b.by_race) {
      if (r.group == name) row = &r;
    }
    c.expect(row && row->amplification, name + " amplification present");
    if (!row || !row->amplification) continue;
    c.expect(row->accepted == g.accepted && row->reference == g.reference, name + " counts");
    c.near(*row->amplification,
           static_cast<double>(g.accepted) / static_cast<double>(g.reference), 1e-12,
           name + " ratio");
    c.near(*row->amplification, g.reported, 0.5 * g.unit, name + " vs reported");
  }
}

// --- 7 ---
void checkpoint_selection(Check& c) {
  std::vector<std::string> refs;
  const auto rows = parse_checkpoint_table(read_file(RADAUDIT_TEST_DATA "/checkpoints.csv"),
                                           "checkpoints.csv", &refs);
  const auto chosen = select_checkpoint(rows);
  c.expect(parse_step_count(chosen) == 10000, "selected '" + chosen + "'");
  c.expect(refs.size() == 2, "reference rows kept out of the candidates");
}

// --- 8 ---
void statistical_validity(Check& c) {
  const int trials = 1000;
  const double alpha = 0.05;

  // Two models drawn independently from the same score distribution.
  auto null_pair = [](Rng& rng, int n, std::vector<double>& a, std::vector<double>& b,
                      std::vector<int>& y) {
    a.resize(n);
    b.resize(n);
    y.resize(n);
    for (int i = 0; i < n; ++i) {
      y[i] = i % 2;
      a[i] = rng.normal(0.6 * y[i], 1.0);
      b[i] = rng.normal(0.6 * y[i], 1.0);
    }
  };

  Rng rng(808);
  std::vector<double> a, b;
  std::vector<int> y;
  int delong_rejects = 0;
  for (int t = 0; t < trials; ++t) {
    null_pair(rng, 200, a, b, y);
    if (delong_test(vec(a), vec(b), vec(y)).p <= alpha) ++delong_rejects;
  }
  const double delong_rate = static_cast<double>(delong_rejects) / trials;
  c.expect(delong_rate >= 0.03 && delong_rate <= 0.07, "DeLong type-I " + str(delong_rate));

  int perm_rejects = 0;
  for (int t = 0; t < trials; ++t) {
    null_pair(rng, 60, a, b, y);
    ResamplePlan plan;
    plan.n_resamples = 199;
    plan.seed = derive_seed(808, {static_cast<std::uint64_t>(t)});
    if (permutation_test_auprc(vec(a), vec(b), vec(y), plan).p <= alpha) ++perm_rejects;
  }
  const double perm_rate = static_cast<double>(perm_rejects) / trials;
  c.expect(perm_rate >= 0.03 && perm_rate <= 0.07, "permutation type-I " + str(perm_rate));
  std::cout << "  type-I error: DeLong " << delong_rate << ", permutation " << perm_rate << "\n";

  for (int n = 4; n <= 12; ++n) {
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> sa(n), sb(n);
      std::vector<int> yy(n);
      for (int i = 0; i < n; ++i) {
        yy[i] = i < 4 ? i % 2 : (rng.bernoulli(0.5) ? 1 : 0);
        sa[i] = static_cast<double>(rng.below(6)) / 5;
        sb[i] = static_cast<double>(rng.below(6)) / 5;
      }
      const auto got = delong_test(vec(sa), vec(sb), vec(yy));
      const auto want = oracle::delong(sa, sb, yy);
      const std::string tag = "DeLong n=" + std::to_string(n);
      c.near(got.var_a, want.var_a, 1e-12, tag + " var_a");
      c.near(got.var_b, want.var_b, 1e-12, tag + " var_b");
      c.near(got.covariance, want.cov, 1e-12, tag + " cov");
    }
  }

  std::vector<double> ea(8), eb(8);
  std::vector<int> ey = {1, 0, 1, 0, 0, 1, 0, 1};
  for (int i = 0; i < 8; ++i) {
    ea[i] = rng.uniform() + 0.2 * ey[i];
    eb[i] = rng.uniform();
  }
  ResamplePlan plan;
  const auto exact = permutation_test_auprc(vec(ea), vec(eb), vec(ey), plan, 8);
  c.expect(exact.exact && exact.assignments == 256, "2^8 enumeration used");
  c.near(exact.p, oracle::permutation_exact_p(ea, eb, ey), 1e-12, "exact p vs enumeration");
  plan.n_resamples = 20000;
  plan.seed = 5;
  const auto mc = permutation_test_auprc(vec(ea), vec(eb), vec(ey), plan, 0);
  c.expect(!mc.exact, "Monte Carlo path used");
  const double r = plan.n_resamples;
  c.near(mc.p, exact.p, 3 * std::sqrt(exact.p * (1 - exact.p) / r) + 1 / (r + 1),
         "Monte Carlo p vs exact");
}

// --- 9 ---
SubgroupTable table_with_gap(Axis axis, double low, double gap) {
  SubgroupTable t;
  for (int rank = 0; rank < 8; ++rank) {
    SubgroupValue v;
    v.key.axis = axis;
    v.key.sex = rank % 2 ? Sex::female : Sex::male;
    if (axis == Axis::sex_race) {
      v.key.race = kAllRaces[static_cast<std::size_t>(rank / 2)];
    } else {
      v.key.age_bin = kAllAgeBins[static_cast<std::size_t>(rank / 2 + 1)];
    }
    v.size = 100;
    // Endpoints at ranks 2 and 5; the rest strictly between.
    if (rank == 2) v.value = low;
    else if (rank == 5) v.value = low + gap;
    else v.value = low + gap * (0.1 + 0.1 * rank);
    t.push_back(v);
  }
  SubgroupValue undefined = t[7];
  undefined.value.reset();
  t[7] = undefined;
  return t;
}

AgeBin reference_bin(int age) {
  if (age < 18) return AgeBin::under18;
  if (age < 40) return AgeBin::from18to40;
  if (age < 60) return AgeBin::from40to60;
  if (age < 80) return AgeBin::from60to80;
  return AgeBin::from80;
}

void fairness_arithmetic(Check& c) {
  struct Published {
    std::string what;
    Axis axis;
    double gap;
  };
  const std::vector<Published> gaps = {
      {"MIMIC sex-race baseline", Axis::sex_race, 0.149},
      {"MIMIC sex-race synthetic", Axis::sex_race, 0.149},
      {"CheXpert sex-race baseline", Axis::sex_race, 0.051},
      {"CheXpert sex-race synthetic", Axis::sex_race, 0.038},
      {"MIMIC sex-age baseline", Axis::sex_age, 0.110},
      {"CheXpert sex-age baseline", Axis::sex_age, 0.114},
      {"NIH sex-age baseline", Axis::sex_age, 0.210},
      {"PadChest sex-age baseline", Axis::sex_age, 0.295},
  };
  for (const auto& p : gaps) {
    const auto t = table_with_gap(p.axis, 0.70, p.gap);
    const auto g = fairness_gap(t);
    c.near(g.gap, p.gap, 5e-4, p.what);
    c.expect(g.best == t[5].key && g.worst == t[2].key && g.undefined.size() == 1,
             p.what + " endpoints");
    const auto u = underdiagnosis_gap(t);
    c.near(u.gap, p.gap, 5e-4, p.what + " (underdiagnosis)");
    c.expect(u.best == t[2].key, p.what + " lowest rate is best");
  }
  SubgroupTable two = table_with_gap(Axis::sex_race, 0.8, 0.149);
  two.resize(2);
  two[0].value = 0.651;
  two[1].value = 0.800;
  c.near(fairness_gap(two).gap, 0.149, 1e-12, "two-entry table");

  Rng rng(909);
  LabelSchema schema({kNoFinding});
  for (int t = 0; t < 1000; ++t) {
    std::vector<StudyRecord> recs(300);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      auto& r = recs[i];
      r.study_id = "s" + std::to_string(i);
      r.labels = {Label::negative};
      if (rng.bernoulli(0.03)) continue;
      Demographics d;
      d.sex = rng.bernoulli(0.5) ? Sex::male : Sex::female;
      d.age = static_cast<int>(rng.below(100));
      if (!rng.bernoulli(0.05)) d.race = kAllRaces[rng.below(4)];
      r.demographics = d;
    }
    const Cohort cohort(schema, std::move(recs));
    for (Axis axis : {Axis::sex_race, Axis::sex_age}) {
      const auto p = partition_subgroups(cohort, axis);
      std::vector<int> seen(cohort.size(), 0);
      std::set<int> ranks;
      bool bins_ok = true;
      bool members_ok = true;
      for (const auto& g : p.groups) {
        ranks.insert(g.key.rank());
        for (std::size_t row : g.rows) {
          ++seen[row];
          const auto& d = cohort[row].demographics;
          members_ok = members_ok && d && d->sex == g.key.sex;
          if (axis == Axis::sex_age) {
            bins_ok = bins_ok && d && g.key.age_bin == reference_bin(d->age) &&
                      reference_bin(d->age) != AgeBin::under18;
          } else {
            members_ok = members_ok && d && d->race == g.key.race;
          }
        }
      }
      for (const auto* ex : {&p.exclusions.missing_demographics, &p.exclusions.missing_race,
                             &p.exclusions.under_18}) {
        for (std::size_t row : *ex) ++seen[row];
      }
      const std::string tag = "cohort " + std::to_string(t) + " " + std::string(to_string(axis));
      bool cover = true;
      for (int s : seen) cover = cover && s == 1;
      c.expect(cover, tag + ": not a disjoint cover");
      c.expect(p.groups.size() == 8 && ranks.size() == 8, tag + ": group count");
      c.expect(bins_ok, tag + ": age bin boundaries");
      c.expect(members_ok, tag + ": group membership");
      if (c.failures.size() > 20) return;
    }
  }
}

// --- 10 ---
Dataset toy_dataset(const std::string& file, const Cohort& labels) {
  const auto emb = ingest_embeddings(std::string(RADAUDIT_TEST_DATA "/probe_toy/") + file);
  Dataset d;
  d.features = emb.values;
  d.labels.resize(emb.rows(), static_cast<Eigen::Index>(labels.schema().size()));
  for (Eigen::Index i = 0; i < emb.rows(); ++i) {
    const auto idx = labels.find(emb.row_ids[static_cast<std::size_t>(i)]);
    if (!idx) throw InputError(file + ": unlabeled row");
    const auto& lv = labels[*idx].labels;
    for (std::size_t j = 0; j < lv.size(); ++j) {
      d.labels(i, static_cast<Eigen::Index>(j)) = static_cast<int>(lv[j]);
    }
  }
  return d;
}

Dataset linear_data(Rng& rng, int n, int d, double noise) {
  Dataset ds;
  ds.features.resize(n, d);
  ds.labels.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) ds.features(i, j) = rng.normal();
    ds.labels(i, 0) = ds.features(i, 0) + noise * rng.normal() > 0 ? 1 : 0;
    ds.labels(i, 1) = ds.features(i, 1) - ds.features(i, 2) + noise * rng.normal() > 0 ? 1 : 0;
  }
  return ds;
}

void probe_protocol(Check& c) {
  Rng rng(1010);
  for (int patience : {3, 7, 15}) {
    ProbeData data;
    data.real = linear_data(rng, 100, 3, 0.0);
    data.val = *data.real;
    data.val.labels = (1 - data.val.labels.array()).matrix();
    ProbeConfig cfg;
    cfg.lr_initial = 0.5;
    cfg.patience = patience;
    const auto s = train_probe(data, cfg).stages.at(0);
    c.expect(s.early_stopped && s.epochs_run == s.best_loss_epoch + patience,
             "early stop at best + " + std::to_string(patience) + ": ran " +
                 std::to_string(s.epochs_run) + ", best " + std::to_string(s.best_loss_epoch));
  }

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ProbeData data;
    data.real = linear_data(rng, 120, 3, 0.5);
    data.val = linear_data(rng, 60, 3, 0.5);
    data.synth = Dataset{Eigen::MatrixXd(0, 3), Eigen::MatrixXi(0, 2)};
    ProbeConfig cfg;
    cfg.lr_initial = 0.3;
    cfg.max_epochs = 40;
    cfg.seed = seed;
    cfg.batch_size = seed % 2 ? 16 : 0;
    const auto a = train_probe(data, cfg);
    cfg.strategy = Strategy::synth_real_mix;
    const auto b = train_probe(data, cfg);
    bool same = a.model.weights == b.model.weights && a.model.bias == b.model.bias &&
                a.log.size() == b.log.size();
    for (std::size_t k = 0; same && k < a.log.size(); ++k) {
      same = a.log[k].train_loss == b.log[k].train_loss && a.log[k].val_loss == b.log[k].val_loss;
    }
    c.expect(same, "empty synth mix differs from real only, seed " + std::to_string(seed));
  }

  const auto labels = ingest_table(RADAUDIT_TEST_DATA "/probe_toy/labels.csv", TableKind::labels);
  ProbeData data;
  data.real = toy_dataset("real_train.bin", labels);
  data.synth = toy_dataset("synth.bin", labels);
  data.val = toy_dataset("val.bin", labels);
  const Dataset test = toy_dataset("test.bin", labels);
  ProbeConfig cfg;
  cfg.lr_initial = 0.5;
  cfg.lr_finetune = 0.05;
  cfg.max_epochs = 100;
  cfg.patience = 20;
  const auto& names = labels.schema().names();
  cfg.strategy = Strategy::real_only;
  const double real_only =
      evaluate_probe(train_probe(data, cfg).model, test, labels.schema(), names).auroc.value;
  cfg.strategy = Strategy::synth_pretrain_finetune;
  const double pretrained =
      evaluate_probe(train_probe(data, cfg).model, test, labels.schema(), names).auroc.value;
  std::cout << "  toy held-out macro AUROC: real only " << real_only
            << ", synthetic pretraining " << pretrained << "\n";
  c.expect(pretrained >= real_only, "synthetic pretraining below real only");
}

// --- 11 ---
void desk_scale_boundary(Check& c) {
  const fs::path readme = fs::path(RADAUDIT_SOURCE_DIR) / "README.md";
  c.expect(fs::exists(readme), "README.md missing");
  if (!fs::exists(readme)) return;
  const std::string text = read_file(readme);
  c.expect(text.find("0.798") != std::string::npos, "README lacks the MIMIC AUROC boundary");
  c.expect(text.find("19.3%") != std::string::npos, "README lacks the underdiagnosis boundary");
}

// --- 12 ---
std::string quote(const std::string& s) {
  std::string out = "'";
  for (char ch : s) {
    if (ch == '\'') out += "'\\''";
    else out += ch;
  }
  return out + "'";
}

void cli_determinism(Check& c) {
  const fs::path root = fs::temp_directory_path() / "radaudit_acceptance";
  fs::remove_all(root);
  const fs::path in = root / "in";
  cli_fixtures::write_all(in);
  const auto invocations = cli_fixtures::all_invocations(in, ".");
  for (int threads : {1, 4}) {
    const fs::path dir = root / ("threads" + std::to_string(threads));
    fs::create_directories(dir);
    for (const auto& inv : invocations) {
      std::string cmd = "cd " + quote(dir.string()) + " && " + quote(RADAUDIT_CLI) +
                        " --csv --seed 17 --threads " + std::to_string(threads);
      for (const auto& a : inv.args) cmd += " " + quote(a);
      cmd += " >/dev/null 2>&1";
      const int status = std::system(cmd.c_str());
      c.expect(WIFEXITED(status) && WEXITSTATUS(status) == 0,
               inv.name + " failed at " + std::to_string(threads) + " threads");
    }
  }
  std::size_t compared = 0;
  for (const auto& inv : invocations) {
    for (const auto& f : inv.outputs) {
      const fs::path a = root / "threads1" / f;
      const fs::path b = root / "threads4" / f;
      if (!fs::exists(a) || !fs::exists(b)) {
        c.expect(false, inv.name + ": missing " + f);
        continue;
      }
      c.expect(read_file(a) == read_file(b), inv.name + ": " + f + " differs");
      ++compared;
    }
  }
  std::cout << "  compared " << compared << " output files\n";
  fs::remove_all(root);
}

struct AcceptanceCriterion {
  int id;
  std::string title;
  double limit_seconds;  // 0: no limit
  std::function<void(Check&)> body;
};

}  // namespace

int main() {
  const std::vector<AcceptanceCriterion> criteria = {
      {1, "AUROC matches pairwise oracle", 10, auroc_oracle},
      {2, "AUPRC matches cut-point oracle", 10, auprc_oracle},
      {3, "FID closed form and invariances", 30, fid_closed_form},
      {4, "MS-SSIM identity, symmetry, noise floor", 30, ms_ssim_checks},
      {5, "QC campaign acceptance and invariants", 20, campaign_analytics},
      {6, "published campaign accounting", 1, campaign_accounting},
      {7, "checkpoint selection", 1, checkpoint_selection},
      {8, "statistical test validity", 300, statistical_validity},
      {9, "fairness gaps and partitions", 10, fairness_arithmetic},
      {10, "probe training protocol", 60, probe_protocol},
      {11, "desk-scale boundary documented", 0, desk_scale_boundary},
      {12, "CLI outputs independent of thread count", 0, cli_determinism},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      cr.body(check);
    } catch (const std::exception& e) {
      check.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cr.limit_seconds > 0 && secs > cr.limit_seconds) {
      check.failures.push_back("took " + str(secs) + " s, limit " + str(cr.limit_seconds) + " s");
    }
    const bool ok = check.failures.empty();
    if (!ok) ++failed;
    std::printf("%s criterion %d: %s (%.2fs)\n", ok ? "PASS" : "FAIL", cr.id, cr.title.c_str(),
                secs);
    for (std::size_t i = 0; i < check.failures.size() && i < 10; ++i) {
      std::printf("  - %s\n", check.failures[i].c_str());
    }
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
