// radaudit: command-line front end.
//
// Exit codes: 0 success, 1 runtime failure (backend, divergence), 2 invalid
// input or usage, 3 undefined metric (or any undefined-metric warning under
// --strict).

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "radaudit/clf_eval.hpp"
#include "radaudit/core.hpp"
#include "radaudit/csv.hpp"
#include "radaudit/error.hpp"
#include "radaudit/external_backend.hpp"
#include "radaudit/fairness.hpp"
#include "radaudit/gen_quality.hpp"
#include "radaudit/image.hpp"
#include "radaudit/parallel.hpp"
#include "radaudit/probe.hpp"
#include "radaudit/prompt.hpp"
#include "radaudit/qc.hpp"
#include "radaudit/random.hpp"
#include "radaudit/report.hpp"
#include "radaudit/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace radaudit;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  int threads = -1;
  bool strict = false;
  bool csv = false;
  std::string config;
};

// Report under construction plus the count of undefined-metric warnings.
struct Run {
  AuditReport report;
  std::size_t undefined = 0;

  void warn(std::string message) { report.warnings.push_back(std::move(message)); }
  void warn_undefined(std::string message) {
    ++undefined;
    warn(std::move(message));
  }
  void input(const std::string& path) {
    auto d = digest_file(path);
    d.path = path;
    report.inputs.push_back(std::move(d));
  }
};

json value_or_null(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Options are echoed by name so a run can be replayed from its report. Output
// paths and the worker count do not change results and are left out.
void echo_options(const CLI::App& app, json& into) {
  static const std::set<std::string> skip = {"help", "version", "threads", "config", "out",
                                             "thresholds-out", "report"};
  for (const CLI::Option* o : app.get_options()) {
    const std::string& name = o->get_single_name();
    if (name.empty() || skip.count(name)) continue;
    if (o->get_type_size_max() == 0) {
      into[name] = o->count() > 0;
    } else if (o->count() > 0) {
      const auto r = o->reduced_results();
      into[name] = r.size() == 1 ? json(r.front()) : json(r);
    } else if (!o->get_default_str().empty()) {
      into[name] = o->get_default_str();
    }
  }
}

fs::path csv_companion(const fs::path& json_path) {
  fs::path p = json_path;
  p.replace_extension(".csv");
  return p;
}

void finish(Run& run, const Globals& g, const std::string& out) {
  if (g.strict && run.undefined > 0) {
    throw UndefinedMetricError("--strict: " + std::to_string(run.undefined) +
                               " undefined metric warning(s); first: " +
                               run.report.warnings.front());
  }
  write_file_atomic(out, emit_report(run.report));
  if (g.csv) write_file_atomic(csv_companion(out), flatten_report_csv(run.report));
}

ResamplePlan plan_for(int resamples, std::uint64_t seed) {
  ResamplePlan p;
  p.n_resamples = resamples;
  p.seed = seed;
  if (resamples > 0) p.validate();
  return p;
}

std::optional<BootstrapResult> maybe_ci(const IndexStatistic& stat, std::size_t n,
                                        const ResamplePlan& plan, Run& run,
                                        const std::string& what) {
  if (plan.n_resamples <= 0) return std::nullopt;
  try {
    auto r = bootstrap_ci(stat, n, plan);
    if (r.undefined_resamples > 0) {
      run.warn(what + ": " + std::to_string(r.undefined_resamples) +
               " bootstrap resamples undefined and dropped");
    }
    return r;
  } catch (const UndefinedMetricError& e) {
    run.warn_undefined(what + " confidence interval undefined: " + e.what());
    return std::nullopt;
  }
}

void put_ci(json& j, const std::optional<BootstrapResult>& ci) {
  j["ci_lo"] = ci ? json(ci->lo) : json(nullptr);
  j["ci_hi"] = ci ? json(ci->hi) : json(nullptr);
}

IngestOptions ingest_options(const std::string& uncertain) {
  IngestOptions o;
  if (uncertain == "positive") o.uncertain_as = Label::positive;
  else if (uncertain == "negative") o.uncertain_as = Label::negative;
  else if (uncertain == "missing") o.uncertain_as = Label::missing;
  else if (uncertain != "reject") throw InputError("--uncertain must be reject|positive|negative|missing");
  return o;
}

// "all", "common8" or a comma-separated list of label names.
std::vector<std::string> label_subset(const LabelSchema& schema, const std::string& spec) {
  std::vector<std::string> names;
  if (spec == "all") {
    names = schema.names();
  } else if (spec == "common8") {
    names = LabelSchema::common8().names();
  } else {
    std::size_t start = 0;
    while (start <= spec.size()) {
      const auto comma = spec.find(',', start);
      const auto token = spec.substr(start, comma == std::string::npos ? std::string::npos
                                                                       : comma - start);
      if (!token.empty()) names.push_back(token);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  if (names.empty()) throw InputError("empty label subset '" + spec + "'");
  const auto idx = resolve_subset(schema, names);
  std::vector<std::string> canonical;
  for (auto j : idx) canonical.push_back(schema.name(j));
  return canonical;
}

std::vector<Eigen::Index> eigen_rows(std::span<const std::size_t> rows) {
  return {rows.begin(), rows.end()};
}

Cohort scored_cohort(const Cohort& records, const std::string& pred_path, Run& run) {
  run.input(pred_path);
  const auto preds = ingest_table(pred_path, TableKind::predictions);
  auto cohort = scored_subset(build_cohort(records, preds));
  if (cohort.empty()) throw InputError(pred_path + ": no predictions match labeled studies");
  if (cohort.size() < records.size()) {
    run.warn(std::to_string(records.size() - cohort.size()) +
             " labeled studies have no predictions in " + pred_path + " and were skipped");
  }
  return cohort;
}

json subgroup_key_json(const SubgroupKey& k) {
  json j;
  j["group"] = k.label();
  j["sex"] = std::string(to_string(k.sex));
  if (k.race) j["race"] = std::string(to_string(*k.race));
  if (k.age_bin) j["age_bin"] = std::string(to_string(*k.age_bin));
  return j;
}

json gap_json(const GapResult& g) {
  json j;
  j["gap"] = g.gap;
  j["best"] = g.best.label();
  j["worst"] = g.worst.label();
  json undefined = json::array();
  for (const auto& k : g.undefined) undefined.push_back(k.label());
  j["undefined_groups"] = undefined;
  return j;
}

// ---------------------------------------------------------------------------
// prompts

struct PromptsArgs {
  std::string impressions, out, report;
  std::size_t token_limit = 77;
  std::size_t summary_chars = 200;
};

int cmd_prompts(const PromptsArgs& a, const Globals& g, const CLI::App& app, Run& run) {
  run.report.command = "prompts";
  run.input(a.impressions);
  const auto table = parse_csv(read_file(a.impressions), a.impressions);
  if (table.header != std::vector<std::string>{"impression_id", "age", "impression"}) {
    throw InputError(a.impressions + ": header must be impression_id,age,impression");
  }
  TokenBudget budget;
  budget.limit = a.token_limit;
  const auto summarizer = truncating_summarizer(a.summary_chars);
  std::vector<PromptSpec> prompts;
  std::size_t summarized = 0;
  std::size_t skipped = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = a.impressions + ":" + std::to_string(table.line_numbers[r]);
    if (row.size() != 3) throw InputError(where + ": expected 3 fields");
    long long age = 0;
    if (!parse_int(row[1], age) || age < 0 || age > kMaxAge) {
      throw InputError(where + ": column 2 (age): invalid age '" + row[1] + "'");
    }
    auto variants = expand_demographics(row[0], row[2], static_cast<int>(age), g.seed);
    try {
      bool changed = false;
      for (auto& v : variants) {
        auto text = enforce_token_budget(v.prompt_text, budget, summarizer);
        changed = changed || text != v.prompt_text;
        v.prompt_text = std::move(text);
      }
      summarized += changed;
      prompts.insert(prompts.end(), variants.begin(), variants.end());
    } catch (const OverBudgetError& e) {
      ++skipped;
      run.warn("impression " + row[0] + " skipped: " + e.what());
    }
  }
  write_file_atomic(a.out, prompts_to_jsonl(prompts));
  if (!a.report.empty()) {
    echo_options(*app.get_parent(), run.report.config);
    echo_options(app, run.report.config);
    json& s = run.report.sections["prompts"];
    s["impressions"] = table.rows.size();
    s["prompts"] = prompts.size();
    s["summarized_impressions"] = summarized;
    s["skipped_impressions"] = skipped;
    finish(run, g, a.report);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// qc-run

struct QcArgs {
  std::string prompts, policy, backend = "stub", backend_command, out, report;
  std::string reference, source_labels;
};

struct PolicyFile {
  QcPolicy policy;
  GeneratorConfig generator;
  StubBehavior stub;
  json echo = json::object();
};

PolicyFile read_policy(const std::string& path) {
  PolicyFile p;
  if (path.empty()) return p;
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  if (!j.is_object()) throw InputError(path + ": policy must be a JSON object");
  auto num = [&](const json& obj, const char* key, auto& field) {
    if (!obj.contains(key)) return;
    if (!obj[key].is_number()) throw InputError(path + ": '" + key + "' must be a number");
    field = obj[key].get<std::decay_t<decltype(field)>>();
  };
  static const std::set<std::string> known = {"age_tolerance", "max_regenerations",
                                              "guidance_scale", "inference_steps", "stub"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw InputError(path + ": unknown policy key '" + it.key() + "'");
  }
  num(j, "age_tolerance", p.policy.age_tolerance);
  num(j, "max_regenerations", p.policy.max_regenerations);
  num(j, "guidance_scale", p.generator.guidance_scale);
  num(j, "inference_steps", p.generator.inference_steps);
  if (j.contains("stub")) {
    const json& s = j["stub"];
    if (!s.is_object()) throw InputError(path + ": 'stub' must be an object");
    num(s, "sex_accuracy", p.stub.sex_accuracy);
    num(s, "race_accuracy", p.stub.race_accuracy);
    num(s, "age_bias", p.stub.age_bias);
    num(s, "age_error_sd", p.stub.age_error_sd);
  }
  p.policy.validate();
  p.echo = j;
  return p;
}

json balance_rows(const std::vector<GroupBalance>& rows) {
  json out = json::array();
  for (const auto& b : rows) {
    out.push_back({{"group", b.group},
                   {"accepted", b.accepted},
                   {"reference", b.reference},
                   {"amplification", value_or_null(b.amplification)}});
  }
  return out;
}

int cmd_qc_run(const QcArgs& a, const Globals& g, const CLI::App& app, Run& run) {
  run.report.command = "qc-run";
  run.input(a.prompts);
  const auto prompts = parse_prompts_jsonl(read_file(a.prompts), a.prompts);
  if (prompts.empty()) throw InputError(a.prompts + ": no prompts");
  if (!a.policy.empty()) run.input(a.policy);
  const auto pf = read_policy(a.policy);

  CampaignResult result;
  if (a.backend == "stub") {
    StubBackend stub(pf.stub, pf.generator);
    result = run_campaign(prompts, stub, stub, pf.policy, g.seed);
  } else if (a.backend == "external") {
    if (a.backend_command.empty()) throw InputError("--backend external needs --backend-command");
    ExternalProcessBackend ext(a.backend_command);
    result = run_campaign(prompts, ext, ext, pf.policy, g.seed);
  } else {
    throw InputError("--backend must be stub or external");
  }
  write_file_atomic(a.out, ledger_to_jsonl(result.ledger));
  if (a.report.empty()) return 0;

  echo_options(*app.get_parent(), run.report.config);
  echo_options(app, run.report.config);
  run.report.config["policy_values"] = pf.echo;
  const auto s = ledger_summary(result.ledger);
  json& c = run.report.sections["campaign"];
  c["summary"] = {{"total", s.total},
                  {"accepted", s.accepted},
                  {"discarded", s.discarded},
                  {"backend_failed", s.backend_failed},
                  {"discard_rate", s.discard_rate},
                  {"max_attempts", pf.policy.max_attempts()}};
  json attribution = json::array();
  for (Criterion crit : kAllCriteria) {
    attribution.push_back({{"criterion", std::string(to_string(crit))},
                           {"detailed", s.detailed[crit]},
                           {"headline", s.headline[crit]},
                           {"headline_fraction", s.headline_fraction(crit)}});
  }
  c["attribution"] = attribution;
  if (s.backend_failed > 0) {
    run.warn(std::to_string(s.backend_failed) + " prompts ended in backend failure");
  }
  if (!a.reference.empty()) {
    run.input(a.reference);
    const auto reference = ingest_table(a.reference, TableKind::demographics);
    std::optional<Cohort> source;
    if (!a.source_labels.empty()) {
      run.input(a.source_labels);
      source = ingest_table(a.source_labels, TableKind::labels);
    }
    const auto b = balance_report(result.accepted, reference, source ? &*source : nullptr);
    json bal;
    bal["accepted_total"] = b.accepted_total;
    bal["reference_total"] = b.reference_total;
    bal["by_race"] = balance_rows(b.by_race);
    bal["by_sex"] = balance_rows(b.by_sex);
    bal["by_age_bin"] = balance_rows(b.by_age_bin);
    json prev = json::array();
    for (const auto& p : b.prevalence) {
      prev.push_back({{"label", p.label},
                      {"accepted", p.accepted},
                      {"reference", value_or_null(p.reference)}});
    }
    bal["prevalence"] = prev;
    c["balance"] = bal;
  }
  finish(run, g, a.report);
  return 0;
}

// ---------------------------------------------------------------------------
// gen-quality

struct GenArgs {
  std::string real, synth, manifest, checkpoints, alignment, out;
  double tie_window = kCheckpointAurocTieWindow;
};

struct ManifestRow {
  std::string prompt_id, role, image, embedding_id;
};

Eigen::VectorXd embedding_row(const EmbeddingMatrix& m,
                                    const std::map<std::string, Eigen::Index>& index,
                                    const std::string& id, const std::string& which) {
  auto it = index.find(id);
  if (it == index.end()) throw InputError("embedding id '" + id + "' not found in " + which);
  return m.values.row(it->second).transpose();
}

std::map<std::string, Eigen::Index> row_index(const EmbeddingMatrix& m) {
  std::map<std::string, Eigen::Index> idx;
  for (std::size_t i = 0; i < m.row_ids.size(); ++i) idx[m.row_ids[i]] = static_cast<Eigen::Index>(i);
  return idx;
}

json diversity_json(const DiversityResult& d, const std::vector<std::string>& prompt_ids) {
  json j;
  j["value"] = d.value;
  json rows = json::array();
  for (std::size_t i = 0; i < prompt_ids.size(); ++i) {
    rows.push_back({{"prompt_id", prompt_ids[i]}, {"mean_pairwise", d.per_prompt[i]}});
  }
  j["per_prompt"] = rows;
  return j;
}

void gen_manifest(const GenArgs& a, const EmbeddingMatrix* real, const EmbeddingMatrix* synth,
                  Run& run, json& out) {
  run.input(a.manifest);
  const auto t = parse_csv(read_file(a.manifest), a.manifest);
  const std::vector<std::string> header = {"prompt_id", "role", "image", "embedding_id"};
  if (t.header != header) {
    throw InputError(a.manifest + ": header must be prompt_id,role,image,embedding_id");
  }
  const fs::path base = fs::path(a.manifest).parent_path();
  std::vector<std::string> order;  // prompt ids by first appearance
  std::map<std::string, std::vector<ManifestRow>> synth_rows;
  std::map<std::string, ManifestRow> real_rows;
  std::map<std::string, ImageGrid> images;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = a.manifest + ":" + std::to_string(t.line_numbers[r]);
    if (row.size() != 4) throw InputError(where + ": expected 4 fields");
    ManifestRow m{row[0], row[1], row[2], row[3]};
    if (m.prompt_id.empty()) throw InputError(where + ": empty prompt_id");
    if (!m.image.empty() && !images.count(m.image)) {
      const std::string path = (base / m.image).string();
      run.input(path);
      images.emplace(m.image, read_pgm(path));
    }
    if (!synth_rows.count(m.prompt_id) && !real_rows.count(m.prompt_id)) order.push_back(m.prompt_id);
    if (m.role == "synth") {
      synth_rows[m.prompt_id].push_back(m);
    } else if (m.role == "real") {
      if (real_rows.count(m.prompt_id)) throw InputError(where + ": second real row for prompt");
      real_rows[m.prompt_id] = m;
    } else {
      throw InputError(where + ": column 2 (role): expected real or synth, got '" + m.role + "'");
    }
  }

  // Intra-prompt diversity over synthetic images and embeddings.
  std::vector<std::vector<const ImageGrid*>> image_groups;
  std::vector<std::string> image_ids;
  std::vector<std::vector<Eigen::VectorXd>> emb_groups;
  std::vector<std::string> emb_ids;
  const auto synth_index = synth ? row_index(*synth) : std::map<std::string, Eigen::Index>{};
  for (const auto& pid : order) {
    auto it = synth_rows.find(pid);
    if (it == synth_rows.end()) continue;
    std::vector<const ImageGrid*> imgs;
    std::vector<Eigen::VectorXd> embs;
    for (const auto& m : it->second) {
      if (!m.image.empty()) imgs.push_back(&images.at(m.image));
      if (!m.embedding_id.empty()) {
        if (!synth) throw InputError(a.manifest + ": embedding ids need --synth");
        embs.push_back(embedding_row(*synth, synth_index, m.embedding_id, a.synth));
      }
    }
    if (imgs.size() >= 2) {
      image_groups.push_back(std::move(imgs));
      image_ids.push_back(pid);
    }
    if (embs.size() >= 2) {
      emb_groups.push_back(std::move(embs));
      emb_ids.push_back(pid);
    }
  }
  if (!image_groups.empty()) {
    out["diversity_ms_ssim"] = diversity_json(
        intra_prompt_diversity(image_groups,
                               [](const ImageGrid* x, const ImageGrid* y) { return ms_ssim(*x, *y); }),
        image_ids);
  } else {
    run.warn_undefined("MS-SSIM diversity undefined: no prompt has 2 or more synthetic images");
  }
  if (!emb_groups.empty()) {
    out["diversity_embedding"] = diversity_json(
        intra_prompt_diversity(emb_groups,
                               [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
                                 return embedding_cosine(x, y);
                               }),
        emb_ids);
  } else if (synth) {
    run.warn_undefined("embedding diversity undefined: no prompt has 2 or more synthetic embeddings");
  }

  // Real-synthetic similarity: each synthetic sample against its prompt's real image.
  struct Pair {
    std::string prompt_id;
    const ImageGrid* real_img = nullptr;
    const ImageGrid* synth_img = nullptr;
    std::optional<Eigen::VectorXd> real_emb, synth_emb;
  };
  std::vector<Pair> pairs;
  const auto real_index = real ? row_index(*real) : std::map<std::string, Eigen::Index>{};
  for (const auto& pid : order) {
    auto r = real_rows.find(pid);
    auto s = synth_rows.find(pid);
    if (r == real_rows.end() || s == synth_rows.end()) continue;
    for (const auto& m : s->second) {
      Pair p;
      p.prompt_id = pid;
      if (!r->second.image.empty() && !m.image.empty()) {
        p.real_img = &images.at(r->second.image);
        p.synth_img = &images.at(m.image);
      }
      if (!r->second.embedding_id.empty() && !m.embedding_id.empty()) {
        if (!real) throw InputError(a.manifest + ": real embedding ids need --real");
        p.real_emb = embedding_row(*real, real_index, r->second.embedding_id, a.real);
        p.synth_emb = embedding_row(*synth, synth_index, m.embedding_id, a.synth);
      }
      pairs.push_back(std::move(p));
    }
  }
  std::vector<std::optional<double>> img_sim(pairs.size()), emb_sim(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    const Pair& p = pairs[i];
    if (p.real_img) img_sim[i] = ms_ssim(*p.real_img, *p.synth_img);
    if (p.real_emb) emb_sim[i] = embedding_cosine(*p.real_emb, *p.synth_emb);
  });
  auto summarize = [&](const std::vector<std::optional<double>>& v, const char* key) {
    std::vector<double> vals;
    json rows = json::array();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i]) continue;
      vals.push_back(*v[i]);
      rows.push_back({{"prompt_id", pairs[i].prompt_id}, {"similarity", *v[i]}});
    }
    if (vals.empty()) return;
    out[key] = {{"value", mean(vals)}, {"pairs", rows}};
  };
  summarize(img_sim, "similarity_ms_ssim");
  summarize(emb_sim, "similarity_embedding");
}

std::optional<Sex> opt_sex(const std::string& s) {
  return s.empty() ? std::nullopt : std::optional<Sex>(parse_sex(s));
}

void gen_alignment(const std::string& path, Run& run, json& out) {
  run.input(path);
  const auto t = parse_csv(read_file(path), path);
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < t.header.size(); ++c) col[t.header[c]] = c;
  auto need = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) throw InputError(path + ": missing column '" + name + "'");
    return it->second;
  };
  std::vector<AlignmentRecord> records;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
    if (row.size() != t.header.size()) throw InputError(where + ": wrong field count");
    try {
      AlignmentRecord rec;
      long long age = 0;
      double pred_age = 0;
      if (!parse_int(row[need("target_age")], age)) throw InputError("target_age not an integer");
      if (!parse_double(row[need("pred_age")], pred_age)) throw InputError("pred_age not a number");
      rec.target = {parse_sex(row[need("target_sex")]), static_cast<int>(age),
                    parse_race(row[need("target_race")])};
      rec.predicted = {parse_sex(row[need("pred_sex")]), parse_race(row[need("pred_race")]),
                       pred_age};
      rec.disease_scores.resize(static_cast<Eigen::Index>(kAlignmentDiseases.size()));
      rec.disease_labels.resize(static_cast<Eigen::Index>(kAlignmentDiseases.size()));
      for (std::size_t d = 0; d < kAlignmentDiseases.size(); ++d) {
        const auto& name = kAlignmentDiseases[d];
        double score = 0;
        if (!parse_double(row[need(name + "_score")], score)) {
          throw InputError(name + "_score not a number");
        }
        const std::string& lab = row[need(name + "_label")];
        rec.disease_scores[static_cast<Eigen::Index>(d)] = score;
        rec.disease_labels[static_cast<Eigen::Index>(d)] =
            lab.empty() ? -1 : lab == "1" ? 1 : lab == "0" ? 0 : throw InputError(name + "_label must be 0, 1 or empty");
      }
      records.push_back(std::move(rec));
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  const auto s = alignment_scores(records);
  json j;
  j["sex_accuracy"] = s.sex_accuracy;
  j["race_accuracy"] = s.race_accuracy;
  j["age_rmse"] = s.age_rmse;
  j["mean_disease_auroc"] = value_or_null(s.mean_disease_auroc);
  json rows = json::array();
  for (const auto& m : s.per_disease) {
    rows.push_back({{"disease", m.label},
                    {"auroc", value_or_null(m.value)},
                    {"positives", m.positives},
                    {"negatives", m.negatives}});
  }
  j["per_disease"] = rows;
  for (const auto& d : s.excluded) run.warn_undefined("alignment AUROC undefined for " + d);
  out["alignment"] = j;
}

int cmd_gen_quality(const GenArgs& a, const Globals& g, const CLI::App& app, Run& run) {
  run.report.command = "gen-quality";
  echo_options(*app.get_parent(), run.report.config);
  echo_options(app, run.report.config);
  if (a.real.empty() && a.synth.empty() && a.manifest.empty() && a.checkpoints.empty() &&
      a.alignment.empty()) {
    throw InputError("gen-quality needs at least one of --real/--synth, --images-manifest, "
                     "--checkpoints, --alignment");
  }
  std::optional<EmbeddingMatrix> real, synth;
  if (!a.real.empty()) {
    run.input(a.real);
    real = ingest_embeddings(a.real);
  }
  if (!a.synth.empty()) {
    run.input(a.synth);
    synth = ingest_embeddings(a.synth);
  }
  json& out = run.report.sections["gen_quality"];
  out = json::object();
  if (real && synth) {
    const auto f = fid(*real, *synth);
    out["fid"] = {{"distance", f.distance},
                  {"min_eigenvalue", f.min_eigenvalue},
                  {"n_real", real->rows()},
                  {"n_synth", synth->rows()},
                  {"dim", real->cols()}};
    if (f.warning) run.warn(*f.warning);
  }
  if (!a.manifest.empty()) gen_manifest(a, real ? &*real : nullptr, synth ? &*synth : nullptr, run, out);
  if (!a.checkpoints.empty()) {
    run.input(a.checkpoints);
    std::vector<std::string> refs;
    const auto rows = parse_checkpoint_table(read_file(a.checkpoints), a.checkpoints, &refs);
    json cp;
    cp["selected"] = select_checkpoint(rows, a.tie_window);
    cp["tie_window"] = a.tie_window;
    json cands = json::array();
    for (const auto& r : rows) {
      cands.push_back({{"checkpoint", r.id},
                       {"steps", r.steps ? json(*r.steps) : json(nullptr)},
                       {"mean_auroc", r.mean_disease_auroc},
                       {"fid", r.fid}});
    }
    cp["candidates"] = cands;
    json ref_rows = json::array();
    for (const auto& r : refs) ref_rows.push_back({{"checkpoint", r}});
    cp["reference_rows"] = ref_rows;
    out["checkpoint"] = cp;
  }
  if (!a.alignment.empty()) gen_alignment(a.alignment, run, out);
  finish(run, g, a.out);
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvalArgs {
  std::string predictions, labels, subset = "all", out, thresholds_out;
  std::string model_id = "model", split_id = "validation", uncertain = "reject";
  int resamples = 1000;
};

int cmd_evaluate(const EvalArgs& a, const Globals& g, const CLI::App& app, Run& run) {
  run.report.command = "evaluate";
  echo_options(*app.get_parent(), run.report.config);
  echo_options(app, run.report.config);
  const auto plan = plan_for(a.resamples, g.seed);
  run.input(a.labels);
  const auto labels = ingest_table(a.labels, TableKind::labels, ingest_options(a.uncertain));
  const auto cohort = scored_cohort(labels, a.predictions, run);
  const auto& schema = cohort.schema();
  const auto subset = label_subset(schema, a.subset);
  const Eigen::MatrixXd S = cohort.score_matrix();
  const Eigen::MatrixXi Y = cohort.label_matrix();

  const auto auroc = macro_auroc(S, Y, schema, subset);
  MacroMetric auprc;
  try {
    auprc = macro_auprc(S, Y, schema, subset);
  } catch (const UndefinedMetricError& e) {
    run.warn_undefined(std::string("macro AUPRC undefined: ") + e.what());
  }

  const auto n = static_cast<std::size_t>(cohort.size());
  json per_label = json::array();
  const auto cols = resolve_subset(schema, subset);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(cols[i]);
    const LabelMetric& mr = auroc.per_label[i];
    json row;
    row["label"] = mr.label;
    row["positives"] = mr.positives;
    row["negatives"] = mr.negatives;
    row["auroc"] = value_or_null(mr.value);
    row["auprc"] = auprc.per_label.size() > i ? value_or_null(auprc.per_label[i].value)
                                              : json(nullptr);
    std::optional<BootstrapResult> ci;
    if (mr.value) {
      IndexStatistic stat = [&](std::span<const std::size_t> rows) {
        const auto idx = eigen_rows(rows);
        const Eigen::VectorXd s = S(idx, j);
        const Eigen::VectorXi y = Y(idx, j);
        auto [ds, dy] = defined_entries(s, y);
        return binary_auroc(ds, dy);
      };
      ci = maybe_ci(stat, n, plan_for(a.resamples, derive_seed(g.seed, {cols[i] + 1})), run,
                    "AUROC of " + mr.label);
    } else {
      run.warn_undefined("AUROC undefined for " + mr.label + ": " + mr.note);
    }
    row["auroc_ci_lo"] = ci ? json(ci->lo) : json(nullptr);
    row["auroc_ci_hi"] = ci ? json(ci->hi) : json(nullptr);
    if (!mr.note.empty()) row["note"] = mr.note;
    per_label.push_back(row);
  }
  IndexStatistic macro_stat = [&](std::span<const std::size_t> rows) {
    const auto idx = eigen_rows(rows);
    const Eigen::MatrixXd s = S(idx, Eigen::all);
    const Eigen::MatrixXi y = Y(idx, Eigen::all);
    return macro_auroc(s, y, schema, subset).value;
  };
  const auto macro_ci = maybe_ci(macro_stat, n, plan_for(a.resamples, derive_seed(g.seed, {0})),
                                 run, "macro AUROC");
  json& m = run.report.sections["metrics"];
  m["n_studies"] = n;
  m["labels"] = subset;
  json ma = {{"value", auroc.value}, {"excluded", auroc.excluded}};
  put_ci(ma, macro_ci);
  m["macro_auroc"] = ma;
  m["macro_auprc"] = {{"value", auprc.per_label.empty() ? json(nullptr) : json(auprc.value)},
                      {"excluded", auprc.excluded}};
  m["per_label"] = per_label;

  if (!a.thresholds_out.empty()) {
    const auto t = fit_thresholds(a.model_id, S, Y, schema, a.split_id);
    write_file_atomic(a.thresholds_out, t.to_json_text());
  }
  finish(run, g, a.out);
  return 0;
}

// ---------------------------------------------------------------------------
// fairness

struct FairArgs {
  std::string predictions, labels, demographics, axis = "sex-race", thresholds, model_id;
  std::string subset = "all", out, uncertain = "reject";
  int resamples = 1000;
};

int cmd_fairness(const FairArgs& a, const Globals& g, const CLI::App& app, Run& run) {
  run.report.command = "fairness";
  echo_options(*app.get_parent(), run.report.config);
  echo_options(app, run.report.config);
  const Axis axis = parse_axis(a.axis);
  run.input(a.labels);
  run.input(a.demographics);
  const auto labels = ingest_table(a.labels, TableKind::labels, ingest_options(a.uncertain));
  const auto demo = ingest_table(a.demographics, TableKind::demographics);
  const auto cohort = scored_cohort(merge_demographics(labels, demo), a.predictions, run);
  const auto subset = label_subset(cohort.schema(), a.subset);

  const auto partition = partition_subgroups(cohort, axis);
  const auto metric = subgroup_macro_auroc(subset);
  const auto table = subgroup_metric_table(cohort, partition, metric);
  const auto gap = fairness_gap(table);

  std::optional<double> threshold;
  if (!a.thresholds.empty()) {
    run.input(a.thresholds);
    const auto t = ThresholdTable::parse(read_file(a.thresholds), a.thresholds);
    const auto entry = a.model_id.empty() ? t.get_any_model(kNoFinding) : t.get(a.model_id, kNoFinding);
    if (!entry) throw InputError(a.thresholds + ": no threshold for " + std::string(kNoFinding));
    threshold = entry->threshold;
  } else {
    run.warn("no --thresholds given; underdiagnosis rates not computed");
  }
  SubgroupTable rates;
  std::optional<GapResult> ud_gap;
  if (threshold) {
    if (!cohort.schema().index_of(kNoFinding)) {
      throw InputError(a.labels + ": underdiagnosis needs a '" + std::string(kNoFinding) + "' column");
    }
    rates = underdiagnosis_rates(cohort, partition, *threshold);
    try {
      ud_gap = underdiagnosis_gap(rates);
    } catch (const UndefinedMetricError& e) {
      run.warn_undefined(std::string("underdiagnosis gap undefined: ") + e.what());
    }
  }

  json rows = json::array();
  for (std::size_t i = 0; i < partition.groups.size(); ++i) {
    const auto& grp = partition.groups[i];
    const auto& tv = table[i];
    json row = subgroup_key_json(grp.key);
    row["n"] = tv.size;
    row["auroc"] = value_or_null(tv.value);
    std::optional<BootstrapResult> ci;
    if (tv.value) {
      IndexStatistic stat = [&](std::span<const std::size_t> rs) {
        std::vector<std::size_t> mapped;
        mapped.reserve(rs.size());
        for (auto r : rs) mapped.push_back(grp.rows[r]);
        return metric(cohort, mapped);
      };
      ci = maybe_ci(stat, grp.rows.size(),
                    plan_for(a.resamples, derive_seed(g.seed, {static_cast<std::uint64_t>(grp.key.rank()) + 1})),
                    run, "AUROC of " + grp.key.label());
    } else {
      run.warn_undefined("AUROC undefined for " + grp.key.label() + ": " + tv.note);
    }
    row["auroc_ci_lo"] = ci ? json(ci->lo) : json(nullptr);
    row["auroc_ci_hi"] = ci ? json(ci->hi) : json(nullptr);
    if (threshold) {
      row["underdiagnosis_rate"] = value_or_null(rates[i].value);
      row["n_with_finding"] = rates[i].size;
      if (!rates[i].value) run.warn_undefined("underdiagnosis rate undefined for " + grp.key.label());
    }
    rows.push_back(row);
  }

  const std::size_t n = cohort.size();
  auto gap_ci = [&](bool underdiagnosis, std::uint64_t stream) {
    IndexStatistic stat = [&, underdiagnosis](std::span<const std::size_t> rs) {
      const auto p = partition_rows(cohort, axis, rs);
      if (underdiagnosis) return underdiagnosis_gap(underdiagnosis_rates(cohort, p, *threshold)).gap;
      return fairness_gap(subgroup_metric_table(cohort, p, metric)).gap;
    };
    return maybe_ci(stat, n, plan_for(a.resamples, derive_seed(g.seed, {stream})), run,
                    underdiagnosis ? "underdiagnosis gap" : "AUROC gap");
  };

  json& f = run.report.sections["fairness"];
  f["axis"] = std::string(to_string(axis));
  f["labels"] = subset;
  f["threshold_no_finding"] = value_or_null(threshold);
  f["subgroups"] = rows;
  json ag = gap_json(gap);
  put_ci(ag, gap_ci(false, 100));
  f["auroc_gap"] = ag;
  if (ud_gap) {
    json ug = gap_json(*ud_gap);
    put_ci(ug, gap_ci(true, 101));
    f["underdiagnosis_gap"] = ug;
  }
  const auto& ex = partition.exclusions;
  f["exclusions"] = {{"missing_demographics", ex.missing_demographics.size()},
                     {"missing_race", ex.missing_race.size()},
                     {"under_18", ex.under_18.size()}};
  if (ex.count() > 0) {
    run.warn(std::to_string(ex.count()) + " studies excluded from the " +
             std::string(to_string(axis)) + " partition");
  }
  finish(run, g, a.out);
  return 0;
}

// ---------------------------------------------------------------------------
// compare

struct CompareArgs {
  std::string pred_a, pred_b, labels, test = "delong", subset = "all", out, uncertain = "reject";
  int resamples = 1000;
  int exact_max_n = 20;
};

int cmd_compare(const CompareArgs& a, const Globals& g, const CLI::App& app, Run& run) {
  run.report.command = "compare";
  echo_options(*app.get_parent(), run.report.config);
  echo_options(app, run.report.config);
  if (a.test != "delong" && a.test != "permutation") {
    throw InputError("--test must be delong or permutation");
  }
  run.input(a.labels);
  const auto labels = ingest_table(a.labels, TableKind::labels, ingest_options(a.uncertain));
  const auto ca = scored_cohort(labels, a.pred_a, run);
  const auto cb = scored_cohort(labels, a.pred_b, run);
  bool same = ca.size() == cb.size();
  for (std::size_t i = 0; same && i < ca.size(); ++i) same = ca[i].study_id == cb[i].study_id;
  if (!same) throw InputError(a.pred_a + " and " + a.pred_b + " cover different studies");
  const auto& schema = ca.schema();
  const auto subset = label_subset(schema, a.subset);
  const Eigen::MatrixXd SA = ca.score_matrix();
  const Eigen::MatrixXd SB = cb.score_matrix();
  const Eigen::MatrixXi Y = ca.label_matrix();

  json rows = json::array();
  std::size_t defined = 0;
  for (auto j : resolve_subset(schema, subset)) {
    const auto col = static_cast<Eigen::Index>(j);
    auto [sa, y] = defined_entries(SA.col(col), Y.col(col));
    const Eigen::VectorXd sb = defined_entries(SB.col(col), Y.col(col)).first;
    json row;
    row["label"] = schema.name(j);
    row["test"] = a.test;
    row["n"] = y.size();
    try {
      if (a.test == "delong") {
        const auto d = delong_test(sa, sb, y);
        row["auroc_a"] = d.auroc_a;
        row["auroc_b"] = d.auroc_b;
        row["delta"] = d.auroc_a - d.auroc_b;
        row["z"] = d.z;
        row["p"] = d.p;
      } else {
        const auto p = permutation_test_auprc(
            sa, sb, y, plan_for(a.resamples, derive_seed(g.seed, {j})), a.exact_max_n);
        row["auprc_a"] = average_precision(sa, y);
        row["auprc_b"] = average_precision(sb, y);
        row["delta"] = p.delta;
        row["p"] = p.p;
        row["exact"] = p.exact;
        row["assignments"] = p.assignments;
      }
      ++defined;
    } catch (const UndefinedMetricError& e) {
      row["p"] = nullptr;
      row["note"] = e.what();
      run.warn_undefined(a.test + " test undefined for " + schema.name(j) + ": " + e.what());
    }
    rows.push_back(row);
  }
  if (defined == 0) throw UndefinedMetricError("no label supports the " + a.test + " test");
  json& c = run.report.sections["compare"];
  c["test"] = a.test;
  c["per_label"] = rows;
  finish(run, g, a.out);
  return 0;
}

// ---------------------------------------------------------------------------
// probe

struct ProbeArgs {
  std::string strategy = "i", real, synth, labels, val, test, subset = "all", out;
  std::string uncertain = "reject";
  ProbeConfig cfg;
};

Dataset load_dataset(const std::string& path, const Cohort& labels, Run& run) {
  run.input(path);
  const auto emb = ingest_embeddings(path);
  Dataset d;
  d.features = emb.values;
  d.labels.resize(emb.rows(), static_cast<Eigen::Index>(labels.schema().size()));
  for (Eigen::Index i = 0; i < emb.rows(); ++i) {
    const auto& id = emb.row_ids[static_cast<std::size_t>(i)];
    const auto idx = labels.find(id);
    if (!idx) throw InputError(path + ": row id '" + id + "' has no labels");
    const auto& lv = labels[*idx].labels;
    for (std::size_t j = 0; j < lv.size(); ++j) {
      d.labels(i, static_cast<Eigen::Index>(j)) = static_cast<int>(lv[j]);
    }
  }
  return d;
}

int cmd_probe(ProbeArgs a, const Globals& g, const CLI::App& app, Run& run) {
  run.report.command = "probe";
  echo_options(*app.get_parent(), run.report.config);
  echo_options(app, run.report.config);
  a.cfg.strategy = parse_strategy(a.strategy);
  a.cfg.seed = g.seed;
  a.cfg.validate();
  run.input(a.labels);
  const auto labels = ingest_table(a.labels, TableKind::labels, ingest_options(a.uncertain));
  ProbeData data;
  if (!a.real.empty()) data.real = load_dataset(a.real, labels, run);
  if (!a.synth.empty()) data.synth = load_dataset(a.synth, labels, run);
  data.val = load_dataset(a.val, labels, run);
  const auto subset = label_subset(labels.schema(), a.subset);

  const auto result = train_probe(data, a.cfg);
  json log = json::array();
  for (const auto& e : result.log) {
    log.push_back({{"stage", e.stage},
                   {"epoch", e.epoch},
                   {"lr", e.lr},
                   {"train_loss", e.train_loss},
                   {"val_loss", e.val_loss},
                   {"val_auroc", value_or_null(e.val_auroc)}});
  }
  json stages = json::array();
  for (std::size_t s = 0; s < result.stages.size(); ++s) {
    const auto& st = result.stages[s];
    stages.push_back({{"stage", s},
                      {"source", st.source},
                      {"epochs_run", st.epochs_run},
                      {"early_stopped", st.early_stopped},
                      {"best_loss_epoch", st.best_loss_epoch},
                      {"checkpoint_epoch", st.checkpoint_epoch},
                      {"checkpoint_val_auroc", value_or_null(st.checkpoint_val_auroc)}});
  }
  json& p = run.report.sections["probe"];
  p["strategy"] = std::string(to_string(a.cfg.strategy));
  p["log"] = log;
  p["stages"] = stages;

  const bool on_test = !a.test.empty();
  const Dataset eval_set = on_test ? load_dataset(a.test, labels, run) : data.val;
  const auto ev = evaluate_probe(result.model, eval_set, labels.schema(), subset);
  json per_label = json::array();
  for (std::size_t i = 0; i < ev.auroc.per_label.size(); ++i) {
    const auto& m = ev.auroc.per_label[i];
    if (!m.value) run.warn_undefined("AUROC undefined for " + m.label + ": " + m.note);
    per_label.push_back({{"label", m.label},
                         {"auroc", value_or_null(m.value)},
                         {"auprc", value_or_null(ev.auprc.per_label[i].value)},
                         {"positives", m.positives},
                         {"negatives", m.negatives}});
  }
  p["evaluation"] = {{"split", on_test ? "test" : "validation"},
                     {"macro_auroc", ev.auroc.value},
                     {"macro_auprc", ev.auprc.value},
                     {"per_label", per_label}};
  finish(run, g, a.out);
  return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
};

int cmd_report(const ReportArgs& a, const Globals& g, Run& run) {
  run.report.command = "report";
  json merged_configs = json::object();
  std::map<std::string, int> seen;
  for (const auto& path : a.inputs) {
    run.input(path);
    const auto r = parse_report(read_file(path), path);
    std::string key = r.command;
    if (seen[key]++ > 0) key += "#" + std::to_string(seen[r.command]);
    run.report.sections[key] = r.sections;
    merged_configs[key] = r.config;
    for (const auto& w : r.warnings) run.warn(key + ": " + w);
  }
  run.report.config["merged"] = merged_configs;
  finish(run, g, a.out);
  return 0;
}

// ---------------------------------------------------------------------------

std::string config_arg(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void append_config_args(const json& obj, std::vector<std::string>& out) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const json& v = it.value();
    if (v.is_object()) continue;
    if (v.is_boolean()) {
      if (v.get<bool>()) out.push_back("--" + it.key());
      continue;
    }
    out.push_back("--" + it.key());
    if (v.is_array()) {
      for (const auto& e : v) out.push_back(config_arg(e));
    } else {
      out.push_back(config_arg(v));
    }
  }
}

// Splices options from a JSON config file into argv: top-level scalars are
// global options, objects keyed by subcommand name hold that subcommand's
// options. They go first so flags given on the command line win.
std::vector<std::string> expand_config(std::vector<std::string> args,
                                       const std::set<std::string>& subcommands) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  json cfg;
  try {
    cfg = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  if (!cfg.is_object()) throw InputError(path + ": config must be a JSON object");
  std::size_t sub = 0;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (subcommands.count(args[i])) {
      sub = i;
      break;
    }
  }
  std::vector<std::string> global, local;
  append_config_args(cfg, global);
  if (sub && cfg.contains(args[sub]) && cfg[args[sub]].is_object()) {
    append_config_args(cfg[args[sub]], local);
  }
  std::vector<std::string> out = {args[0]};
  out.insert(out.end(), global.begin(), global.end());
  const std::size_t split = sub ? sub + 1 : args.size();
  out.insert(out.end(), args.begin() + 1, args.begin() + static_cast<long>(split));
  out.insert(out.end(), local.begin(), local.end());
  out.insert(out.end(), args.begin() + static_cast<long>(split), args.end());
  return out;
}

int apply_threads(int requested) {
  int n = requested;
  if (n < 0) {
    n = 0;
    if (const char* env = std::getenv("RADAUDIT_THREADS"); env && *env) {
      long long v = 0;
      if (!parse_int(env, v) || v < 0) throw InputError("RADAUDIT_THREADS must be a non-negative integer");
      n = static_cast<int>(v);
    }
  }
  set_thread_count(static_cast<std::size_t>(n));
  return n;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness and quality audits for synthetic chest X-ray pipelines", "radaudit"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kToolVersion));

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random draw");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores; env RADAUDIT_THREADS)")
      ->default_str("")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--strict", g.strict, "Exit 3 when any metric is undefined");
  app.add_flag("--csv", g.csv, "Also write the report's tables as CSV next to the JSON");
  app.add_option("--config", g.config, "JSON config; command-line flags take precedence");

  PromptsArgs pa;
  auto* prompts = app.add_subcommand("prompts", "Render demographic prompt variants of impressions");
  prompts->add_option("--impressions", pa.impressions, "CSV: impression_id,age,impression")->required();
  prompts->add_option("--out", pa.out, "prompts.jsonl")->required();
  prompts->add_option("--report", pa.report, "Optional summary report (JSON)");
  prompts->add_option("--token-limit", pa.token_limit);
  prompts->add_option("--summary-chars", pa.summary_chars);

  QcArgs qa;
  auto* qc = app.add_subcommand("qc-run", "Run the generate/audit/retry campaign");
  qc->add_option("--prompts", qa.prompts)->required();
  qc->add_option("--policy", qa.policy, "policy.json");
  qc->add_option("--backend", qa.backend)->check(CLI::IsMember({"stub", "external"}));
  qc->add_option("--backend-command", qa.backend_command, "Command for --backend external");
  qc->add_option("--out", qa.out, "ledger.jsonl")->required();
  qc->add_option("--report", qa.report, "Campaign report (JSON)");
  qc->add_option("--reference", qa.reference, "Reference demographics.csv for balance");
  qc->add_option("--source-labels", qa.source_labels, "Labels keyed by impression id");

  GenArgs ga;
  auto* gen = app.add_subcommand("gen-quality", "FID, MS-SSIM, diversity and checkpoint selection");
  gen->add_option("--real", ga.real, "Real embeddings (.bin)");
  gen->add_option("--synth", ga.synth, "Synthetic embeddings (.bin)");
  gen->add_option("--images-manifest", ga.manifest, "CSV: prompt_id,role,image,embedding_id");
  gen->add_option("--checkpoints", ga.checkpoints, "Checkpoint table CSV");
  gen->add_option("--alignment", ga.alignment, "Auditor outputs on synthetic samples (CSV)");
  gen->add_option("--tie-window", ga.tie_window);
  gen->add_option("--out", ga.out)->required();

  EvalArgs ea;
  auto* eval = app.add_subcommand("evaluate", "Per-label and macro AUROC/AUPRC with CIs");
  eval->add_option("--predictions", ea.predictions)->required();
  eval->add_option("--labels", ea.labels)->required();
  eval->add_option("--labels-subset", ea.subset, "all | common8 | comma-separated names");
  eval->add_option("--uncertain", ea.uncertain, "reject | positive | negative | missing");
  eval->add_option("--resamples", ea.resamples, "Bootstrap resamples (0 disables CIs)");
  eval->add_option("--thresholds-out", ea.thresholds_out, "Write F1-optimal thresholds");
  eval->add_option("--model-id", ea.model_id);
  eval->add_option("--split-id", ea.split_id);
  eval->add_option("--out", ea.out)->required();

  FairArgs fa;
  auto* fair = app.add_subcommand("fairness", "Subgroup AUROC, gaps and underdiagnosis");
  fair->add_option("--predictions", fa.predictions)->required();
  fair->add_option("--labels", fa.labels)->required();
  fair->add_option("--demographics", fa.demographics)->required();
  fair->add_option("--axis", fa.axis)->check(CLI::IsMember({"sex-race", "sex-age"}));
  fair->add_option("--thresholds", fa.thresholds, "thresholds.json");
  fair->add_option("--model-id", fa.model_id);
  fair->add_option("--labels-subset", fa.subset);
  fair->add_option("--uncertain", fa.uncertain);
  fair->add_option("--resamples", fa.resamples);
  fair->add_option("--out", fa.out)->required();

  CompareArgs ca;
  auto* cmp = app.add_subcommand("compare", "Paired DeLong or permutation test per label");
  cmp->add_option("--pred-a", ca.pred_a)->required();
  cmp->add_option("--pred-b", ca.pred_b)->required();
  cmp->add_option("--labels", ca.labels)->required();
  cmp->add_option("--test", ca.test)->check(CLI::IsMember({"delong", "permutation"}));
  cmp->add_option("--resamples", ca.resamples);
  cmp->add_option("--exact-max-n", ca.exact_max_n);
  cmp->add_option("--labels-subset", ca.subset);
  cmp->add_option("--uncertain", ca.uncertain);
  cmp->add_option("--out", ca.out)->required();

  ProbeArgs pr;
  auto* probe = app.add_subcommand("probe", "Train a linear probe under one data strategy");
  probe->add_option("--strategy", pr.strategy, "i | ii | iii | iv");
  probe->add_option("--real", pr.real, "Real embeddings (.bin)");
  probe->add_option("--synth", pr.synth, "Synthetic embeddings (.bin)");
  probe->add_option("--labels", pr.labels, "Labels keyed by embedding row id")->required();
  probe->add_option("--val", pr.val, "Validation embeddings (.bin)")->required();
  probe->add_option("--test", pr.test, "Held-out embeddings (.bin)");
  probe->add_option("--labels-subset", pr.subset);
  probe->add_option("--uncertain", pr.uncertain);
  probe->add_option("--epochs", pr.cfg.max_epochs);
  probe->add_option("--patience", pr.cfg.patience);
  probe->add_option("--lr", pr.cfg.lr_initial);
  probe->add_option("--lr-finetune", pr.cfg.lr_finetune);
  probe->add_option("--weight-decay", pr.cfg.weight_decay);
  probe->add_option("--batch-size", pr.cfg.batch_size, "0 = full batch");
  probe->add_option("--init-scale", pr.cfg.init_scale);
  probe->add_option("--out", pr.out)->required();

  ReportArgs ra;
  auto* rep = app.add_subcommand("report", "Merge report JSON files");
  rep->add_option("--inputs", ra.inputs)->required()->expected(1, -1)->multi_option_policy(
      CLI::MultiOptionPolicy::TakeAll);
  rep->add_option("--out", ra.out)->required();

  const std::set<std::string> names = {"prompts", "qc-run",  "gen-quality", "evaluate",
                                       "fairness", "compare", "probe",       "report"};

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(std::move(args), names);
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    try {
      app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      std::cerr << "radaudit: " << e.what() << "\n\n";
      const auto chosen = app.get_subcommands();
      std::cerr << (chosen.empty() ? app.help() : chosen.front()->help());
      return 2;
    }
    apply_threads(g.threads);

    Run run;
    if (prompts->parsed()) return cmd_prompts(pa, g, *prompts, run);
    if (qc->parsed()) return cmd_qc_run(qa, g, *qc, run);
    if (gen->parsed()) return cmd_gen_quality(ga, g, *gen, run);
    if (eval->parsed()) return cmd_evaluate(ea, g, *eval, run);
    if (fair->parsed()) return cmd_fairness(fa, g, *fair, run);
    if (cmp->parsed()) return cmd_compare(ca, g, *cmp, run);
    if (probe->parsed()) return cmd_probe(pr, g, *probe, run);
    if (rep->parsed()) return cmd_report(ra, g, run);
    return 2;
  } catch (const InputError& e) {
    std::cerr << "radaudit: input error: " << e.what() << "\n";
    return 2;
  } catch (const UndefinedMetricError& e) {
    std::cerr << "radaudit: undefined metric: " << e.what() << "\n";
    return 3;
  } catch (const DivergenceError& e) {
    std::cerr << "radaudit: training diverged at epoch " << e.epoch() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "radaudit: " << e.what() << "\n";
    return 1;
  }
}
