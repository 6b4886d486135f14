#include "radaudit/gen_quality.hpp"

#include <cctype>
#include <limits>

#include "radaudit/csv.hpp"

namespace radaudit {

AlignmentScores alignment_scores(const std::vector<AlignmentRecord>& records,
                                 const std::vector<std::string>& diseases) {
  if (records.empty()) throw InputError("no alignment records");
  const auto n = static_cast<Eigen::Index>(records.size());
  const auto d = static_cast<Eigen::Index>(diseases.size());
  Eigen::MatrixXd scores(n, d);
  Eigen::MatrixXi labels(n, d);
  std::size_t sex_hits = 0;
  std::size_t race_hits = 0;
  std::size_t race_total = 0;
  std::vector<double> sq_err(records.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    if (r.disease_scores.size() != d || r.disease_labels.size() != d) {
      throw InputError("alignment record " + std::to_string(i) +
                       " does not cover every disease");
    }
    scores.row(i) = r.disease_scores.transpose();
    labels.row(i) = r.disease_labels.transpose();
    if (r.predicted.sex == r.target.sex) ++sex_hits;
    if (r.target.race) {
      ++race_total;
      if (r.predicted.race == *r.target.race) ++race_hits;
    }
    const double e = r.predicted.age - static_cast<double>(r.target.age);
    sq_err[static_cast<std::size_t>(i)] = e * e;
  }

  AlignmentScores out;
  std::vector<double> defined;
  for (Eigen::Index j = 0; j < d; ++j) {
    auto [s, l] = defined_entries(scores.col(j), labels.col(j));
    LabelMetric m;
    m.label = diseases[static_cast<std::size_t>(j)];
    m.positives = static_cast<std::size_t>(l.sum());
    m.negatives = static_cast<std::size_t>(l.size()) - m.positives;
    try {
      m.value = binary_auroc(s, l);
      defined.push_back(*m.value);
    } catch (const UndefinedMetricError& e) {
      m.note = e.what();
      out.excluded.push_back(m.label);
    }
    out.per_disease.push_back(std::move(m));
  }
  if (!defined.empty()) out.mean_disease_auroc = mean(defined);
  out.sex_accuracy = static_cast<double>(sex_hits) / static_cast<double>(n);
  out.race_accuracy =
      race_total ? static_cast<double>(race_hits) / static_cast<double>(race_total)
                 : 0.0;
  out.age_rmse = std::sqrt(mean(sq_err));
  return out;
}

std::string select_checkpoint(const std::vector<CheckpointRow>& rows,
                              double tie_window) {
  if (rows.empty()) throw InputError("no checkpoint rows to select from");
  double best_auroc = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    if (!std::isfinite(r.mean_disease_auroc) || !std::isfinite(r.fid)) {
      throw InputError("checkpoint '" + r.id + "' has a non-finite ranking field");
    }
    best_auroc = std::max(best_auroc, r.mean_disease_auroc);
  }
  // The window absorbs two-decimal reporting; the epsilon absorbs the binary
  // representation of such decimals.
  const double floor = best_auroc - tie_window - 1e-12;
  const CheckpointRow* chosen = nullptr;
  for (const auto& r : rows) {
    if (r.mean_disease_auroc < floor) continue;
    if (!chosen) {
      chosen = &r;
      continue;
    }
    if (r.fid < chosen->fid) {
      chosen = &r;
    } else if (r.fid == chosen->fid) {
      const long long rs = r.steps.value_or(std::numeric_limits<long long>::max());
      const long long cs = chosen->steps.value_or(std::numeric_limits<long long>::max());
      if (rs < cs) chosen = &r;
    }
  }
  return chosen->id;
}

std::optional<long long> parse_step_count(std::string_view id) {
  std::size_t end = 0;
  while (end < id.size() &&
         (std::isdigit(static_cast<unsigned char>(id[end])) || id[end] == '.')) {
    ++end;
  }
  if (end == 0) return std::nullopt;
  double value = 0.0;
  if (!parse_double(id.substr(0, end), value)) return std::nullopt;
  double scale = 1.0;
  std::string_view rest = id.substr(end);
  if (!rest.empty() && (rest.front() == 'k' || rest.front() == 'K')) {
    scale = 1000.0;
    rest.remove_prefix(1);
  }
  if (!rest.empty() && rest.front() != ' ' && rest.front() != '(') return std::nullopt;
  return static_cast<long long>(std::llround(value * scale));
}

std::vector<CheckpointRow> parse_checkpoint_table(std::string_view text,
                                                  std::string_view origin,
                                                  std::vector<std::string>* reference_ids) {
  const CsvTable t = parse_csv(text, origin);
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < t.header.size(); ++i) {
      if (t.header[i] == name) return i;
    }
    return std::nullopt;
  };
  const auto id_col = column("checkpoint");
  const auto auroc_col = column("mean_auroc");
  const auto fid_col = column("fid");
  if (!id_col || !auroc_col || !fid_col) {
    throw InputError(std::string(origin) +
                     ":1: checkpoint table needs checkpoint, mean_auroc and fid columns");
  }
  std::vector<CheckpointRow> rows;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = std::string(origin) + ":" + std::to_string(t.line_numbers[r]);
    if (row.size() != t.header.size()) {
      throw InputError(where + ": expected " + std::to_string(t.header.size()) +
                       " fields, found " + std::to_string(row.size()));
    }
    CheckpointRow c;
    c.id = row[*id_col];
    c.steps = parse_step_count(c.id);
    if (!c.steps) {
      if (reference_ids) reference_ids->push_back(c.id);
      continue;
    }
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k == *id_col) continue;
      const std::string& tok = row[k];
      double v = 0.0;
      const bool present = !tok.empty() && tok != "-";
      if (present && !parse_double(tok, v)) {
        throw InputError(where + ": column " + std::to_string(k + 1) + " (" +
                         t.header[k] + "): not a number: '" + tok + "'");
      }
      if (k == *auroc_col || k == *fid_col) {
        if (!present) {
          throw InputError(where + ": checkpoint '" + c.id + "' lacks " + t.header[k]);
        }
        (k == *auroc_col ? c.mean_disease_auroc : c.fid) = v;
      } else if (present) {
        c.extra[t.header[k]] = v;
      }
    }
    rows.push_back(std::move(c));
  }
  return rows;
}

}  // namespace radaudit
