#include "radaudit/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "radaudit/csv.hpp"
#include "radaudit/error.hpp"

namespace radaudit {

std::string_view to_string(Sex sex) {
  return sex == Sex::male ? "male" : "female";
}

std::string_view to_string(Race race) {
  switch (race) {
    case Race::asian: return "Asian";
    case Race::black: return "Black";
    case Race::hispanic: return "Hispanic";
    case Race::white: return "White";
  }
  return "";
}

Sex parse_sex(std::string_view token) {
  if (token == "male") return Sex::male;
  if (token == "female") return Sex::female;
  throw InputError("unknown sex token '" + std::string(token) +
                   "' (expected male|female)");
}

Race parse_race(std::string_view token) {
  for (Race r : kAllRaces) {
    if (token == to_string(r)) return r;
  }
  throw InputError("unknown race token '" + std::string(token) +
                   "' (expected Asian|Black|Hispanic|White)");
}

void validate(const Demographics& d) {
  if (d.age < 0 || d.age > kMaxAge) {
    throw InputError("age " + std::to_string(d.age) + " outside [0, " +
                     std::to_string(kMaxAge) + "]");
  }
}

AgeBin age_bin(int age) {
  if (age < 18) return AgeBin::under18;
  if (age < 40) return AgeBin::from18to40;
  if (age < 60) return AgeBin::from40to60;
  if (age < 80) return AgeBin::from60to80;
  return AgeBin::from80;
}

std::string_view to_string(AgeBin bin) {
  switch (bin) {
    case AgeBin::under18: return "<18";
    case AgeBin::from18to40: return "18-40";
    case AgeBin::from40to60: return "40-60";
    case AgeBin::from60to80: return "60-80";
    case AgeBin::from80: return "80+";
  }
  return "";
}

// ---------------------------------------------------------------------------

LabelSchema::LabelSchema(std::vector<std::string> names)
    : names_(std::move(names)) {
  std::set<std::string_view> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw InputError("label schema contains an empty name");
    if (!seen.insert(n).second) {
      throw InputError("label schema declares '" + n + "' twice");
    }
  }
}

LabelSchema LabelSchema::chexpert14() {
  return LabelSchema({"Atelectasis", "Cardiomegaly", "Consolidation", "Edema",
                      "Enlarged Cardiomediastinum", "Fracture", "Lung Lesion",
                      "Lung Opacity", "No Finding", "Effusion", "Pleural Other",
                      "Pneumonia", "Pneumothorax", "Support Devices"});
}

LabelSchema LabelSchema::common8() {
  return LabelSchema({"Atelectasis", "Cardiomegaly", "Consolidation", "Edema",
                      "Effusion", "Pneumonia", "Pneumothorax", "No Finding"});
}

std::optional<std::size_t> LabelSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  // The labeler calls it "Pleural Effusion"; the shared subset says "Effusion".
  std::string_view alias;
  if (name == "Effusion") alias = "Pleural Effusion";
  if (name == "Pleural Effusion") alias = "Effusion";
  if (!alias.empty()) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == alias) return i;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

Cohort::Cohort(LabelSchema schema, std::vector<StudyRecord> records)
    : schema_(std::move(schema)), records_(std::move(records)) {
  index_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!index_.emplace(records_[i].study_id, i).second) {
      throw InputError("duplicate study_id '" + records_[i].study_id + "'");
    }
  }
}

std::optional<std::size_t> Cohort::find(std::string_view study_id) const {
  auto it = index_.find(std::string(study_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Eigen::MatrixXd Cohort::score_matrix() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(records_.size()),
                      static_cast<Eigen::Index>(schema_.size()));
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!records_[i].scores) {
      throw InputError("study '" + records_[i].study_id + "' has no scores");
    }
    out.row(static_cast<Eigen::Index>(i)) = records_[i].scores->transpose();
  }
  return out;
}

Eigen::MatrixXi Cohort::label_matrix() const {
  Eigen::MatrixXi out(static_cast<Eigen::Index>(records_.size()),
                      static_cast<Eigen::Index>(schema_.size()));
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& labels = records_[i].labels;
    for (std::size_t j = 0; j < schema_.size(); ++j) {
      const Label l = j < labels.size() ? labels[j] : Label::missing;
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<int>(l);
    }
  }
  return out;
}

void Cohort::set_features(Eigen::MatrixXd features) {
  if (features.rows() != static_cast<Eigen::Index>(records_.size())) {
    throw InputError("feature rows do not match cohort size");
  }
  features_ = std::move(features);
}

// ---------------------------------------------------------------------------

namespace {

std::string where(std::string_view origin, std::size_t line, std::size_t col,
                  std::string_view column_name) {
  std::ostringstream ss;
  ss << origin << ":" << line << ": column " << col << " (" << column_name
     << ")";
  return ss.str();
}

void check_width(const CsvTable& t, std::size_t row, std::string_view origin) {
  if (t.rows[row].size() != t.header.size()) {
    throw InputError(std::string(origin) + ":" +
                     std::to_string(t.line_numbers[row]) + ": expected " +
                     std::to_string(t.header.size()) + " fields, found " +
                     std::to_string(t.rows[row].size()));
  }
}

Cohort parse_demographics(const CsvTable& t, std::string_view origin) {
  const std::vector<std::string> expected = {"study_id", "sex", "age", "race"};
  if (t.header != expected) {
    throw InputError(std::string(origin) +
                     ":1: demographics header must be study_id,sex,age,race");
  }
  std::vector<StudyRecord> records;
  records.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    check_width(t, r, origin);
    const auto& row = t.rows[r];
    const std::size_t line = t.line_numbers[r];
    StudyRecord rec;
    rec.study_id = row[0];
    if (rec.study_id.empty()) {
      throw InputError(where(origin, line, 1, "study_id") + ": empty study_id");
    }
    Demographics d;
    try {
      d.sex = parse_sex(row[1]);
    } catch (const InputError& e) {
      throw InputError(where(origin, line, 2, "sex") + ": " + e.what());
    }
    long long age = 0;
    if (!parse_int(row[2], age)) {
      throw InputError(where(origin, line, 3, "age") + ": not an integer: '" +
                       row[2] + "'");
    }
    if (age < 0 || age > kMaxAge) {
      throw InputError(where(origin, line, 3, "age") + ": age " + row[2] +
                       " outside [0, " + std::to_string(kMaxAge) + "]");
    }
    d.age = static_cast<int>(age);
    if (!row[3].empty()) {
      try {
        d.race = parse_race(row[3]);
      } catch (const InputError& e) {
        throw InputError(where(origin, line, 4, "race") + ": " + e.what());
      }
    }
    rec.demographics = d;
    records.push_back(std::move(rec));
  }
  try {
    return Cohort(LabelSchema{}, std::move(records));
  } catch (const InputError& e) {
    throw InputError(std::string(origin) + ": " + e.what());
  }
}

Cohort parse_label_like(const CsvTable& t, TableKind kind,
                        std::string_view origin, const IngestOptions& options) {
  if (t.header.size() < 2 || t.header[0] != "study_id") {
    throw InputError(std::string(origin) +
                     ":1: header must be study_id,<label1>,...");
  }
  LabelSchema schema;
  try {
    schema = LabelSchema(
        std::vector<std::string>(t.header.begin() + 1, t.header.end()));
  } catch (const InputError& e) {
    throw InputError(std::string(origin) + ":1: " + e.what());
  }
  const std::size_t width = schema.size();
  std::vector<StudyRecord> records;
  records.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    check_width(t, r, origin);
    const auto& row = t.rows[r];
    const std::size_t line = t.line_numbers[r];
    StudyRecord rec;
    rec.study_id = row[0];
    if (rec.study_id.empty()) {
      throw InputError(where(origin, line, 1, "study_id") + ": empty study_id");
    }
    if (kind == TableKind::labels) {
      rec.labels.resize(width);
      for (std::size_t j = 0; j < width; ++j) {
        const std::string& tok = row[j + 1];
        Label l;
        if (tok.empty()) {
          l = Label::missing;
        } else if (tok == "1" || tok == "1.0") {
          l = Label::positive;
        } else if (tok == "0" || tok == "0.0") {
          l = Label::negative;
        } else if ((tok == "-1" || tok == "-1.0") && options.uncertain_as) {
          l = *options.uncertain_as;
        } else {
          throw InputError(where(origin, line, j + 2, schema.name(j)) +
                           ": invalid label token '" + tok +
                           "' (expected 0, 1 or empty)");
        }
        rec.labels[j] = l;
      }
    } else {
      Eigen::VectorXd scores(static_cast<Eigen::Index>(width));
      for (std::size_t j = 0; j < width; ++j) {
        double v = 0.0;
        if (!parse_double(row[j + 1], v) || !std::isfinite(v)) {
          throw InputError(where(origin, line, j + 2, schema.name(j)) +
                           ": not a number: '" + row[j + 1] + "'");
        }
        if (v < 0.0 || v > 1.0) {
          throw InputError(where(origin, line, j + 2, schema.name(j)) +
                           ": score " + row[j + 1] + " outside [0, 1]");
        }
        scores[static_cast<Eigen::Index>(j)] = v;
      }
      rec.scores = std::move(scores);
    }
    records.push_back(std::move(rec));
  }
  try {
    return Cohort(std::move(schema), std::move(records));
  } catch (const InputError& e) {
    throw InputError(std::string(origin) + ": " + e.what());
  }
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i]))
         << (8 * i);
  }
  return v;
}

}  // namespace

Cohort parse_table(std::string_view text, TableKind kind,
                   std::string_view origin, const IngestOptions& options) {
  const CsvTable t = parse_csv(text, origin);
  if (kind == TableKind::demographics) return parse_demographics(t, origin);
  return parse_label_like(t, kind, origin, options);
}

Cohort ingest_table(const std::filesystem::path& path, TableKind kind,
                    const IngestOptions& options) {
  return parse_table(read_file(path), kind, path.string(), options);
}

std::string serialize_table(const Cohort& cohort, TableKind kind) {
  std::string out;
  if (kind == TableKind::demographics) {
    out = "study_id,sex,age,race\n";
    for (const auto& rec : cohort.records()) {
      if (!rec.demographics) {
        throw InputError("study '" + rec.study_id + "' has no demographics");
      }
      const auto& d = *rec.demographics;
      out += csv_line({rec.study_id, std::string(to_string(d.sex)),
                       std::to_string(d.age),
                       d.race ? std::string(to_string(*d.race)) : ""});
    }
    return out;
  }
  std::vector<std::string> header = {"study_id"};
  for (const auto& n : cohort.schema().names()) header.push_back(n);
  out = csv_line(header);
  for (const auto& rec : cohort.records()) {
    std::vector<std::string> row = {rec.study_id};
    for (std::size_t j = 0; j < cohort.schema().size(); ++j) {
      if (kind == TableKind::labels) {
        const Label l = rec.labels.at(j);
        row.push_back(l == Label::missing ? "" : l == Label::positive ? "1" : "0");
      } else {
        if (!rec.scores) {
          throw InputError("study '" + rec.study_id + "' has no scores");
        }
        row.push_back(format_double((*rec.scores)[static_cast<Eigen::Index>(j)]));
      }
    }
    out += csv_line(row);
  }
  return out;
}

// ---------------------------------------------------------------------------

EmbeddingMatrix parse_embeddings(std::string_view bytes,
                                 std::string_view origin) {
  const std::string o(origin);
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RAEM") {
    throw InputError(o + ": not an embeddings file (missing RAEM header)");
  }
  const std::uint32_t rows = get_u32(bytes, 4);
  const std::uint32_t cols = get_u32(bytes, 8);
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  const std::size_t payload = count * 4;
  if (bytes.size() - 12 < payload) {
    throw InputError(o + ": truncated payload: header declares " +
                     std::to_string(rows) + "x" + std::to_string(cols) + " (" +
                     std::to_string(count) + " values) but only " +
                     std::to_string((bytes.size() - 12) / 4) + " present");
  }
  EmbeddingMatrix m;
  m.values.resize(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const std::uint32_t raw =
          get_u32(bytes, 12 + (static_cast<std::size_t>(r) * cols + c) * 4);
      const float v = std::bit_cast<float>(raw);
      if (!std::isfinite(v)) {
        throw InputError(o + ": non-finite value at row " + std::to_string(r) +
                         ", col " + std::to_string(c));
      }
      m.values(r, c) = static_cast<double>(v);
    }
  }
  std::string_view ids = bytes.substr(12 + payload);
  std::size_t start = 0;
  while (start < ids.size()) {
    std::size_t nl = ids.find('\n', start);
    if (nl == std::string_view::npos) nl = ids.size();
    std::string_view id = ids.substr(start, nl - start);
    if (!id.empty() && id.back() == '\r') id.remove_suffix(1);
    m.row_ids.emplace_back(id);
    start = nl + 1;
  }
  if (m.row_ids.size() != rows) {
    throw InputError(o + ": header declares " + std::to_string(rows) +
                     " rows but " + std::to_string(m.row_ids.size()) +
                     " row ids follow the payload");
  }
  std::set<std::string_view> seen;
  for (const auto& id : m.row_ids) {
    if (id.empty()) throw InputError(o + ": empty row id");
    if (!seen.insert(id).second) {
      throw InputError(o + ": duplicate row id '" + id + "'");
    }
  }
  return m;
}

EmbeddingMatrix ingest_embeddings(const std::filesystem::path& path) {
  return parse_embeddings(read_file(path), path.string());
}

std::string serialize_embeddings(const EmbeddingMatrix& m) {
  if (m.row_ids.size() != static_cast<std::size_t>(m.rows())) {
    throw InputError("embedding matrix rows do not match row ids");
  }
  std::string out = "RAEM";
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m.values(r, c))));
    }
  }
  for (const auto& id : m.row_ids) {
    out += id;
    out.push_back('\n');
  }
  return out;
}

// ---------------------------------------------------------------------------

Cohort merge_demographics(const Cohort& labels, const Cohort& demographics) {
  std::vector<StudyRecord> out = labels.records();
  std::vector<std::string> missing;
  for (auto& rec : out) {
    auto idx = demographics.find(rec.study_id);
    if (!idx) {
      missing.push_back(rec.study_id);
      continue;
    }
    rec.demographics = demographics[*idx].demographics;
  }
  if (!missing.empty()) {
    std::string msg = "studies without demographics:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw InputError(msg);
  }
  Cohort merged(labels.schema(), std::move(out));
  if (labels.features()) merged.set_features(*labels.features());
  return merged;
}

Cohort build_cohort(const Cohort& records, const Cohort& predictions,
                    const EmbeddingMatrix* embeddings) {
  if (!(records.schema() == predictions.schema())) {
    throw InputError("label-schema mismatch: predictions declare " +
                     std::to_string(predictions.schema().size()) +
                     " labels, records declare " +
                     std::to_string(records.schema().size()) +
                     " (names and order must agree)");
  }
  std::vector<std::string> orphans;
  for (const auto& p : predictions.records()) {
    if (!records.find(p.study_id)) orphans.push_back(p.study_id);
  }
  if (!orphans.empty()) {
    std::sort(orphans.begin(), orphans.end());
    std::string msg = "prediction ids absent from records:";
    for (std::size_t i = 0; i < orphans.size() && i < 20; ++i) msg += " " + orphans[i];
    if (orphans.size() > 20) msg += " ...";
    throw InputError(msg);
  }
  std::vector<StudyRecord> out = records.records();
  for (auto& rec : out) {
    if (auto idx = predictions.find(rec.study_id)) {
      rec.scores = predictions[*idx].scores;
    }
  }
  Cohort joined(records.schema(), std::move(out));
  if (embeddings) {
    std::unordered_map<std::string_view, Eigen::Index> rows;
    for (std::size_t i = 0; i < embeddings->row_ids.size(); ++i) {
      rows.emplace(embeddings->row_ids[i], static_cast<Eigen::Index>(i));
    }
    Eigen::MatrixXd features(static_cast<Eigen::Index>(joined.size()),
                             embeddings->cols());
    for (std::size_t i = 0; i < joined.size(); ++i) {
      auto it = rows.find(joined[i].study_id);
      if (it == rows.end()) {
        throw InputError("study '" + joined[i].study_id +
                         "' has no embedding row");
      }
      features.row(static_cast<Eigen::Index>(i)) = embeddings->values.row(it->second);
    }
    joined.set_features(std::move(features));
  }
  return joined;
}

Cohort scored_subset(const Cohort& cohort) {
  std::vector<StudyRecord> out;
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    if (cohort[i].scores) {
      out.push_back(cohort[i]);
      rows.push_back(static_cast<Eigen::Index>(i));
    }
  }
  Cohort sub(cohort.schema(), std::move(out));
  if (cohort.features()) sub.set_features((*cohort.features())(rows, Eigen::all));
  return sub;
}

}  // namespace radaudit
