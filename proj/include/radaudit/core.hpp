#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace radaudit {

enum class Sex { male, female };
// Declaration order is the canonical enumeration order used in reports.
enum class Race { asian, black, hispanic, white };

inline constexpr std::array<Sex, 2> kAllSexes = {Sex::male, Sex::female};
inline constexpr std::array<Race, 4> kAllRaces = {Race::asian, Race::black,
                                                  Race::hispanic, Race::white};
inline constexpr int kMaxAge = 130;

// "male" / "female"
std::string_view to_string(Sex sex);
// "Asian" / "Black" / "Hispanic" / "White"
std::string_view to_string(Race race);
Sex parse_sex(std::string_view token);
Race parse_race(std::string_view token);

struct Demographics {
  Sex sex = Sex::male;
  int age = 0;
  std::optional<Race> race;  // absent for datasets without race metadata

  friend bool operator==(const Demographics&, const Demographics&) = default;
};

// Throws InputError unless age is in [0, kMaxAge].
void validate(const Demographics& d);

// Age bands used for balance accounting and the sex x age fairness axis.
// Left-inclusive, right-exclusive: [18,40), [40,60), [60,80), [80,inf).
enum class AgeBin { under18, from18to40, from40to60, from60to80, from80 };
inline constexpr std::array<AgeBin, 5> kAllAgeBins = {
    AgeBin::under18, AgeBin::from18to40, AgeBin::from40to60, AgeBin::from60to80,
    AgeBin::from80};
AgeBin age_bin(int age);
// "<18", "18-40", "40-60", "60-80", "80+"
std::string_view to_string(AgeBin bin);

// Ordered list of label names. Declared once per cohort.
class LabelSchema {
 public:
  LabelSchema() = default;
  explicit LabelSchema(std::vector<std::string> names);

  // The 13 findings plus "No Finding" emitted by the CheXpert labeler.
  static LabelSchema chexpert14();
  // Labels shared by all evaluation datasets.
  static LabelSchema common8();

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  friend bool operator==(const LabelSchema& a, const LabelSchema& b) {
    return a.names_ == b.names_;
  }

 private:
  std::vector<std::string> names_;
};

inline const std::string kNoFinding = "No Finding";

enum class Label : std::int8_t { negative = 0, positive = 1, missing = -1 };
using LabelVector = std::vector<Label>;

struct StudyRecord {
  std::string study_id;
  std::optional<Demographics> demographics;
  LabelVector labels;                    // aligned to the cohort schema
  std::optional<Eigen::VectorXd> scores;  // aligned to the cohort schema
};

// Records in input order plus an id index.
class Cohort {
 public:
  Cohort() = default;
  Cohort(LabelSchema schema, std::vector<StudyRecord> records);

  const LabelSchema& schema() const { return schema_; }
  const std::vector<StudyRecord>& records() const { return records_; }
  const StudyRecord& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::optional<std::size_t> find(std::string_view study_id) const;

  // n x L matrix of scores; InputError if any record lacks scores.
  Eigen::MatrixXd score_matrix() const;
  // n x L matrix with 1 / 0 / -1 (missing).
  Eigen::MatrixXi label_matrix() const;

  // Feature rows aligned to records(), when embeddings were joined.
  const std::optional<Eigen::MatrixXd>& features() const { return features_; }
  void set_features(Eigen::MatrixXd features);

 private:
  LabelSchema schema_;
  std::vector<StudyRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
  std::optional<Eigen::MatrixXd> features_;
};

enum class TableKind { demographics, labels, predictions };

struct IngestOptions {
  // How to read the labeler's "uncertain" token (-1). Unset: reject it.
  std::optional<Label> uncertain_as;
};

// Parses a CSV table of the given kind. `origin` names the source in errors.
Cohort parse_table(std::string_view text, TableKind kind,
                   std::string_view origin, const IngestOptions& options = {});
Cohort ingest_table(const std::filesystem::path& path, TableKind kind,
                    const IngestOptions& options = {});
// Canonical CSV text for the fields the table kind carries.
std::string serialize_table(const Cohort& cohort, TableKind kind);

struct EmbeddingMatrix {
  Eigen::MatrixXd values;  // rows x cols
  std::vector<std::string> row_ids;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

// Binary layout: "RAEM", u32 rows, u32 cols (little-endian), rows*cols f32
// little-endian row-major values, then newline-separated UTF-8 row ids.
EmbeddingMatrix parse_embeddings(std::string_view bytes,
                                 std::string_view origin);
EmbeddingMatrix ingest_embeddings(const std::filesystem::path& path);
std::string serialize_embeddings(const EmbeddingMatrix& m);

// Attaches demographics to labeled records by study_id. Every labeled record
// must have a demographics row.
Cohort merge_demographics(const Cohort& labels, const Cohort& demographics);

// Attaches prediction scores (and optionally embedding rows) to records.
// Prediction ids must be a subset of record ids and share the label schema.
// Output keeps record order, so the result does not depend on the order of
// prediction rows.
Cohort build_cohort(const Cohort& records, const Cohort& predictions,
                    const EmbeddingMatrix* embeddings = nullptr);

// Subset of records that carry scores, in order.
Cohort scored_subset(const Cohort& cohort);

}  // namespace radaudit
