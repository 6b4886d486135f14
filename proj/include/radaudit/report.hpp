#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace radaudit {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;
inline constexpr int kReportSignificantDigits = 6;

struct InputDigest {
  std::string path;
  std::string sha256;
};

std::string sha256_hex(std::string_view bytes);
InputDigest digest_file(const std::filesystem::path& path);

// Everything a run reports. Sections are free-form JSON objects keyed by
// section name ("metrics", "fairness", ...); tables inside them are arrays of
// flat objects.
struct AuditReport {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::vector<InputDigest> inputs;
  nlohmann::json sections = nlohmann::json::object();
  std::vector<std::string> warnings;
};

// Rounds every floating-point number to `digits` significant digits.
nlohmann::json round_floats(const nlohmann::json& value,
                            int digits = kReportSignificantDigits);

// JSON document with sorted keys, rounded floats and the schema version.
std::string emit_report(const AuditReport& report);

// One CSV row per element of every array-of-objects table in the sections:
// columns are section, table (JSON pointer within the section) and the
// union of the rows' scalar fields.
std::string flatten_report_csv(const AuditReport& report);

// Reads a document written by emit_report.
AuditReport parse_report(std::string_view text, std::string_view origin);

// Writes through a temporary file in the same directory and renames it into
// place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace radaudit
