#include "radaudit/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include <openssl/evp.h>
#include <unistd.h>

#include "radaudit/csv.hpp"
#include "radaudit/error.hpp"

namespace radaudit {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

InputDigest digest_file(const std::filesystem::path& path) {
  return {path.string(), sha256_hex(read_file(path))};
}

nlohmann::json round_floats(const nlohmann::json& value, int digits) {
  switch (value.type()) {
    case nlohmann::json::value_t::number_float: {
      const double v = value.get<double>();
      if (!std::isfinite(v)) return nullptr;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
      double rounded = 0.0;
      parse_double(buf, rounded);
      return rounded == 0.0 ? 0.0 : rounded;  // no "-0.0"
    }
    case nlohmann::json::value_t::array: {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& v : value) out.push_back(round_floats(v, digits));
      return out;
    }
    case nlohmann::json::value_t::object: {
      nlohmann::json out = nlohmann::json::object();
      for (const auto& [k, v] : value.items()) out[k] = round_floats(v, digits);
      return out;
    }
    default:
      return value;
  }
}

std::string emit_report(const AuditReport& report) {
  nlohmann::json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["tool"] = {{"name", "radaudit"}, {"version", std::string(kToolVersion)}};
  doc["command"] = report.command;
  doc["config"] = report.config;
  auto inputs = nlohmann::json::array();
  for (const auto& in : report.inputs) {
    inputs.push_back({{"path", in.path}, {"sha256", in.sha256}});
  }
  doc["inputs"] = std::move(inputs);
  doc["sections"] = report.sections;
  doc["warnings"] = report.warnings;
  return round_floats(doc).dump(2) + "\n";
}

namespace {

std::string scalar_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  if (v.is_number_float()) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", kReportSignificantDigits, v.get<double>());
    return buf;
  }
  return v.dump();
}

bool is_table(const nlohmann::json& v) {
  if (!v.is_array() || v.empty()) return false;
  for (const auto& e : v) {
    if (!e.is_object()) return false;
  }
  return true;
}

void collect_tables(const nlohmann::json& node, const std::string& pointer,
                    std::vector<std::pair<std::string, const nlohmann::json*>>& out) {
  if (is_table(node)) {
    out.emplace_back(pointer, &node);
    return;
  }
  if (node.is_object()) {
    for (const auto& [k, v] : node.items()) collect_tables(v, pointer + "/" + k, out);
  }
}

}  // namespace

std::string flatten_report_csv(const AuditReport& report) {
  struct Row {
    std::string section;
    std::string table;
    const nlohmann::json* fields;
  };
  std::vector<Row> rows;
  std::set<std::string> columns;
  const nlohmann::json rounded = round_floats(report.sections);
  for (const auto& [section, body] : rounded.items()) {
    std::vector<std::pair<std::string, const nlohmann::json*>> tables;
    collect_tables(body, "", tables);
    for (const auto& [pointer, table] : tables) {
      for (const auto& row : *table) {
        rows.push_back({section, pointer.empty() ? "/" : pointer, &row});
        for (const auto& [k, v] : row.items()) {
          if (!v.is_structured()) columns.insert(k);
        }
      }
    }
  }
  std::vector<std::string> header = {"section", "table"};
  header.insert(header.end(), columns.begin(), columns.end());
  std::string out = csv_line(header);
  for (const auto& r : rows) {
    std::vector<std::string> line = {r.section, r.table};
    for (const auto& c : columns) {
      auto it = r.fields->find(c);
      line.push_back(it == r.fields->end() || it->is_structured() ? "" : scalar_text(*it));
    }
    out += csv_line(line);
  }
  return out;
}

AuditReport parse_report(std::string_view text, std::string_view origin) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string(origin) + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("sections") || !doc["sections"].is_object()) {
    throw InputError(std::string(origin) + ": not a radaudit report");
  }
  AuditReport r;
  r.command = doc.value("command", std::string{});
  r.config = doc.value("config", nlohmann::json::object());
  for (const auto& in : doc.value("inputs", nlohmann::json::array())) {
    r.inputs.push_back({in.value("path", std::string{}), in.value("sha256", std::string{})});
  }
  r.sections = doc["sections"];
  for (const auto& w : doc.value("warnings", nlohmann::json::array())) {
    r.warnings.push_back(w.get<std::string>());
  }
  return r;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write file: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw InputError("error writing file: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InputError("cannot move output into place: " + path.string() + ": " + ec.message());
  }
}

}  // namespace radaudit
