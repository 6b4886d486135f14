#include <gtest/gtest.h>

#include <filesystem>
#include <limits>

#include "radaudit/csv.hpp"
#include "radaudit/error.hpp"
#include "radaudit/report.hpp"

using namespace radaudit;

TEST(Report, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Report, RoundsAndNullsNonFinite) {
  nlohmann::json j = {{"a", 0.123456789}, {"b", std::numeric_limits<double>::quiet_NaN()},
                      {"c", 3}};
  const auto r = round_floats(j);
  EXPECT_DOUBLE_EQ(r["a"].get<double>(), 0.123457);
  EXPECT_TRUE(r["b"].is_null());
  EXPECT_EQ(r["c"], 3);
}

TEST(Report, EmitIsStableAndParses) {
  AuditReport rep;
  rep.command = "evaluate";
  rep.config = {{"zeta", 1}, {"alpha", 2}};
  rep.sections["metrics"] = {{"macro_auroc", 0.81234567},
                             {"per_label", {{{"label", "A"}, {"auroc", 0.5}}}}};
  rep.warnings = {"label B excluded"};
  const auto text = emit_report(rep);
  EXPECT_EQ(text, emit_report(rep));
  EXPECT_LT(text.find("alpha"), text.find("zeta"));
  const auto back = parse_report(text, "r.json");
  EXPECT_EQ(back.command, "evaluate");
  EXPECT_EQ(back.warnings, rep.warnings);
  EXPECT_THROW(parse_report("{}", "r.json"), InputError);
}

TEST(Report, CsvFlattensTables) {
  AuditReport rep;
  rep.command = "fairness";
  rep.sections["fairness"] = {
      {"subgroups", {{{"group", "Asian male"}, {"auroc", 0.8}},
                     {{"group", "Asian female"}, {"auroc", 0.7}, {"n", 4}}}}};
  const auto csv = parse_csv(flatten_report_csv(rep), "r.csv");
  EXPECT_EQ(csv.header, (std::vector<std::string>{"section", "table", "auroc", "group", "n"}));
  ASSERT_EQ(csv.rows.size(), 2u);
  EXPECT_EQ(csv.rows[0][1], "/subgroups");
  EXPECT_EQ(csv.rows[0][4], "");
}

TEST(Report, AtomicWrite) {
  const auto dir = std::filesystem::temp_directory_path() / "radaudit_report_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "out.json";
  write_file_atomic(path, "one");
  write_file_atomic(path, "two");
  EXPECT_EQ(read_file(path), "two");
  std::size_t files = 0;
  for ([[maybe_unused]] auto& e : std::filesystem::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 1u);
  std::filesystem::remove_all(dir);
}
