#include "radaudit/prompt.hpp"

#include <algorithm>
#include <cctype>

#include "json.hpp"
#include "radaudit/csv.hpp"
#include "radaudit/random.hpp"

namespace radaudit {

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

Summarizer truncating_summarizer(std::size_t max_chars) {
  return [max_chars](std::string_view, std::string_view text) {
    if (text.size() <= max_chars) return std::string(text);
    std::size_t cut = max_chars;
    // never split a UTF-8 sequence
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    if (!std::isspace(static_cast<unsigned char>(text[cut]))) {
      const std::size_t space = text.substr(0, cut).find_last_of(" \t\n");
      if (space != std::string_view::npos && space > 0) cut = space;
    }
    std::string out(text.substr(0, cut));
    while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) {
      out.pop_back();
    }
    return out;
  };
}

std::string render_prompt(const Demographics& demographics,
                          std::string_view impression) {
  validate(demographics);
  if (impression.empty()) throw InputError("empty impression");
  if (!demographics.race) {
    throw InputError("race is required to render a generation prompt");
  }
  std::string out = std::to_string(demographics.age);
  out += " year old ";
  out += to_string(*demographics.race);
  out += ' ';
  out += to_string(demographics.sex);
  out += ". ";
  out += impression;
  return out;
}

ParsedPrompt parse_prompt(std::string_view text) {
  auto fail = [&](const char* why) {
    return InputError("prompt does not follow the template (" +
                      std::string(why) + "): '" +
                      std::string(text.substr(0, 60)) + "'");
  };
  std::size_t digits = 0;
  while (digits < text.size() && std::isdigit(static_cast<unsigned char>(text[digits]))) {
    ++digits;
  }
  long long age = 0;
  if (digits == 0 || !parse_int(text.substr(0, digits), age)) throw fail("age");
  std::string_view rest = text.substr(digits);
  constexpr std::string_view kYearOld = " year old ";
  if (!rest.starts_with(kYearOld)) throw fail("'year old'");
  rest.remove_prefix(kYearOld.size());
  const std::size_t race_end = rest.find(' ');
  if (race_end == std::string_view::npos) throw fail("race");
  ParsedPrompt out;
  out.demographics.race = parse_race(rest.substr(0, race_end));
  rest.remove_prefix(race_end + 1);
  const std::size_t sex_end = rest.find(". ");
  if (sex_end == std::string_view::npos) throw fail("sex");
  out.demographics.sex = parse_sex(rest.substr(0, sex_end));
  rest.remove_prefix(sex_end + 2);
  if (rest.empty()) throw fail("impression");
  if (age > kMaxAge) throw fail("age range");
  out.demographics.age = static_cast<int>(age);
  out.impression = std::string(rest);
  return out;
}

std::vector<PromptSpec> expand_demographics(std::string_view impression_id,
                                            std::string_view impression,
                                            int source_age, std::uint64_t seed) {
  if (source_age < 0 || source_age > kMaxAge) {
    throw InputError("source age " + std::to_string(source_age) + " outside [0, " +
                     std::to_string(kMaxAge) + "]");
  }
  Rng rng(derive_seed(seed, {fnv1a64(impression_id)}));
  const int lo = std::max(0, source_age - kAgeJitterYears);
  const int hi = std::min(kMaxAge, source_age + kAgeJitterYears);
  std::vector<PromptSpec> out;
  out.reserve(8);
  for (Sex sex : kAllSexes) {
    for (Race race : kAllRaces) {
      PromptSpec spec;
      spec.target = {sex, static_cast<int>(rng.uniform_int(lo, hi)), race};
      spec.prompt_text = render_prompt(spec.target, impression);
      spec.source_impression_id = std::string(impression_id);
      spec.source_age = source_age;
      out.push_back(std::move(spec));
    }
  }
  return out;
}

OverBudgetError::OverBudgetError(std::size_t original_tokens,
                                 std::size_t summarized_tokens,
                                 std::size_t limit)
    : InputError("prompt over token budget after summarization: " +
                 std::to_string(original_tokens) + " tokens before, " +
                 std::to_string(summarized_tokens) + " after, limit " +
                 std::to_string(limit)),
      original_(original_tokens),
      summarized_(summarized_tokens) {}

std::string enforce_token_budget(std::string_view prompt,
                                 const TokenBudget& budget,
                                 const Summarizer& summarizer) {
  if (budget.limit == 0) throw InputError("token budget must be positive");
  const std::size_t before = budget.tokenizer(prompt);
  if (before <= budget.limit) return std::string(prompt);
  if (!summarizer) throw InputError("prompt over budget and no summarizer bound");
  const ParsedPrompt parsed = parse_prompt(prompt);
  const std::string summary = summarizer(kSummarizeInstruction, parsed.impression);
  const std::string shortened = render_prompt(parsed.demographics, summary);
  const std::size_t after = budget.tokenizer(shortened);
  if (after > budget.limit) throw OverBudgetError(before, after, budget.limit);
  return shortened;
}

std::string prompts_to_jsonl(const std::vector<PromptSpec>& prompts) {
  std::string out;
  for (const auto& p : prompts) {
    nlohmann::ordered_json j;
    j["prompt_text"] = p.prompt_text;
    j["sex"] = to_string(p.target.sex);
    j["race"] = p.target.race ? nlohmann::ordered_json(std::string(to_string(*p.target.race)))
                              : nlohmann::ordered_json(nullptr);
    j["age"] = p.target.age;
    j["source_impression_id"] = p.source_impression_id;
    j["source_age"] = p.source_age;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<PromptSpec> parse_prompts_jsonl(std::string_view text,
                                            std::string_view origin) {
  std::vector<PromptSpec> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      PromptSpec p;
      p.prompt_text = j.at("prompt_text").get<std::string>();
      p.target.sex = parse_sex(j.at("sex").get<std::string>());
      if (!j.at("race").is_null()) p.target.race = parse_race(j.at("race").get<std::string>());
      p.target.age = j.at("age").get<int>();
      validate(p.target);
      p.source_impression_id = j.at("source_impression_id").get<std::string>();
      p.source_age = j.at("source_age").get<int>();
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace radaudit
