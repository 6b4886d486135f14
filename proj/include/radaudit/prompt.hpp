#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "radaudit/core.hpp"
#include "radaudit/error.hpp"

namespace radaudit {

// A rendered conditioning prompt and the demographics it asks for.
struct PromptSpec {
  std::string prompt_text;
  Demographics target;
  std::string source_impression_id;
  int source_age = 0;

  friend bool operator==(const PromptSpec&, const PromptSpec&) = default;
};

using Tokenizer = std::function<std::size_t(std::string_view)>;
// (instruction, text) -> shortened text.
using Summarizer =
    std::function<std::string(std::string_view instruction, std::string_view text)>;

// Whitespace-delimited token count. An approximation of the text encoder's
// tokenizer, which usually yields more tokens than words.
std::size_t whitespace_token_count(std::string_view text);

struct TokenBudget {
  std::size_t limit = 77;
  Tokenizer tokenizer = whitespace_token_count;
};

// Instruction handed to the summarizer when a prompt is over budget.
inline constexpr std::string_view kSummarizeInstruction =
    "Your task is to summarize this radiology report within 200 characters or "
    "less. Your response must be concise, truthful, and keep all relevant "
    "medical information.";

// Keeps the first `max_chars` characters, cut back to a word boundary when
// one exists. Deterministic stand-in for a hosted language model.
Summarizer truncating_summarizer(std::size_t max_chars = 200);

// "{age} year old {Race} {sex}. {impression}". Race is required.
std::string render_prompt(const Demographics& demographics,
                          std::string_view impression);

struct ParsedPrompt {
  Demographics demographics;
  std::string impression;
};

// Inverse of render_prompt; InputError when the text does not follow the
// template.
ParsedPrompt parse_prompt(std::string_view prompt_text);

// The eight sex x race variants of one impression, each with an age drawn
// uniformly from the integers in [source_age - 5, source_age + 5] (clamped to
// [0, kMaxAge]). Deterministic in (impression_id, seed).
std::vector<PromptSpec> expand_demographics(std::string_view impression_id,
                                            std::string_view impression,
                                            int source_age, std::uint64_t seed);

inline constexpr int kAgeJitterYears = 5;

// Returns the prompt unchanged when within budget. Otherwise the impression
// is replaced by the summarizer's output and the result re-checked; still
// over budget -> OverBudgetError.
std::string enforce_token_budget(std::string_view prompt,
                                 const TokenBudget& budget,
                                 const Summarizer& summarizer);

class OverBudgetError : public InputError {
 public:
  OverBudgetError(std::size_t original_tokens, std::size_t summarized_tokens,
                  std::size_t limit);
  std::size_t original_tokens() const { return original_; }
  std::size_t summarized_tokens() const { return summarized_; }

 private:
  std::size_t original_;
  std::size_t summarized_;
};

// One JSON object per line: prompt_text, sex, race, age,
// source_impression_id, source_age.
std::string prompts_to_jsonl(const std::vector<PromptSpec>& prompts);
std::vector<PromptSpec> parse_prompts_jsonl(std::string_view text,
                                            std::string_view origin);

}  // namespace radaudit
