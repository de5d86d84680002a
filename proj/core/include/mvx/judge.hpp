#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvx/eval.hpp"

namespace mvx {

struct JudgeEndpoint {
  std::string url;  // http://host[:port]/path
  std::string model = "judge";
  int attempts = 3;
  std::chrono::milliseconds backoff{100};  // doubled after each failed attempt
  std::chrono::milliseconds timeout{10000};
  int concurrency = 4;

  // Throws ConfigError on a malformed url or non-positive limits.
  void validate() const;
};

inline constexpr std::string_view kJudgePromptVersion = "mvx-judge-v1";

// The rubric prompt posted for one record.
std::string judge_prompt(const QARecord& record);
// The JSON request body: {"model", "temperature": 0, "messages": [...]}.
std::string judge_request_body(const QARecord& record, const JudgeEndpoint& endpoint);

// Accepts {"score": n}, an OpenAI-style {"choices":[{"message":{"content": "n"}}]},
// a bare JSON number, or a plain-text body. The score text must be a single
// integer in 1..5 after trimming; anything else yields nullopt.
std::optional<int> parse_judge_reply(std::string_view body);

// One record, with retries. Network failures and unparseable replies yield
// nullopt after the last attempt; a score is never invented.
std::optional<int> judge_score(const QARecord& record, const JudgeEndpoint& endpoint);

struct JudgeBatchResult {
  std::vector<std::optional<int>> scores;  // aligned with the input records
  std::size_t scored = 0;
  std::size_t missing = 0;
};

// Scores records with at most endpoint.concurrency requests in flight.
JudgeBatchResult judge_batch(const std::vector<QARecord>& records, const JudgeEndpoint& endpoint);

}  // namespace mvx
