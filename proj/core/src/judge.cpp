#include "mvx/judge.hpp"

#include <httplib.h>

#include <atomic>
#include <cctype>
#include <charconv>
#include <json.hpp>
#include <regex>
#include <thread>

#include "mvx/error.hpp"

namespace mvx {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host:port
  std::string path;
};

std::optional<ParsedUrl> split_url(const std::string& url) {
  static const std::regex re(R"(^(http://[A-Za-z0-9.\-]+(:[0-9]+)?)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) return std::nullopt;
  return ParsedUrl{m[1].str(), m[3].matched ? m[3].str() : "/"};
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<int> parse_score_text(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  if (value < 1 || value > 5) return std::nullopt;
  return value;
}

std::optional<int> score_from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) {
    const auto v = j.get<long long>();
    if (v >= 1 && v <= 5) return static_cast<int>(v);
    return std::nullopt;
  }
  if (j.is_string()) return parse_score_text(j.get<std::string>());
  if (j.is_object()) {
    if (j.contains("score")) return score_from_json(j["score"]);
    if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
      const auto& choice = j["choices"][0];
      if (choice.contains("message") && choice["message"].contains("content")) {
        return score_from_json(choice["message"]["content"]);
      }
    }
  }
  return std::nullopt;
}

}  // namespace

void JudgeEndpoint::validate() const {
  if (!split_url(url)) throw ConfigError("judge url must look like http://host[:port]/path, got '" + url + "'");
  if (attempts < 1) throw ConfigError("judge attempts must be >= 1");
  if (concurrency < 1) throw ConfigError("judge concurrency must be >= 1");
  if (backoff.count() < 0 || timeout.count() <= 0) throw ConfigError("judge timings must be positive");
}

std::string judge_prompt(const QARecord& record) {
  std::string p;
  p += "You are grading an answer about a driving scene.\n";
  p += "Compare the candidate answer with the reference answer and rate the candidate\n";
  p += "on a scale from 1 to 5:\n";
  p += "5 = fully correct and complete\n";
  p += "4 = correct with minor omissions\n";
  p += "3 = partially correct\n";
  p += "2 = mostly incorrect\n";
  p += "1 = incorrect or irrelevant\n";
  p += "Reply with the single integer only.\n\n";
  p += "Question: " + record.question + "\n";
  p += "Reference answer: " + record.reference + "\n";
  p += "Candidate answer: " + record.prediction + "\n";
  return p;
}

std::string judge_request_body(const QARecord& record, const JudgeEndpoint& endpoint) {
  nlohmann::json body = {
      {"model", endpoint.model},
      {"temperature", 0},
      {"prompt_version", kJudgePromptVersion},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", judge_prompt(record)}}})},
  };
  return body.dump();
}

std::optional<int> parse_judge_reply(std::string_view body) {
  auto j = nlohmann::json::parse(body.begin(), body.end(), nullptr, false);
  if (!j.is_discarded()) return score_from_json(j);
  return parse_score_text(body);
}

std::optional<int> judge_score(const QARecord& record, const JudgeEndpoint& endpoint) {
  endpoint.validate();
  const auto url = *split_url(endpoint.url);
  const std::string body = judge_request_body(record, endpoint);
  auto delay = endpoint.backoff;
  for (int attempt = 0; attempt < endpoint.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Client client(url.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    auto res = client.Post(url.path, body, "application/json");
    if (!res || res->status != 200) continue;
    if (auto score = parse_judge_reply(res->body)) return score;
  }
  return std::nullopt;
}

JudgeBatchResult judge_batch(const std::vector<QARecord>& records, const JudgeEndpoint& endpoint) {
  endpoint.validate();
  JudgeBatchResult result;
  result.scores.resize(records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      try {
        result.scores[i] = judge_score(records[i], endpoint);
      } catch (const std::exception&) {
        result.scores[i] = std::nullopt;
      }
    }
  };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(endpoint.concurrency), records.size());
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (const auto& s : result.scores) (s ? result.scored : result.missing)++;
  return result;
}

}  // namespace mvx
