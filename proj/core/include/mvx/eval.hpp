#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mvx {

using Tokens = std::vector<std::string>;

// Lowercase, split on whitespace, strip trailing punctuation from each token;
// tokens that end up empty are dropped.
Tokens tokenize(std::string_view text);

enum class QuestionLevel { Global, Allocentric, Egocentric };
// Weather conditions CL FG NT RN SN, then sensor failures MB OE UE LJ EL.
enum class Condition { CL, FG, NT, RN, SN, MB, OE, UE, LJ, EL };

inline constexpr Condition kWeatherConditions[] = {Condition::CL, Condition::FG, Condition::NT,
                                                   Condition::RN, Condition::SN};
inline constexpr Condition kAllConditions[] = {Condition::CL, Condition::FG, Condition::NT,
                                               Condition::RN, Condition::SN, Condition::MB,
                                               Condition::OE, Condition::UE, Condition::LJ,
                                               Condition::EL};

std::string_view to_string(QuestionLevel level);
std::string_view to_string(Condition condition);
QuestionLevel parse_level(std::string_view name);
Condition parse_condition(std::string_view name);
bool is_weather(Condition c);

struct QARecord {
  std::string id;
  std::string scene_id;
  QuestionLevel level = QuestionLevel::Global;
  Condition condition = Condition::CL;
  std::string question;
  std::string reference;
  std::string prediction;

  // Throws InputError on an empty question or reference.
  void validate() const;
};

struct BleuStats {
  double precisions[4] = {0, 0, 0, 0};  // clipped n-gram precisions, n = 1..4
  double brevity_penalty = 0.0;
  double score = 0.0;
};

// Sentence-level BLEU-4, no smoothing. The closest reference length (shorter
// on ties) drives the brevity penalty. An empty prediction scores 0.
BleuStats bleu4_stats(const Tokens& prediction, const std::vector<Tokens>& references);
double bleu4(const Tokens& prediction, const std::vector<Tokens>& references);
// Corpus-level BLEU-4: clipped counts and lengths pooled before the ratio.
double corpus_bleu4(const std::vector<Tokens>& predictions,
                    const std::vector<std::vector<Tokens>>& references);

inline constexpr double kRougeBeta = 1.2;
std::size_t lcs_length(const Tokens& a, const Tokens& b);
// LCS F-measure (1 + b^2) P R / (R + b^2 P) with b = 1.2.
double rouge_l(const Tokens& prediction, const Tokens& reference);

inline constexpr double kMeteorAlpha = 0.9;
inline constexpr double kMeteorBeta = 3.0;
inline constexpr double kMeteorGamma = 0.5;

struct MeteorStats {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
  double score = 0.0;
};

// Exact-match METEOR without stemming or synonym stages. The i-th occurrence
// of a word in the prediction aligns to its i-th occurrence in the reference.
//   Fmean = P R / (alpha P + (1 - alpha) R)
//   score = Fmean * (1 - gamma (chunks / matches)^beta)
MeteorStats meteor_stats(const Tokens& prediction, const Tokens& reference);
double meteor(const Tokens& prediction, const Tokens& reference);

struct CiderResult {
  std::vector<double> per_item;  // 10 * mean_n mean_refs cosine, n = 1..4
  double mean_x100 = 0.0;        // corpus mean of per_item, scaled by 100
};

// TF-IDF n-gram cosine (n = 1..4). Document frequencies come from the
// reference sets of the corpus itself; idf = ln(N) - ln(max(1, df)).
// Throws InputError for a corpus of fewer than two items.
CiderResult cider(const std::vector<Tokens>& predictions,
                  const std::vector<std::vector<Tokens>>& references);

// Bag-of-words TF-IDF cosine, a stand-in for sentence-embedding similarity.
// idf = ln((1 + N) / (1 + df)) + 1, so every seen term carries positive weight.
class TfidfModel {
 public:
  explicit TfidfModel(const std::vector<Tokens>& documents);
  double idf(const std::string& term) const;
  double similarity(const Tokens& a, const Tokens& b) const;

 private:
  std::unordered_map<std::string, std::size_t> df_;
  std::size_t documents_ = 0;
};

// Similarity with the IDF fitted on the pair itself.
double sim(const Tokens& prediction, const Tokens& reference);

// (s - 1) / 4 * 100 for a rubric score s in [1, 5]; InputError otherwise.
double normalize_judge_score(double score);
// Mean of the normalized scores; 0 for an empty batch.
double normalize_judge_scores(const std::vector<double>& scores);

// Average ranks for ties, 1-based.
std::vector<double> average_ranks(const std::vector<double>& values);
double pearson(const std::vector<double>& x, const std::vector<double>& y);
// Pearson correlation of average-ranked data. Needs equal lengths >= 3.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct MetricCell {
  std::size_t count = 0;
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
  double cider = 0.0;  // corpus mean x 100 (0 when fewer than two items)
  double sim = 0.0;
  std::optional<double> judge;  // normalized 0..100 over scored items
  std::size_t judge_scored = 0;
  std::size_t judge_missing = 0;
};

struct MetricReport {
  MetricCell overall;
  std::map<Condition, MetricCell> by_condition;
  std::map<QuestionLevel, MetricCell> by_level;
  std::vector<std::string> unresolved_ids;
  std::size_t total = 0;
};

// Scores every record; judge_scores (optional, aligned with records) holds
// raw 1..5 rubric scores or nullopt for missing ones.
MetricReport compute_metrics(const std::vector<QARecord>& records,
                             const std::vector<std::optional<int>>& judge_scores = {});

}  // namespace mvx
