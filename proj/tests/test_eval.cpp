#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "mvx/error.hpp"
#include "mvx/eval.hpp"
#include "oracles.hpp"

using mvx::Condition;
using mvx::QuestionLevel;
using mvx::Tokens;

namespace {

Tokens tok(const char* s) { return mvx::tokenize(s); }

std::map<std::string, int> grams(const Tokens& t, std::size_t n) {
  std::map<std::string, int> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    std::string g;
    for (std::size_t j = i; j < i + n; ++j) g += t[j] + "\x1f";
    ++out[g];
  }
  return out;
}

// Corpus BLEU-4 from pooled clipped counts, single reference per item.
double bleu_oracle(const std::vector<Tokens>& preds, const std::vector<Tokens>& refs) {
  double match[4] = {}, total[4] = {}, c = 0, r = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    c += double(preds[i].size());
    r += double(refs[i].size());
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto pg = grams(preds[i], n), rg = grams(refs[i], n);
      for (const auto& [g, k] : pg) {
        total[n - 1] += k;
        auto it = rg.find(g);
        if (it != rg.end()) match[n - 1] += std::min(k, it->second);
      }
    }
  }
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    if (match[n] == 0) return 0.0;
    log_sum += std::log(match[n] / total[n]);
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / 4);
}

std::size_t lcs_oracle(const Tokens& a, const Tokens& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
  return t[a.size()][b.size()];
}

double rouge_oracle(const Tokens& p, const Tokens& r) {
  const double l = double(lcs_oracle(p, r));
  if (l == 0) return 0.0;
  const double P = l / double(p.size()), R = l / double(r.size()), b2 = 1.44;
  return (1 + b2) * P * R / (R + b2 * P);
}

// Plain TF-IDF CIDEr with single references.
std::vector<double> cider_oracle(const std::vector<Tokens>& preds, const std::vector<Tokens>& refs) {
  const double N = double(preds.size());
  std::vector<double> out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double total = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
      auto idf = [&](const std::string& g) {
        double df = 0;
        for (const auto& r : refs) df += grams(r, n).count(g) ? 1 : 0;
        return std::log(N) - std::log(std::max(1.0, df));
      };
      const auto pg = grams(preds[i], n), rg = grams(refs[i], n);
      double dot = 0, np = 0, nr = 0;
      for (const auto& [g, k] : pg) {
        const double w = k * idf(g);
        np += w * w;
        if (rg.count(g)) dot += w * rg.at(g) * idf(g);
      }
      for (const auto& [g, k] : rg) nr += std::pow(k * idf(g), 2);
      total += (np == 0 || nr == 0) ? 0.0 : dot / std::sqrt(np * nr);
    }
    out.push_back(10.0 * total / 4);
  }
  return out;
}

mvx::QARecord record(const char* id, QuestionLevel level, Condition c, const char* ref, const char* pred) {
  return {id, "scene", level, c, "what is ahead?", ref, pred};
}

}  // namespace

TEST(Tokenize, LowercasesSplitsAndStripsTrailingPunctuation) {
  EXPECT_EQ(tok("The Red  car, stops!"), (Tokens{"the", "red", "car", "stops"}));
  EXPECT_EQ(tok("  ... ok.\tyes?"), (Tokens{"ok", "yes"}));
  EXPECT_TRUE(tok("").empty());
}

TEST(Bleu, HandComputedFixture) {
  // the red car stops | the red car is stopping
  //   p1 = 3/4, p2 = 2/3, p3 = 1/2, p4 = 0/1, BP = exp(1 - 5/4)
  const auto s = mvx::bleu4_stats(tok("the red car stops"), {tok("the red car is stopping")});
  EXPECT_NEAR(s.precisions[0], 3.0 / 4, 1e-12);
  EXPECT_NEAR(s.precisions[1], 2.0 / 3, 1e-12);
  EXPECT_NEAR(s.precisions[2], 1.0 / 2, 1e-12);
  EXPECT_EQ(s.precisions[3], 0.0);
  EXPECT_NEAR(s.brevity_penalty, std::exp(1.0 - 5.0 / 4), 1e-12);
  EXPECT_EQ(s.score, 0.0);
}

TEST(Bleu, LongerCandidateHasNoPenalty) {
  // p = 5/6, 4/5, 3/4, 2/3, product 1/3
  EXPECT_NEAR(mvx::bleu4(tok("the red car is stopping now"), {tok("the red car is stopping")}),
              std::pow(1.0 / 3, 0.25), 1e-12);
}

TEST(Bleu, ClipsRepeatedWords) {
  const auto s = mvx::bleu4_stats(tok("the the the the"), {tok("the cat")});
  EXPECT_NEAR(s.precisions[0], 1.0 / 4, 1e-12);
}

TEST(Bleu, IdentityEmptyAndDisjoint) {
  EXPECT_DOUBLE_EQ(mvx::bleu4(tok("a car waits at the light"), {tok("a car waits at the light")}), 1.0);
  EXPECT_EQ(mvx::bleu4({}, {tok("a b c d")}), 0.0);
  EXPECT_EQ(mvx::bleu4(tok("w x y z"), {tok("a b c d")}), 0.0);
}

TEST(Bleu, CorpusPoolsCountsBeforeTheRatio) {
  const std::vector<Tokens> p = {tok("the red car stops"), tok("a b c d e")};
  const std::vector<Tokens> r = {tok("the red car is stopping"), tok("a b c d e")};
  // p1 = 8/9, p2 = 6/7, p3 = 4/5, p4 = 2/3, c = 9, r = 10
  const double want = std::exp(1.0 - 10.0 / 9) * std::pow(8.0 / 9 * 6.0 / 7 * 4.0 / 5 * 2.0 / 3, 0.25);
  EXPECT_NEAR(mvx::corpus_bleu4(p, {{r[0]}, {r[1]}}), want, 1e-12);
  EXPECT_NEAR(bleu_oracle(p, r), want, 1e-12);
}

TEST(RougeL, HandComputedFixture) {
  // LCS = 3, P = 3/4, R = 3/5
  const double P = 0.75, R = 0.6;
  EXPECT_NEAR(mvx::rouge_l(tok("the red car stops"), tok("the red car is stopping")),
              2.44 * P * R / (R + 1.44 * P), 1e-12);
  EXPECT_EQ(mvx::lcs_length(tok("a b c d e"), tok("a c e b d")), 3u);
  EXPECT_DOUBLE_EQ(mvx::rouge_l(tok("same words here"), tok("same words here")), 1.0);
  EXPECT_EQ(mvx::rouge_l(tok("a b"), tok("c d")), 0.0);
  EXPECT_EQ(mvx::rouge_l({}, tok("c d")), 0.0);
}

TEST(RougeL, MatchesDynamicProgrammingOracle) {
  mvx::Rng rng(1);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 200; ++trial) {
    Tokens x, y;
    for (std::size_t i = 0, n = 1 + rng.below(8); i < n; ++i) x.push_back(vocab[rng.below(5)]);
    for (std::size_t i = 0, n = 1 + rng.below(8); i < n; ++i) y.push_back(vocab[rng.below(5)]);
    EXPECT_EQ(mvx::lcs_length(x, y), lcs_oracle(x, y));
    EXPECT_NEAR(mvx::rouge_l(x, y), rouge_oracle(x, y), 1e-12);
  }
}

TEST(Meteor, IdentityPaysOnlyTheSingleChunkTerm) {
  const auto s = mvx::meteor_stats(tok("the red car stops"), tok("the red car stops"));
  EXPECT_EQ(s.matches, 4u);
  EXPECT_EQ(s.chunks, 1u);
  EXPECT_DOUBLE_EQ(s.score, 1.0 - 0.5 / 64);
}

TEST(Meteor, ReorderedWordsFragmentTheAlignment) {
  // the->the, car->car, red->red, stops->stops; no two neighbours stay adjacent: 4 chunks
  const auto s = mvx::meteor_stats(tok("the car red stops"), tok("the red car stops"));
  EXPECT_EQ(s.chunks, 4u);
  EXPECT_DOUBLE_EQ(s.score, 0.5);
}

TEST(Meteor, PartialMatchFixture) {
  const auto s = mvx::meteor_stats(tok("the red car stops"), tok("the red car is stopping"));
  const double P = 0.75, R = 0.6, fmean = P * R / (0.9 * P + 0.1 * R);
  EXPECT_EQ(s.matches, 3u);
  EXPECT_EQ(s.chunks, 1u);
  EXPECT_NEAR(s.score, fmean * (1.0 - 0.5 / 27), 1e-12);
  EXPECT_EQ(mvx::meteor(tok("a b"), tok("c d")), 0.0);
  EXPECT_EQ(mvx::meteor({}, tok("c d")), 0.0);
}

TEST(Cider, TwoItemIdentityScoresTenPerItem) {
  const std::vector<Tokens> p = {tok("the cat sat down"), tok("the dog ran away")};
  const auto r = mvx::cider(p, {{p[0]}, {p[1]}});
  ASSERT_EQ(r.per_item.size(), 2u);
  EXPECT_NEAR(r.per_item[0], 10.0, 1e-12);
  EXPECT_NEAR(r.per_item[1], 10.0, 1e-12);
  EXPECT_NEAR(r.mean_x100, 1000.0, 1e-9);
}

TEST(Cider, DisjointIsZeroAndSingletonRejected) {
  const auto r = mvx::cider({tok("a b c d"), tok("e f g h")}, {{tok("p q r s")}, {tok("t u v w")}});
  EXPECT_EQ(r.mean_x100, 0.0);
  EXPECT_THROW(mvx::cider({tok("a b")}, {{tok("a b")}}), mvx::InputError);
}

TEST(Cider, ThreeItemFixtureMatchesScalarOracle) {
  const std::vector<Tokens> p = {tok("a red car is parked on the left"), tok("the truck turns right ahead"),
                                 tok("two pedestrians cross the road")};
  const std::vector<Tokens> r = {tok("a red car is parked on the left side"), tok("a truck turns left ahead"),
                                 tok("one pedestrian crosses the road")};
  const auto got = mvx::cider(p, {{r[0]}, {r[1]}, {r[2]}});
  const auto want = cider_oracle(p, r);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(got.per_item[i], want[i], 1e-9);
  EXPECT_NEAR(got.mean_x100, 100.0 * (want[0] + want[1] + want[2]) / 3, 1e-9);
}

TEST(Sim, PairFixtureMatchesDotProduct) {
  // Shared words have df = 2 (idf 1); the rest df = 1 (idf 1 + ln 1.5).
  const double w = 1.0 + std::log(1.5);
  const double want = 3.0 / (std::sqrt(3.0 + w * w) * std::sqrt(3.0 + 2 * w * w));
  EXPECT_NEAR(mvx::sim(tok("the red car stops"), tok("the red car is stopping")), want, 1e-12);
  EXPECT_DOUBLE_EQ(mvx::sim(tok("same words"), tok("same words")), 1.0);
  EXPECT_EQ(mvx::sim(tok("a b"), tok("c d")), 0.0);
  EXPECT_EQ(mvx::sim({}, tok("c d")), 0.0);
}

TEST(JudgeScore, NormalizesOntoPercent) {
  const double want[] = {0, 25, 50, 75, 100};
  for (int s = 1; s <= 5; ++s) EXPECT_EQ(mvx::normalize_judge_score(s), want[s - 1]);
  EXPECT_EQ(mvx::normalize_judge_scores({2, 4}), 50.0);
  EXPECT_EQ(mvx::normalize_judge_scores({}), 0.0);
  EXPECT_THROW(mvx::normalize_judge_score(0), mvx::InputError);
  EXPECT_THROW(mvx::normalize_judge_score(5.5), mvx::InputError);
}

TEST(Spearman, ExtremesAndTies) {
  EXPECT_NEAR(mvx::spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0, 1e-12);
  EXPECT_NEAR(mvx::spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0, 1e-12);
  const std::vector<double> x = {1, 2, 2, 3, 5}, y = {2, 1, 4, 4, 6};
  EXPECT_EQ(mvx::average_ranks(x), (std::vector<double>{1, 2.5, 2.5, 4, 5}));
  EXPECT_NEAR(mvx::spearman(x, y), oracle::pearson(oracle::ranks(x), oracle::ranks(y)), 1e-12);
  EXPECT_THROW(mvx::spearman({1, 2, 3}, {1, 2}), mvx::InputError);
  EXPECT_THROW(mvx::spearman({1, 2}, {1, 2}), mvx::InputError);
}

TEST(Records, ValidateAndParseTags) {
  EXPECT_THROW(record("q", QuestionLevel::Global, Condition::CL, "", "x").validate(), mvx::InputError);
  EXPECT_EQ(mvx::parse_condition("LJ"), Condition::LJ);
  EXPECT_THROW(mvx::parse_condition("XX"), mvx::InputError);
  EXPECT_EQ(mvx::parse_level("egocentric"), QuestionLevel::Egocentric);
  EXPECT_TRUE(mvx::is_weather(Condition::SN));
  EXPECT_FALSE(mvx::is_weather(Condition::MB));
}

TEST(ComputeMetrics, IdentityPredictionsScorePerfectlyInEveryCell) {
  std::vector<mvx::QARecord> recs;
  int i = 0;
  for (Condition c : mvx::kAllConditions) {
    const std::string ref = "there are " + std::to_string(i) + " cars in the front view";
    recs.push_back({"q" + std::to_string(i), "s", QuestionLevel(i % 3), c, "how many cars?", ref, ref});
    recs.push_back({"r" + std::to_string(i), "s", QuestionLevel(i % 3), c, "weather?", "it is " + ref,
                    "it is " + ref});
    ++i;
  }
  const auto m = mvx::compute_metrics(recs);
  std::vector<const mvx::MetricCell*> cells = {&m.overall};
  for (const auto& [c, cell] : m.by_condition) cells.push_back(&cell);
  for (const auto& [l, cell] : m.by_level) cells.push_back(&cell);
  EXPECT_EQ(m.by_condition.size(), 10u);
  for (const auto* cell : cells) {
    EXPECT_DOUBLE_EQ(cell->bleu4, 1.0);
    EXPECT_DOUBLE_EQ(cell->rouge_l, 1.0);
    EXPECT_NEAR(cell->sim, 1.0, 1e-12);
    EXPECT_FALSE(cell->judge.has_value());
  }
}

TEST(ComputeMetrics, SixRecordFixture) {
  const std::vector<mvx::QARecord> recs = {
      record("1", QuestionLevel::Global, Condition::CL, "the weather is cloudy", "the weather is cloudy"),
      record("2", QuestionLevel::Global, Condition::CL, "there are three cars", "there are two cars"),
      record("3", QuestionLevel::Allocentric, Condition::FG, "a truck is behind the ego vehicle",
             "a truck is behind"),
      record("4", QuestionLevel::Allocentric, Condition::MB, "the closest object is a cyclist",
             "the closest object is a pedestrian"),
      record("5", QuestionLevel::Egocentric, Condition::MB, "keep the lane and slow down", "slow down"),
      record("6", QuestionLevel::Egocentric, Condition::LJ, "change to the left lane", "stay in lane"),
  };
  const std::vector<std::optional<int>> judge = {5, 3, std::nullopt, 2, 4, 1};
  const auto m = mvx::compute_metrics(recs, judge);

  std::vector<Tokens> p, r;
  for (const auto& rec : recs) {
    p.push_back(mvx::tokenize(rec.prediction));
    r.push_back(mvx::tokenize(rec.reference));
  }
  double rouge = 0.0;
  for (std::size_t i = 0; i < 6; ++i) rouge += rouge_oracle(p[i], r[i]);
  EXPECT_EQ(m.total, 6u);
  EXPECT_EQ(m.overall.count, 6u);
  EXPECT_NEAR(m.overall.rouge_l, rouge / 6, 1e-12);
  EXPECT_NEAR(m.overall.bleu4, bleu_oracle(p, r), 1e-12);
  const auto cid = cider_oracle(p, r);
  EXPECT_NEAR(m.overall.cider, 100.0 * std::accumulate(cid.begin(), cid.end(), 0.0) / 6, 1e-9);
  // (5, 3, 2, 4, 1) -> (100, 50, 25, 75, 0)
  ASSERT_TRUE(m.overall.judge.has_value());
  EXPECT_DOUBLE_EQ(*m.overall.judge, 50.0);
  EXPECT_EQ(m.overall.judge_scored, 5u);
  EXPECT_EQ(m.overall.judge_missing, 1u);

  std::size_t by_cond = 0, by_level = 0;
  for (const auto& [c, cell] : m.by_condition) by_cond += cell.count;
  for (const auto& [l, cell] : m.by_level) by_level += cell.count;
  EXPECT_EQ(by_cond, 6u);
  EXPECT_EQ(by_level, 6u);
  const auto& cl = m.by_condition.at(Condition::CL);
  EXPECT_NEAR(cl.bleu4, bleu_oracle({p[0], p[1]}, {r[0], r[1]}), 1e-12);
  EXPECT_DOUBLE_EQ(*cl.judge, 75.0);
  EXPECT_EQ(m.by_condition.at(Condition::FG).cider, 0.0);
  EXPECT_FALSE(m.by_condition.at(Condition::FG).judge.has_value());
  EXPECT_EQ(m.by_condition.at(Condition::FG).judge_missing, 1u);
  EXPECT_NEAR(m.by_level.at(QuestionLevel::Egocentric).meteor,
              (mvx::meteor(p[4], r[4]) + mvx::meteor(p[5], r[5])) / 2, 1e-12);
}

TEST(ComputeMetrics, EmptyInputGivesZeroCounts) {
  const auto m = mvx::compute_metrics({});
  EXPECT_EQ(m.total, 0u);
  EXPECT_EQ(m.overall.count, 0u);
  EXPECT_TRUE(m.by_condition.empty());
  EXPECT_THROW(mvx::compute_metrics({record("1", QuestionLevel::Global, Condition::CL, "a", "a")}, {1, 2}),
               mvx::InputError);
}
