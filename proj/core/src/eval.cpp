#include "mvx/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "mvx/error.hpp"

namespace mvx {

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  auto flush = [&]() {
    while (!current.empty() && std::ispunct(static_cast<unsigned char>(current.back()))) current.pop_back();
    if (!current.empty()) out.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::string_view to_string(QuestionLevel level) {
  switch (level) {
    case QuestionLevel::Global: return "global";
    case QuestionLevel::Allocentric: return "allocentric";
    case QuestionLevel::Egocentric: return "egocentric";
  }
  return "?";
}

std::string_view to_string(Condition c) {
  static constexpr std::string_view names[] = {"CL", "FG", "NT", "RN", "SN",
                                               "MB", "OE", "UE", "LJ", "EL"};
  return names[static_cast<int>(c)];
}

QuestionLevel parse_level(std::string_view name) {
  if (name == "global") return QuestionLevel::Global;
  if (name == "allocentric") return QuestionLevel::Allocentric;
  if (name == "egocentric") return QuestionLevel::Egocentric;
  throw InputError("unknown question level '" + std::string(name) + "'");
}

Condition parse_condition(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  for (Condition c : kAllConditions)
    if (to_string(c) == upper) return c;
  throw InputError("unknown condition tag '" + std::string(name) + "'");
}

bool is_weather(Condition c) { return static_cast<int>(c) < 5; }

void QARecord::validate() const {
  if (question.empty()) throw InputError("QA record " + id + " has an empty question");
  if (reference.empty()) throw InputError("QA record " + id + " has an empty reference");
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const Tokens& t, std::size_t n) {
  NgramCounts out;
  if (t.size() < n) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + i, t.begin() + i + n)];
  return out;
}

struct BleuCounts {
  std::size_t clipped[4] = {0, 0, 0, 0};
  std::size_t total[4] = {0, 0, 0, 0};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

BleuCounts bleu_counts(const Tokens& pred, const std::vector<Tokens>& refs) {
  if (refs.empty()) throw InputError("BLEU needs at least one reference");
  BleuCounts c;
  c.hyp_len = pred.size();
  // Closest reference length, shorter on ties.
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [&](std::size_t len) {
      return len > pred.size() ? len - pred.size() : pred.size() - len;
    };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  c.ref_len = best;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto hyp = ngrams(pred, n);
    NgramCounts max_ref;
    for (const auto& r : refs)
      for (const auto& [g, cnt] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], cnt);
    for (const auto& [g, cnt] : hyp) {
      c.total[n - 1] += cnt;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) c.clipped[n - 1] += std::min(cnt, it->second);
    }
  }
  return c;
}

BleuStats bleu_from_counts(const BleuCounts& c) {
  BleuStats s;
  if (c.hyp_len == 0) return s;
  double log_sum = 0.0;
  bool zero = false;
  for (int n = 0; n < 4; ++n) {
    s.precisions[n] = c.total[n] ? static_cast<double>(c.clipped[n]) / static_cast<double>(c.total[n]) : 0.0;
    if (s.precisions[n] == 0.0) zero = true;
    else log_sum += std::log(s.precisions[n]);
  }
  s.brevity_penalty = c.hyp_len > c.ref_len
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(c.ref_len) / static_cast<double>(c.hyp_len));
  s.score = zero ? 0.0 : s.brevity_penalty * std::exp(log_sum / 4.0);
  return s;
}

}  // namespace

BleuStats bleu4_stats(const Tokens& prediction, const std::vector<Tokens>& references) {
  return bleu_from_counts(bleu_counts(prediction, references));
}

double bleu4(const Tokens& prediction, const std::vector<Tokens>& references) {
  return bleu4_stats(prediction, references).score;
}

double corpus_bleu4(const std::vector<Tokens>& predictions,
                    const std::vector<std::vector<Tokens>>& references) {
  if (predictions.size() != references.size()) throw InputError("corpus BLEU: size mismatch");
  BleuCounts total;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto c = bleu_counts(predictions[i], references[i]);
    for (int n = 0; n < 4; ++n) {
      total.clipped[n] += c.clipped[n];
      total.total[n] += c.total[n];
    }
    total.hyp_len += c.hyp_len;
    total.ref_len += c.ref_len;
  }
  return bleu_from_counts(total).score;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Tokens& prediction, const Tokens& reference) {
  if (prediction.empty() || reference.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(prediction, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(prediction.size());
  const double r = lcs / static_cast<double>(reference.size());
  const double b2 = kRougeBeta * kRougeBeta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

MeteorStats meteor_stats(const Tokens& prediction, const Tokens& reference) {
  MeteorStats s;
  if (prediction.empty() || reference.empty()) return s;
  std::map<std::string, std::vector<std::size_t>> ref_positions;
  for (std::size_t j = 0; j < reference.size(); ++j) ref_positions[reference[j]].push_back(j);
  std::map<std::string, std::size_t> used;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (pred pos, ref pos)
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    auto it = ref_positions.find(prediction[i]);
    if (it == ref_positions.end()) continue;
    auto& k = used[prediction[i]];
    if (k < it->second.size()) pairs.emplace_back(i, it->second[k++]);
  }
  s.matches = pairs.size();
  if (s.matches == 0) return s;
  s.chunks = 1;
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    const bool contiguous = pairs[i].first == pairs[i - 1].first + 1 &&
                            pairs[i].second == pairs[i - 1].second + 1;
    if (!contiguous) ++s.chunks;
  }
  const double m = static_cast<double>(s.matches);
  s.precision = m / static_cast<double>(prediction.size());
  s.recall = m / static_cast<double>(reference.size());
  s.fmean = s.precision * s.recall / (kMeteorAlpha * s.precision + (1.0 - kMeteorAlpha) * s.recall);
  s.penalty = kMeteorGamma * std::pow(static_cast<double>(s.chunks) / m, kMeteorBeta);
  s.score = s.fmean * (1.0 - s.penalty);
  return s;
}

double meteor(const Tokens& prediction, const Tokens& reference) {
  return meteor_stats(prediction, reference).score;
}

CiderResult cider(const std::vector<Tokens>& predictions,
                  const std::vector<std::vector<Tokens>>& references) {
  if (predictions.size() != references.size()) throw InputError("CIDEr: size mismatch");
  if (predictions.size() < 2) throw InputError("CIDEr needs a corpus of at least two items");
  const double n_docs = static_cast<double>(predictions.size());
  const double log_n = std::log(n_docs);

  std::map<std::vector<std::string>, std::size_t> df;
  for (const auto& refs : references) {
    std::set<std::vector<std::string>> seen;
    for (const auto& r : refs)
      for (std::size_t n = 1; n <= 4; ++n)
        for (const auto& [g, c] : ngrams(r, n)) seen.insert(g);
    for (const auto& g : seen) ++df[g];
  }
  auto weights = [&](const NgramCounts& counts) {
    std::map<std::vector<std::string>, double> w;
    for (const auto& [g, c] : counts) {
      auto it = df.find(g);
      const double d = it == df.end() ? 1.0 : static_cast<double>(it->second);
      w[g] = static_cast<double>(c) * (log_n - std::log(d));
    }
    return w;
  };
  auto cosine = [](const std::map<std::vector<std::string>, double>& a,
                   const std::map<std::vector<std::string>, double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [g, v] : a) {
      na += v * v;
      auto it = b.find(g);
      if (it != b.end()) dot += v * it->second;
    }
    for (const auto& [g, v] : b) nb += v * v;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };

  CiderResult result;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (references[i].empty()) throw InputError("CIDEr item without references");
    double total = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cand = weights(ngrams(predictions[i], n));
      double acc = 0.0;
      for (const auto& r : references[i]) acc += cosine(cand, weights(ngrams(r, n)));
      total += acc / static_cast<double>(references[i].size());
    }
    result.per_item.push_back(10.0 * total / 4.0);
  }
  result.mean_x100 = 100.0 * std::accumulate(result.per_item.begin(), result.per_item.end(), 0.0) /
                     static_cast<double>(result.per_item.size());
  return result;
}

TfidfModel::TfidfModel(const std::vector<Tokens>& documents) : documents_(documents.size()) {
  for (const auto& doc : documents) {
    std::set<std::string> seen(doc.begin(), doc.end());
    for (const auto& t : seen) ++df_[t];
  }
}

double TfidfModel::idf(const std::string& term) const {
  auto it = df_.find(term);
  const double d = it == df_.end() ? 0.0 : static_cast<double>(it->second);
  return std::log((1.0 + static_cast<double>(documents_)) / (1.0 + d)) + 1.0;
}

double TfidfModel::similarity(const Tokens& a, const Tokens& b) const {
  if (a.empty() || b.empty()) return 0.0;
  std::map<std::string, double> va, vb;
  for (const auto& t : a) va[t] += 1.0;
  for (const auto& t : b) vb[t] += 1.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (auto& [t, v] : va) {
    v *= idf(t);
    na += v * v;
  }
  for (auto& [t, v] : vb) {
    v *= idf(t);
    nb += v * v;
    auto it = va.find(t);
    if (it != va.end()) dot += v * it->second;
  }
  if (dot == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

double sim(const Tokens& prediction, const Tokens& reference) {
  return TfidfModel({prediction, reference}).similarity(prediction, reference);
}

double normalize_judge_score(double score) {
  if (!(score >= 1.0 && score <= 5.0)) {
    throw InputError("judge score " + std::to_string(score) + " outside [1, 5]");
  }
  return (score - 1.0) / 4.0 * 100.0;
}

double normalize_judge_scores(const std::vector<double>& scores) {
  if (scores.empty()) return 0.0;
  double total = 0.0;
  for (double s : scores) total += normalize_judge_score(s);
  return total / static_cast<double>(scores.size());
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) throw InputError("pearson: length mismatch");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw InputError("pearson: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw InputError("spearman: lengths " + std::to_string(x.size()) + " and " +
                     std::to_string(y.size()) + " differ");
  }
  if (x.size() < 3) throw InputError("spearman needs at least 3 observations");
  return pearson(average_ranks(x), average_ranks(y));
}

namespace {

struct CellAccumulator {
  std::vector<Tokens> preds;
  std::vector<std::vector<Tokens>> refs;
  double rouge = 0.0, meteor = 0.0, sim = 0.0;
  std::vector<double> judge;
  std::size_t judge_missing = 0;

  void add(const Tokens& p, const Tokens& r, double rl, double mt, double sm,
           const std::optional<int>* judge_score) {
    preds.push_back(p);
    refs.push_back({r});
    rouge += rl;
    meteor += mt;
    sim += sm;
    if (judge_score) {
      if (judge_score->has_value()) judge.push_back(static_cast<double>(**judge_score));
      else ++judge_missing;
    }
  }

  MetricCell finish() const {
    MetricCell c;
    c.count = preds.size();
    if (c.count == 0) return c;
    const double n = static_cast<double>(c.count);
    c.bleu4 = corpus_bleu4(preds, refs);
    c.rouge_l = rouge / n;
    c.meteor = meteor / n;
    c.sim = sim / n;
    c.cider = c.count >= 2 ? cider(preds, refs).mean_x100 : 0.0;
    c.judge_scored = judge.size();
    c.judge_missing = judge_missing;
    if (!judge.empty()) c.judge = normalize_judge_scores(judge);
    return c;
  }
};

}  // namespace

MetricReport compute_metrics(const std::vector<QARecord>& records,
                             const std::vector<std::optional<int>>& judge_scores) {
  if (!judge_scores.empty() && judge_scores.size() != records.size()) {
    throw InputError("judge scores do not align with records");
  }
  std::vector<Tokens> preds, refs, corpus;
  for (const auto& r : records) {
    preds.push_back(tokenize(r.prediction));
    refs.push_back(tokenize(r.reference));
    corpus.push_back(preds.back());
    corpus.push_back(refs.back());
  }
  const TfidfModel tfidf(corpus);
  CellAccumulator overall;
  std::map<Condition, CellAccumulator> by_cond;
  std::map<QuestionLevel, CellAccumulator> by_level;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double rl = rouge_l(preds[i], refs[i]);
    const double mt = meteor(preds[i], refs[i]);
    const double sm = tfidf.similarity(preds[i], refs[i]);
    const std::optional<int>* js = judge_scores.empty() ? nullptr : &judge_scores[i];
    overall.add(preds[i], refs[i], rl, mt, sm, js);
    by_cond[records[i].condition].add(preds[i], refs[i], rl, mt, sm, js);
    by_level[records[i].level].add(preds[i], refs[i], rl, mt, sm, js);
  }
  MetricReport report;
  report.total = records.size();
  report.overall = overall.finish();
  for (const auto& [c, acc] : by_cond) report.by_condition[c] = acc.finish();
  for (const auto& [l, acc] : by_level) report.by_level[l] = acc.finish();
  return report;
}

}  // namespace mvx
