#include "pcpipe/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>

#include "pcpipe/util.hpp"

namespace pcpipe {

namespace {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

double f_measure(double overlap, double pred_len, double gold_len) {
  if (pred_len == 0.0 && gold_len == 0.0) return 1.0;
  if (pred_len == 0.0 || gold_len == 0.0 || overlap == 0.0) return 0.0;
  double p = overlap / pred_len;
  double r = overlap / gold_len;
  return 2.0 * p * r / (p + r);
}

}  // namespace

double exact_match(std::string_view pred, std::string_view gold) {
  return pred == gold ? 1.0 : 0.0;
}

double token_f1(std::string_view pred, std::string_view gold) {
  auto p = tokenize(pred);
  auto g = tokenize(gold);
  std::unordered_map<std::string, int> counts;
  for (const auto& t : g) counts[t]++;
  double overlap = 0.0;
  for (const auto& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      overlap += 1.0;
    }
  }
  return f_measure(overlap, static_cast<double>(p.size()), static_cast<double>(g.size()));
}

double rouge_l(std::string_view pred, std::string_view gold) {
  auto p = tokenize(pred);
  auto g = tokenize(gold);
  const size_t n = p.size(), m = g.size();
  if (n == 0 || m == 0) return f_measure(0.0, static_cast<double>(n), static_cast<double>(m));
  std::vector<size_t> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      cur[j] = p[i - 1] == g[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return f_measure(static_cast<double>(prev[m]), static_cast<double>(n),
                   static_cast<double>(m));
}

std::map<std::string, GroupStat> aggregate(
    const std::vector<EvalRecord>& records, const std::string& metric,
    const std::function<std::string(const EvalRecord&)>& group_of) {
  std::map<std::string, GroupStat> out;
  for (const auto& rec : records) {
    auto it = rec.scores.find(metric);
    if (it == rec.scores.end()) continue;
    std::string key = group_of(rec);
    if (key.empty()) continue;
    auto& stat = out[key];
    stat.mean += it->second;
    stat.count += 1;
  }
  for (auto& [_, stat] : out) stat.mean /= static_cast<double>(stat.count);
  return out;
}

std::map<std::string, GroupStat> aggregate_by_category(const std::vector<EvalRecord>& records,
                                                       const std::string& metric) {
  return aggregate(records, metric, [](const EvalRecord& r) { return r.category; });
}

std::map<std::string, Delta> delta_vs_baseline(const std::map<std::string, GroupStat>& agg,
                                               const std::string& baseline_category) {
  auto base = agg.find(baseline_category);
  if (base == agg.end())
    throw ScoreError("baseline category not present: " + baseline_category);
  const double base_mean = base->second.mean;
  std::map<std::string, Delta> out;
  for (const auto& [cat, stat] : agg) {
    if (cat == baseline_category) continue;
    Delta d;
    d.absolute = stat.mean - base_mean;
    if (base_mean > 0.0) d.relative = d.absolute / base_mean;
    out[cat] = d;
  }
  return out;
}

std::string format_delta(const Delta& d) {
  char buf[64];
  if (d.relative) {
    std::snprintf(buf, sizeof(buf), "%.2f / %.1f%%", d.absolute, *d.relative * 100.0);
  } else {
    std::snprintf(buf, sizeof(buf), "%.2f", d.absolute);
  }
  return buf;
}

PairedT paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ScoreError("paired t-test needs aligned vectors");
  const size_t n = a.size();
  if (n < 2) throw ScoreError("paired t-test needs at least 2 pairs");

  double mean_d = 0.0;
  for (size_t i = 0; i < n; ++i) mean_d += a[i] - b[i];
  mean_d /= static_cast<double>(n);

  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = (a[i] - b[i]) - mean_d;
    ss += d * d;
  }
  double var = ss / static_cast<double>(n - 1);

  PairedT result;
  if (var == 0.0) {
    if (mean_d == 0.0) {
      result.t = 0.0;
      result.p = 1.0;  // identical trials: no evidence of a difference
    } else {
      result.t = mean_d > 0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
      result.p = 0.0;
    }
    return result;
  }

  result.t = mean_d / std::sqrt(var / static_cast<double>(n));
  boost::math::students_t dist(static_cast<double>(n - 1));
  result.p = 2.0 * boost::math::cdf(dist, -std::fabs(result.t));
  return result;
}

SignificanceResult paired_subsample_ttest(const std::vector<double>& scores_a,
                                          const std::vector<double>& scores_b,
                                          double fraction, int trials, uint64_t seed) {
  if (scores_a.size() != scores_b.size())
    throw ScoreError("score vectors differ in length: " + std::to_string(scores_a.size()) +
                     " vs " + std::to_string(scores_b.size()));
  const size_t n = scores_a.size();
  if (n < 10) throw ScoreError("need at least 10 aligned scores, got " + std::to_string(n));
  if (trials < 2) throw ScoreError("need at least 2 trials");
  if (fraction <= 0.0 || fraction > 1.0) throw ScoreError("fraction must be in (0, 1]");

  const size_t subsample = static_cast<size_t>(
      std::ceil(fraction * static_cast<double>(n)));

  SignificanceResult res;
  res.trials = trials;
  res.fraction = fraction;
  res.trial_means_a.reserve(static_cast<size_t>(trials));
  res.trial_means_b.reserve(static_cast<size_t>(trials));

  for (int trial = 0; trial < trials; ++trial) {
    // per-trial derived seed; results do not depend on scheduling
    Rng rng(mix_seed(seed, static_cast<uint64_t>(trial)));
    auto idx = rng.sample_without_replacement(n, subsample);
    double sum_a = 0.0, sum_b = 0.0;
    for (size_t i : idx) {
      sum_a += scores_a[i];
      sum_b += scores_b[i];
    }
    res.trial_means_a.push_back(sum_a / static_cast<double>(subsample));
    res.trial_means_b.push_back(sum_b / static_cast<double>(subsample));
  }

  double total_a = 0.0, total_b = 0.0;
  for (double v : res.trial_means_a) total_a += v;
  for (double v : res.trial_means_b) total_b += v;
  res.mean_a = total_a / static_cast<double>(trials);
  res.mean_b = total_b / static_cast<double>(trials);

  PairedT t = paired_ttest(res.trial_means_a, res.trial_means_b);
  res.t_statistic = t.t;
  res.p_value = t.p;
  return res;
}

std::vector<double> select_best_program_scores(
    const std::vector<std::vector<double>>& per_candidate,
    const std::vector<std::string>& task_of) {
  if (per_candidate.empty()) throw ScoreError("no candidates given");
  const size_t n = task_of.size();
  for (const auto& cand : per_candidate)
    if (cand.size() != n) throw ScoreError("candidate score lists are not aligned");

  // contiguous or not, instances of one task share its label
  std::map<std::string, std::vector<size_t>> tasks;
  for (size_t i = 0; i < n; ++i) tasks[task_of[i]].push_back(i);

  std::vector<double> combined(n, 0.0);
  for (const auto& [task, members] : tasks) {
    size_t best = 0;
    double best_mean = -1.0;
    for (size_t c = 0; c < per_candidate.size(); ++c) {
      double sum = 0.0;
      for (size_t i : members) sum += per_candidate[c][i];
      double mean = sum / static_cast<double>(members.size());
      if (mean > best_mean) {  // strict: ties keep the earliest candidate
        best_mean = mean;
        best = c;
      }
    }
    for (size_t i : members) combined[i] = per_candidate[best][i];
  }
  return combined;
}

}  // namespace pcpipe
