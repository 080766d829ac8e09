#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcpipe {

struct EvalRecord {
  std::string id;
  std::string dataset;
  std::string category;  // optional grouping label
  std::string prediction_normalized;
  std::string gold_normalized;
  std::map<std::string, double> scores;
};

struct ScoreError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 1 iff byte-equal.
double exact_match(std::string_view pred, std::string_view gold);

// Whitespace-tokenized multiset-overlap F1. Both empty -> 1, one empty -> 0.
double token_f1(std::string_view pred, std::string_view gold);

// LCS-based F-measure over whitespace tokens, same empty conventions.
double rouge_l(std::string_view pred, std::string_view gold);

struct GroupStat {
  double mean = 0.0;
  size_t count = 0;
};

// Arithmetic mean of `metric` per group; empty groups are absent.
std::map<std::string, GroupStat> aggregate(
    const std::vector<EvalRecord>& records, const std::string& metric,
    const std::function<std::string(const EvalRecord&)>& group_of);

std::map<std::string, GroupStat> aggregate_by_category(const std::vector<EvalRecord>& records,
                                                       const std::string& metric);

struct Delta {
  double absolute = 0.0;
  std::optional<double> relative;  // absent when the baseline mean is 0
};

std::map<std::string, Delta> delta_vs_baseline(const std::map<std::string, GroupStat>& agg,
                                               const std::string& baseline_category);

// Table-style rendering: "-0.33 / -96.2%" (absolute to 2 decimals, relative
// percent to 1). Without a relative part only the absolute is printed.
std::string format_delta(const Delta& d);

struct SignificanceResult {
  int trials = 0;
  double fraction = 0.0;
  double mean_a = 0.0;  // mean of per-trial means
  double mean_b = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;
  std::vector<double> trial_means_a;
  std::vector<double> trial_means_b;
};

// Draws `trials` shared index subsamples of ceil(fraction*N) without
// replacement, records both systems' mean scores per trial, then runs a
// classic two-sided paired t-test on the trial-mean vectors. Identical
// inputs degenerate to p = 1.
SignificanceResult paired_subsample_ttest(const std::vector<double>& scores_a,
                                          const std::vector<double>& scores_b,
                                          double fraction, int trials, uint64_t seed);

// Plain paired t-test on two aligned vectors (used on the trial means).
struct PairedT {
  double t = 0.0;
  double p = 1.0;
};
PairedT paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

// Per task, takes the scores of the argmax-mean candidate (ties to the
// earliest). Input lists are aligned per instance; task_of[i] names the task
// of instance i.
std::vector<double> select_best_program_scores(
    const std::vector<std::vector<double>>& per_candidate,
    const std::vector<std::string>& task_of);

}  // namespace pcpipe
