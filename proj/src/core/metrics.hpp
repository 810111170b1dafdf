#pragma once

#include <map>
#include <string>
#include <vector>

#include "common.hpp"

namespace muse::eval {

struct QuestionMetrics {
  std::string question_id;
  double ap = 0.0;
  double rr = 0.0;
  std::map<int, double> p_at;
};

struct MetricReport {
  double map = 0.0;
  double mrr = 0.0;
  std::map<int, double> p_at;
  std::vector<QuestionMetrics> per_question;  // evaluated questions only
  size_t n_evaluated = 0;
  size_t n_skipped = 0;
};

/// Average precision of one ranked label list; 0 when it has no positives.
double average_precision(const std::vector<int>& ranked_labels);
double reciprocal_rank(const std::vector<int>& ranked_labels);
/// Precision among the top min(n, size) entries.
double precision_at(const std::vector<int>& ranked_labels, int n);

/// Macro-averages AP, RR and P@N over questions with at least one positive.
/// Questions with no positive label are counted in n_skipped. `question_ids`
/// may be empty, in which case ids are the list positions.
MetricReport evaluate_ranking(const std::vector<std::vector<int>>& ranked_labels,
                              const std::vector<int>& ns = {1, 3},
                              const std::vector<std::string>& question_ids = {});

/// Two-tailed paired randomization test. Each resample flips the sign of
/// every per-question difference with probability 1/2; the p-value is the
/// fraction of resamples whose |mean difference| reaches the observed one.
double significance_test(const std::vector<double>& a, const std::vector<double>& b,
                         int iterations, uint64_t seed);

}  // namespace muse::eval
