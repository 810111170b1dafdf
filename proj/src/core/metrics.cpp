#include "metrics.hpp"

#include <algorithm>
#include <cmath>

namespace muse::eval {

double average_precision(const std::vector<int>& ranked_labels) {
  double sum = 0.0;
  int hits = 0;
  for (size_t i = 0; i < ranked_labels.size(); ++i) {
    if (ranked_labels[i] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return hits == 0 ? 0.0 : sum / hits;
}

double reciprocal_rank(const std::vector<int>& ranked_labels) {
  for (size_t i = 0; i < ranked_labels.size(); ++i)
    if (ranked_labels[i] != 0) return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

double precision_at(const std::vector<int>& ranked_labels, int n) {
  if (n < 1) throw ArgumentError("precision_at: N must be >= 1");
  const size_t cut = std::min(static_cast<size_t>(n), ranked_labels.size());
  if (cut == 0) return 0.0;
  int hits = 0;
  for (size_t i = 0; i < cut; ++i) hits += ranked_labels[i] != 0;
  return static_cast<double>(hits) / static_cast<double>(cut);
}

MetricReport evaluate_ranking(const std::vector<std::vector<int>>& ranked_labels,
                              const std::vector<int>& ns,
                              const std::vector<std::string>& question_ids) {
  if (ranked_labels.empty()) throw ArgumentError("evaluate_ranking: no questions");
  if (!question_ids.empty() && question_ids.size() != ranked_labels.size()) {
    throw ArgumentError("evaluate_ranking: question id count does not match list count");
  }
  MetricReport report;
  for (int n : ns) report.p_at[n] = 0.0;
  for (size_t q = 0; q < ranked_labels.size(); ++q) {
    const auto& labels = ranked_labels[q];
    if (std::none_of(labels.begin(), labels.end(), [](int l) { return l != 0; })) {
      ++report.n_skipped;
      continue;
    }
    QuestionMetrics m;
    m.question_id = question_ids.empty() ? std::to_string(q) : question_ids[q];
    m.ap = average_precision(labels);
    m.rr = reciprocal_rank(labels);
    for (int n : ns) m.p_at[n] = precision_at(labels, n);
    report.map += m.ap;
    report.mrr += m.rr;
    for (int n : ns) report.p_at[n] += m.p_at[n];
    report.per_question.push_back(std::move(m));
  }
  report.n_evaluated = report.per_question.size();
  if (report.n_evaluated > 0) {
    const double d = static_cast<double>(report.n_evaluated);
    report.map /= d;
    report.mrr /= d;
    for (auto& [n, v] : report.p_at) v /= d;
  }
  return report;
}

double significance_test(const std::vector<double>& a, const std::vector<double>& b,
                         int iterations, uint64_t seed) {
  if (a.size() != b.size()) throw ArgumentError("significance_test: length mismatch");
  if (a.size() < 2) throw ArgumentError("significance_test: need at least 2 paired values");
  if (iterations < 1) throw ArgumentError("significance_test: iterations must be >= 1");
  const size_t n = a.size();
  std::vector<double> diff(n);
  double observed = 0.0;
  for (size_t i = 0; i < n; ++i) {
    diff[i] = a[i] - b[i];
    observed += diff[i];
  }
  observed = std::abs(observed / static_cast<double>(n));
  // absorbs rounding in the resampled sums
  const double slack = 1e-12 * std::max(1.0, observed);

  Rng rng(seed);
  int extreme = 0;
  for (int it = 0; it < iterations; ++it) {
    double sum = 0.0;
    uint64_t bits = 0;
    for (size_t i = 0; i < n; ++i) {
      if (i % 64 == 0) bits = rng.next_u64();
      sum += (bits & 1ULL) ? -diff[i] : diff[i];
      bits >>= 1;
    }
    if (std::abs(sum / static_cast<double>(n)) >= observed - slack) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(iterations);
}

}  // namespace muse::eval
