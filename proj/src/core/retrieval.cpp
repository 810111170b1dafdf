#include "retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "text.hpp"

namespace muse::retrieval {

CorpusStats CorpusStats::build(const std::vector<Tokens>& docs) {
  CorpusStats stats;
  stats.doc_count = docs.size();
  size_t total = 0;
  for (const auto& d : docs) {
    total += d.size();
    std::unordered_set<std::string> seen(d.begin(), d.end());
    for (const auto& t : seen) ++stats.doc_freq[t];
  }
  stats.avg_doc_len = docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
  return stats;
}

double idf(size_t doc_count, size_t doc_freq) {
  const double n = static_cast<double>(doc_count);
  const double df = static_cast<double>(doc_freq);
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double bm25_score(const Tokens& query, const Tokens& doc, const CorpusStats& stats,
                  const Bm25Params& params) {
  if (query.empty() || doc.empty()) return 0.0;
  std::unordered_map<std::string, size_t> tf;
  for (const auto& t : doc) ++tf[t];
  const double len_norm = stats.avg_doc_len > 0.0
                              ? static_cast<double>(doc.size()) / stats.avg_doc_len
                              : 1.0;
  const double denom_base = params.k1 * (1.0 - params.b + params.b * len_norm);
  double score = 0.0;
  for (const auto& term : query) {
    auto it = tf.find(term);
    if (it == tf.end()) continue;
    auto df_it = stats.doc_freq.find(term);
    const size_t df = df_it == stats.doc_freq.end() ? 0 : df_it->second;
    const double f = static_cast<double>(it->second);
    score += idf(stats.doc_count, df) * f * (params.k1 + 1.0) / (f + denom_base);
  }
  return score;
}

std::vector<corpus::Snippet> retrieve_snippets(const std::string& question,
                                               std::vector<corpus::Snippet> product_snippets,
                                               size_t n, const Bm25Params& params) {
  std::vector<Tokens> docs;
  docs.reserve(product_snippets.size());
  for (const auto& s : product_snippets) docs.push_back(text::tokenize(s.text));
  const CorpusStats stats = CorpusStats::build(docs);
  const Tokens query = text::tokenize(question);
  for (size_t i = 0; i < product_snippets.size(); ++i) {
    product_snippets[i].bm25_score = bm25_score(query, docs[i], stats, params);
  }
  std::stable_sort(product_snippets.begin(), product_snippets.end(),
                   [](const corpus::Snippet& a, const corpus::Snippet& b) {
                     return a.bm25_score > b.bm25_score;
                   });
  if (product_snippets.size() > n) product_snippets.resize(n);
  return product_snippets;
}

std::vector<RankedAnswer> bm25_rank_answers(const corpus::QuestionThread& thread,
                                            const Bm25Params& params) {
  std::vector<Tokens> docs;
  docs.reserve(thread.answers.size());
  for (const auto& a : thread.answers) docs.push_back(text::tokenize(a.text));
  const CorpusStats stats = CorpusStats::build(docs);
  const Tokens query = text::tokenize(thread.question);
  std::vector<RankedAnswer> ranked;
  ranked.reserve(docs.size());
  for (size_t i = 0; i < docs.size(); ++i) {
    ranked.push_back({i, bm25_score(query, docs[i], stats, params)});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedAnswer& a, const RankedAnswer& b) { return a.score > b.score; });
  return ranked;
}

}  // namespace muse::retrieval
