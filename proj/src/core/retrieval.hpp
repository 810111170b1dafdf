#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"

namespace muse::retrieval {

using Tokens = std::vector<std::string>;

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// Document statistics for one collection.
struct CorpusStats {
  size_t doc_count = 0;
  std::unordered_map<std::string, size_t> doc_freq;
  double avg_doc_len = 0.0;

  static CorpusStats build(const std::vector<Tokens>& docs);
};

/// ln((N - df + 0.5) / (df + 0.5) + 1); non-negative for df in [0, N].
double idf(size_t doc_count, size_t doc_freq);

/// Okapi BM25 of `doc` for `query`. Repeated query terms count once per
/// occurrence. Empty query or doc scores 0.
double bm25_score(const Tokens& query, const Tokens& doc, const CorpusStats& stats,
                  const Bm25Params& params = {});

/// Scores the product's snippets against the question (statistics computed
/// over `product_snippets`) and returns the best min(n, size) in descending
/// score order, ties kept in input order.
std::vector<corpus::Snippet> retrieve_snippets(const std::string& question,
                                               std::vector<corpus::Snippet> product_snippets,
                                               size_t n, const Bm25Params& params = {});

struct RankedAnswer {
  size_t index;
  double score;
};

/// Baseline: ranks answers by BM25 against the question, using the thread's
/// own answers as the collection. Stable for ties.
std::vector<RankedAnswer> bm25_rank_answers(const corpus::QuestionThread& thread,
                                            const Bm25Params& params = {});

}  // namespace muse::retrieval
