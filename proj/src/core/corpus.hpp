#pragma once

#include <map>
#include <string>
#include <vector>

#include "common.hpp"

namespace muse::corpus {

struct RawAnswer {
  std::string text;
  int pos_votes = 0;
  int neg_votes = 0;
  int label = 0;  // always derive_label(pos_votes, neg_votes)
};

struct Snippet {
  std::string text;
  std::string source_review_id;
  double bm25_score = 0.0;
};

enum class Split { kUnassigned, kTrain, kVal, kTest };

const char* split_name(Split s);
Split parse_split(const std::string& name);

struct QuestionThread {
  std::string question_id;
  std::string product_id;
  std::string question;
  std::vector<RawAnswer> answers;
  std::vector<Snippet> snippets;
  // Fewer snippets than requested were available for the product.
  bool padded = false;
  Split split = Split::kUnassigned;

  int num_positive() const;
};

struct Review {
  std::string review_id;
  std::string product_id;
  std::string text;
};

struct QaCorpus {
  std::vector<QuestionThread> threads;
  std::map<std::string, std::vector<Review>> reviews_by_product;
  size_t skipped_no_answers = 0;
  size_t skipped_empty_answers = 0;
};

/// 1 iff pos_votes > neg_votes. Negative counts are an ArgumentError.
int derive_label(int pos_votes, int neg_votes);

/// Splits review prose into sentence-level snippets: breaks after '.', '!',
/// '?' or ';' when followed by whitespace or end of text, trims each piece and
/// drops pieces with fewer than two tokens.
std::vector<std::string> chunk_review(const std::string& review_text);

/// Parses the QA and review JSON-lines files. Threads keep file order and
/// answers keep record order. Malformed records raise ParseError with the
/// file and line number.
QaCorpus load_qa_corpus(const std::string& qa_path, const std::string& review_path);

/// Parses a single QA record (one JSON line). `where` prefixes error messages.
/// Returns false for a record with zero usable answers.
bool parse_qa_record(const std::string& line, const std::string& where, QuestionThread& out,
                     size_t& empty_answers);

struct SplitResult {
  std::vector<QuestionThread> train, val, test;
};

/// Tags every thread in place: a seeded shuffle picks round(n * test_fraction)
/// test and round(n * val_fraction) validation threads; the rest train.
void assign_splits(std::vector<QuestionThread>& threads, double test_fraction, double val_fraction,
                   uint64_t seed);

/// assign_splits, then partitions the threads keeping their input order.
SplitResult split_corpus(std::vector<QuestionThread> threads, double test_fraction,
                         double val_fraction, uint64_t seed);

/// Prepared-corpus JSON-lines IO.
void write_prepared(const std::string& path, const std::vector<QuestionThread>& threads);
std::string thread_to_json_line(const QuestionThread& thread);
std::vector<QuestionThread> read_prepared(const std::string& path);

std::vector<QuestionThread> filter_split(const std::vector<QuestionThread>& threads, Split split);

}  // namespace muse::corpus
