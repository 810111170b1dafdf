#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <string>

#include "config.hpp"
#include "metrics.hpp"
#include "retrieval.hpp"

namespace muse::pipeline {

/// Everything a command needs: file paths, data-preparation settings and the
/// model/training configuration. Keys form one flat namespace shared by the
/// config file, the CLI flags and the C API.
struct RunConfig {
  std::map<std::string, std::string> paths;  // qa, reviews, corpus, embeddings, ...
  double test_fraction = 0.1;
  double val_fraction = 0.1;
  retrieval::Bm25Params bm25;
  std::string split = "test";
  std::string ranker = "muse";
  int iterations = 10000;
  TrainingConfig training;
  /// Training keys given explicitly (as opposed to defaults).
  std::map<std::string, std::string> explicit_training;

  void set(const std::string& key, const std::string& value);
  /// Reads "key = value" lines; '#' starts a comment.
  void load_file(const std::string& path);
  std::string path(const std::string& key) const;
  bool has_path(const std::string& key) const;
  static bool is_key(const std::string& key);
};

struct SplitCounts {
  size_t products = 0;
  size_t questions = 0;
  size_t answers = 0;
  size_t positive = 0;
};

struct PrepareStats {
  SplitCounts train_val;
  SplitCounts test;
  size_t skipped_no_answers = 0;
  size_t skipped_empty_answers = 0;
  size_t padded_threads = 0;
};

/// qa + reviews -> prepared corpus (labels, top-n snippets, split tags).
PrepareStats run_prepare(const RunConfig& cfg);
/// Table-style count summary.
std::string format_prepare_stats(const PrepareStats& stats);

struct TrainSummary {
  int best_epoch = 0;
  double best_val_map = 0.0;
  int epochs_run = 0;
  size_t vocab_size = 0;
};

/// prepared corpus (+ optional embeddings) -> checkpoint + JSON-lines log.
TrainSummary run_train(const RunConfig& cfg);

/// Writes the JSON report (and optional per-question TSV); returns the metrics.
eval::MetricReport run_evaluate(const RunConfig& cfg);

/// Writes question_id<TAB>answer_index<TAB>score, best first per question.
size_t run_rank(const RunConfig& cfg);

/// Shortest round-trip text for a double.
std::string format_double(double v);

}  // namespace muse::pipeline
