#include "pipeline.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "checkpoint.hpp"
#include "corpus.hpp"
#include "trainer.hpp"

namespace muse::pipeline {

namespace {

const std::set<std::string>& path_keys() {
  static const std::set<std::string> k = {"qa",  "reviews", "corpus",           "embeddings",
                                          "checkpoint", "log", "report", "per_question_tsv",
                                          "compare", "out", "dump_graph", "config"};
  return k;
}

const std::set<std::string>& run_keys() {
  static const std::set<std::string> k = {"test_fraction", "val_fraction", "bm25_k1", "bm25_b",
                                          "split",         "ranker",       "iterations"};
  return k;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void require_file(const RunConfig& cfg, const std::string& key) {
  if (!cfg.has_path(key)) throw ConfigError("missing required path '" + key + "'");
  const std::string p = cfg.path(key);
  if (!std::filesystem::is_regular_file(p)) throw IoError("no such file for '" + key + "': " + p);
}

void require_output(const RunConfig& cfg, const std::string& key) {
  if (!cfg.has_path(key)) throw ConfigError("missing required output path '" + key + "'");
  auto parent = std::filesystem::path(cfg.path(key)).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw IoError("output directory does not exist for '" + key + "': " + parent.string());
  }
}

std::vector<corpus::QuestionThread> select_split(const std::vector<corpus::QuestionThread>& all,
                                                 const std::string& split) {
  if (split == "all") return all;
  return corpus::filter_split(all, corpus::parse_split(split));
}

SplitCounts count(const std::vector<const corpus::QuestionThread*>& threads) {
  SplitCounts c;
  std::set<std::string> products;
  for (const auto* t : threads) {
    products.insert(t->product_id);
    ++c.questions;
    c.answers += t->answers.size();
    c.positive += static_cast<size_t>(t->num_positive());
  }
  c.products = products.size();
  return c;
}

/// Loads a checkpoint and applies inference-time overrides.
ranker::MuseModel load_model(const RunConfig& cfg) {
  ranker::MuseModel model = ranker::load_checkpoint(cfg.path("checkpoint"));
  ranker::check_config_compatible(model.config(), cfg.explicit_training);
  static const std::set<std::string> inference_keys = {"num_snippets", "k", "max_seq_len",
                                                       "no_relevance", "no_similarity",
                                                       "no_entailment", "p"};
  for (const auto& [k, v] : cfg.explicit_training) {
    if (inference_keys.count(k)) model.mutable_config().set(k, v);
  }
  model.mutable_config().validate();
  return model;
}

struct Ranking {
  std::string question_id;
  std::vector<std::pair<size_t, double>> order;  // answer index, score
};

std::vector<Ranking> rank_threads(const RunConfig& cfg,
                                  const std::vector<corpus::QuestionThread>& threads) {
  std::vector<Ranking> out;
  if (cfg.ranker == "bm25") {
    for (const auto& t : threads) {
      Ranking r{t.question_id, {}};
      for (const auto& a : retrieval::bm25_rank_answers(t, cfg.bm25)) r.order.emplace_back(a.index, a.score);
      out.push_back(std::move(r));
    }
    return out;
  }
  require_file(cfg, "checkpoint");
  ranker::MuseModel model = load_model(cfg);
  std::ofstream dump;
  if (cfg.has_path("dump_graph")) {
    dump.open(cfg.path("dump_graph"), std::ios::binary | std::ios::trunc);
    if (!dump) throw IoError("cannot write graph dump: " + cfg.path("dump_graph"));
  }
  for (const auto& t : threads) {
    ranker::EncodedThread e = model.encode(t);
    Ranking r{t.question_id, {}};
    for (const auto& a : ranker::rank_answers(model, e)) r.order.emplace_back(a.index, a.score);
    out.push_back(std::move(r));
    if (dump.is_open()) {
      const auto adj = relgraph::build_adjacency(e.answers.size(), e.snippets.size());
      dump << "# " << t.question_id << '\n';
      for (auto rel : relgraph::kRelations) {
        dump << "[" << relgraph::relation_name(rel) << "]\n"
             << relgraph::dump_adjacency(adj[static_cast<size_t>(rel)]);
      }
    }
  }
  return out;
}

std::vector<std::vector<int>> ranked_labels(const std::vector<corpus::QuestionThread>& threads,
                                            const std::vector<Ranking>& rankings) {
  std::vector<std::vector<int>> out;
  for (size_t i = 0; i < threads.size(); ++i) {
    std::vector<int> labels;
    for (const auto& [idx, score] : rankings[i].order) labels.push_back(threads[i].answers[idx].label);
    out.push_back(std::move(labels));
  }
  return out;
}

/// Reads a rank-command output file into per-question answer orders.
std::map<std::string, std::vector<size_t>> read_rankings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rankings file: " + path);
  std::map<std::string, std::vector<size_t>> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ss(line);
    std::string qid, idx, score;
    if (!std::getline(ss, qid, '\t') || !std::getline(ss, idx, '\t') || !std::getline(ss, score)) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected question_id<TAB>answer_index<TAB>score");
    }
    size_t index = 0;
    auto [p, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), index);
    if (ec != std::errc() || p != idx.data() + idx.size()) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad answer index '" + idx + "'");
    }
    out[qid].push_back(index);
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

bool RunConfig::is_key(const std::string& key) {
  return path_keys().count(key) || run_keys().count(key) || TrainingConfig::is_key(key);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (path_keys().count(key)) {
    paths[key] = value;
  } else if (key == "test_fraction") {
    test_fraction = to_double(key, value);
  } else if (key == "val_fraction") {
    val_fraction = to_double(key, value);
  } else if (key == "bm25_k1") {
    bm25.k1 = to_double(key, value);
  } else if (key == "bm25_b") {
    bm25.b = to_double(key, value);
  } else if (key == "split") {
    if (value != "all" && value != "train" && value != "val" && value != "test" && value != "none") {
      throw ConfigError("config key 'split': expected train, val, test, none or all, got '" + value + "'");
    }
    split = value;
  } else if (key == "ranker") {
    if (value != "muse" && value != "bm25") {
      throw ConfigError("config key 'ranker': expected muse or bm25, got '" + value + "'");
    }
    ranker = value;
  } else if (key == "iterations") {
    double v = to_double(key, value);
    if (v < 1 || v != std::floor(v)) throw ConfigError("config key 'iterations': expected a positive integer");
    iterations = static_cast<int>(v);
  } else if (TrainingConfig::is_key(key)) {
    training.set(key, value);
    explicit_training[key] = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void RunConfig::load_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open config file: " + file);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(file + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key == "config") throw ConfigError(file + ":" + std::to_string(lineno) + ": nested config files are not supported");
    try {
      set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(file + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::string RunConfig::path(const std::string& key) const {
  auto it = paths.find(key);
  return it == paths.end() ? std::string() : it->second;
}

bool RunConfig::has_path(const std::string& key) const {
  auto it = paths.find(key);
  return it != paths.end() && !it->second.empty();
}

PrepareStats run_prepare(const RunConfig& cfg) {
  require_file(cfg, "qa");
  require_file(cfg, "reviews");
  require_output(cfg, "out");

  corpus::QaCorpus qa = corpus::load_qa_corpus(cfg.path("qa"), cfg.path("reviews"));
  if (qa.threads.empty()) throw ArgumentError("QA file contains no usable questions");

  std::map<std::string, std::vector<corpus::Snippet>> product_snippets;
  for (const auto& [product, reviews] : qa.reviews_by_product) {
    auto& out = product_snippets[product];
    for (const auto& r : reviews) {
      for (auto& chunk : corpus::chunk_review(r.text)) out.push_back({std::move(chunk), r.review_id, 0.0});
    }
  }

  const auto n = static_cast<size_t>(cfg.training.num_snippets);
  PrepareStats stats;
  stats.skipped_no_answers = qa.skipped_no_answers;
  stats.skipped_empty_answers = qa.skipped_empty_answers;
  for (auto& t : qa.threads) {
    auto it = product_snippets.find(t.product_id);
    if (it != product_snippets.end()) {
      t.snippets = retrieval::retrieve_snippets(t.question, it->second, n, cfg.bm25);
    }
    t.padded = t.snippets.size() < n;
    stats.padded_threads += t.padded;
  }

  corpus::assign_splits(qa.threads, cfg.test_fraction, cfg.val_fraction,
                        sub_seed(cfg.training.seed, "split"));
  corpus::write_prepared(cfg.path("out"), qa.threads);

  std::vector<const corpus::QuestionThread*> train_val, test;
  for (const auto& t : qa.threads) (t.split == corpus::Split::kTest ? test : train_val).push_back(&t);
  stats.train_val = count(train_val);
  stats.test = count(test);
  return stats;
}

std::string format_prepare_stats(const PrepareStats& s) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "Split" << std::right << std::setw(12) << "# Product"
      << std::setw(12) << "# Q" << std::setw(12) << "# A" << std::setw(12) << "# Pos A" << '\n';
  auto row = [&](const char* name, const SplitCounts& c) {
    out << std::left << std::setw(12) << name << std::right << std::setw(12) << c.products
        << std::setw(12) << c.questions << std::setw(12) << c.answers << std::setw(12) << c.positive
        << '\n';
  };
  row("Train+Val", s.train_val);
  row("Test", s.test);
  out << "skipped questions without answers: " << s.skipped_no_answers
      << ", empty answers dropped: " << s.skipped_empty_answers
      << ", threads with fewer snippets than requested: " << s.padded_threads << '\n';
  return out.str();
}

TrainSummary run_train(const RunConfig& cfg) {
  require_file(cfg, "corpus");
  if (cfg.has_path("embeddings")) require_file(cfg, "embeddings");
  require_output(cfg, "checkpoint");
  if (cfg.has_path("log")) require_output(cfg, "log");
  cfg.training.validate();

  const auto all = corpus::read_prepared(cfg.path("corpus"));
  auto train_threads = corpus::filter_split(all, corpus::Split::kTrain);
  auto unassigned = corpus::filter_split(all, corpus::Split::kUnassigned);
  train_threads.insert(train_threads.end(), unassigned.begin(), unassigned.end());
  const auto val_threads = corpus::filter_split(all, corpus::Split::kVal);
  if (train_threads.empty()) throw ArgumentError("prepared corpus has no training threads");

  std::optional<text::PretrainedVectors> pretrained;
  if (cfg.has_path("embeddings")) {
    const auto tokens = ranker::corpus_tokens(all);
    pretrained = text::load_pretrained(cfg.path("embeddings"), cfg.training.embed_dim, &tokens);
  }
  std::vector<corpus::QuestionThread> others;
  for (const auto& t : all)
    if (t.split == corpus::Split::kVal || t.split == corpus::Split::kTest) others.push_back(t);
  text::Vocabulary vocab =
      ranker::build_vocabulary(train_threads, others, pretrained ? &*pretrained : nullptr);

  ranker::MuseModel model(cfg.training, std::move(vocab), pretrained ? &*pretrained : nullptr,
                          cfg.training.seed);
  std::vector<ranker::EncodedThread> train_enc, val_enc;
  for (const auto& t : train_threads) train_enc.push_back(model.encode(t));
  for (const auto& t : val_threads) val_enc.push_back(model.encode(t));

  std::ofstream log;
  if (cfg.has_path("log")) {
    log.open(cfg.path("log"), std::ios::binary | std::ios::trunc);
    if (!log) throw IoError("cannot write training log: " + cfg.path("log"));
  }
  auto result = ranker::train(model, train_enc, val_enc, [&](const ranker::EpochLog& e) {
    if (log.is_open()) log << ranker::epoch_log_json(e) << '\n' << std::flush;
  });
  ranker::save_checkpoint(cfg.path("checkpoint"), model);

  TrainSummary s;
  s.best_epoch = result.best_epoch;
  s.best_val_map = result.best_val_map;
  s.epochs_run = static_cast<int>(result.log.size());
  s.vocab_size = model.vocab().size();
  return s;
}

eval::MetricReport run_evaluate(const RunConfig& cfg) {
  require_file(cfg, "corpus");
  if (cfg.ranker == "muse") require_file(cfg, "checkpoint");
  if (cfg.has_path("compare")) require_file(cfg, "compare");
  if (cfg.has_path("report")) require_output(cfg, "report");
  if (cfg.has_path("per_question_tsv")) require_output(cfg, "per_question_tsv");

  const auto threads = select_split(corpus::read_prepared(cfg.path("corpus")), cfg.split);
  if (threads.empty()) throw ArgumentError("no threads in split '" + cfg.split + "'");
  const auto rankings = rank_threads(cfg, threads);
  std::vector<std::string> ids;
  for (const auto& t : threads) ids.push_back(t.question_id);
  const auto labels = ranked_labels(threads, rankings);
  eval::MetricReport report = eval::evaluate_ranking(labels, {1, 3}, ids);

  nlohmann::ordered_json j;
  j["ranker"] = cfg.ranker;
  j["split"] = cfg.split;
  j["map"] = report.map;
  j["mrr"] = report.mrr;
  nlohmann::ordered_json pat;
  for (const auto& [n, v] : report.p_at) pat[std::to_string(n)] = v;
  j["p_at"] = pat;
  j["n_evaluated"] = report.n_evaluated;
  j["n_skipped"] = report.n_skipped;

  if (cfg.has_path("compare")) {
    const auto other = read_rankings(cfg.path("compare"));
    std::vector<double> ours, theirs;
    for (size_t i = 0; i < threads.size(); ++i) {
      if (labels[i].empty() || !threads[i].num_positive()) continue;
      auto it = other.find(threads[i].question_id);
      if (it == other.end()) {
        throw ArgumentError("comparison rankings lack question '" + threads[i].question_id + "'");
      }
      std::vector<int> other_labels;
      for (size_t idx : it->second) {
        if (idx >= threads[i].answers.size()) {
          throw ArgumentError("comparison rankings reference answer " + std::to_string(idx) +
                              " of question '" + threads[i].question_id + "'");
        }
        other_labels.push_back(threads[i].answers[idx].label);
      }
      ours.push_back(eval::average_precision(labels[i]));
      theirs.push_back(eval::average_precision(other_labels));
    }
    const double p = eval::significance_test(ours, theirs, cfg.iterations,
                                             sub_seed(cfg.training.seed, "significance"));
    double other_map = 0.0;
    for (double v : theirs) other_map += v;
    other_map /= static_cast<double>(theirs.size());
    j["significance"] = {{"compare", cfg.path("compare")},
                         {"metric", "ap"},
                         {"compare_map", other_map},
                         {"iterations", cfg.iterations},
                         {"p_value", p}};
  }

  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& q : report.per_question) {
    nlohmann::ordered_json e;
    e["question_id"] = q.question_id;
    e["ap"] = q.ap;
    e["rr"] = q.rr;
    nlohmann::ordered_json qp;
    for (const auto& [n, v] : q.p_at) qp[std::to_string(n)] = v;
    e["p_at"] = qp;
    per.push_back(std::move(e));
  }
  j["per_question"] = std::move(per);

  if (cfg.has_path("report")) {
    std::ofstream out(cfg.path("report"), std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write report: " + cfg.path("report"));
    out << j.dump(2) << '\n';
  }
  if (cfg.has_path("per_question_tsv")) {
    std::ofstream out(cfg.path("per_question_tsv"), std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write per-question TSV: " + cfg.path("per_question_tsv"));
    for (const auto& q : report.per_question) {
      out << q.question_id << '\t' << format_double(q.ap) << '\t' << format_double(q.rr) << '\t'
          << format_double(q.p_at.at(1)) << '\t' << format_double(q.p_at.at(3)) << '\n';
    }
  }
  return report;
}

size_t run_rank(const RunConfig& cfg) {
  require_file(cfg, "corpus");
  if (cfg.ranker == "muse") require_file(cfg, "checkpoint");
  require_output(cfg, "out");
  const auto threads = select_split(corpus::read_prepared(cfg.path("corpus")), cfg.split);
  const auto rankings = rank_threads(cfg, threads);
  std::ofstream out(cfg.path("out"), std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write rankings: " + cfg.path("out"));
  for (const auto& r : rankings) {
    for (const auto& [idx, score] : r.order) {
      out << r.question_id << '\t' << idx << '\t' << format_double(score) << '\n';
    }
  }
  return rankings.size();
}

}  // namespace muse::pipeline
