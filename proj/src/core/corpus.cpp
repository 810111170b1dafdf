#include "corpus.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "text.hpp"

namespace muse::corpus {

using nlohmann::json;

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?' || c == ';'; }

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing key '" + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw ParseError(where + ": key '" + key + "' must be a string");
  return v.get<std::string>();
}

int require_count(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer()) throw ParseError(where + ": key '" + key + "' must be an integer");
  auto n = v.get<int64_t>();
  if (n < 0) throw ParseError(where + ": key '" + key + "' must be non-negative");
  if (n > INT32_MAX) throw ParseError(where + ": key '" + key + "' out of range");
  return static_cast<int>(n);
}

json parse_line(const std::string& line, const std::string& where) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(where + ": invalid JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw ParseError(where + ": record must be a JSON object");
  return j;
}

bool blank(const std::string& line) {
  for (char c : line)
    if (!is_space(c)) return false;
  return true;
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kUnassigned: break;
  }
  return "none";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  if (name == "none") return Split::kUnassigned;
  throw ArgumentError("unknown split '" + name + "' (expected train, val, test or none)");
}

int QuestionThread::num_positive() const {
  int n = 0;
  for (const auto& a : answers) n += a.label;
  return n;
}

int derive_label(int pos_votes, int neg_votes) {
  if (pos_votes < 0 || neg_votes < 0) throw ArgumentError("vote counts must be non-negative");
  return pos_votes > neg_votes ? 1 : 0;
}

std::vector<std::string> chunk_review(const std::string& review_text) {
  std::vector<std::string> chunks;
  auto emit = [&](size_t begin, size_t end) {
    std::string piece = trim(review_text.substr(begin, end - begin));
    if (text::tokenize(piece).size() >= 2) chunks.push_back(std::move(piece));
  };
  size_t start = 0;
  for (size_t i = 0; i < review_text.size(); ++i) {
    if (!is_terminator(review_text[i])) continue;
    if (i + 1 == review_text.size() || is_space(review_text[i + 1])) {
      emit(start, i + 1);
      start = i + 1;
    }
  }
  if (start < review_text.size()) emit(start, review_text.size());
  return chunks;
}

bool parse_qa_record(const std::string& line, const std::string& where, QuestionThread& out,
                     size_t& empty_answers) {
  json j = parse_line(line, where);
  out = QuestionThread{};
  out.question_id = require_string(j, "question_id", where);
  out.product_id = require_string(j, "product_id", where);
  out.question = require_string(j, "question", where);
  const json& answers = require(j, "answers", where);
  if (!answers.is_array()) throw ParseError(where + ": key 'answers' must be an array");
  for (size_t i = 0; i < answers.size(); ++i) {
    const std::string awhere = where + ": answers[" + std::to_string(i) + "]";
    const json& a = answers[i];
    if (!a.is_object()) throw ParseError(awhere + ": answer must be an object");
    RawAnswer ans;
    ans.text = require_string(a, "text", awhere);
    ans.pos_votes = require_count(a, "pos_votes", awhere);
    ans.neg_votes = require_count(a, "neg_votes", awhere);
    ans.label = derive_label(ans.pos_votes, ans.neg_votes);
    if (trim(ans.text).empty()) {
      ++empty_answers;
      continue;
    }
    out.answers.push_back(std::move(ans));
  }
  return !out.answers.empty();
}

QaCorpus load_qa_corpus(const std::string& qa_path, const std::string& review_path) {
  std::ifstream qa(qa_path);
  if (!qa) throw IoError("cannot open QA file: " + qa_path);
  std::ifstream rv(review_path);
  if (!rv) throw IoError("cannot open review file: " + review_path);

  QaCorpus corpus;
  std::string line;
  size_t lineno = 0;
  while (std::getline(qa, line)) {
    ++lineno;
    if (blank(line)) continue;
    QuestionThread t;
    if (parse_qa_record(line, qa_path + ":" + std::to_string(lineno), t,
                        corpus.skipped_empty_answers)) {
      corpus.threads.push_back(std::move(t));
    } else {
      ++corpus.skipped_no_answers;
    }
  }

  lineno = 0;
  while (std::getline(rv, line)) {
    ++lineno;
    if (blank(line)) continue;
    const std::string where = review_path + ":" + std::to_string(lineno);
    json j = parse_line(line, where);
    Review r;
    r.review_id = require_string(j, "review_id", where);
    r.product_id = require_string(j, "product_id", where);
    r.text = require_string(j, "text", where);
    corpus.reviews_by_product[r.product_id].push_back(std::move(r));
  }
  return corpus;
}

void assign_splits(std::vector<QuestionThread>& threads, double test_fraction, double val_fraction,
                   uint64_t seed) {
  if (threads.empty()) throw ArgumentError("split_corpus: empty corpus");
  if (!(test_fraction > 0.0 && test_fraction < 1.0) || !(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ArgumentError("split_corpus: fractions must lie in (0, 1)");
  }
  if (test_fraction + val_fraction >= 1.0) {
    throw ArgumentError("split_corpus: test_fraction + val_fraction must be < 1");
  }
  const size_t n = threads.size();
  auto n_test = static_cast<size_t>(std::llround(static_cast<double>(n) * test_fraction));
  auto n_val = static_cast<size_t>(std::llround(static_cast<double>(n) * val_fraction));
  if (n_test + n_val > n) n_val = n - n_test;

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  for (size_t r = 0; r < n; ++r) {
    threads[order[r]].split = r < n_test ? Split::kTest : r < n_test + n_val ? Split::kVal : Split::kTrain;
  }
}

SplitResult split_corpus(std::vector<QuestionThread> threads, double test_fraction,
                         double val_fraction, uint64_t seed) {
  assign_splits(threads, test_fraction, val_fraction, seed);
  SplitResult out;
  for (auto& t : threads) {
    switch (t.split) {
      case Split::kTest: out.test.push_back(std::move(t)); break;
      case Split::kVal: out.val.push_back(std::move(t)); break;
      default: out.train.push_back(std::move(t)); break;
    }
  }
  return out;
}

std::string thread_to_json_line(const QuestionThread& t) {
  json j;
  j["question_id"] = t.question_id;
  j["product_id"] = t.product_id;
  j["question"] = t.question;
  j["split"] = split_name(t.split);
  j["padded"] = t.padded;
  json answers = json::array();
  for (const auto& a : t.answers) {
    answers.push_back({{"text", a.text},
                       {"pos_votes", a.pos_votes},
                       {"neg_votes", a.neg_votes},
                       {"label", a.label}});
  }
  j["answers"] = std::move(answers);
  json snippets = json::array();
  for (const auto& s : t.snippets) {
    snippets.push_back(
        {{"text", s.text}, {"source_review_id", s.source_review_id}, {"bm25_score", s.bm25_score}});
  }
  j["snippets"] = std::move(snippets);
  return j.dump();
}

void write_prepared(const std::string& path, const std::vector<QuestionThread>& threads) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write prepared corpus: " + path);
  for (const auto& t : threads) out << thread_to_json_line(t) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::vector<QuestionThread> read_prepared(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open prepared corpus: " + path);
  std::vector<QuestionThread> threads;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    size_t ignored = 0;
    QuestionThread t;
    if (!parse_qa_record(line, where, t, ignored)) {
      throw ParseError(where + ": prepared thread has no answers");
    }
    json j = parse_line(line, where);
    const json& answers = j["answers"];
    size_t kept = 0;
    for (const auto& a : answers) {
      if (trim(a.value("text", "")).empty()) continue;
      int label = require_count(a, "label", where);
      if (label != t.answers[kept].label) {
        throw ParseError(where + ": answer label disagrees with its vote counts");
      }
      ++kept;
    }
    t.split = j.contains("split") ? parse_split(require_string(j, "split", where)) : Split::kUnassigned;
    t.padded = j.value("padded", false);
    const json& snippets = require(j, "snippets", where);
    if (!snippets.is_array()) throw ParseError(where + ": key 'snippets' must be an array");
    for (const auto& s : snippets) {
      Snippet sn;
      sn.text = require_string(s, "text", where);
      sn.source_review_id = require_string(s, "source_review_id", where);
      const json& score = require(s, "bm25_score", where);
      if (!score.is_number()) throw ParseError(where + ": bm25_score must be a number");
      sn.bm25_score = score.get<double>();
      if (!std::isfinite(sn.bm25_score)) throw ParseError(where + ": bm25_score must be finite");
      t.snippets.push_back(std::move(sn));
    }
    threads.push_back(std::move(t));
  }
  return threads;
}

std::vector<QuestionThread> filter_split(const std::vector<QuestionThread>& threads, Split split) {
  std::vector<QuestionThread> out;
  for (const auto& t : threads)
    if (t.split == split) out.push_back(t);
  return out;
}

}  // namespace muse::corpus
