#include "text.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace muse::text {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

char lower(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.push_back(std::move(word));
      word.clear();
    }
  };
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      word.push_back(lower(c));
    } else {
      flush();
      if (!is_space(c)) out.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

PretrainedVectors load_pretrained(const std::string& path, int expected_dim,
                                  const std::unordered_map<std::string, int>* keep) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings file: " + path);
  PretrainedVectors out;
  out.dim = expected_dim > 0 ? expected_dim : 0;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto sp = line.find(' ');
    if (sp == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected token followed by floats");
    }
    std::string token = line.substr(0, sp);
    if (keep && keep->count(token) == 0) continue;

    std::vector<double> values;
    const char* p = line.data() + sp;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p >= end) break;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad float in vector for '" +
                         token + "'");
      }
      values.push_back(v);
      p = next;
    }
    if (out.dim == 0) out.dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != out.dim) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(out.dim) + " values, got " + std::to_string(values.size()));
    }
    out.vectors.emplace(std::move(token), std::move(values));
  }
  return out;
}

Matrix build_embedding_table(const Vocabulary& vocab, int dim, const PretrainedVectors* pretrained,
                             Rng& rng) {
  if (dim <= 0) throw ArgumentError("embedding dimension must be positive");
  if (pretrained && !pretrained->vectors.empty() && pretrained->dim != dim) {
    throw ArgumentError("pretrained vectors have dimension " + std::to_string(pretrained->dim) +
                        ", model expects " + std::to_string(dim));
  }
  Matrix table(static_cast<Eigen::Index>(vocab.size()), dim);
  table.row(Vocabulary::kPad).setZero();
  for (size_t i = 1; i < vocab.size(); ++i) {
    auto row = static_cast<Eigen::Index>(i);
    // draw unconditionally so the stream does not depend on pretrained coverage
    for (int j = 0; j < dim; ++j) table(row, j) = rng.uniform(-0.05, 0.05);
    if (pretrained) {
      auto it = pretrained->vectors.find(vocab.token(static_cast<int>(i)));
      if (it != pretrained->vectors.end()) {
        for (int j = 0; j < dim; ++j) table(row, j) = it->second[static_cast<size_t>(j)];
      }
    }
  }
  return table;
}

}  // namespace muse::text
