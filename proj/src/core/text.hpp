#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "common.hpp"

namespace muse::text {

/// Lowercases ASCII letters and splits into tokens. Runs of alphanumerics
/// (bytes >= 0x80 count as alphanumeric so UTF-8 words stay intact) form one
/// token; every other non-space character is a token of its own.
std::vector<std::string> tokenize(std::string_view text);

/// Token <-> id map. Id 0 is padding and id 1 is unknown.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  /// Adds the token if absent; returns its id.
  int add(const std::string& token);
  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<size_t>(id)); }
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Word vectors keyed by token, as read from a GloVe-format text file.
struct PretrainedVectors {
  int dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
};

/// Reads "token v1 v2 ... vd" lines. When `keep` is non-null only tokens it
/// contains are retained. Every line must carry the same dimension, and if
/// `expected_dim` is positive it must equal that.
PretrainedVectors load_pretrained(const std::string& path, int expected_dim,
                                  const std::unordered_map<std::string, int>* keep = nullptr);

/// Embedding table for `vocab`: pretrained rows where available, otherwise
/// uniform(-0.05, 0.05). Row 0 (padding) is all zeros.
Matrix build_embedding_table(const Vocabulary& vocab, int dim, const PretrainedVectors* pretrained,
                             Rng& rng);

}  // namespace muse::text
