#pragma once

#include <map>
#include <string>
#include <vector>

#include "common.hpp"

namespace muse {

enum class LossMode { kPointwise, kListwise, kJoint };
enum class Regularizer { kSquaredL2, kL2 };

const char* loss_mode_name(LossMode m);
const char* regularizer_name(Regularizer r);

/// Architecture and optimization settings. Defaults are the published
/// configuration where one exists.
struct TrainingConfig {
  // text encoder
  int embed_dim = 300;
  int hidden_size = 100;  // per LSTM direction; d_h = 2 * hidden_size
  int proj_dim = 200;     // output width of W_a
  int k = 8;              // clip-rescale budget
  int max_seq_len = 100;  // tokens kept per text; 0 keeps everything
  int num_snippets = 5;   // |C| used by the model

  // relation graph and head
  std::vector<int> gcn_dims = {150, 100};
  int mlp_hidden = 100;
  bool use_relevance = true;
  bool use_similarity = true;
  bool use_entailment = true;
  bool use_textual_feature = true;
  bool use_interaction_feature = true;

  // objective
  LossMode loss = LossMode::kJoint;
  double lambda = 2.0;
  double eta = 0.001;
  double p = 1.0;
  double epsilon = 1e-3;  // label smoothing for the listwise target
  Regularizer regularizer = Regularizer::kSquaredL2;
  double dropout = 0.0;

  // optimization
  int batch_size = 50;
  double learning_rate = 0.001;
  int epochs = 30;
  int patience = 10;  // epochs without validation gain; 0 disables early stopping
  uint64_t seed = 42;

  int context_dim() const { return 2 * hidden_size; }

  /// Sets one field from its textual form; unknown keys and malformed
  /// values raise ConfigError naming the key.
  void set(const std::string& key, const std::string& value);
  /// Every field as key -> value text; set(key, to_map()[key]) round-trips.
  std::map<std::string, std::string> to_map() const;
  static bool is_key(const std::string& key);
  static const std::vector<std::string>& keys();
  /// Keys that fix parameter shapes.
  static const std::vector<std::string>& shape_keys();

  void validate() const;
};

}  // namespace muse
