#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace muse {

namespace {

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

}  // namespace

const char* loss_mode_name(LossMode m) {
  switch (m) {
    case LossMode::kPointwise: return "pointwise";
    case LossMode::kListwise: return "listwise";
    case LossMode::kJoint: return "joint";
  }
  return "?";
}

const char* regularizer_name(Regularizer r) {
  return r == Regularizer::kSquaredL2 ? "squared_l2" : "l2";
}

const std::vector<std::string>& TrainingConfig::keys() {
  static const std::vector<std::string> k = {
      "embed_dim",  "hidden_size", "proj_dim", "k", "max_seq_len", "num_snippets", "gcn_dims",
      "mlp_hidden", "no_relevance", "no_similarity", "no_entailment", "no_textual_feature",
      "no_interaction_feature", "loss", "lambda", "eta", "p", "epsilon", "regularizer", "dropout",
      "batch_size", "learning_rate", "epochs", "patience", "seed"};
  return k;
}

const std::vector<std::string>& TrainingConfig::shape_keys() {
  static const std::vector<std::string> k = {"embed_dim", "hidden_size", "proj_dim", "gcn_dims",
                                             "mlp_hidden", "no_textual_feature",
                                             "no_interaction_feature"};
  return k;
}

bool TrainingConfig::is_key(const std::string& key) {
  const auto& k = keys();
  return std::find(k.begin(), k.end(), key) != k.end();
}

void TrainingConfig::set(const std::string& key, const std::string& v) {
  if (key == "embed_dim") embed_dim = parse_int(key, v);
  else if (key == "hidden_size") hidden_size = parse_int(key, v);
  else if (key == "proj_dim") proj_dim = parse_int(key, v);
  else if (key == "k") k = parse_int(key, v);
  else if (key == "max_seq_len") max_seq_len = parse_int(key, v);
  else if (key == "num_snippets") num_snippets = parse_int(key, v);
  else if (key == "gcn_dims") {
    std::vector<int> dims;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) dims.push_back(parse_int(key, item));
    if (dims.empty()) throw ConfigError("config key 'gcn_dims': expected a comma-separated list");
    gcn_dims = std::move(dims);
  } else if (key == "mlp_hidden") mlp_hidden = parse_int(key, v);
  else if (key == "no_relevance") use_relevance = !parse_bool(key, v);
  else if (key == "no_similarity") use_similarity = !parse_bool(key, v);
  else if (key == "no_entailment") use_entailment = !parse_bool(key, v);
  else if (key == "no_textual_feature") use_textual_feature = !parse_bool(key, v);
  else if (key == "no_interaction_feature") use_interaction_feature = !parse_bool(key, v);
  else if (key == "loss") {
    if (v == "pointwise") loss = LossMode::kPointwise;
    else if (v == "listwise") loss = LossMode::kListwise;
    else if (v == "joint") loss = LossMode::kJoint;
    else throw ConfigError("config key 'loss': expected pointwise, listwise or joint, got '" + v + "'");
  } else if (key == "lambda") lambda = parse_double(key, v);
  else if (key == "eta") eta = parse_double(key, v);
  else if (key == "p") p = parse_double(key, v);
  else if (key == "epsilon") epsilon = parse_double(key, v);
  else if (key == "regularizer") {
    if (v == "squared_l2") regularizer = Regularizer::kSquaredL2;
    else if (v == "l2") regularizer = Regularizer::kL2;
    else throw ConfigError("config key 'regularizer': expected squared_l2 or l2, got '" + v + "'");
  } else if (key == "dropout") dropout = parse_double(key, v);
  else if (key == "batch_size") batch_size = parse_int(key, v);
  else if (key == "learning_rate") learning_rate = parse_double(key, v);
  else if (key == "epochs") epochs = parse_int(key, v);
  else if (key == "patience") patience = parse_int(key, v);
  else if (key == "seed") seed = parse_u64(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::map<std::string, std::string> TrainingConfig::to_map() const {
  std::string dims;
  for (size_t i = 0; i < gcn_dims.size(); ++i) dims += (i ? "," : "") + std::to_string(gcn_dims[i]);
  return {
      {"embed_dim", std::to_string(embed_dim)},
      {"hidden_size", std::to_string(hidden_size)},
      {"proj_dim", std::to_string(proj_dim)},
      {"k", std::to_string(k)},
      {"max_seq_len", std::to_string(max_seq_len)},
      {"num_snippets", std::to_string(num_snippets)},
      {"gcn_dims", dims},
      {"mlp_hidden", std::to_string(mlp_hidden)},
      {"no_relevance", fmt_bool(!use_relevance)},
      {"no_similarity", fmt_bool(!use_similarity)},
      {"no_entailment", fmt_bool(!use_entailment)},
      {"no_textual_feature", fmt_bool(!use_textual_feature)},
      {"no_interaction_feature", fmt_bool(!use_interaction_feature)},
      {"loss", loss_mode_name(loss)},
      {"lambda", fmt_double(lambda)},
      {"eta", fmt_double(eta)},
      {"p", fmt_double(p)},
      {"epsilon", fmt_double(epsilon)},
      {"regularizer", regularizer_name(regularizer)},
      {"dropout", fmt_double(dropout)},
      {"batch_size", std::to_string(batch_size)},
      {"learning_rate", fmt_double(learning_rate)},
      {"epochs", std::to_string(epochs)},
      {"patience", std::to_string(patience)},
      {"seed", std::to_string(seed)},
  };
}

void TrainingConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(embed_dim >= 1, "embed_dim must be >= 1");
  require(hidden_size >= 1, "hidden_size must be >= 1");
  require(proj_dim >= 1, "proj_dim must be >= 1");
  require(k >= 1, "k must be >= 1");
  require(max_seq_len >= 0, "max_seq_len must be >= 0");
  require(num_snippets >= 0, "num_snippets must be >= 0");
  require(!gcn_dims.empty(), "gcn_dims must list at least one layer");
  for (int d : gcn_dims) require(d >= 1, "gcn_dims entries must be >= 1");
  require(mlp_hidden >= 1, "mlp_hidden must be >= 1");
  require(use_textual_feature || use_interaction_feature,
          "at least one of the textual and interaction features must be enabled");
  if (use_interaction_feature) {
    require(proj_dim == context_dim(),
            "proj_dim must equal 2 * hidden_size so answer, question and snippet nodes share a width");
  }
  require(lambda >= 0.0, "lambda must be >= 0");
  require(eta >= 0.0, "eta must be >= 0");
  require(p >= 1.0, "p must be >= 1");
  require(epsilon > 0.0, "epsilon must be > 0");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(epochs >= 0, "epochs must be >= 0");
  require(patience >= 0, "patience must be >= 0");
}

}  // namespace muse
