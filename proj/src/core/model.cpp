#include "model.hpp"

#include <algorithm>
#include <cmath>

namespace muse::ranker {

namespace {

Matrix xavier(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
  return m;
}

std::vector<int> clamp_length(std::vector<int> ids, int max_len) {
  if (max_len > 0 && ids.size() > static_cast<size_t>(max_len)) ids.resize(static_cast<size_t>(max_len));
  if (ids.empty()) ids.push_back(text::Vocabulary::kUnk);
  return ids;
}

}  // namespace

bool EncodedThread::has_positive() const {
  return std::any_of(labels.begin(), labels.end(), [](int l) { return l != 0; });
}

MuseModel::MuseModel(TrainingConfig config, text::Vocabulary vocab,
                     const text::PretrainedVectors* pretrained, uint64_t seed)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  config_.validate();
  Rng embed_rng(sub_seed(seed, "embedding"));
  Rng rng(sub_seed(seed, "init"));
  const int de = config_.embed_dim;
  const int h = config_.hidden_size;
  const int dh = config_.context_dim();

  encoder_.embedding =
      &params_.add("encoder.embedding", text::build_embedding_table(vocab_, de, pretrained, embed_rng));
  auto add_lstm = [&](const std::string& dir, ad::Parameter*& wx, ad::Parameter*& wh,
                      ad::Parameter*& b) {
    wx = &params_.add("encoder." + dir + ".w_x", xavier(de, 4 * h, rng));
    wh = &params_.add("encoder." + dir + ".w_h", xavier(h, 4 * h, rng));
    b = &params_.add("encoder." + dir + ".b", Matrix::Zero(1, 4 * h));
  };
  add_lstm("fwd", encoder_.fwd_wx, encoder_.fwd_wh, encoder_.fwd_b);
  add_lstm("bwd", encoder_.bwd_wx, encoder_.bwd_wh, encoder_.bwd_b);
  encoder_.w_a = &params_.add("encoder.attention.w_a", xavier(2 * dh, config_.proj_dim, rng));
  encoder_.b_a = &params_.add("encoder.attention.b_a", Matrix::Zero(1, 1));
  encoder_.b_aa = &params_.add("encoder.attention.b_aa", Matrix::Zero(1, config_.proj_dim));
  encoder_.w_c = &params_.add("encoder.clip.w_c", xavier(dh, dh, rng));
  encoder_.b_c = &params_.add("encoder.clip.b_c", Matrix::Zero(1, 1));

  int in = dh;
  for (size_t l = 0; l < config_.gcn_dims.size(); ++l) {
    const int out = config_.gcn_dims[l];
    const std::string prefix = "gcn.layer" + std::to_string(l) + ".";
    relgraph::LayerParameters layer;
    for (auto r : relgraph::kRelations) {
      static const char* names[] = {"w_rel", "w_sim", "w_ent"};
      layer.relation[static_cast<size_t>(r)] =
          &params_.add(prefix + names[static_cast<size_t>(r)], xavier(in, out, rng));
    }
    layer.self = &params_.add(prefix + "w_self", xavier(in, out, rng));
    gcn_.layers.push_back(layer);
    in = out;
  }

  int head_in = 0;
  if (config_.use_textual_feature) head_in += config_.proj_dim;
  if (config_.use_interaction_feature) head_in += config_.gcn_dims.back();
  head_.w1 = &params_.add("head.w1", xavier(head_in, config_.mlp_hidden, rng));
  head_.b1 = &params_.add("head.b1", Matrix::Zero(1, config_.mlp_hidden));
  head_.w2 = &params_.add("head.w2", xavier(config_.mlp_hidden, 2, rng));
  head_.b2 = &params_.add("head.b2", Matrix::Zero(1, 2));
}

relgraph::RelationMask MuseModel::relation_mask() const {
  relgraph::RelationMask m;
  m[relgraph::Relation::kRelevance] = config_.use_relevance;
  m[relgraph::Relation::kSimilarity] = config_.use_similarity;
  m[relgraph::Relation::kEntailment] = config_.use_entailment;
  return m;
}

EncodedThread MuseModel::encode(const corpus::QuestionThread& thread) const {
  EncodedThread e;
  e.question_id = thread.question_id;
  const int max_len = config_.max_seq_len;
  e.question = clamp_length(vocab_.encode(text::tokenize(thread.question)), max_len);
  for (const auto& a : thread.answers) {
    e.answers.push_back(clamp_length(vocab_.encode(text::tokenize(a.text)), max_len));
    e.labels.push_back(a.label);
  }
  const size_t n = std::min(thread.snippets.size(), static_cast<size_t>(config_.num_snippets));
  for (size_t i = 0; i < n; ++i) {
    e.snippets.push_back(clamp_length(vocab_.encode(text::tokenize(thread.snippets[i].text)), max_len));
  }
  return e;
}

ThreadOutputs head_forward(ad::Tape& tape, const ad::Var& textual, const ad::Var& interaction,
                           const HeadParameters& head, double p, Rng* dropout_rng, double dropout) {
  std::vector<ad::Var> parts;
  if (textual.valid()) parts.push_back(textual);
  if (interaction.valid()) parts.push_back(interaction);
  if (parts.empty()) throw ArgumentError("predict_scores: no head input features");
  if (parts.size() == 2 && textual.rows() != interaction.rows()) {
    throw ArgumentError("predict_scores: textual and interaction features differ in row count");
  }
  ad::Var input = parts.size() == 1 ? parts[0] : ad::concat_cols(parts);
  if (input.cols() != head.w1->value.rows()) {
    throw ArgumentError("predict_scores: head input width " + std::to_string(input.cols()) +
                        " does not match weights " + std::to_string(head.w1->value.rows()));
  }
  if (dropout_rng && dropout > 0.0) {
    Matrix mask(input.rows(), input.cols());
    const double keep = 1.0 - dropout;
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      mask.data()[i] = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
    }
    input = ad::hadamard(input, tape.constant(std::move(mask)));
  }
  ad::Var hidden = ad::relu(ad::add_row(ad::matmul(input, tape.param(*head.w1)), tape.param(*head.b1)));
  ThreadOutputs out;
  out.textual = textual;
  out.scores = ad::add_row(ad::matmul(hidden, tape.param(*head.w2)), tape.param(*head.b2));
  out.probabilities = ad::softmax_rows(out.scores);
  out.listwise = ad::normalize_lp(ad::transpose(ad::slice_cols(out.probabilities, 1, 1)), p);
  return out;
}

PredictionSet predict_scores(ad::Tape& tape, const ad::Var& textual, const ad::Var& interaction,
                             const HeadParameters& head, double p) {
  ThreadOutputs out = head_forward(tape, textual, interaction, head, p, nullptr, 0.0);
  return PredictionSet{out.scores.value(), out.probabilities.value(), out.listwise.value().row(0)};
}

ThreadOutputs MuseModel::forward(ad::Tape& tape, const EncodedThread& thread,
                                 const ForwardOptions& options) const {
  if (thread.answers.empty()) throw ArgumentError("forward: thread has no answers");
  textenc::EncodedSequence q = textenc::encode_context(tape, thread.question, encoder_);
  ad::Var x_q = textenc::pool_question(q);

  std::vector<ad::Var> answers;
  answers.reserve(thread.answers.size());
  for (const auto& ids : thread.answers) {
    textenc::EncodedSequence a = textenc::encode_context(tape, ids, encoder_);
    answers.push_back(textenc::question_attend_answer(q, a, encoder_).x_a);
  }
  ad::Var textual = ad::concat_rows(answers);

  ad::Var interaction;
  std::optional<relgraph::SemanticGraph> graph;
  if (config_.use_interaction_feature) {
    std::vector<ad::Var> snippets;
    snippets.reserve(thread.snippets.size());
    for (const auto& ids : thread.snippets) {
      textenc::EncodedSequence c = textenc::encode_context(tape, ids, encoder_);
      snippets.push_back(textenc::clip_rescale_encode(c, x_q, encoder_, config_.k).x_c);
    }
    graph = relgraph::build_graph(x_q, answers, snippets);
    for (auto r : relgraph::kRelations) {
      if (options.zeroed_adjacency[r]) graph->clear_relation(r);
    }
    interaction = relgraph::interaction_features(*graph, gcn_, relation_mask());
  }

  ThreadOutputs out =
      head_forward(tape, config_.use_textual_feature ? textual : ad::Var{}, interaction, head_,
                   config_.p, options.dropout_rng, config_.dropout);
  out.textual = textual;
  out.graph = std::move(graph);
  return out;
}

PredictionSet MuseModel::predict(const EncodedThread& thread, const ForwardOptions& options) const {
  ad::Tape tape(false);
  ThreadOutputs out = forward(tape, thread, options);
  return PredictionSet{out.scores.value(), out.probabilities.value(), out.listwise.value().row(0)};
}

RowVector smoothed_target(const std::vector<int>& labels, double epsilon, double p) {
  RowVector y(static_cast<Eigen::Index>(labels.size()));
  for (size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels[i] + epsilon;
  const double norm = p == 1.0 ? y.sum() : std::pow(y.array().pow(p).sum(), 1.0 / p);
  return y / norm;
}

ad::Var pointwise_loss(const ad::Var& probabilities, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != probabilities.rows()) {
    throw ArgumentError("pointwise_loss: label count does not match predictions");
  }
  ad::Var picked = ad::pick(probabilities, labels);
  return ad::scale(ad::sum(ad::log(picked, 1e-12)), -1.0 / static_cast<double>(labels.size()));
}

ad::Var listwise_loss(const ad::Var& listwise, const std::vector<int>& labels, double epsilon,
                      double p) {
  ad::Tape& tape = *listwise.tape();
  if (static_cast<Eigen::Index>(labels.size()) != listwise.cols()) {
    throw ArgumentError("listwise_loss: label count does not match predictions");
  }
  if (std::none_of(labels.begin(), labels.end(), [](int l) { return l != 0; })) {
    return tape.constant(Matrix::Zero(1, 1));
  }
  const RowVector target = smoothed_target(labels, epsilon, p);
  ad::Var log_ratio = ad::sub(ad::log(listwise, 1e-12), tape.constant(target.array().log().matrix()));
  return ad::scale(ad::sum(ad::hadamard(listwise, log_ratio)), 1.0 / static_cast<double>(labels.size()));
}

double pointwise_loss(const PredictionSet& pred, const std::vector<int>& labels) {
  ad::Tape tape(false);
  return pointwise_loss(tape.constant(pred.probabilities), labels).scalar();
}

double listwise_loss(const PredictionSet& pred, const std::vector<int>& labels, double epsilon,
                     double p) {
  ad::Tape tape(false);
  return listwise_loss(tape.constant(Matrix(pred.listwise)), labels, epsilon, p).scalar();
}

ad::Var thread_loss(const ThreadOutputs& out, const EncodedThread& thread,
                    const TrainingConfig& config) {
  switch (config.loss) {
    case LossMode::kPointwise:
      return pointwise_loss(out.probabilities, thread.labels);
    case LossMode::kListwise:
      return listwise_loss(out.listwise, thread.labels, config.epsilon, config.p);
    case LossMode::kJoint: {
      ad::Var lp = pointwise_loss(out.probabilities, thread.labels);
      // skipping a zero-weighted term keeps lambda = 0 bitwise equal to pointwise
      if (config.lambda == 0.0 || !thread.has_positive()) return lp;
      ad::Var ll = listwise_loss(out.listwise, thread.labels, config.epsilon, config.p);
      return ad::add(lp, ad::scale(ll, config.lambda));
    }
  }
  throw ArgumentError("thread_loss: unknown loss mode");
}

double regularizer_value(const ad::ParameterStore& params, const TrainingConfig& config) {
  if (config.eta == 0.0) return 0.0;
  const double sq = params.squared_norm();
  return config.eta * (config.regularizer == Regularizer::kSquaredL2 ? sq : std::sqrt(sq));
}

void add_regularizer_grad(ad::ParameterStore& params, const TrainingConfig& config) {
  if (config.eta == 0.0) return;
  double factor = 2.0 * config.eta;
  if (config.regularizer == Regularizer::kL2) {
    const double norm = std::sqrt(params.squared_norm());
    if (norm == 0.0) return;
    factor = config.eta / norm;
  }
  for (auto& p : params) p->grad += factor * p->value;
}

double joint_loss(MuseModel& model, const std::vector<EncodedThread>& batch, bool accumulate_grad,
                  Rng* dropout_rng) {
  if (batch.empty()) throw ArgumentError("joint_loss: empty batch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  ForwardOptions opts;
  opts.dropout_rng = dropout_rng;
  for (const auto& thread : batch) {
    ad::Tape tape(accumulate_grad);
    ThreadOutputs out = model.forward(tape, thread, opts);
    ad::Var loss = thread_loss(out, thread, model.config());
    total += loss.scalar();
    if (accumulate_grad) tape.backward(loss, inv);
  }
  if (accumulate_grad) add_regularizer_grad(model.params(), model.config());
  return total * inv + regularizer_value(model.params(), model.config());
}

std::vector<RankedAnswer> rank_answers(const MuseModel& model, const EncodedThread& thread) {
  PredictionSet pred = model.predict(thread);
  std::vector<RankedAnswer> ranked;
  for (Eigen::Index i = 0; i < pred.probabilities.rows(); ++i) {
    ranked.push_back({static_cast<size_t>(i), pred.probabilities(i, 1)});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedAnswer& a, const RankedAnswer& b) { return a.score > b.score; });
  return ranked;
}

}  // namespace muse::ranker
