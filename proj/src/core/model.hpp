#pragma once

#include <optional>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "relgraph.hpp"
#include "text.hpp"
#include "textenc.hpp"

namespace muse::ranker {

/// A question thread mapped to vocabulary ids, ready for the network.
struct EncodedThread {
  std::string question_id;
  std::vector<int> question;
  std::vector<std::vector<int>> answers;
  std::vector<std::vector<int>> snippets;
  std::vector<int> labels;

  bool has_positive() const;
};

struct HeadParameters {
  ad::Parameter* w1 = nullptr;  // in x hidden
  ad::Parameter* b1 = nullptr;  // 1 x hidden
  ad::Parameter* w2 = nullptr;  // hidden x 2
  ad::Parameter* b2 = nullptr;  // 1 x 2
};

/// Tape variables of one forward pass over a thread.
struct ThreadOutputs {
  ad::Var scores;         // S, |A| x 2
  ad::Var probabilities;  // S_hat, |A| x 2
  ad::Var listwise;       // y_hat, 1 x |A|
  ad::Var textual;        // x_a rows, |A| x d_proj
  std::optional<relgraph::SemanticGraph> graph;
};

/// Materialized predictions for one thread.
struct PredictionSet {
  Matrix scores;
  Matrix probabilities;
  RowVector listwise;
};

struct ForwardOptions {
  /// Applies dropout to the head input when set (training only).
  Rng* dropout_rng = nullptr;
  /// Relations whose adjacency is zeroed after graph construction, while the
  /// propagation still runs over all three terms.
  relgraph::RelationMask zeroed_adjacency{{false, false, false}};
};

class MuseModel {
 public:
  /// Allocates and initializes every parameter. Weight matrices are
  /// Xavier-uniform, biases zero, embeddings from `pretrained` when given.
  MuseModel(TrainingConfig config, text::Vocabulary vocab,
            const text::PretrainedVectors* pretrained, uint64_t seed);

  MuseModel(const MuseModel&) = delete;
  MuseModel& operator=(const MuseModel&) = delete;
  MuseModel(MuseModel&&) = default;
  MuseModel& operator=(MuseModel&&) = default;

  const TrainingConfig& config() const { return config_; }
  TrainingConfig& mutable_config() { return config_; }
  const text::Vocabulary& vocab() const { return vocab_; }
  ad::ParameterStore& params() { return params_; }
  const ad::ParameterStore& params() const { return params_; }
  const textenc::EncoderParameters& encoder() const { return encoder_; }
  const relgraph::GcnParameters& gcn() const { return gcn_; }
  const HeadParameters& head() const { return head_; }

  relgraph::RelationMask relation_mask() const;

  EncodedThread encode(const corpus::QuestionThread& thread) const;

  ThreadOutputs forward(ad::Tape& tape, const EncodedThread& thread,
                        const ForwardOptions& options = {}) const;

  PredictionSet predict(const EncodedThread& thread, const ForwardOptions& options = {}) const;

 private:
  TrainingConfig config_;
  text::Vocabulary vocab_;
  ad::ParameterStore params_;
  textenc::EncoderParameters encoder_;
  relgraph::GcnParameters gcn_;
  HeadParameters head_;
};

/// Row-wise softmax of S and the L_p-normalized positive-class column.
PredictionSet predict_scores(ad::Tape& tape, const ad::Var& textual, const ad::Var& interaction,
                             const HeadParameters& head, double p = 1.0);

/// Builds S, S_hat and y_hat on the tape. Either feature may be invalid
/// (disabled), not both.
ThreadOutputs head_forward(ad::Tape& tape, const ad::Var& textual, const ad::Var& interaction,
                           const HeadParameters& head, double p, Rng* dropout_rng, double dropout);

/// Smoothed listwise target (y + eps) / ||y + eps||_p.
RowVector smoothed_target(const std::vector<int>& labels, double epsilon, double p = 1.0);

/// Mean over answers of -log S_hat[i, y_i]; probabilities floored at 1e-12.
ad::Var pointwise_loss(const ad::Var& probabilities, const std::vector<int>& labels);
/// (1/|A|) KL(y_hat || y'); a zero constant when no label is positive.
ad::Var listwise_loss(const ad::Var& listwise, const std::vector<int>& labels, double epsilon,
                      double p = 1.0);

double pointwise_loss(const PredictionSet& pred, const std::vector<int>& labels);
double listwise_loss(const PredictionSet& pred, const std::vector<int>& labels, double epsilon,
                     double p = 1.0);

/// L_p + lambda L_l under the configured loss mode (no regularizer).
ad::Var thread_loss(const ThreadOutputs& out, const EncodedThread& thread,
                    const TrainingConfig& config);

/// eta * ||Theta||_2^2 (or the unsquared norm) for the configured regularizer.
double regularizer_value(const ad::ParameterStore& params, const TrainingConfig& config);
/// Adds the regularizer gradient to every parameter's grad.
void add_regularizer_grad(ad::ParameterStore& params, const TrainingConfig& config);

/// Mean per-thread loss over the batch plus the regularizer. With
/// accumulate_grad the gradients are added to the parameter grads.
double joint_loss(MuseModel& model, const std::vector<EncodedThread>& batch, bool accumulate_grad,
                  Rng* dropout_rng = nullptr);

struct RankedAnswer {
  size_t index;
  double score;  // positive-class probability
};

/// Answers by descending positive probability; ties keep input order.
std::vector<RankedAnswer> rank_answers(const MuseModel& model, const EncodedThread& thread);

}  // namespace muse::ranker
