#pragma once

#include <functional>
#include <string>
#include <vector>

#include "metrics.hpp"
#include "model.hpp"

namespace muse::ranker {

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_map = 0.0;
  double val_mrr = 0.0;
};

/// {"epoch": .., "train_loss": .., "val_map": .., "val_mrr": ..}
std::string epoch_log_json(const EpochLog& log);

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;  // 0 means the initial parameters were never beaten
  double best_val_map = -1.0;
  size_t steps = 0;
};

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate) : lr_(learning_rate) {}
  void step(ad::ParameterStore& params);
  long long steps() const { return t_; }

 private:
  double lr_;
  long long t_ = 0;
};

/// Vocabulary over every token of the training threads, plus tokens of the
/// other threads that have a pretrained vector.
text::Vocabulary build_vocabulary(const std::vector<corpus::QuestionThread>& train,
                                  const std::vector<corpus::QuestionThread>& others,
                                  const text::PretrainedVectors* pretrained);

/// Collects every distinct token of the threads (for filtering large vector files).
std::unordered_map<std::string, int> corpus_tokens(const std::vector<corpus::QuestionThread>& threads);

/// Ranks each thread and scores the result against its labels.
eval::MetricReport evaluate_model(const MuseModel& model, const std::vector<EncodedThread>& threads);

/// One optimization step over a batch. Throws NumericError on a non-finite loss.
double train_step(MuseModel& model, AdamOptimizer& opt, const std::vector<EncodedThread>& batch,
                  Rng* dropout_rng);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch training. Threads are reshuffled each epoch from the "batch"
/// sub-seed. After every epoch the validation MAP is measured (on the
/// training threads when `val` is empty) and the best parameters are kept;
/// on return the model holds them.
TrainResult train(MuseModel& model, const std::vector<EncodedThread>& train_threads,
                  const std::vector<EncodedThread>& val, const EpochCallback& on_epoch = {});

}  // namespace muse::ranker
