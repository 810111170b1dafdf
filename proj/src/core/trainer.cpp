#include "trainer.hpp"

#include <cmath>

#include <json.hpp>

namespace muse::ranker {

std::string epoch_log_json(const EpochLog& log) {
  nlohmann::ordered_json j;
  j["epoch"] = log.epoch;
  j["train_loss"] = log.train_loss;
  j["val_map"] = log.val_map;
  j["val_mrr"] = log.val_mrr;
  return j.dump();
}

void AdamOptimizer::step(ad::ParameterStore& params) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (auto& p : params) {
    p->adam_m = beta1 * p->adam_m + (1.0 - beta1) * p->grad;
    p->adam_v = beta2 * p->adam_v + (1.0 - beta2) * p->grad.cwiseAbs2();
    p->value.array() -= lr_ * (p->adam_m.array() / c1) / ((p->adam_v.array() / c2).sqrt() + eps);
  }
}

namespace {

void add_tokens(const corpus::QuestionThread& t, const std::function<void(const std::string&)>& f) {
  for (const auto& tok : text::tokenize(t.question)) f(tok);
  for (const auto& a : t.answers)
    for (const auto& tok : text::tokenize(a.text)) f(tok);
  for (const auto& s : t.snippets)
    for (const auto& tok : text::tokenize(s.text)) f(tok);
}

}  // namespace

text::Vocabulary build_vocabulary(const std::vector<corpus::QuestionThread>& train,
                                  const std::vector<corpus::QuestionThread>& others,
                                  const text::PretrainedVectors* pretrained) {
  text::Vocabulary vocab;
  for (const auto& t : train) add_tokens(t, [&](const std::string& tok) { vocab.add(tok); });
  if (pretrained) {
    for (const auto& t : others) {
      add_tokens(t, [&](const std::string& tok) {
        if (pretrained->vectors.count(tok)) vocab.add(tok);
      });
    }
  }
  return vocab;
}

std::unordered_map<std::string, int> corpus_tokens(const std::vector<corpus::QuestionThread>& threads) {
  std::unordered_map<std::string, int> tokens;
  for (const auto& t : threads) add_tokens(t, [&](const std::string& tok) { ++tokens[tok]; });
  return tokens;
}

eval::MetricReport evaluate_model(const MuseModel& model, const std::vector<EncodedThread>& threads) {
  std::vector<std::vector<int>> ranked_labels;
  std::vector<std::string> ids;
  for (const auto& t : threads) {
    std::vector<int> labels;
    for (const auto& r : rank_answers(model, t)) labels.push_back(t.labels[r.index]);
    ranked_labels.push_back(std::move(labels));
    ids.push_back(t.question_id);
  }
  return eval::evaluate_ranking(ranked_labels, {1, 3}, ids);
}

double train_step(MuseModel& model, AdamOptimizer& opt, const std::vector<EncodedThread>& batch,
                  Rng* dropout_rng) {
  model.params().zero_grad();
  const double loss = joint_loss(model, batch, true, dropout_rng);
  if (!std::isfinite(loss)) {
    std::string ids;
    for (const auto& t : batch) ids += (ids.empty() ? "" : ",") + t.question_id;
    throw NumericError("non-finite loss in batch [" + ids + "]");
  }
  // padding embedding stays fixed at zero
  model.encoder().embedding->grad.row(text::Vocabulary::kPad).setZero();
  opt.step(model.params());
  return loss;
}

TrainResult train(MuseModel& model, const std::vector<EncodedThread>& train_threads,
                  const std::vector<EncodedThread>& val, const EpochCallback& on_epoch) {
  if (train_threads.empty()) throw ArgumentError("train: empty training set");
  const TrainingConfig& cfg = model.config();
  cfg.validate();
  const std::vector<EncodedThread>& val_set = val.empty() ? train_threads : val;

  AdamOptimizer opt(cfg.learning_rate);
  Rng batch_rng(sub_seed(cfg.seed, "batch"));
  Rng dropout_rng(sub_seed(cfg.seed, "dropout"));

  TrainResult result;
  std::vector<Matrix> best;
  auto snapshot = [&] {
    best.clear();
    for (const auto& p : model.params()) best.push_back(p->value);
  };
  snapshot();
  {
    const auto report = evaluate_model(model, val_set);
    result.best_val_map = report.map;
  }

  std::vector<size_t> order(train_threads.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  int since_best = 0;
  const auto bs = static_cast<size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    batch_rng.shuffle(order);
    double loss_sum = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start < order.size(); start += bs) {
      std::vector<EncodedThread> batch;
      for (size_t i = start; i < std::min(order.size(), start + bs); ++i) {
        batch.push_back(train_threads[order[i]]);
      }
      loss_sum += train_step(model, opt, batch, &dropout_rng);
      ++batches;
    }
    result.steps += batches;

    const auto report = evaluate_model(model, val_set);
    EpochLog entry{epoch, loss_sum / static_cast<double>(batches), report.map, report.mrr};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);

    if (report.map > result.best_val_map) {
      result.best_val_map = report.map;
      result.best_epoch = epoch;
      snapshot();
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }

  size_t i = 0;
  for (auto& p : model.params()) p->value = best[i++];
  return result;
}

}  // namespace muse::ranker
