#pragma once

#include <cmath>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "config.hpp"
#include "model.hpp"
#include "text.hpp"

namespace muse::testing {

inline text::Vocabulary numbered_vocab(int n) {
  text::Vocabulary v;
  for (int i = 0; i < n; ++i) v.add("w" + std::to_string(i));
  return v;
}

/// embed 8, hidden 4 (d_h 8), proj 8, graph 8 -> 6 -> 4.
inline TrainingConfig tiny_config() {
  TrainingConfig c;
  c.embed_dim = 8;
  c.hidden_size = 4;
  c.proj_dim = 8;
  c.gcn_dims = {6, 4};
  c.mlp_hidden = 5;
  c.k = 2;
  c.num_snippets = 2;
  c.batch_size = 2;
  return c;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

inline std::vector<int> random_ids(size_t len, int vocab_size, Rng& rng) {
  std::vector<int> ids(len);
  for (auto& id : ids) id = 2 + static_cast<int>(rng.below(static_cast<uint64_t>(vocab_size - 2)));
  return ids;
}

/// A thread with random token ids; labels follow `labels`.
inline ranker::EncodedThread random_thread(const std::string& id, const std::vector<int>& labels,
                                           size_t num_snippets, int vocab_size, Rng& rng) {
  ranker::EncodedThread t;
  t.question_id = id;
  t.question = random_ids(2 + rng.below(4), vocab_size, rng);
  for (int l : labels) {
    t.answers.push_back(random_ids(2 + rng.below(4), vocab_size, rng));
    t.labels.push_back(l);
  }
  for (size_t i = 0; i < num_snippets; ++i) t.snippets.push_back(random_ids(3 + rng.below(4), vocab_size, rng));
  return t;
}

/// Perturbs every parameter away from its zero/initial value so that biases
/// and other zero-initialized entries also exercise their gradients.
inline void jitter_parameters(ad::ParameterStore& params, Rng& rng, double scale = 0.1) {
  for (auto& p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += rng.uniform(-scale, scale);
  }
}

struct GroupCheck {
  std::string name;
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
  double rel_error = 0.0;
};

/// Compares Parameter::grad (already filled by the caller) against central
/// differences of `loss`. Relative error per parameter group is
/// ||g_a - g_n|| / max(||g_a||, ||g_n||); groups whose gradients are both
/// below `floor` are reported with error 0.
inline std::vector<GroupCheck> finite_difference_check(ad::ParameterStore& params,
                                                       const std::function<double()>& loss,
                                                       double h = 1e-6, double floor = 1e-9) {
  std::vector<GroupCheck> out;
  for (auto& p : params) {
    Matrix numeric(p->value.rows(), p->value.cols());
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + h;
      const double up = loss();
      x = saved - h;
      const double down = loss();
      x = saved;
      numeric.data()[i] = (up - down) / (2.0 * h);
    }
    GroupCheck g;
    g.name = p->name;
    g.analytic_norm = p->grad.norm();
    g.numeric_norm = numeric.norm();
    const double scale = std::max(g.analytic_norm, g.numeric_norm);
    g.rel_error = scale < floor ? 0.0 : (p->grad - numeric).norm() / scale;
    out.push_back(g);
  }
  return out;
}

inline double max_rel_error(const std::vector<GroupCheck>& checks) {
  double worst = 0.0;
  for (const auto& c : checks) worst = std::max(worst, c.rel_error);
  return worst;
}

inline bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<size_t>(a.size())) == 0;
}

/// Separable synthetic data: positive answers use tokens from one half of the
/// vocabulary, negative answers from the other.
inline std::vector<ranker::EncodedThread> separable_threads(size_t count, int vocab_size, Rng& rng) {
  std::vector<ranker::EncodedThread> out;
  const int half = (vocab_size - 2) / 2;
  auto words = [&](int base, size_t len) {
    std::vector<int> ids(len);
    for (auto& id : ids) id = 2 + base + static_cast<int>(rng.below(static_cast<uint64_t>(half)));
    return ids;
  };
  for (size_t i = 0; i < count; ++i) {
    ranker::EncodedThread t;
    t.question_id = "s" + std::to_string(i);
    t.question = random_ids(4, vocab_size, rng);
    const size_t n_answers = 3 + rng.below(3);
    const size_t positive = rng.below(n_answers);
    for (size_t a = 0; a < n_answers; ++a) {
      const bool pos = a == positive || rng.below(4) == 0;
      t.answers.push_back(words(pos ? 0 : half, 4 + rng.below(3)));
      t.labels.push_back(pos ? 1 : 0);
    }
    for (int s = 0; s < 2; ++s) t.snippets.push_back(random_ids(5, vocab_size, rng));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace muse::testing
