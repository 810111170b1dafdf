#pragma once

#include <vector>

#include "autodiff.hpp"

namespace muse::textenc {

/// Trainable weights of the text encoder. All pointers refer into a
/// ParameterStore owned by the model.
struct EncoderParameters {
  ad::Parameter* embedding = nullptr;  // |V| x d_e, row 0 is padding
  ad::Parameter* fwd_wx = nullptr;     // d_e x 4H
  ad::Parameter* fwd_wh = nullptr;     // H x 4H
  ad::Parameter* fwd_b = nullptr;      // 1 x 4H
  ad::Parameter* bwd_wx = nullptr;
  ad::Parameter* bwd_wh = nullptr;
  ad::Parameter* bwd_b = nullptr;
  ad::Parameter* w_a = nullptr;   // 2 d_h x d_proj
  ad::Parameter* b_a = nullptr;   // 1 x 1, broadcast over question positions
  ad::Parameter* b_aa = nullptr;  // 1 x d_proj
  ad::Parameter* w_c = nullptr;   // d_h x d_h
  ad::Parameter* b_c = nullptr;   // 1 x 1
};

/// Context-aware rows for one text. Rows at padding positions (token id 0,
/// trailing only) are zero and are masked out of attention and pooling.
struct EncodedSequence {
  std::vector<int> token_ids;
  ad::Var context;  // length x d_h

  Eigen::Index length() const { return context.rows(); }
  Eigen::Index real_length() const;
  std::vector<bool> valid_mask() const;
};

/// Wraps an existing matrix variable; token ids default to all-real.
EncodedSequence make_sequence(ad::Var context, std::vector<int> token_ids = {});

/// Snapshot of the attention internals for inspection and tests.
struct AttentionState {
  Matrix raw_scores;      // alpha, |a| x |q|
  Matrix weights;         // alpha', |a| x |q|
  Matrix attended;        // o^a, |a| x d_h
  std::vector<int> clip_mask;  // m, |c|
  RowVector beta;         // softmax weights before clipping, 1 x |c|
  RowVector clipped;      // beta', 1 x |c|
};

/// Bi-LSTM context encoding: row t is [forward_t ; backward_t].
EncodedSequence encode_context(ad::Tape& tape, const std::vector<int>& ids,
                               const EncoderParameters& params);

struct AnswerEncoding {
  ad::Var x_a;  // 1 x d_proj
  AttentionState state;
};

/// Word-to-word attention from each answer position over the question,
/// followed by the enriching projection and max-pooling over answer rows.
AnswerEncoding question_attend_answer(const EncodedSequence& question,
                                      const EncodedSequence& answer,
                                      const EncoderParameters& params);

/// Max over the question's real positions (1 x d_h).
ad::Var pool_question(const EncodedSequence& question);

/// Indices of the min(k, count of valid) largest entries, ties to the lower
/// index, returned as a 0/1 mask.
std::vector<int> top_k_mask(const RowVector& weights, int k, const std::vector<bool>& valid = {});

struct ReviewEncoding {
  ad::Var x_c;  // 1 x d_h
  AttentionState state;
};

/// Question-guided attention over a snippet that keeps only the k largest
/// weights and renormalizes them to sum to one.
ReviewEncoding clip_rescale_encode(const EncodedSequence& snippet, const ad::Var& x_q,
                                   const EncoderParameters& params, int k);

}  // namespace muse::textenc
