#include "textenc.hpp"

#include <algorithm>
#include <numeric>

namespace muse::textenc {

Eigen::Index EncodedSequence::real_length() const {
  Eigen::Index n = 0;
  for (int id : token_ids) n += id != 0;
  return token_ids.empty() ? length() : n;
}

std::vector<bool> EncodedSequence::valid_mask() const {
  std::vector<bool> mask(static_cast<size_t>(length()), true);
  for (size_t i = 0; i < token_ids.size() && i < mask.size(); ++i) mask[i] = token_ids[i] != 0;
  return mask;
}

EncodedSequence make_sequence(ad::Var context, std::vector<int> token_ids) {
  if (!token_ids.empty() && static_cast<Eigen::Index>(token_ids.size()) != context.rows()) {
    throw ArgumentError("make_sequence: token id count does not match context rows");
  }
  return EncodedSequence{std::move(token_ids), context};
}

EncodedSequence encode_context(ad::Tape& tape, const std::vector<int>& ids,
                               const EncoderParameters& params) {
  // padding may only trail the real tokens
  size_t real = 0;
  while (real < ids.size() && ids[real] != 0) ++real;
  for (size_t i = real; i < ids.size(); ++i) {
    if (ids[i] != 0) throw ArgumentError("encode_context: padding must be trailing");
  }
  if (real == 0) throw ArgumentError("encode_context: zero-length sequence");

  std::vector<int> real_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(real));
  ad::Var emb = ad::gather_rows(tape, *params.embedding, real_ids);
  ad::Var fwd = ad::lstm(emb, tape.param(*params.fwd_wx), tape.param(*params.fwd_wh),
                         tape.param(*params.fwd_b), false);
  ad::Var bwd = ad::lstm(emb, tape.param(*params.bwd_wx), tape.param(*params.bwd_wh),
                         tape.param(*params.bwd_b), true);
  ad::Var ctx = ad::concat_cols({fwd, bwd});
  if (real < ids.size()) {
    ad::Var pad = tape.constant(Matrix::Zero(static_cast<Eigen::Index>(ids.size() - real), ctx.cols()));
    ctx = ad::concat_rows({ctx, pad});
  }
  return EncodedSequence{ids, ctx};
}

AnswerEncoding question_attend_answer(const EncodedSequence& question,
                                      const EncodedSequence& answer,
                                      const EncoderParameters& params) {
  if (question.real_length() < 1 || answer.real_length() < 1) {
    throw ArgumentError("question_attend_answer: empty sequence");
  }
  ad::Tape& tape = *answer.context.tape();
  const ad::Var& vq = question.context;
  const ad::Var& va = answer.context;

  // alpha = tanh(V_a V_q^T + b_a), one row per answer position
  ad::Var alpha = ad::tanh(ad::add_scalar(ad::matmul(va, ad::transpose(vq)), tape.param(*params.b_a)));
  ad::Var weights = ad::softmax_rows(alpha, question.valid_mask());
  ad::Var attended = ad::matmul(weights, vq);
  ad::Var enriched = ad::tanh(
      ad::add_row(ad::matmul(ad::concat_cols({va, attended}), tape.param(*params.w_a)),
                  tape.param(*params.b_aa)));
  AnswerEncoding out;
  out.x_a = ad::max_rows(enriched, answer.real_length());
  out.state.raw_scores = alpha.value();
  out.state.weights = weights.value();
  out.state.attended = attended.value();
  return out;
}

ad::Var pool_question(const EncodedSequence& question) {
  if (question.real_length() < 1) throw ArgumentError("pool_question: empty sequence");
  return ad::max_rows(question.context, question.real_length());
}

std::vector<int> top_k_mask(const RowVector& weights, int k, const std::vector<bool>& valid) {
  if (k < 1) throw ArgumentError("top_k_mask: k must be >= 1");
  const auto n = static_cast<size_t>(weights.size());
  std::vector<size_t> idx;
  for (size_t i = 0; i < n; ++i)
    if (valid.empty() || valid[i]) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    return weights(static_cast<Eigen::Index>(a)) > weights(static_cast<Eigen::Index>(b));
  });
  std::vector<int> mask(n, 0);
  for (size_t r = 0; r < idx.size() && r < static_cast<size_t>(k); ++r) mask[idx[r]] = 1;
  return mask;
}

ReviewEncoding clip_rescale_encode(const EncodedSequence& snippet, const ad::Var& x_q,
                                   const EncoderParameters& params, int k) {
  if (k < 1) throw ArgumentError("clip_rescale_encode: k must be >= 1");
  if (snippet.real_length() < 1) throw ArgumentError("clip_rescale_encode: empty snippet");
  ad::Tape& tape = *snippet.context.tape();
  const ad::Var& vc = snippet.context;
  const std::vector<bool> valid = snippet.valid_mask();

  // beta = softmax(V_c W_c x_q^T + b_c) over snippet positions
  ad::Var logits = ad::transpose(
      ad::matmul(ad::matmul(vc, tape.param(*params.w_c)), ad::transpose(x_q)));
  ad::Var beta = ad::softmax_rows(ad::add_scalar(logits, tape.param(*params.b_c)), valid);

  std::vector<int> mask = top_k_mask(beta.value().row(0), k, valid);
  Matrix mask_row(1, static_cast<Eigen::Index>(mask.size()));
  for (size_t i = 0; i < mask.size(); ++i) mask_row(0, static_cast<Eigen::Index>(i)) = mask[i];
  ad::Var clipped = ad::rescale(ad::hadamard(beta, tape.constant(std::move(mask_row))));

  ReviewEncoding out;
  out.x_c = ad::matmul(clipped, vc);
  out.state.clip_mask = std::move(mask);
  out.state.beta = beta.value().row(0);
  out.state.clipped = clipped.value().row(0);
  return out;
}

}  // namespace muse::textenc
