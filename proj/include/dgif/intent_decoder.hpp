#pragma once

#include <cstddef>
#include <vector>

#include "dgif/params.hpp"
#include "dgif/tensor.hpp"

namespace dgif {

/// Two-layer multi-label intent head: probs = sigmoid(W_i . act(W_u . r + b_u) + b_i).
struct IntentHeadParams {
  Tensor w_u, b_u;  // d x d, d
  Tensor w_i, b_i;  // d x |intents|, |intents|
};

/// Single affine count head over the CLS state; class k stands for count k+1.
struct CountHeadParams {
  Tensor w_ind, b_ind;  // d x max_count, max_count
};

IntentHeadParams init_intent_head(std::size_t d, std::size_t num_intents, Rng& rng,
                                  ParamRegistry& registry);
CountHeadParams init_count_head(std::size_t d, std::size_t max_count, Rng& rng,
                                ParamRegistry& registry);
IntentHeadParams bind_intent_head(const ParamRegistry& registry);
CountHeadParams bind_count_head(const ParamRegistry& registry);

/// Pre-sigmoid intent scores (the training loss consumes these).
Tensor intent_logits(Tape& tape, const Tensor& r_hat, const IntentHeadParams& params,
                     double leaky_slope = 0.01);
/// sigmoid(intent_logits); every entry in (0,1).
Tensor intent_probs(Tape& tape, const Tensor& r_hat, const IntentHeadParams& params,
                    double leaky_slope = 0.01);

/// Pre-softmax count scores from the raw CLS state.
Tensor count_logits(Tape& tape, const Tensor& h_cls, const CountHeadParams& params);
/// softmax(count_logits) over {1..max_count} encoded as classes {0..max_count-1}.
Tensor count_distribution(Tape& tape, const Tensor& h_cls, const CountHeadParams& params);

/// Most likely intent count (argmax class + 1; ties resolve to the lower count).
std::size_t argmax_count(const Tensor& count_dist);

/// Ids of the k largest probabilities, descending, ties broken by lower index.
std::vector<std::size_t> select_top_k(const Tensor& probs, std::size_t k);

struct IntentPrediction {
  Tensor probs;                       // [|intents|]
  std::size_t count = 1;              // predicted number of intents
  std::vector<std::size_t> selected;  // `count` intent ids
};

/// Full inference path: probabilities, count, top-count selection.
IntentPrediction predict_intents(Tape& tape, const Tensor& r_hat, const Tensor& h_cls,
                                 const IntentHeadParams& head, const CountHeadParams& count,
                                 double leaky_slope = 0.01);

}  // namespace dgif
