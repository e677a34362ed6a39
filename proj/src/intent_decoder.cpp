#include "dgif/intent_decoder.hpp"

#include <algorithm>

#include "dgif/error.hpp"

namespace dgif {

IntentHeadParams init_intent_head(std::size_t d, std::size_t num_intents, Rng& rng,
                                  ParamRegistry& registry) {
  IntentHeadParams p;
  p.w_u = registry.add("intent_head.w_u", {d, d}, rng, d);
  p.b_u = registry.add_zeros("intent_head.b_u", {d});
  p.w_i = registry.add("intent_head.w_i", {d, num_intents}, rng, d);
  p.b_i = registry.add_zeros("intent_head.b_i", {num_intents});
  return p;
}

CountHeadParams init_count_head(std::size_t d, std::size_t max_count, Rng& rng,
                                ParamRegistry& registry) {
  if (max_count < 1) {
    throw ContractError("count head: max_count must be >= 1");
  }
  CountHeadParams p;
  p.w_ind = registry.add("count_head.w_ind", {d, max_count}, rng, d);
  p.b_ind = registry.add_zeros("count_head.b_ind", {max_count});
  return p;
}

IntentHeadParams bind_intent_head(const ParamRegistry& registry) {
  return {registry.find("intent_head.w_u"), registry.find("intent_head.b_u"),
          registry.find("intent_head.w_i"), registry.find("intent_head.b_i")};
}

CountHeadParams bind_count_head(const ParamRegistry& registry) {
  return {registry.find("count_head.w_ind"), registry.find("count_head.b_ind")};
}

Tensor intent_logits(Tape& tape, const Tensor& r_hat, const IntentHeadParams& params,
                     double leaky_slope) {
  Tensor hidden = leaky_relu(tape, linear(tape, r_hat, params.w_u, params.b_u), leaky_slope);
  Tensor out = linear(tape, hidden, params.w_i, params.b_i);
  return reshape(tape, out, {params.b_i.size()});
}

Tensor intent_probs(Tape& tape, const Tensor& r_hat, const IntentHeadParams& params,
                    double leaky_slope) {
  return sigmoid(tape, intent_logits(tape, r_hat, params, leaky_slope));
}

Tensor count_logits(Tape& tape, const Tensor& h_cls, const CountHeadParams& params) {
  return reshape(tape, linear(tape, h_cls, params.w_ind, params.b_ind),
                 {params.b_ind.size()});
}

Tensor count_distribution(Tape& tape, const Tensor& h_cls, const CountHeadParams& params) {
  return softmax(tape, count_logits(tape, h_cls, params), 0);
}

std::size_t argmax_count(const Tensor& count_dist) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < count_dist.size(); ++i) {
    if (count_dist.value_at(i) > count_dist.value_at(best)) best = i;
  }
  return best + 1;
}

std::vector<std::size_t> select_top_k(const Tensor& probs, std::size_t k) {
  const std::size_t n = probs.size();
  if (k < 1 || k > n) {
    throw ContractError("select_top_k: k = " + std::to_string(k) +
                        " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    return probs.value_at(a) > probs.value_at(b);
  });
  ids.resize(k);
  return ids;
}

IntentPrediction predict_intents(Tape& tape, const Tensor& r_hat, const Tensor& h_cls,
                                 const IntentHeadParams& head, const CountHeadParams& count,
                                 double leaky_slope) {
  IntentPrediction pred;
  pred.probs = intent_probs(tape, r_hat, head, leaky_slope);
  pred.count = argmax_count(count_distribution(tape, h_cls, count));
  pred.selected = select_top_k(pred.probs, std::min(pred.count, pred.probs.size()));
  return pred;
}

}  // namespace dgif
