#include "dgif/slot_decoder.hpp"

#include "dgif/error.hpp"

namespace dgif {

SlotHeadParams init_slot_head(std::size_t d, std::size_t num_slots, Rng& rng,
                              ParamRegistry& registry) {
  SlotHeadParams p;
  p.w_s = registry.add("slot_head.w_s", {d, num_slots}, rng, d);
  p.b_s = registry.add_zeros("slot_head.b_s", {num_slots});
  return p;
}

SlotHeadParams bind_slot_head(const ParamRegistry& registry) {
  return {registry.find("slot_head.w_s"), registry.find("slot_head.b_s")};
}

Tensor slot_logits(Tape& tape, const Tensor& slot_states, const SlotHeadParams& params) {
  if (slot_states.ndim() != 2) {
    throw DimensionError("slot decoder expects a token-state matrix, got " +
                         shape_str(slot_states.shape()));
  }
  return linear(tape, slot_states, params.w_s, params.b_s);
}

SlotPrediction decode_slots(Tape& tape, const Tensor& slot_states,
                            const SlotHeadParams& params) {
  SlotPrediction pred;
  pred.dist = softmax(tape, slot_logits(tape, slot_states, params), 1);
  pred.labels.resize(pred.dist.rows());
  for (std::size_t r = 0; r < pred.dist.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < pred.dist.cols(); ++c) {
      if (pred.dist.value_at(r, c) > pred.dist.value_at(r, best)) best = c;
    }
    pred.labels[r] = best;
  }
  return pred;
}

}  // namespace dgif
