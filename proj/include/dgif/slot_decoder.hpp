#pragma once

#include <cstddef>
#include <vector>

#include "dgif/params.hpp"
#include "dgif/tensor.hpp"

namespace dgif {

/// Per-token affine classifier over propagated slot node states.
struct SlotHeadParams {
  Tensor w_s, b_s;  // d x |slots|, |slots|
};

SlotHeadParams init_slot_head(std::size_t d, std::size_t num_slots, Rng& rng,
                              ParamRegistry& registry);
SlotHeadParams bind_slot_head(const ParamRegistry& registry);

/// Pre-softmax scores, one row per token (the training loss consumes these).
Tensor slot_logits(Tape& tape, const Tensor& slot_states, const SlotHeadParams& params);

struct SlotPrediction {
  Tensor dist;                      // n x |slots|; each row sums to 1
  std::vector<std::size_t> labels;  // argmax per row, ties to the lower id
};

SlotPrediction decode_slots(Tape& tape, const Tensor& slot_states,
                            const SlotHeadParams& params);

}  // namespace dgif
