#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dgif/metrics.hpp"
#include "dgif/model.hpp"

namespace dgif {

/// A corpus sample resolved against the model's vocabulary and label sets.
struct PreparedSample {
  std::vector<std::size_t> tokens;          // vocab ids
  std::vector<std::size_t> intents;         // intent label ids, corpus order
  std::vector<std::size_t> slots;           // slot label ids, one per token
  std::vector<std::size_t> distinct_slots;  // sorted unique slot ids
  std::string name;                         // identifies the sample in errors
};

std::vector<PreparedSample> prepare(const Model& model,
                                    std::span<const Sample> samples);

/// The joint objective and its five ingredients (plain values for logging):
/// total = alpha*(intent + gamma*re_intent) + beta*(slot + gamma*re_slot)
///       + (1-alpha)*count.
struct LossBreakdown {
  Tensor total;
  double intent = 0.0;    // mean multi-label BCE of the intent head
  double slot = 0.0;      // mean per-token CE of the slot head
  double count = 0.0;     // CE of the intent-count head
  double re_intent = 0.0; // intent-side regularizer (0 when gamma is off)
  double re_slot = 0.0;   // slot-side regularizer
};

/// Sums the objective over a batch on the given tape. Throws DataError when a
/// sample carries more gold intents than max_count allows.
LossBreakdown joint_loss(Tape& tape, const Model& model, const LabelSpaces& spaces,
                         std::span<const PreparedSample> batch);

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8). Moment
/// buffers follow registry order, so updates are deterministic.
class Adam {
 public:
  Adam(ParamRegistry& params, double lr);
  /// Applies the accumulated gradients to the parameter values.
  void step();

 private:
  ParamRegistry& params_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // means over the epoch's steps
  double intent = 0.0, slot = 0.0, count = 0.0;
  double re_intent = 0.0, re_slot = 0.0;
  double val_slot_f1 = 0.0, val_intent_acc = 0.0, val_overall_acc = 0.0;
};

/// One-line key=value rendering, stable across runs for diffing.
std::string format_epoch(const EpochLog& log);

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;  // 1-based; earliest epoch on ties
  double best_overall = 0.0;   // its validation overall accuracy
};

/// Full loop: per-epoch shuffled mini-batches, Adam updates, validation after
/// every epoch. The parameters of the best-overall-accuracy epoch are
/// restored into the model before returning. Throws DivergedError as soon as
/// the loss or any gradient goes non-finite; the model then still holds the
/// last finite parameter state.
TrainResult train(Model& model, std::span<const Sample> train_set,
                  std::span<const Sample> val_set,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Versioned binary container of the named parameter tensors, with sidecar
/// text files (.config, .vocab, .labels) so the model can be rebuilt without
/// the original corpus. All four files are written atomically.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace dgif
