#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dgif/config.hpp"
#include "dgif/data.hpp"
#include "dgif/graph.hpp"
#include "dgif/intent_decoder.hpp"
#include "dgif/label_space.hpp"
#include "dgif/slot_decoder.hpp"

namespace dgif {

/// The complete trainable bundle: the shared encoder, the intent / count /
/// slot heads, the graph attention stack, and the vocabulary and label
/// inventories everything was sized for. Parameter tensors live in `params`;
/// the typed members alias the same storage.
struct Model {
  TrainConfig config;
  Vocab vocab;  // utterance tokens plus every verbalized label word
  LabelSet intent_labels;
  LabelSet slot_labels;

  ParamRegistry params;
  EncoderParams encoder;  // shared by utterances and verbalized labels
  IntentHeadParams intent_head;
  CountHeadParams count_head;
  GatParams gat;
  SlotHeadParams slot_head;
};

/// Freshly initialized model; every random draw flows from config.seed. The
/// verbalized label words are folded into the model's vocabulary, so a label
/// word that also occurs in utterances shares its embedding with them.
Model build_model(const TrainConfig& config, const Vocab& vocab,
                  const LabelSet& intent_labels, const LabelSet& slot_labels);

/// Both label spaces embedded on the given tape. Rebuilt once per
/// optimization step so projection gradients reach the label encoder.
struct LabelSpaces {
  LabelSpace intent;
  LabelSpace slot;
};

LabelSpaces build_label_spaces(Tape& tape, const Model& model);

/// Per-utterance forward results, kept around for the loss, the decoders,
/// and the inspection dump.
struct Forward {
  HiddenStates hidden;
  Tensor pooled;           // self-attentive pooling over the encoder output
  Tensor intent_features;  // what the intent head consumed (projected or raw)
  Tensor intent_logits;    // [|intents|]
  Tensor count_logits;     // [max_count]
  IntentPrediction intents;

  std::vector<std::size_t> graph_intents;  // ids that fed the interaction stage
  Tensor token_states;  // n x d states entering the interaction stage
  Tensor slot_states;   // n x d states entering the slot head
  Tensor slot_logits;   // n x |slots|
  SlotPrediction slots;

  std::optional<InteractionGraph> graph;  // absent when the graph is ablated
  std::vector<std::vector<double>> gat_attention;  // per-layer dense matrices
};

/// Runs one utterance through the whole architecture. `forced_intents`
/// (teacher forcing) overrides which intents feed the interaction stage;
/// when null the decoded top-k selection is used.
Forward forward(Tape& tape, const Model& model, const LabelSpaces& spaces,
                std::span<const std::size_t> token_ids,
                const std::vector<std::size_t>* forced_intents = nullptr);

/// Inference on raw words: returns the utterance annotated with predicted
/// tags and intent names (intents in id order).
Sample predict(const Model& model, std::span<const std::string> tokens);

/// Batch inference reusing one label-space build across all utterances.
std::vector<Sample> predict_corpus(const Model& model, std::span<const Sample> samples);

/// Runs one utterance and renders the interaction internals as CSV: the
/// token-to-intent relevance matrix and each graph-attention layer's
/// coefficient matrix, as (matrix,row,col,value) triplets preceded by
/// comment lines naming the nodes. Throws ContractError when the model was
/// configured without the interaction graph.
std::string inspect_csv(const Model& model, std::span<const std::string> tokens);

}  // namespace dgif
