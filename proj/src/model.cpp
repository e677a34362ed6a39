#include "dgif/model.hpp"

#include <algorithm>
#include <cmath>

#include "dgif/error.hpp"
#include "dgif/util.hpp"

namespace dgif {

Model build_model(const TrainConfig& config, const Vocab& vocab,
                  const LabelSet& intent_labels, const LabelSet& slot_labels) {
  config.validate();
  Model m;
  m.config = config;
  m.vocab = vocab;
  // One vocabulary serves utterances and verbalized labels alike: a word that
  // appears on both sides ("play" the token, "play" inside "play music")
  // shares one embedding, which is what lets label semantics say anything
  // about tokens before training has aligned the two.
  for (const LabelSet* set : {&intent_labels, &slot_labels}) {
    for (const auto& words : set->verbalized) {
      for (const std::string& w : words) m.vocab.add(w);
    }
  }
  m.intent_labels = intent_labels;
  m.slot_labels = slot_labels;

  const std::size_t d = config.encoder.hidden_dim;
  Rng rng(config.seed);
  m.encoder = init_encoder_params(config.encoder, m.vocab.size(), rng, m.params, "enc");
  m.intent_head = init_intent_head(d, intent_labels.size(), rng, m.params);
  m.count_head = init_count_head(d, config.max_count, rng, m.params);
  m.gat = init_gat_params(d, config.gat_layers, rng, m.params);
  m.slot_head = init_slot_head(d, slot_labels.size(), rng, m.params);
  return m;
}

LabelSpaces build_label_spaces(Tape& tape, const Model& model) {
  const EncoderConfig& cfg = model.config.encoder;
  return {embed_labels(tape, model.intent_labels, cfg, model.encoder, model.vocab,
                       model.config.ridge),
          embed_labels(tape, model.slot_labels, cfg, model.encoder, model.vocab,
                       model.config.ridge)};
}

Forward forward(Tape& tape, const Model& model, const LabelSpaces& spaces,
                std::span<const std::size_t> token_ids,
                const std::vector<std::size_t>* forced_intents) {
  const TrainConfig& cfg = model.config;
  const double slope = cfg.encoder.leaky_slope;

  Forward f;
  f.hidden = encode(tape, cfg.encoder, model.encoder, token_ids);
  f.pooled = self_attentive_pool(tape, model.encoder, f.hidden).pooled;

  f.intent_features = cfg.disable_lsi
                          ? f.pooled
                          : inject(tape, f.pooled, spaces.intent).projected;
  f.intent_logits = intent_logits(tape, f.intent_features, model.intent_head, slope);
  f.count_logits = count_logits(tape, f.hidden.cls(tape), model.count_head);

  f.intents.probs = sigmoid(tape, f.intent_logits);
  f.intents.count = argmax_count(softmax(tape, f.count_logits, 0));
  f.intents.selected =
      select_top_k(f.intents.probs, std::min(f.intents.count, f.intents.probs.size()));

  f.graph_intents = forced_intents ? *forced_intents : f.intents.selected;
  if (f.graph_intents.empty()) {
    throw ContractError("forward: empty intent selection for the interaction stage");
  }

  Tensor content = f.hidden.content(tape);
  f.token_states =
      cfg.disable_lsi ? content : inject_rows(tape, content, spaces.slot).projected;

  if (cfg.disable_gil) {
    // Plain scaled-dot attention of each token over the selected intent
    // embeddings, added back onto the token state.
    Tensor e = rows(tape, spaces.intent.basis, f.graph_intents);
    const double inv_sqrt_d =
        1.0 / std::sqrt(static_cast<double>(cfg.encoder.hidden_dim));
    Tensor scores =
        scale(tape, matmul(tape, f.token_states, transpose(tape, e)), inv_sqrt_d);
    Tensor att = softmax(tape, scores, 1);
    f.slot_states = add(tape, f.token_states, matmul(tape, att, e));
  } else {
    f.graph = build_graph(tape, f.token_states, f.graph_intents, spaces.intent,
                          cfg.window, cfg.delta);
    GatResult propagated =
        gat_forward(tape, *f.graph, model.gat, slope, cfg.gat_sigmoid);
    f.slot_states = propagated.slot_states;
    f.gat_attention = std::move(propagated.attention);
  }

  f.slot_logits = slot_logits(tape, f.slot_states, model.slot_head);
  f.slots = decode_slots(tape, f.slot_states, model.slot_head);
  return f;
}

namespace {

Sample decode_prediction(const Model& model, const Forward& f,
                         std::span<const std::string> tokens) {
  Sample out;
  out.tokens.assign(tokens.begin(), tokens.end());
  for (std::size_t id : f.slots.labels) {
    out.slots.push_back(model.slot_labels.names[id]);
  }
  std::vector<std::size_t> selected = f.intents.selected;
  std::sort(selected.begin(), selected.end());
  for (std::size_t id : selected) {
    out.intents.push_back(model.intent_labels.names[id]);
  }
  return out;
}

}  // namespace

Sample predict(const Model& model, std::span<const std::string> tokens) {
  Tape tape;
  tape.set_recording(false);
  LabelSpaces spaces = build_label_spaces(tape, model);
  Forward f = forward(tape, model, spaces, model.vocab.encode(tokens));
  return decode_prediction(model, f, tokens);
}

std::vector<Sample> predict_corpus(const Model& model, std::span<const Sample> samples) {
  Tape tape;
  tape.set_recording(false);
  LabelSpaces spaces = build_label_spaces(tape, model);

  std::vector<Sample> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) {
    Forward f = forward(tape, model, spaces, model.vocab.encode(s.tokens));
    out.push_back(decode_prediction(model, f, s.tokens));
  }
  return out;
}

std::string inspect_csv(const Model& model, std::span<const std::string> tokens) {
  if (model.config.disable_gil) {
    throw ContractError(
        "inspect: this model was configured without the interaction graph");
  }
  if (tokens.empty()) throw ContractError("inspect: empty utterance");

  Tape tape;
  tape.set_recording(false);
  LabelSpaces spaces = build_label_spaces(tape, model);
  Forward f = forward(tape, model, spaces, model.vocab.encode(tokens));
  const InteractionGraph& g = *f.graph;

  std::string out = "# utterance:";
  for (const std::string& t : tokens) out += " " + t;
  out += "\n# selected intents:";
  for (std::size_t id : f.graph_intents) {
    out += " " + model.intent_labels.names[id];
  }
  out += "\n# edge threshold: " + fmt_double(g.threshold) + "\n";
  for (std::size_t j = 0; j < g.m; ++j) {
    out += "# node " + std::to_string(j) + ": intent " +
           model.intent_labels.names[f.graph_intents[j]] + "\n";
  }
  for (std::size_t i = 0; i < g.n; ++i) {
    out += "# node " + std::to_string(g.m + i) + ": token " + tokens[i] + "\n";
  }

  // Relevance rows are token positions, columns follow the selected-intent
  // order above. Attention rows/cols use the node ids above; only edges
  // (including self-loops) are emitted, so absent pairs mean "no edge".
  out += "matrix,row,col,value\n";
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = 0; j < g.m; ++j) {
      out += "relevance," + std::to_string(i) + "," + std::to_string(j) + "," +
             fmt_double(g.rel.value_at(i, j)) + "\n";
    }
  }
  const std::size_t nodes = g.num_nodes();
  for (std::size_t layer = 0; layer < f.gat_attention.size(); ++layer) {
    const std::vector<double>& att = f.gat_attention[layer];
    const std::string name = "attention" + std::to_string(layer);
    for (std::size_t i = 0; i < nodes; ++i) {
      for (std::size_t j = 0; j < nodes; ++j) {
        if (i != j && !g.has_edge(i, j)) continue;
        out += name + "," + std::to_string(i) + "," + std::to_string(j) + "," +
               fmt_double(att[i * nodes + j]) + "\n";
      }
    }
  }
  return out;
}

}  // namespace dgif
