#pragma once

#include <string>

#include "dgif/encoder.hpp"
#include "dgif/graph.hpp"

namespace dgif {

/// Every knob of a training run. The whole struct is addressable as flat
/// key=value text (one field per line) so a run can be reproduced from its
/// serialized config alone; CLI flags overwrite individual fields after load.
struct TrainConfig {
  // Loss mixing: L = alpha*(id + gamma*re_intent) + beta*(sf + gamma*re_slot)
  //              + (1-alpha)*count.
  double alpha = 0.6;
  double beta = 1.0;
  double gamma = 0.3;
  double lambda = 0.5;  // intra-class weight inside each regularizer term

  // Optimizer.
  double lr = 1e-3;
  double grad_clip = 5.0;  // global gradient-norm cap per step; 0 disables
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;

  // Ablations.
  bool disable_lar = false;      // regularizer off (gamma treated as 0)
  bool disable_lsi = false;      // label-subspace projections bypassed
  bool disable_gil = false;      // graph replaced by plain intent attention
  bool teacher_forcing = true;   // gold intents feed the graph while training

  // Graph.
  double delta = kAutoDelta;  // negative → per-utterance 1/n threshold
  std::size_t window = 1;
  std::size_t gat_layers = 2;
  bool gat_sigmoid = false;  // sigmoid node activation instead of leaky ReLU

  // Heads and projection.
  std::size_t max_count = 3;  // intent-count classes cover {1..max_count}
  double ridge = 1e-6;         // Gram-solve regularizer for the projections

  // Shared shape of the utterance and label encoders.
  EncoderConfig encoder;

  double effective_gamma() const { return disable_lar ? 0.0 : gamma; }

  /// Throws ContractError on any out-of-range field.
  void validate() const;
};

/// Parses flat key=value text. Blank lines and '#' comments are skipped;
/// unknown keys and unparseable values raise ParseError with the line number.
/// The result is not validated — call validate() once overrides are applied.
TrainConfig parse_config_text(const std::string& text);

TrainConfig load_config(const std::string& path);

/// Applies one key=value override in place. Same key set and value rules as
/// the file format; throws ParseError on unknown keys or bad values.
void set_config_field(TrainConfig& config, const std::string& key,
                      const std::string& value);

/// Emits every field, one per line, in a fixed order. Doubles are printed
/// with enough digits to round-trip exactly.
std::string serialize_config(const TrainConfig& config);

}  // namespace dgif
