#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dgif/label_space.hpp"
#include "dgif/params.hpp"
#include "dgif/tensor.hpp"

namespace dgif {

/// Token-to-intent relevance: column j is a softmax over tokens of
/// h_i . e_j / sqrt(d), so every column sums to 1.
Tensor relevance(Tape& tape, const Tensor& token_states, const Tensor& intent_embs);

/// Sentinel for "pick the threshold per utterance as 1/n".
inline constexpr double kAutoDelta = -1.0;

/// Heterogeneous graph over m intent nodes (ids 0..m-1, initialized with the
/// selected intent-label embeddings) and n slot nodes (ids m..m+n-1,
/// initialized with the projected token states). Intent nodes form a clique;
/// slot i and slot j are linked iff 0 < |i-j| <= window; intent j and slot i
/// are linked iff their relevance exceeds the threshold.
struct InteractionGraph {
  Tensor nodes;  // (m + n) x d initial states
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<std::vector<std::size_t>> adj;  // sorted neighbor lists, no self entries
  Tensor rel;                                 // n x m relevance scores
  double threshold = 0.0;                     // the delta actually applied

  std::size_t num_nodes() const { return m + n; }
  bool has_edge(std::size_t a, std::size_t b) const;
};

InteractionGraph build_graph(Tape& tape, const Tensor& token_states,
                             std::span<const std::size_t> selected_intents,
                             const LabelSpace& intent_space, std::size_t window,
                             double delta = kAutoDelta);

/// One GAT layer: shared node transform plus the two halves of the edge
/// attention vector (score(i,j) = a_src . W g_i + a_dst . W g_j).
struct GatLayerParams {
  Tensor w_g;  // d x d
  Tensor a;    // [2d]; first half scores the receiving node, second the neighbor
};

struct GatParams {
  std::vector<GatLayerParams> layers;
};

GatParams init_gat_params(std::size_t d, std::size_t num_layers, Rng& rng,
                          ParamRegistry& registry);
GatParams bind_gat_params(std::size_t num_layers, const ParamRegistry& registry);

struct GatResult {
  Tensor intent_states;  // m x d
  Tensor slot_states;    // n x d
  /// Per-layer dense attention matrices (num_nodes x num_nodes, zero where no
  /// edge); plain values for inspection, not on the tape.
  std::vector<std::vector<double>> attention;
};

/// L rounds of neighborhood aggregation with self-loops. Attention over
/// N(i) u {i} is a softmax of LeakyReLU-scored pairs; the output activation
/// is LeakyReLU(slope), or sigmoid when sigmoid_output is set.
GatResult gat_forward(Tape& tape, const InteractionGraph& graph, const GatParams& params,
                      double leaky_slope = 0.01, bool sigmoid_output = false);

}  // namespace dgif
