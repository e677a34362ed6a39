#include "dgif/graph.hpp"

#include <algorithm>
#include <cmath>

#include "dgif/error.hpp"

namespace dgif {

Tensor relevance(Tape& tape, const Tensor& token_states, const Tensor& intent_embs) {
  if (token_states.cols() != intent_embs.cols()) {
    throw DimensionError("relevance: token states " + shape_str(token_states.shape()) +
                         " vs intent embeddings " + shape_str(intent_embs.shape()));
  }
  const double s = 1.0 / std::sqrt(static_cast<double>(token_states.cols()));
  Tensor scores = scale(tape, matmul(tape, token_states, transpose(tape, intent_embs)), s);
  return softmax(tape, scores, 0);  // normalize each intent column over tokens
}

bool InteractionGraph::has_edge(std::size_t a, std::size_t b) const {
  const auto& list = adj[a];
  return std::binary_search(list.begin(), list.end(), b);
}

InteractionGraph build_graph(Tape& tape, const Tensor& token_states,
                             std::span<const std::size_t> selected_intents,
                             const LabelSpace& intent_space, std::size_t window,
                             double delta) {
  if (selected_intents.empty()) {
    throw ContractError("interaction graph: at least one selected intent required");
  }
  if (token_states.ndim() != 2 || token_states.rows() == 0) {
    throw ContractError("interaction graph: token states must be a non-empty matrix");
  }
  for (std::size_t id : selected_intents) {
    if (id >= intent_space.size()) {
      throw ContractError("interaction graph: intent id " + std::to_string(id) +
                          " outside label space of size " +
                          std::to_string(intent_space.size()));
    }
  }

  InteractionGraph g;
  g.m = selected_intents.size();
  g.n = token_states.rows();
  if (delta == kAutoDelta || delta < 0.0) {
    g.threshold = 1.0 / static_cast<double>(g.n);
  } else if (delta >= 1.0) {
    throw ContractError("interaction graph: delta must lie in [0, 1)");
  } else {
    g.threshold = delta;
  }

  Tensor intent_embs = rows(tape, intent_space.basis, selected_intents);
  g.rel = relevance(tape, token_states, intent_embs);
  std::vector<Tensor> parts{intent_embs, token_states};
  g.nodes = vstack(tape, parts);

  const std::size_t total = g.num_nodes();
  g.adj.assign(total, {});
  auto connect = [&](std::size_t a, std::size_t b) {
    g.adj[a].push_back(b);
    g.adj[b].push_back(a);
  };
  for (std::size_t a = 0; a < g.m; ++a) {          // intent clique
    for (std::size_t b = a + 1; b < g.m; ++b) connect(a, b);
  }
  for (std::size_t i = 0; i < g.n; ++i) {          // slot window chain
    for (std::size_t j = i + 1; j < g.n && j - i <= window; ++j) {
      connect(g.m + i, g.m + j);
    }
  }
  for (std::size_t i = 0; i < g.n; ++i) {          // thresholded cross edges
    for (std::size_t j = 0; j < g.m; ++j) {
      if (g.rel.value_at(i, j) > g.threshold) connect(j, g.m + i);
    }
  }
  for (auto& list : g.adj) std::sort(list.begin(), list.end());
  return g;
}

GatParams init_gat_params(std::size_t d, std::size_t num_layers, Rng& rng,
                          ParamRegistry& registry) {
  if (num_layers < 1) {
    throw ContractError("gat: at least one layer required");
  }
  GatParams p;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::string lp = "gat.layer" + std::to_string(l);
    GatLayerParams layer;
    // Near-identity transform: at initialization each node then aggregates a
    // roughly uniform average of its neighborhood instead of a random
    // rotation of it, so token features survive propagation untrained.
    layer.w_g = registry.add(lp + ".w_g", {d, d}, rng, d);
    {
      auto w = layer.w_g.values();
      const double jitter = 0.05;
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          w[i * d + j] = (i == j ? 1.0 : 0.0) + rng.uniform(-jitter, jitter);
        }
      }
    }
    layer.a = registry.add(lp + ".a", {2 * d}, rng, 2 * d);
    {
      // Small scoring vector: attention starts close to a uniform average over
      // the neighbourhood rather than an arbitrary ranking of it, which keeps
      // early aggregation predictable.  Kept nonzero so no score sits exactly
      // on the LeakyReLU kink.
      auto v = layer.a.values();
      for (double& x : v) x *= 0.1;
    }
    p.layers.push_back(layer);
  }
  return p;
}

GatParams bind_gat_params(std::size_t num_layers, const ParamRegistry& registry) {
  GatParams p;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::string lp = "gat.layer" + std::to_string(l);
    p.layers.push_back({registry.find(lp + ".w_g"), registry.find(lp + ".a")});
  }
  return p;
}

GatResult gat_forward(Tape& tape, const InteractionGraph& graph, const GatParams& params,
                      double leaky_slope, bool sigmoid_output) {
  if (params.layers.empty()) {
    throw ContractError("gat: at least one layer required");
  }
  const std::size_t total = graph.num_nodes();
  const std::size_t d = graph.nodes.cols();
  GatResult result;
  Tensor x = graph.nodes;

  for (const auto& layer : params.layers) {
    Tensor xw = matmul(tape, x, layer.w_g);  // total x d
    Tensor a_mat = reshape(tape, layer.a, {std::size_t{2}, d});
    Tensor a_src = transpose(tape, row_range(tape, a_mat, 0, 1));  // d x 1
    Tensor a_dst = transpose(tape, row_range(tape, a_mat, 1, 1));
    Tensor s_src = matmul(tape, xw, a_src);  // total x 1
    Tensor s_dst = matmul(tape, xw, a_dst);

    std::vector<double> dense(total * total, 0.0);
    std::vector<Tensor> updated;
    updated.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
      std::vector<std::size_t> nbhd = graph.adj[i];
      nbhd.insert(std::lower_bound(nbhd.begin(), nbhd.end(), i), i);  // self-loop
      const std::size_t k = nbhd.size();
      std::vector<std::size_t> self_rep(k, i);
      Tensor pre = add(tape, rows(tape, s_src, self_rep), rows(tape, s_dst, nbhd));
      Tensor scores = leaky_relu(tape, reshape(tape, pre, {k}), leaky_slope);
      Tensor alpha = softmax(tape, scores, 0);
      for (std::size_t t = 0; t < k; ++t) {
        dense[i * total + nbhd[t]] = alpha.value_at(t);
      }
      updated.push_back(matmul(tape, reshape(tape, alpha, {std::size_t{1}, k}),
                               rows(tape, xw, nbhd)));
    }
    Tensor agg = vstack(tape, updated);
    x = sigmoid_output ? sigmoid(tape, agg) : leaky_relu(tape, agg, leaky_slope);
    result.attention.push_back(std::move(dense));
  }

  result.intent_states = row_range(tape, x, 0, graph.m);
  result.slot_states = row_range(tape, x, graph.m, graph.n);
  return result;
}

}  // namespace dgif
