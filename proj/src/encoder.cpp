#include "dgif/encoder.hpp"

#include <cmath>
#include <utility>

#include "dgif/error.hpp"

namespace dgif {

// ---- Vocab ----------------------------------------------------------------

Vocab::Vocab() {
  tokens_ = {"[CLS]", "[SEP]", "[PAD]", "[UNK]"};
  index_["[cls]"] = kCls;
  index_["[sep]"] = kSep;
  index_["[pad]"] = kPad;
  index_["[unk]"] = kUnk;
}

std::size_t Vocab::add(const std::string& token) {
  const std::string key = lower(token);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  const std::size_t id = tokens_.size();
  tokens_.push_back(key);
  index_.emplace(key, id);
  return id;
}

std::size_t Vocab::id_of(const std::string& token) const {
  auto it = index_.find(lower(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token_of(std::size_t id) const {
  if (id >= tokens_.size()) {
    throw ContractError("vocab id " + std::to_string(id) + " out of range (size " +
                        std::to_string(tokens_.size()) + ")");
  }
  return tokens_[id];
}

std::vector<std::size_t> Vocab::encode(std::span<const std::string> words) const {
  std::vector<std::size_t> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(id_of(w));
  return ids;
}

std::string Vocab::serialize() const {
  std::string out;
  for (std::size_t id = 4; id < tokens_.size(); ++id) {
    out += tokens_[id];
    out += '\n';
  }
  return out;
}

Vocab Vocab::deserialize(const std::string& text) {
  Vocab v;
  for (const auto& line : split(text, '\n')) {
    const std::string t = trim(line);
    if (!t.empty()) v.add(t);
  }
  return v;
}

// ---- config / params ------------------------------------------------------

void EncoderConfig::validate() const {
  if (hidden_dim == 0 || heads == 0 || blocks == 0 || max_seq_len == 0 || pool_dim == 0) {
    throw ContractError("encoder config: all sizes must be positive");
  }
  if (hidden_dim % heads != 0) {
    throw ContractError("encoder config: hidden_dim " + std::to_string(hidden_dim) +
                        " not divisible by heads " + std::to_string(heads));
  }
}

EncoderParams init_encoder_params(const EncoderConfig& cfg, std::size_t vocab_size,
                                  Rng& rng, ParamRegistry& registry,
                                  const std::string& prefix) {
  cfg.validate();
  if (vocab_size < 4) {
    throw ContractError("encoder: vocab must include the four reserved entries");
  }
  const std::size_t d = cfg.hidden_dim;
  const std::size_t ff = 4 * d;
  EncoderParams p;
  p.token_emb = registry.add(prefix + ".token_emb", {vocab_size, d}, rng, d);
  p.pos_emb = registry.add(prefix + ".pos_emb", {cfg.max_seq_len + 2, d}, rng, d);
  // Embeddings start three times as large as the weight matrices around them:
  // token identity has to survive pooling and neighbourhood averaging from the
  // very first step, before any deeper layer has learned to preserve it.
  for (Tensor t : {p.token_emb, p.pos_emb}) {
    auto v = t.values();
    for (double& x : v) x *= 3.0;
  }
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    const std::string bp = prefix + ".block" + std::to_string(b);
    EncoderParams::Block blk;
    blk.wq = registry.add(bp + ".wq", {d, d}, rng, d);
    blk.bq = registry.add_zeros(bp + ".bq", {d});
    blk.wk = registry.add(bp + ".wk", {d, d}, rng, d);
    blk.bk = registry.add_zeros(bp + ".bk", {d});
    blk.wv = registry.add(bp + ".wv", {d, d}, rng, d);
    blk.bv = registry.add_zeros(bp + ".bv", {d});
    blk.wo = registry.add(bp + ".wo", {d, d}, rng, d);
    blk.bo = registry.add_zeros(bp + ".bo", {d});
    blk.ff1_w = registry.add(bp + ".ff1_w", {d, ff}, rng, d);
    blk.ff1_b = registry.add_zeros(bp + ".ff1_b", {ff});
    blk.ff2_w = registry.add(bp + ".ff2_w", {ff, d}, rng, ff);
    blk.ff2_b = registry.add_zeros(bp + ".ff2_b", {d});
    // Both residual branches start small: block outputs are then close to the
    // raw embeddings, and attention / feed-forward mixing fades in as those
    // output matrices grow instead of scrambling token identity from step one.
    for (Tensor t : {blk.wo, blk.ff2_w}) {
      auto v = t.values();
      for (double& x : v) x *= 0.1;
    }
    p.blocks.push_back(blk);
  }
  p.pool_w1 = registry.add(prefix + ".pool_w1", {d, cfg.pool_dim}, rng, d);
  p.pool_w2 = registry.add(prefix + ".pool_w2", {cfg.pool_dim, 1}, rng, cfg.pool_dim);
  return p;
}

EncoderParams bind_encoder_params(const EncoderConfig& cfg, const ParamRegistry& registry,
                                  const std::string& prefix) {
  cfg.validate();
  EncoderParams p;
  p.token_emb = registry.find(prefix + ".token_emb");
  p.pos_emb = registry.find(prefix + ".pos_emb");
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    const std::string bp = prefix + ".block" + std::to_string(b);
    EncoderParams::Block blk;
    blk.wq = registry.find(bp + ".wq");
    blk.bq = registry.find(bp + ".bq");
    blk.wk = registry.find(bp + ".wk");
    blk.bk = registry.find(bp + ".bk");
    blk.wv = registry.find(bp + ".wv");
    blk.bv = registry.find(bp + ".bv");
    blk.wo = registry.find(bp + ".wo");
    blk.bo = registry.find(bp + ".bo");
    blk.ff1_w = registry.find(bp + ".ff1_w");
    blk.ff1_b = registry.find(bp + ".ff1_b");
    blk.ff2_w = registry.find(bp + ".ff2_w");
    blk.ff2_b = registry.find(bp + ".ff2_b");
    p.blocks.push_back(blk);
  }
  p.pool_w1 = registry.find(prefix + ".pool_w1");
  p.pool_w2 = registry.find(prefix + ".pool_w2");
  return p;
}

// ---- forward --------------------------------------------------------------

Tensor HiddenStates::cls(Tape& tape) const {
  return reshape(tape, row_range(tape, states, 0, 1), {states.cols()});
}

Tensor HiddenStates::content(Tape& tape) const {
  return row_range(tape, states, 1, n);
}

HiddenStates encode(Tape& tape, const EncoderConfig& cfg, const EncoderParams& params,
                    std::span<const std::size_t> token_ids, std::size_t pad_rows) {
  cfg.validate();
  if (token_ids.empty()) {
    throw ContractError("encode: token sequence is empty");
  }
  const std::size_t n = token_ids.size();
  if (n > cfg.max_seq_len) {
    throw TruncationError("utterance of " + std::to_string(n) +
                          " tokens exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  }
  std::size_t total = n + 2;
  if (pad_rows > total) total = pad_rows;
  if (total > cfg.max_seq_len + 2) {
    throw TruncationError("padded length " + std::to_string(total) +
                          " exceeds max_seq_len " + std::to_string(cfg.max_seq_len) +
                          " + 2");
  }

  const std::size_t vocab_size = params.token_emb.rows();
  std::vector<std::size_t> seq(total, Vocab::kPad);
  seq[0] = Vocab::kCls;
  for (std::size_t i = 0; i < n; ++i) {
    seq[1 + i] = token_ids[i] < vocab_size ? token_ids[i] : Vocab::kUnk;
  }
  seq[n + 1] = Vocab::kSep;

  Tensor x = add(tape, rows(tape, params.token_emb, seq),
                 row_range(tape, params.pos_emb, 0, total));
  const std::size_t valid = n + 2;
  const std::size_t dh = cfg.head_dim();
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (const auto& blk : params.blocks) {
    Tensor q = linear(tape, x, blk.wq, blk.bq);
    Tensor k = linear(tape, x, blk.wk, blk.bk);
    Tensor v = linear(tape, x, blk.wv, blk.bv);
    std::vector<Tensor> merged;
    merged.reserve(cfg.heads);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      Tensor qh = col_range(tape, q, h * dh, dh);
      Tensor kh = col_range(tape, k, h * dh, dh);
      Tensor vh = col_range(tape, v, h * dh, dh);
      Tensor scores = scale(tape, matmul(tape, qh, transpose(tape, kh)), att_scale);
      Tensor att = softmax(tape, scores, 1, valid);
      merged.push_back(matmul(tape, att, vh));
    }
    x = add(tape, x, linear(tape, hstack(tape, merged), blk.wo, blk.bo));
    Tensor hidden = leaky_relu(tape, linear(tape, x, blk.ff1_w, blk.ff1_b), cfg.leaky_slope);
    x = add(tape, x, linear(tape, hidden, blk.ff2_w, blk.ff2_b));
  }
  return {x, n};
}

PoolResult self_attentive_pool(Tape& tape, const EncoderParams& params,
                               const HiddenStates& h) {
  const std::size_t total = h.states.rows();
  if (h.valid_rows() > total) {
    throw ContractError("pool: hidden states have fewer rows than n + 2");
  }
  Tensor scores = matmul(tape, tanh(tape, matmul(tape, h.states, params.pool_w1)),
                         params.pool_w2);  // total x 1
  Tensor weights = softmax(tape, reshape(tape, scores, {total}), 0, h.valid_rows());
  Tensor pooled = matmul(tape, reshape(tape, weights, {std::size_t{1}, total}), h.states);
  return {reshape(tape, pooled, {h.states.cols()}), weights};
}

}  // namespace dgif
