#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgif/params.hpp"
#include "dgif/tensor.hpp"
#include "dgif/util.hpp"

namespace dgif {

/// Token table. Ids 0..3 are reserved for the synthetic CLS/SEP/PAD/UNK
/// entries; real tokens start at 4. Lookups lowercase the query so the
/// table stores each surface form once.
class Vocab {
 public:
  static constexpr std::size_t kCls = 0;
  static constexpr std::size_t kSep = 1;
  static constexpr std::size_t kPad = 2;
  static constexpr std::size_t kUnk = 3;

  Vocab();

  /// Inserts the (lowercased) token if absent; returns its id either way.
  std::size_t add(const std::string& token);
  /// Lookup; unseen tokens map to kUnk.
  std::size_t id_of(const std::string& token) const;
  const std::string& token_of(std::size_t id) const;
  std::size_t size() const { return tokens_.size(); }

  std::vector<std::size_t> encode(std::span<const std::string> words) const;

  /// One real token per line; reserved entries are implicit.
  std::string serialize() const;
  static Vocab deserialize(const std::string& text);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct EncoderConfig {
  std::size_t hidden_dim = 64;   // d; must be divisible by heads
  std::size_t blocks = 2;
  std::size_t heads = 4;
  std::size_t max_seq_len = 64;  // content tokens, excluding CLS/SEP
  std::size_t pool_dim = 32;     // width of the pooling attention layer
  double leaky_slope = 0.01;

  void validate() const;  // throws ContractError on a bad combination
  std::size_t head_dim() const { return hidden_dim / heads; }
};

/// Weights for one encoder stack. The tensors are views into a
/// ParamRegistry; copying this struct aliases the same storage.
struct EncoderParams {
  Tensor token_emb;  // V x d
  Tensor pos_emb;    // (max_seq_len + 2) x d

  struct Block {
    Tensor wq, bq;      // d x d, d
    Tensor wk, bk;
    Tensor wv, bv;
    Tensor wo, bo;      // head-merge projection
    Tensor ff1_w, ff1_b;  // d x 4d, 4d
    Tensor ff2_w, ff2_b;  // 4d x d, d
  };
  std::vector<Block> blocks;

  Tensor pool_w1;  // d x pool_dim
  Tensor pool_w2;  // pool_dim x 1
};

/// Creates and registers all tensors for one encoder under `prefix.`.
EncoderParams init_encoder_params(const EncoderConfig& cfg, std::size_t vocab_size,
                                  Rng& rng, ParamRegistry& registry,
                                  const std::string& prefix);

/// Re-binds an EncoderParams view onto tensors already present in the
/// registry (checkpoint load path).
EncoderParams bind_encoder_params(const EncoderConfig& cfg, const ParamRegistry& registry,
                                  const std::string& prefix);

/// Output of encode(): row 0 is CLS, rows 1..n the content tokens, row n+1
/// SEP, any rows beyond that padding.
struct HiddenStates {
  Tensor states;     // L x d with L >= n + 2
  std::size_t n = 0; // content token count

  std::size_t valid_rows() const { return n + 2; }
  Tensor cls(Tape& tape) const;      // [d]
  Tensor content(Tape& tape) const;  // n x d
};

/// Runs the full stack over [CLS] tokens [SEP] (+ PAD up to pad_rows total
/// rows when pad_rows > n + 2). Ids outside the vocabulary fall back to
/// UNK. Throws TruncationError when the sequence exceeds max_seq_len and
/// ContractError on an empty token list.
HiddenStates encode(Tape& tape, const EncoderConfig& cfg, const EncoderParams& params,
                    std::span<const std::size_t> token_ids, std::size_t pad_rows = 0);

struct PoolResult {
  Tensor pooled;   // [d]
  Tensor weights;  // [L]; zero on padding rows, sums to 1 over the rest
};

/// Self-attentive pooling over the non-padding rows of `h`.
PoolResult self_attentive_pool(Tape& tape, const EncoderParams& params,
                               const HiddenStates& h);

}  // namespace dgif
