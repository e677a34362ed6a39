#include <cmath>
#include <cstring>
#include <vector>

#include <doctest.h>

#include "dgif/encoder.hpp"
#include "dgif/error.hpp"
#include "helpers.hpp"

using namespace dgif;

namespace {

// ---- plain scalar re-implementation used as the oracle ---------------------

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.value_at(r, c);
  return m;
}

std::vector<double> to_vec(const Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

Mat ref_linear(const Mat& x, const Mat& w, const std::vector<double>& b) {
  Mat y(x.size(), std::vector<double>(w[0].size(), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < w[0].size(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) acc += x[i][k] * w[k][j];
      y[i][j] = acc + b[j];
    }
  return y;
}

std::vector<double> ref_softmax(const std::vector<double>& s, std::size_t valid) {
  std::vector<double> out(s.size(), 0.0);
  double mx = s[0];
  for (std::size_t i = 1; i < valid; ++i) mx = std::max(mx, s[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < valid; ++i) z += std::exp(s[i] - mx);
  for (std::size_t i = 0; i < valid; ++i) out[i] = std::exp(s[i] - mx) / z;
  return out;
}

struct RefResult {
  Mat states;
  std::vector<double> pool_weights;
  std::vector<double> pooled;
};

RefResult ref_encode_pool(const EncoderConfig& cfg, const EncoderParams& p,
                          const std::vector<std::size_t>& ids) {
  const std::size_t n = ids.size();
  const std::size_t total = n + 2;
  const std::size_t d = cfg.hidden_dim;
  Mat emb = to_mat(p.token_emb);
  Mat pos = to_mat(p.pos_emb);

  std::vector<std::size_t> seq(total);
  seq[0] = Vocab::kCls;
  for (std::size_t i = 0; i < n; ++i) seq[1 + i] = ids[i];
  seq[n + 1] = Vocab::kSep;

  Mat x(total, std::vector<double>(d));
  for (std::size_t r = 0; r < total; ++r)
    for (std::size_t c = 0; c < d; ++c) x[r][c] = emb[seq[r]][c] + pos[r][c];

  const std::size_t dh = cfg.head_dim();
  for (const auto& blk : p.blocks) {
    Mat q = ref_linear(x, to_mat(blk.wq), to_vec(blk.bq));
    Mat k = ref_linear(x, to_mat(blk.wk), to_vec(blk.bk));
    Mat v = ref_linear(x, to_mat(blk.wv), to_vec(blk.bv));
    Mat merged(total, std::vector<double>(d, 0.0));
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      for (std::size_t i = 0; i < total; ++i) {
        std::vector<double> scores(total, 0.0);
        for (std::size_t j = 0; j < total; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < dh; ++c) acc += q[i][h * dh + c] * k[j][h * dh + c];
          scores[j] = acc / std::sqrt(static_cast<double>(dh));
        }
        std::vector<double> att = ref_softmax(scores, total);
        for (std::size_t c = 0; c < dh; ++c) {
          double acc = 0.0;
          for (std::size_t j = 0; j < total; ++j) acc += att[j] * v[j][h * dh + c];
          merged[i][h * dh + c] = acc;
        }
      }
    }
    Mat attn_out = ref_linear(merged, to_mat(blk.wo), to_vec(blk.bo));
    for (std::size_t r = 0; r < total; ++r)
      for (std::size_t c = 0; c < d; ++c) x[r][c] += attn_out[r][c];
    Mat hidden = ref_linear(x, to_mat(blk.ff1_w), to_vec(blk.ff1_b));
    for (auto& row : hidden)
      for (double& v2 : row)
        if (v2 < 0.0) v2 *= cfg.leaky_slope;
    Mat ffn_out = ref_linear(hidden, to_mat(blk.ff2_w), to_vec(blk.ff2_b));
    for (std::size_t r = 0; r < total; ++r)
      for (std::size_t c = 0; c < d; ++c) x[r][c] += ffn_out[r][c];
  }

  Mat a = ref_linear(x, to_mat(p.pool_w1), std::vector<double>(cfg.pool_dim, 0.0));
  for (auto& row : a)
    for (double& v2 : row) v2 = std::tanh(v2);
  Mat w2 = to_mat(p.pool_w2);
  std::vector<double> scores(total, 0.0);
  for (std::size_t r = 0; r < total; ++r)
    for (std::size_t c = 0; c < cfg.pool_dim; ++c) scores[r] += a[r][c] * w2[c][0];
  std::vector<double> weights = ref_softmax(scores, total);
  std::vector<double> pooled(d, 0.0);
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t r = 0; r < total; ++r) pooled[c] += weights[r] * x[r][c];
  return {x, weights, pooled};
}

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.hidden_dim = 8;
  cfg.blocks = 1;
  cfg.heads = 2;
  cfg.max_seq_len = 12;
  cfg.pool_dim = 5;
  return cfg;
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("vocab reserves four ids and lowercases lookups") {
  Vocab v;
  CHECK(v.size() == 4);
  const std::size_t a = v.add("Weather");
  CHECK(a == 4);
  CHECK(v.add("weather") == a);
  CHECK(v.id_of("WEATHER") == a);
  CHECK(v.id_of("never-seen") == Vocab::kUnk);
  CHECK(v.token_of(a) == "weather");
  CHECK_THROWS_AS((void)v.token_of(99), ContractError);
}

TEST_CASE("vocab serialization round-trips ids") {
  Vocab v;
  v.add("play");
  v.add("some");
  v.add("jazz");
  Vocab back = Vocab::deserialize(v.serialize());
  CHECK(back.size() == v.size());
  for (std::size_t id = 0; id < v.size(); ++id) {
    CHECK(back.token_of(id) == v.token_of(id));
  }
}

TEST_CASE("single-token utterance yields a 3 x d state matrix") {
  EncoderConfig cfg = tiny_config();
  Rng rng(7);
  ParamRegistry reg;
  EncoderParams p = init_encoder_params(cfg, 10, rng, reg, "enc");
  Tape tape;
  std::vector<std::size_t> ids{5};
  HiddenStates h = encode(tape, cfg, p, ids);
  CHECK(h.states.rows() == 3);
  CHECK(h.states.cols() == cfg.hidden_dim);
  CHECK(h.n == 1);
  CHECK(h.states.all_finite());
  Tensor c = h.cls(tape);
  CHECK(c.shape() == Shape{cfg.hidden_dim});
  Tensor body = h.content(tape);
  CHECK(body.rows() == 1);
  for (std::size_t j = 0; j < cfg.hidden_dim; ++j) {
    CHECK(body.value_at(0, j) == h.states.value_at(1, j));
  }
}

TEST_CASE("same seed gives bit-identical parameters and states") {
  EncoderConfig cfg = tiny_config();
  std::vector<std::size_t> ids{4, 7, 5};
  auto run = [&](std::vector<double>& states_out, std::vector<double>& pooled_out) {
    Rng rng(1234);
    ParamRegistry reg;
    EncoderParams p = init_encoder_params(cfg, 12, rng, reg, "enc");
    Tape tape;
    HiddenStates h = encode(tape, cfg, p, ids);
    PoolResult pool = self_attentive_pool(tape, p, h);
    states_out.assign(h.states.values().begin(), h.states.values().end());
    pooled_out.assign(pool.pooled.values().begin(), pool.pooled.values().end());
  };
  std::vector<double> s1, p1, s2, p2;
  run(s1, p1);
  run(s2, p2);
  REQUIRE(s1.size() == s2.size());
  CHECK(std::memcmp(s1.data(), s2.data(), s1.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(p1.data(), p2.data(), p1.size() * sizeof(double)) == 0);
}

TEST_CASE("token order changes the encoding") {
  EncoderConfig cfg = tiny_config();
  Rng rng(3);
  ParamRegistry reg;
  EncoderParams p = init_encoder_params(cfg, 12, rng, reg, "enc");
  Tape tape;
  std::vector<std::size_t> fwd{4, 5, 6};
  std::vector<std::size_t> rev{6, 5, 4};
  HiddenStates a = encode(tape, cfg, p, fwd);
  HiddenStates b = encode(tape, cfg, p, rev);
  CHECK(testutil::max_abs_diff(a.states.values(), b.states.values()) > 1e-6);
}

TEST_CASE("out-of-range ids behave exactly like the unknown token") {
  EncoderConfig cfg = tiny_config();
  Rng rng(5);
  ParamRegistry reg;
  EncoderParams p = init_encoder_params(cfg, 10, rng, reg, "enc");
  Tape tape;
  std::vector<std::size_t> huge{4, 500};
  std::vector<std::size_t> unk{4, Vocab::kUnk};
  HiddenStates a = encode(tape, cfg, p, huge);
  HiddenStates b = encode(tape, cfg, p, unk);
  CHECK(testutil::max_abs_diff(a.states.values(), b.states.values()) == 0.0);
}

TEST_CASE("length violations raise the dedicated errors") {
  EncoderConfig cfg = tiny_config();  // max_seq_len = 12
  Rng rng(5);
  ParamRegistry reg;
  EncoderParams p = init_encoder_params(cfg, 10, rng, reg, "enc");
  Tape tape;
  std::vector<std::size_t> too_long(cfg.max_seq_len + 1, 4);
  CHECK_THROWS_AS((void)encode(tape, cfg, p, too_long), TruncationError);
  std::vector<std::size_t> empty;
  CHECK_THROWS_AS((void)encode(tape, cfg, p, empty), ContractError);
  std::vector<std::size_t> ok{4};
  CHECK_THROWS_AS((void)encode(tape, cfg, p, ok, cfg.max_seq_len + 3), TruncationError);
}

TEST_CASE("pooling weights are a convex combination over non-pad rows") {
  EncoderConfig cfg = tiny_config();
  Rng rng(11);
  ParamRegistry reg;
  EncoderParams p = init_encoder_params(cfg, 16, rng, reg, "enc");
  Tape tape;
  std::vector<std::size_t> ids{4, 9, 12, 6};
  HiddenStates h = encode(tape, cfg, p, ids, ids.size() + 5);
  PoolResult pool = self_attentive_pool(tape, p, h);
  REQUIRE(pool.weights.size() == h.states.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < pool.weights.size(); ++i) {
    const double w = pool.weights.value_at(i);
    if (i < h.valid_rows()) {
      CHECK(w >= 0.0);
      total += w;
    } else {
      CHECK(w == 0.0);  // padding rows carry exactly zero weight
    }
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  // Convexity: each pooled coordinate lies between the per-row min and max.
  for (std::size_t c = 0; c < cfg.hidden_dim; ++c) {
    double lo = h.states.value_at(0, c), hi = lo;
    for (std::size_t r = 1; r < h.valid_rows(); ++r) {
      lo = std::min(lo, h.states.value_at(r, c));
      hi = std::max(hi, h.states.value_at(r, c));
    }
    CHECK(pool.pooled.value_at(c) >= lo - 1e-12);
    CHECK(pool.pooled.value_at(c) <= hi + 1e-12);
  }
}

TEST_CASE("pooling identical rows returns that row") {
  EncoderConfig cfg = tiny_config();
  Rng rng(2);
  ParamRegistry reg;
  EncoderParams p = init_encoder_params(cfg, 8, rng, reg, "enc");
  Tape tape;
  Tensor flat({4, cfg.hidden_dim});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < cfg.hidden_dim; ++c) flat.at(r, c) = 0.25 * (c + 1);
  HiddenStates h{flat, 2};
  PoolResult pool = self_attentive_pool(tape, p, h);
  for (std::size_t c = 0; c < cfg.hidden_dim; ++c) {
    CHECK(pool.pooled.value_at(c) == doctest::Approx(0.25 * (c + 1)).epsilon(1e-12));
  }
}

TEST_CASE("full stack matches an independent scalar recomputation") {
  EncoderConfig cfg = tiny_config();
  Rng rng(42);
  ParamRegistry reg;
  EncoderParams p = init_encoder_params(cfg, 14, rng, reg, "enc");
  std::vector<std::size_t> ids{4, 11, 7, 13, 5};
  Tape tape;
  HiddenStates h = encode(tape, cfg, p, ids);
  PoolResult pool = self_attentive_pool(tape, p, h);
  RefResult ref = ref_encode_pool(cfg, p, ids);
  REQUIRE(h.states.rows() == ref.states.size());
  for (std::size_t r = 0; r < h.states.rows(); ++r)
    for (std::size_t c = 0; c < h.states.cols(); ++c)
      CHECK(h.states.value_at(r, c) == doctest::Approx(ref.states[r][c]).epsilon(1e-12));
  for (std::size_t i = 0; i < pool.weights.size(); ++i)
    CHECK(pool.weights.value_at(i) == doctest::Approx(ref.pool_weights[i]).epsilon(1e-12));
  for (std::size_t c = 0; c < cfg.hidden_dim; ++c)
    CHECK(pool.pooled.value_at(c) == doctest::Approx(ref.pooled[c]).epsilon(1e-12));
}

TEST_CASE("padding rows never change the non-pad outputs") {
  EncoderConfig cfg = tiny_config();
  Rng rng(9);
  ParamRegistry reg;
  EncoderParams p = init_encoder_params(cfg, 16, rng, reg, "enc");
  std::vector<std::size_t> ids{6, 10, 4};
  Tape t1, t2;
  HiddenStates bare = encode(t1, cfg, p, ids);
  HiddenStates padded = encode(t2, cfg, p, ids, ids.size() + 2 + 4);
  REQUIRE(padded.states.rows() == bare.states.rows() + 4);
  for (std::size_t r = 0; r < bare.states.rows(); ++r)
    for (std::size_t c = 0; c < bare.states.cols(); ++c)
      CHECK(padded.states.value_at(r, c) == bare.states.value_at(r, c));
  PoolResult pa = self_attentive_pool(t1, p, bare);
  PoolResult pb = self_attentive_pool(t2, p, padded);
  CHECK(testutil::max_abs_diff(pa.pooled.values(), pb.pooled.values()) == 0.0);
}

TEST_CASE("gradients through encode and pooling pass finite differences") {
  EncoderConfig cfg;
  cfg.hidden_dim = 6;
  cfg.blocks = 1;
  cfg.heads = 2;
  cfg.max_seq_len = 6;
  cfg.pool_dim = 4;
  Rng rng(17);
  ParamRegistry reg;
  EncoderParams p = init_encoder_params(cfg, 8, rng, reg, "enc");
  std::vector<std::size_t> ids{4, 6, 7};
  auto objective = [&](Tape& tape) {
    HiddenStates h = encode(tape, cfg, p, ids);
    PoolResult pool = self_attentive_pool(tape, p, h);
    Tensor probe = Tensor::vec(std::vector<double>(cfg.hidden_dim, 0.0));
    for (std::size_t i = 0; i < cfg.hidden_dim; ++i) probe.at(i) = 0.1 * (i + 1);
    return add(tape, dot(tape, pool.pooled, probe), mean(tape, h.states));
  };
  GradCheckResult res = grad_check(objective, reg.items(), 1e-5, 1e-4);
  INFO(res.summary());
  CHECK(res.pass);
}

}  // TEST_SUITE
