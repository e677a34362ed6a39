#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "dgif/error.hpp"
#include "dgif/intent_decoder.hpp"
#include "dgif/slot_decoder.hpp"
#include "helpers.hpp"

using namespace dgif;

namespace {

IntentHeadParams zero_intent_head(std::size_t d, std::size_t m) {
  return {Tensor({d, d}), Tensor({d}), Tensor({d, m}), Tensor({m})};
}

}  // namespace

TEST_SUITE("decoders") {

TEST_CASE("intent probabilities: zero weights give exactly one half") {
  Tape tape;
  IntentHeadParams p = zero_intent_head(4, 3);
  Tensor r = Tensor::vec({0.3, -1.0, 2.0, 0.1});
  Tensor probs = intent_probs(tape, r, p);
  REQUIRE(probs.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(probs.value_at(i) == 0.5);
  }
}

TEST_CASE("intent probabilities stay strictly inside (0,1)") {
  Rng rng(3);
  ParamRegistry reg;
  IntentHeadParams p = init_intent_head(6, 4, rng, reg);
  Tape tape;
  Tensor r = testutil::random_tensor(rng, {6}, -50.0, 50.0, false);
  Tensor probs = intent_probs(tape, r, p);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    CHECK(probs.value_at(i) > 0.0);
    CHECK(probs.value_at(i) < 1.0);
  }
}

TEST_CASE("intent head matches a 2x2 scalar recomputation") {
  Tape tape;
  IntentHeadParams p;
  p.w_u = Tensor::matrix(2, 2, {0.5, -0.3, 0.2, 0.8});
  p.b_u = Tensor::vec({0.1, -0.2});
  p.w_i = Tensor::matrix(2, 2, {1.0, 0.3, -0.4, 0.6});
  p.b_i = Tensor::vec({0.05, -0.15});
  Tensor r = Tensor::vec({0.7, -1.1});
  const double slope = 0.01;
  Tensor probs = intent_probs(tape, r, p, slope);

  auto leaky = [&](double v) { return v < 0.0 ? slope * v : v; };
  double h0 = leaky(0.7 * 0.5 + (-1.1) * 0.2 + 0.1);
  double h1 = leaky(0.7 * -0.3 + (-1.1) * 0.8 + (-0.2));
  double z0 = h0 * 1.0 + h1 * -0.4 + 0.05;
  double z1 = h0 * 0.3 + h1 * 0.6 + (-0.15);
  CHECK(probs.value_at(0) == doctest::Approx(1.0 / (1.0 + std::exp(-z0))).epsilon(1e-12));
  CHECK(probs.value_at(1) == doctest::Approx(1.0 / (1.0 + std::exp(-z1))).epsilon(1e-12));
}

TEST_CASE("count head: uniform distribution resolves to count 1") {
  Tape tape;
  CountHeadParams p{Tensor({4, 3}), Tensor({3})};
  Tensor cls = Tensor::vec({1.0, -2.0, 0.5, 3.0});
  Tensor dist = count_distribution(tape, cls, p);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(dist.value_at(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  CHECK(argmax_count(dist) == 1);
}

TEST_CASE("count head: a dominant logit picks its count") {
  Tape tape;
  CountHeadParams p{Tensor({2, 3}), Tensor::vec({0.0, 5.0, 0.0})};
  Tensor cls = Tensor::vec({0.0, 0.0});
  CHECK(argmax_count(count_distribution(tape, cls, p)) == 2);
}

TEST_CASE("count argmax agrees with a sort oracle and ignores logit shifts") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Tape tape;
    ParamRegistry reg;
    Rng prng(100 + trial);
    CountHeadParams p = init_count_head(5, 4, prng, reg);
    Tensor cls = testutil::random_tensor(rng, {5}, -2.0, 2.0, false);
    Tensor logits = count_logits(tape, cls, p);
    std::vector<std::size_t> order(4);
    for (std::size_t i = 0; i < 4; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return logits.value_at(a) > logits.value_at(b);
    });
    CHECK(argmax_count(count_distribution(tape, cls, p)) == order[0] + 1);

    // Shifting every logit by a constant cannot change the winner.
    CountHeadParams shifted{p.w_ind, p.b_ind.clone()};
    for (std::size_t i = 0; i < 4; ++i) shifted.b_ind.at(i) += 7.5;
    CHECK(argmax_count(count_distribution(tape, cls, shifted)) == order[0] + 1);
  }
}

TEST_CASE("top-k selection: ordering, ties, bounds") {
  Tensor p = Tensor::vec({0.1, 0.9, 0.5});
  CHECK(select_top_k(p, 2) == std::vector<std::size_t>{1, 2});
  CHECK(select_top_k(p, 3) == std::vector<std::size_t>{1, 2, 0});

  Tensor equal = Tensor::vec({0.4, 0.4, 0.4});
  CHECK(select_top_k(equal, 2) == std::vector<std::size_t>{0, 1});

  CHECK_THROWS_AS((void)select_top_k(p, 0), ContractError);
  CHECK_THROWS_AS((void)select_top_k(p, 4), ContractError);
}

TEST_CASE("top-k selection matches a full-sort oracle and monotone transforms") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    Tensor p({6});
    for (std::size_t i = 0; i < 6; ++i) p.at(i) = rng.uniform(0.01, 0.99);
    std::vector<std::size_t> order(6);
    for (std::size_t i = 0; i < 6; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return p.value_at(a) > p.value_at(b);
    });
    std::vector<std::size_t> expect(order.begin(), order.begin() + 3);
    CHECK(select_top_k(p, 3) == expect);

    Tensor cubed({6});
    for (std::size_t i = 0; i < 6; ++i) cubed.at(i) = std::pow(p.value_at(i), 3.0);
    CHECK(select_top_k(cubed, 3) == expect);
  }
}

TEST_CASE("full intent prediction wires count into selection") {
  Tape tape;
  IntentHeadParams head = zero_intent_head(2, 4);
  head.b_i = Tensor::vec({0.0, 2.0, -1.0, 1.0});  // probs ordered 1 > 3 > 0 > 2
  CountHeadParams count{Tensor({2, 3}), Tensor::vec({0.0, 9.0, 0.0})};
  Tensor r = Tensor::vec({0.0, 0.0});
  IntentPrediction pred = predict_intents(tape, r, r, head, count);
  CHECK(pred.count == 2);
  CHECK(pred.selected == std::vector<std::size_t>{1, 3});
}

TEST_CASE("intent and count head gradients pass finite differences") {
  Rng rng(23);
  ParamRegistry reg;
  IntentHeadParams head = init_intent_head(4, 3, rng, reg);
  CountHeadParams count = init_count_head(4, 3, rng, reg);
  Tensor r = testutil::random_tensor(rng, {4}, -1.0, 1.0, true);
  Tensor cls = testutil::random_tensor(rng, {4}, -1.0, 1.0, true);
  std::vector<double> gold{1.0, 0.0, 1.0};
  auto objective = [&](Tape& tape) {
    Tensor intent_loss = bce_with_logits(tape, intent_logits(tape, r, head), gold);
    Tensor count_loss = ce_with_logits(tape, count_logits(tape, cls, count), 1);
    return add(tape, intent_loss, count_loss);
  };
  std::vector<std::pair<std::string, Tensor>> params(reg.items().begin(), reg.items().end());
  params.push_back({"r", r});
  params.push_back({"cls", cls});
  GradCheckResult res = grad_check(objective, params, 1e-5, 1e-4);
  INFO(res.summary());
  CHECK(res.pass);
}

TEST_CASE("slot decoder: zero weights give uniform rows and label 0") {
  Tape tape;
  SlotHeadParams p{Tensor({3, 4}), Tensor({4})};
  Tensor states = Tensor::matrix(2, 3, {1, 2, 3, -1, 0, 1});
  SlotPrediction pred = decode_slots(tape, states, p);
  REQUIRE(pred.dist.rows() == 2);
  for (std::size_t r = 0; r < 2; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(pred.dist.value_at(r, c) == doctest::Approx(0.25).epsilon(1e-12));
      total += pred.dist.value_at(r, c);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pred.labels[r] == 0);
  }
}

TEST_CASE("slot decoder: dominant logits win, rows always sum to 1") {
  Tape tape;
  SlotHeadParams p{Tensor({3, 3}), Tensor({3})};
  for (std::size_t i = 0; i < 3; ++i) p.w_s.at(i, i) = 5.0;
  Tensor states = Tensor::matrix(2, 3, {0, 1, 0, 1, 0, 0});
  SlotPrediction pred = decode_slots(tape, states, p);
  CHECK(pred.labels == std::vector<std::size_t>{1, 0});
  for (std::size_t r = 0; r < 2; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 3; ++c) total += pred.dist.value_at(r, c);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("slot decoder argmax matches a per-row sort oracle") {
  Rng rng(31);
  ParamRegistry reg;
  SlotHeadParams p = init_slot_head(5, 6, rng, reg);
  Tape tape;
  Tensor states = testutil::random_tensor(rng, {4, 5}, -2.0, 2.0, false);
  Tensor logits = slot_logits(tape, states, p);
  SlotPrediction pred = decode_slots(tape, states, p);
  for (std::size_t r = 0; r < 4; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < 6; ++c) {
      if (logits.value_at(r, c) > logits.value_at(r, best)) best = c;
    }
    CHECK(pred.labels[r] == best);
  }
}

TEST_CASE("slot decoder is invariant to constant logit shifts") {
  Rng rng(37);
  ParamRegistry reg;
  SlotHeadParams p = init_slot_head(4, 5, rng, reg);
  SlotHeadParams shifted{p.w_s, p.b_s.clone()};
  for (std::size_t i = 0; i < 5; ++i) shifted.b_s.at(i) += 3.0;
  Tape tape;
  Tensor states = testutil::random_tensor(rng, {3, 4}, -1.0, 1.0, false);
  SlotPrediction a = decode_slots(tape, states, p);
  SlotPrediction b = decode_slots(tape, states, shifted);
  CHECK(a.labels == b.labels);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 5; ++c)
      CHECK(a.dist.value_at(r, c) == doctest::Approx(b.dist.value_at(r, c)).epsilon(1e-12));
}

TEST_CASE("slot cross-entropy gradients pass finite differences") {
  Rng rng(41);
  ParamRegistry reg;
  SlotHeadParams p = init_slot_head(4, 3, rng, reg);
  Tensor states = testutil::random_tensor(rng, {3, 4}, -1.0, 1.0, true);
  std::vector<std::size_t> gold{2, 0, 1};
  auto objective = [&](Tape& tape) {
    Tensor logits = slot_logits(tape, states, p);
    Tensor acc = Tensor::scalar(0.0);
    for (std::size_t r = 0; r < 3; ++r) {
      Tensor row = reshape(tape, row_range(tape, logits, r, 1), {std::size_t{3}});
      acc = add(tape, acc, ce_with_logits(tape, row, gold[r]));
    }
    return scale(tape, acc, 1.0 / 3.0);
  };
  std::vector<std::pair<std::string, Tensor>> params(reg.items().begin(), reg.items().end());
  params.push_back({"states", states});
  GradCheckResult res = grad_check(objective, params, 1e-5, 1e-4);
  INFO(res.summary());
  CHECK(res.pass);
}

}  // TEST_SUITE
