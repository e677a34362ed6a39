#include "dgif/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "dgif/error.hpp"
#include "dgif/util.hpp"

namespace dgif {

namespace {

std::string describe_sample(std::size_t index, const Sample& s) {
  std::string text;
  const std::size_t shown = std::min<std::size_t>(s.tokens.size(), 5);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i) text += ' ';
    text += s.tokens[i];
  }
  if (shown < s.tokens.size()) text += " ...";
  return "sample " + std::to_string(index) + " ('" + text + "')";
}

}  // namespace

std::vector<PreparedSample> prepare(const Model& model,
                                    std::span<const Sample> samples) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Sample& s = samples[k];
    PreparedSample p;
    p.tokens = model.vocab.encode(s.tokens);
    for (const std::string& name : s.intents) {
      p.intents.push_back(model.intent_labels.index_of(name));
    }
    for (const std::string& tag : s.slots) {
      p.slots.push_back(model.slot_labels.index_of(tag));
    }
    p.distinct_slots = p.slots;
    std::sort(p.distinct_slots.begin(), p.distinct_slots.end());
    p.distinct_slots.erase(
        std::unique(p.distinct_slots.begin(), p.distinct_slots.end()),
        p.distinct_slots.end());
    p.name = describe_sample(k, s);
    out.push_back(std::move(p));
  }
  return out;
}

LossBreakdown joint_loss(Tape& tape, const Model& model, const LabelSpaces& spaces,
                         std::span<const PreparedSample> batch) {
  if (batch.empty()) throw ContractError("joint_loss: empty batch");
  const TrainConfig& cfg = model.config;
  const double gamma = cfg.effective_gamma();
  const std::size_t d = cfg.encoder.hidden_dim;
  const std::size_t num_intents = model.intent_labels.size();
  const std::size_t num_slots = model.slot_labels.size();

  auto accumulate = [&](Tensor& acc, const Tensor& term) {
    acc = acc.defined() ? add(tape, acc, term) : term;
  };
  auto basis_row = [&](const LabelSpace& space, std::size_t id) {
    return reshape(tape, row_range(tape, space.basis, id, 1), {d});
  };

  Tensor intent_acc, slot_acc, count_acc, rei_acc, res_acc;
  for (const PreparedSample& p : batch) {
    if (p.intents.size() > cfg.max_count) {
      throw DataError(p.name + ": " + std::to_string(p.intents.size()) +
                      " gold intents exceed max_count " +
                      std::to_string(cfg.max_count));
    }
    Forward f = forward(tape, model, spaces, p.tokens,
                        cfg.teacher_forcing ? &p.intents : nullptr);

    std::vector<double> multihot(num_intents, 0.0);
    for (std::size_t id : p.intents) multihot[id] = 1.0;
    accumulate(intent_acc, bce_with_logits(tape, f.intent_logits, multihot));
    accumulate(count_acc, ce_with_logits(tape, f.count_logits, p.intents.size() - 1));

    Tensor token_ce;
    for (std::size_t t = 0; t < p.slots.size(); ++t) {
      Tensor row = reshape(tape, row_range(tape, f.slot_logits, t, 1), {num_slots});
      accumulate(token_ce, ce_with_logits(tape, row, p.slots[t]));
    }
    accumulate(slot_acc,
               scale(tape, token_ce, 1.0 / static_cast<double>(p.slots.size())));

    if (gamma > 0.0) {
      // Intent side: the utterance feature the intent head consumed is the
      // single sample; the gold intent embeddings are the anchors.
      std::vector<Tensor> i_samples{f.intent_features};
      std::vector<Tensor> i_gold;
      for (std::size_t id : p.intents) i_gold.push_back(basis_row(spaces.intent, id));
      accumulate(rei_acc, l_re(tape, spaces.intent, p.intents, i_samples, i_gold,
                               cfg.lambda));

      // Slot side: every token state against the utterance's distinct gold
      // slot label embeddings.
      std::vector<Tensor> s_samples;
      for (std::size_t t = 0; t < p.slots.size(); ++t) {
        s_samples.push_back(reshape(tape, row_range(tape, f.token_states, t, 1), {d}));
      }
      std::vector<Tensor> s_gold;
      for (std::size_t id : p.distinct_slots) s_gold.push_back(basis_row(spaces.slot, id));
      accumulate(res_acc, l_re(tape, spaces.slot, p.distinct_slots, s_samples,
                               s_gold, cfg.lambda));
    }
  }

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Tensor intent_mean = scale(tape, intent_acc, inv_b);
  Tensor slot_mean = scale(tape, slot_acc, inv_b);
  Tensor count_mean = scale(tape, count_acc, inv_b);

  LossBreakdown out;
  out.intent = intent_mean.value_at(0);
  out.slot = slot_mean.value_at(0);
  out.count = count_mean.value_at(0);

  Tensor total = add(
      tape,
      add(tape, scale(tape, intent_mean, cfg.alpha), scale(tape, slot_mean, cfg.beta)),
      scale(tape, count_mean, 1.0 - cfg.alpha));
  if (gamma > 0.0) {
    Tensor rei_mean = scale(tape, rei_acc, inv_b);
    Tensor res_mean = scale(tape, res_acc, inv_b);
    out.re_intent = rei_mean.value_at(0);
    out.re_slot = res_mean.value_at(0);
    total = add(tape, total, scale(tape, rei_mean, cfg.alpha * gamma));
    total = add(tape, total, scale(tape, res_mean, cfg.beta * gamma));
  }
  out.total = total;
  return out;
}

Adam::Adam(ParamRegistry& params, double lr) : params_(params), lr_(lr) {
  for (const auto& [name, t] : params.items()) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

void Adam::step() {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  ++t_;
  const double corr1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double corr2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  std::size_t idx = 0;
  for (const auto& item : params_.items()) {
    Tensor t = item.second;  // shallow handle; mutates the registry storage
    auto vals = t.values();
    auto grads = t.grad();
    std::vector<double>& m = m_[idx];
    std::vector<double>& v = v_[idx];
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double g = grads[i];
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
      vals[i] -= lr_ * (m[i] / corr1) / (std::sqrt(v[i] / corr2) + kEps);
    }
    ++idx;
  }
}

namespace {

// Rescales all gradients so their global norm is at most max_norm. Adam's
// per-coordinate normalization makes a uniform rescale invisible in steady
// state; this only blunts isolated spikes.
void clip_gradients(ParamRegistry& params, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& item : params.items()) {
    Tensor t = item.second;  // shallow handle; mutates the registry storage
    for (double g : t.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (const auto& item : params.items()) {
    Tensor t = item.second;
    for (double& g : t.grad()) g *= scale;
  }
}

}  // namespace

std::string format_epoch(const EpochLog& log) {
  return "epoch=" + std::to_string(log.epoch) + " loss=" + fmt_double(log.loss) +
         " intent=" + fmt_double(log.intent) + " slot=" + fmt_double(log.slot) +
         " count=" + fmt_double(log.count) +
         " re_intent=" + fmt_double(log.re_intent) +
         " re_slot=" + fmt_double(log.re_slot) +
         " val_slot_f1=" + fmt_double(log.val_slot_f1) +
         " val_intent_acc=" + fmt_double(log.val_intent_acc) +
         " val_overall_acc=" + fmt_double(log.val_overall_acc);
}

TrainResult train(Model& model, std::span<const Sample> train_set,
                  std::span<const Sample> val_set,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  const TrainConfig& cfg = model.config;
  cfg.validate();
  if (train_set.empty()) throw ContractError("train: empty training set");

  const std::vector<PreparedSample> prepared = prepare(model, train_set);
  Adam optimizer(model.params, cfg.lr);
  Rng order_rng(cfg.seed + 1);  // distinct stream from parameter init

  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  std::vector<std::vector<double>> best_values;
  double best_overall = -1.0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order);

    EpochLog log;
    log.epoch = epoch;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<PreparedSample> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) batch.push_back(prepared[order[i]]);

      Tape tape;
      LabelSpaces spaces = build_label_spaces(tape, model);
      LossBreakdown loss = joint_loss(tape, model, spaces, batch);
      if (!loss.total.all_finite()) {
        throw DivergedError("loss went non-finite at epoch " +
                            std::to_string(epoch) + ", step " +
                            std::to_string(steps + 1) +
                            "; parameters keep the last finite state");
      }
      model.params.zero_grads();
      tape.backward(loss.total);
      if (!model.params.grads_finite()) {
        throw DivergedError("gradients went non-finite at epoch " +
                            std::to_string(epoch) + ", step " +
                            std::to_string(steps + 1) +
                            "; parameters keep the last finite state");
      }
      clip_gradients(model.params, cfg.grad_clip);
      optimizer.step();

      log.loss += loss.total.value_at(0);
      log.intent += loss.intent;
      log.slot += loss.slot;
      log.count += loss.count;
      log.re_intent += loss.re_intent;
      log.re_slot += loss.re_slot;
      ++steps;
    }
    const double inv_steps = 1.0 / static_cast<double>(steps);
    log.loss *= inv_steps;
    log.intent *= inv_steps;
    log.slot *= inv_steps;
    log.count *= inv_steps;
    log.re_intent *= inv_steps;
    log.re_slot *= inv_steps;

    if (!val_set.empty()) {
      const std::vector<Sample> preds = predict_corpus(model, val_set);
      const EvalReport report = evaluate(val_set, preds);
      log.val_slot_f1 = report.slot_f1;
      log.val_intent_acc = report.intent_acc;
      log.val_overall_acc = report.overall_acc;
      if (log.val_overall_acc > best_overall) {
        best_overall = log.val_overall_acc;
        result.best_epoch = epoch;
        best_values.clear();
        for (const auto& [name, t] : model.params.items()) {
          best_values.emplace_back(t.values().begin(), t.values().end());
        }
      }
    }

    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  if (!best_values.empty()) {
    result.best_overall = best_overall;
    std::size_t idx = 0;
    for (const auto& item : model.params.items()) {
      Tensor t = item.second;
      std::copy(best_values[idx].begin(), best_values[idx].end(),
                t.values().begin());
      ++idx;
    }
  } else {
    result.best_epoch = cfg.epochs;  // no validation ran; keep the final state
  }
  return result;
}

// ---- checkpointing --------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'G', 'I', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) {
      throw IoError("checkpoint ends mid-record (offset " + std::to_string(pos) + ")");
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    }
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

std::string serialize_label_sets(const LabelSet& intents, const LabelSet& slots) {
  std::string out;
  auto section = [&out](const char* header, const LabelSet& set) {
    out += header;
    out += '\n';
    for (std::size_t i = 0; i < set.size(); ++i) {
      out += set.names[i];
      out += '\t';
      out += join(set.verbalized[i], " ");
      out += '\n';
    }
  };
  section("[intents]", intents);
  section("[slots]", slots);
  return out;
}

// The sidecar stores the verbalized forms verbatim so a reload never depends
// on the override table that was active at save time.
std::pair<LabelSet, LabelSet> parse_label_sets(const std::string& text) {
  LabelSet intents{Task::intent, {}, {}};
  LabelSet slots{Task::slot, {}, {}};
  LabelSet* current = nullptr;
  std::size_t line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line == "[intents]") {
      current = &intents;
      continue;
    }
    if (line == "[slots]") {
      current = &slots;
      continue;
    }
    if (!current) {
      throw ParseError("label sidecar: entry before any section header", line_no);
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("label sidecar: expected 'name<TAB>words'", line_no);
    }
    current->names.push_back(line.substr(0, tab));
    current->verbalized.push_back(split_whitespace(line.substr(tab + 1)));
    if (current->verbalized.back().empty()) {
      throw ParseError("label sidecar: empty verbalization", line_no);
    }
  }
  if (intents.size() == 0 || slots.size() == 0) {
    throw ParseError("label sidecar: both [intents] and [slots] must be non-empty",
                     line_no);
  }
  return {std::move(intents), std::move(slots)};
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  std::string blob;
  blob.append(kMagic, 4);
  put_u32(blob, kVersion);
  put_u64(blob, model.params.items().size());
  for (const auto& [name, t] : model.params.items()) {
    put_u32(blob, static_cast<std::uint32_t>(name.size()));
    blob += name;
    put_u32(blob, static_cast<std::uint32_t>(t.shape().size()));
    for (std::size_t dim : t.shape()) put_u64(blob, dim);
    for (double v : t.values()) put_f64(blob, v);
  }
  write_file_atomic(path, blob);
  write_file_atomic(path + ".config", serialize_config(model.config));
  write_file_atomic(path + ".vocab", model.vocab.serialize());
  write_file_atomic(path + ".labels",
                    serialize_label_sets(model.intent_labels, model.slot_labels));
}

Model load_checkpoint(const std::string& path) {
  TrainConfig config = load_config(path + ".config");
  config.validate();

  Model m;
  m.config = config;
  m.vocab = Vocab::deserialize(read_file(path + ".vocab"));
  auto [intents, slots] = parse_label_sets(read_file(path + ".labels"));
  m.intent_labels = std::move(intents);
  m.slot_labels = std::move(slots);

  const std::string blob = read_file(path);
  ByteReader r{blob};
  if (r.bytes(4) != std::string(kMagic, 4)) {
    throw IoError(path + ": not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw IoError(path + ": unsupported checkpoint version " +
                  std::to_string(version));
  }
  const std::uint64_t count = r.u64();
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::string name = r.bytes(r.u32());
    const std::uint32_t ndim = r.u32();
    Shape shape(ndim);
    std::size_t coords = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
      shape[i] = static_cast<std::size_t>(r.u64());
      coords *= shape[i];
    }
    r.need(8 * coords);
    std::vector<double> values(coords);
    for (double& v : values) v = r.f64();
    m.params.add_existing(name, Tensor(std::move(shape), std::move(values)));
  }
  if (r.pos != blob.size()) {
    throw IoError(path + ": trailing bytes after the last tensor record");
  }

  m.encoder = bind_encoder_params(config.encoder, m.params, "enc");
  m.intent_head = bind_intent_head(m.params);
  m.count_head = bind_count_head(m.params);
  m.gat = bind_gat_params(config.gat_layers, m.params);
  m.slot_head = bind_slot_head(m.params);

  if (m.encoder.token_emb.rows() != m.vocab.size()) {
    throw DataError(path + ": token embedding rows disagree with the vocab sidecar");
  }
  if (m.intent_head.b_i.size() != m.intent_labels.size() ||
      m.slot_head.b_s.size() != m.slot_labels.size()) {
    throw DataError(path + ": head widths disagree with the label sidecar");
  }
  return m;
}

}  // namespace dgif
