#include "dgif/label_space.hpp"

#include <cmath>
#include <unordered_set>

#include "dgif/error.hpp"
#include "dgif/util.hpp"

namespace dgif {

// ---- verbalization --------------------------------------------------------

VerbalizerOverrides VerbalizerOverrides::parse(const std::string& text) {
  VerbalizerOverrides ov;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("overrides: expected 'fragment<TAB>replacement'", line_no);
    }
    const std::string frag = trim(line.substr(0, tab));
    const std::string repl = trim(line.substr(tab + 1));
    if (frag.empty() || repl.empty()) {
      throw ParseError("overrides: empty fragment or replacement", line_no);
    }
    ov.set(frag, repl);
  }
  return ov;
}

VerbalizerOverrides VerbalizerOverrides::load_file(const std::string& path) {
  return parse(read_file(path));
}

void VerbalizerOverrides::set(const std::string& fragment, const std::string& replacement) {
  std::vector<std::string> words;
  for (const auto& w : split_whitespace(replacement)) words.push_back(lower(w));
  table_[lower(fragment)] = std::move(words);
}

std::vector<std::string> VerbalizerOverrides::expand(const std::string& fragment) const {
  const std::string key = lower(fragment);
  auto it = table_.find(key);
  if (it != table_.end()) return it->second;
  return {key};
}

namespace {

bool is_separator(char c) { return c == '.' || c == '_' || c == '-' || c == ' '; }

void append_fragments(const std::string& text, const VerbalizerOverrides& overrides,
                      std::vector<std::string>& out) {
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      for (auto& w : overrides.expand(cur)) out.push_back(std::move(w));
      cur.clear();
    }
  };
  for (char c : text) {
    if (is_separator(c)) {
      flush();
    } else {
      cur += c;
    }
  }
  flush();
}

}  // namespace

std::vector<std::string> verbalize(const std::string& label, Task task,
                                   const VerbalizerOverrides& overrides) {
  std::vector<std::string> words;
  if (task == Task::slot) {
    if (label == "O" || label == "o") {
      return {"outside"};
    }
    if (label.size() >= 2 && (label[0] == 'B' || label[0] == 'b') && label[1] == '-') {
      // The span opener verbalizes as the bare category: "B-city" names a
      // city, and the unmarked form keeps it closest to the mention itself.
      // Continuations get the "inside" marker to set them apart.
      append_fragments(label.substr(2), overrides, words);
    } else if (label.size() >= 2 && (label[0] == 'I' || label[0] == 'i') && label[1] == '-') {
      words.push_back("inside");
      append_fragments(label.substr(2), overrides, words);
    } else {
      append_fragments(label, overrides, words);
    }
  } else {
    append_fragments(label, overrides, words);
  }
  if (words.empty() && !label.empty()) {
    words.push_back(lower(label));  // e.g. a name made only of separators
  }
  return words;
}

// ---- label sets and spaces ------------------------------------------------

LabelSet LabelSet::build(Task task, std::span<const std::string> names,
                         const VerbalizerOverrides& overrides) {
  if (names.empty()) {
    throw ContractError("label set: at least one label required");
  }
  LabelSet set;
  set.task = task;
  std::unordered_set<std::string> seen;
  for (const auto& name : names) {
    if (name.empty()) {
      throw ContractError("label set: empty label name");
    }
    if (!seen.insert(name).second) {
      throw ContractError("label set: duplicate label '" + name + "'");
    }
    set.names.push_back(name);
    set.verbalized.push_back(verbalize(name, task, overrides));
  }
  return set;
}

std::size_t LabelSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw ContractError("label '" + name + "' not in label set");
}

LabelSpace make_label_space(Tape& tape, Task task, const Tensor& basis, double ridge) {
  if (basis.ndim() != 2) {
    throw DimensionError("label space basis must be 2-D, got " + shape_str(basis.shape()));
  }
  LabelSpace space;
  space.task = task;
  space.basis = basis;
  space.gram = matmul(tape, basis, transpose(tape, basis));
  space.ridge = ridge;
  return space;
}

LabelSpace embed_labels(Tape& tape, const LabelSet& set, const EncoderConfig& cfg,
                        const EncoderParams& params, const Vocab& vocab, double ridge) {
  std::vector<Tensor> pooled;
  pooled.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto ids = vocab.encode(set.verbalized[i]);
    HiddenStates h = encode(tape, cfg, params, ids);
    pooled.push_back(self_attentive_pool(tape, params, h).pooled);
  }
  return make_label_space(tape, set.task, vstack(tape, pooled), ridge);
}

// ---- injection ------------------------------------------------------------

Projection inject(Tape& tape, const Tensor& x, const LabelSpace& space) {
  if (x.size() != space.dim()) {
    throw DimensionError("inject: vector of length " + std::to_string(x.size()) +
                         " vs label space of width " + std::to_string(space.dim()));
  }
  const std::size_t m = space.size();
  const std::size_t d = space.dim();
  Tensor b = reshape(tape, matmul(tape, space.basis, reshape(tape, x, {d, std::size_t{1}})),
                     {m});
  Tensor w = solve_spd(tape, space.gram, b, space.ridge);
  Tensor xhat = reshape(tape, matmul(tape, reshape(tape, w, {std::size_t{1}, m}), space.basis),
                        {d});
  return {x, w, xhat};
}

RowProjection inject_rows(Tape& tape, const Tensor& x, const LabelSpace& space) {
  if (x.ndim() != 2) {
    throw DimensionError("inject_rows: expected a matrix, got " + shape_str(x.shape()));
  }
  std::vector<Tensor> coords, projected;
  coords.reserve(x.rows());
  projected.reserve(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    Tensor row = reshape(tape, row_range(tape, x, r, 1), {x.cols()});
    Projection p = inject(tape, row, space);
    coords.push_back(p.coords);
    projected.push_back(p.projected);
  }
  return {vstack(tape, coords), vstack(tape, projected)};
}

// ---- regularizers ---------------------------------------------------------

Tensor l_inter(Tape& tape, const LabelSpace& space, std::span<const std::size_t> gold,
               bool exclude_self) {
  if (gold.empty()) {
    throw ContractError("l_inter: gold label set is empty");
  }
  const std::size_t m = space.size();
  for (std::size_t g : gold) {
    if (g >= m) {
      throw ContractError("l_inter: gold index " + std::to_string(g) + " out of range " +
                          std::to_string(m));
    }
  }
  const std::size_t per_gold = exclude_self ? m - 1 : m;
  if (per_gold == 0) {
    return Tensor::scalar(1.0);  // one label, self pair excluded: no terms
  }

  // Per-label norm tensors, built once; zero norms are a modelling failure.
  std::vector<Tensor> row(m), norm(m);
  for (std::size_t i = 0; i < m; ++i) {
    row[i] = reshape(tape, row_range(tape, space.basis, i, 1), {space.dim()});
    Tensor sq = dot(tape, row[i], row[i]);
    if (sq.value_at(0) <= 0.0) {
      throw DegenerateError("label embedding " + std::to_string(i) + " has zero norm");
    }
    norm[i] = sqrt(tape, sq);
  }

  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t g : gold) {
    for (std::size_t j = 0; j < m; ++j) {
      if (exclude_self && j == g) continue;
      Tensor cos = div(tape, dot(tape, row[g], row[j]), mul(tape, norm[g], norm[j]));
      acc = add(tape, acc, cos);
    }
  }
  const double denom = static_cast<double>(gold.size() * per_gold);
  return add(tape, Tensor::scalar(1.0), scale(tape, acc, 1.0 / denom));
}

Tensor l_intra(Tape& tape, std::span<const Tensor> samples,
               std::span<const Tensor> gold_reps) {
  if (samples.empty() || gold_reps.empty()) {
    throw ContractError("l_intra: needs at least one sample and one gold vector");
  }
  Tensor acc = Tensor::scalar(0.0);
  for (const Tensor& s : samples) {
    for (const Tensor& g : gold_reps) {
      Tensor diff = sub(tape, s, g);
      acc = add(tape, acc, dot(tape, diff, diff));
    }
  }
  const double denom = static_cast<double>(samples.size() * gold_reps.size());
  return scale(tape, acc, 1.0 / denom);
}

Tensor l_re(Tape& tape, const LabelSpace& space, std::span<const std::size_t> gold_ids,
            std::span<const Tensor> samples, std::span<const Tensor> gold_reps,
            double lambda, bool exclude_self) {
  if (lambda < 0.0) {
    throw ContractError("l_re: lambda must be >= 0");
  }
  Tensor inter = l_inter(tape, space, gold_ids, exclude_self);
  if (lambda == 0.0) return inter;
  return add(tape, inter, scale(tape, l_intra(tape, samples, gold_reps), lambda));
}

}  // namespace dgif
