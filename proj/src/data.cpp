#include "dgif/data.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <unordered_set>

#include "dgif/error.hpp"
#include "dgif/util.hpp"

namespace dgif {

namespace {

void check_bio(const std::string& tag, std::size_t line) {
  if (tag == "O") return;
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') return;
  throw ParseError("malformed BIO tag '" + tag + "'", line);
}

Sample finish_block(const std::vector<std::pair<std::size_t, std::string>>& block) {
  const auto& [intent_line_no, intent_line] = block.back();
  if (block.size() < 2) {
    throw ParseError("sample needs token lines before its intent line", intent_line_no);
  }
  Sample s;
  for (std::size_t i = 0; i + 1 < block.size(); ++i) {
    const auto& [line_no, line] = block[i];
    const auto fields = split_whitespace(line);
    if (fields.size() != 2) {
      throw ParseError("expected 'token tag', got '" + line + "'", line_no);
    }
    check_bio(fields[1], line_no);
    s.tokens.push_back(fields[0]);
    s.slots.push_back(fields[1]);
  }
  std::unordered_set<std::string> seen;
  for (const auto& part : split(intent_line, '#')) {
    const std::string name = trim(part);
    if (name.empty()) {
      throw ParseError("empty intent name", intent_line_no);
    }
    if (!seen.insert(name).second) {
      throw ParseError("duplicate intent '" + name + "'", intent_line_no);
    }
    s.intents.push_back(name);
  }
  return s;
}

}  // namespace

std::vector<Sample> parse_corpus_text(const std::string& text) {
  std::vector<Sample> out;
  std::vector<std::pair<std::size_t, std::string>> block;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) {
      if (!block.empty()) {
        out.push_back(finish_block(block));
        block.clear();
      }
      continue;
    }
    block.emplace_back(line_no, line);
  }
  if (!block.empty()) {
    out.push_back(finish_block(block));
  }
  return out;
}

std::vector<Sample> parse_corpus(const std::string& path) {
  return parse_corpus_text(read_file(path));
}

std::string serialize_corpus(std::span<const Sample> samples) {
  std::string out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.tokens.size() != s.slots.size() || s.tokens.empty() || s.intents.empty()) {
      throw ContractError("sample " + std::to_string(i) + " violates the corpus shape");
    }
    if (i > 0) out += '\n';
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      out += s.tokens[t];
      out += ' ';
      out += s.slots[t];
      out += '\n';
    }
    out += join(s.intents, "#");
    out += '\n';
  }
  return out;
}

CorpusTables build_tables(std::span<const Sample> samples) {
  if (samples.empty()) {
    throw ContractError("cannot build vocab from an empty corpus");
  }
  CorpusTables tables;
  std::set<std::string> intents, slots;
  for (const auto& s : samples) {
    for (const auto& t : s.tokens) tables.vocab.add(t);
    for (const auto& tag : s.slots) slots.insert(tag);
    for (const auto& name : s.intents) intents.insert(name);
  }
  tables.intent_names.assign(intents.begin(), intents.end());
  tables.slot_names.assign(slots.begin(), slots.end());
  return tables;
}

// ---- synthetic grammar ----------------------------------------------------

void SyntheticSpec::validate() const {
  if (num_intents < 1 || slot_types_per_intent < 1 || templates_per_intent < 1 ||
      num_samples < 1 || max_intents < 1) {
    throw ContractError("synthetic spec: every count must be >= 1");
  }
  if (max_intents > 3) {
    throw ContractError("synthetic spec: at most 3 intents per utterance");
  }
  if (max_intents > num_intents) {
    throw ContractError("synthetic spec: max_intents exceeds the intent inventory");
  }
}

namespace {

constexpr std::array<const char*, 8> kIntentNames = {
    "play_music",   "get_weather", "book_flight",  "set_alarm",
    "order_food",   "find_movie",  "send_message", "check_traffic"};
constexpr std::array<const char*, 8> kKeywords = {
    "play", "forecast", "book", "set", "order", "find", "send", "check"};
constexpr std::array<const char*, 10> kSlotBases = {
    "song", "city", "airline", "time", "dish",
    "movie", "contact", "street", "genre", "date"};

std::string intent_name(std::size_t i) {
  if (i < kIntentNames.size()) return kIntentNames[i];
  return "task_" + std::to_string(i);
}

std::string intent_keyword(std::size_t i) {
  if (i < kKeywords.size()) return kKeywords[i];
  return "perform" + std::to_string(i);
}

std::string slot_type(std::size_t flat_index) {
  if (flat_index < kSlotBases.size()) return kSlotBases[flat_index];
  return "field" + std::to_string(flat_index);
}

// Every value is a two-word phrase that opens with the type word itself
// ("song inside", "song extra", ...).  The opening word pins the B- tag
// lexically, while the shared suffixes force the I- tag to be read off the
// left neighbour -- a genuinely contextual decision with a one-token window.
// "inside" doubles as the continuation marker in the verbalized labels, so a
// third of the continuation tokens share a word with the label that tags
// them.
std::vector<std::vector<std::string>> lexicon(const std::string& type) {
  return {{type, "inside"}, {type, "extra"}, {type, "bonus"}};
}

struct Clause {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

Clause instantiate(const SyntheticSpec& spec, std::size_t intent, std::size_t tmpl,
                   Rng& rng) {
  static const std::vector<std::vector<std::string>> openers = {{}, {"please"}};
  static const std::vector<std::vector<std::string>> closers = {{"now"}, {}};
  Clause c;
  auto literal = [&](const std::string& w) {
    c.tokens.push_back(w);
    c.tags.push_back("O");
  };
  auto emit_slot = [&](std::size_t local_type) {
    const std::string type = slot_type(intent * spec.slot_types_per_intent + local_type);
    const auto values = lexicon(type);
    const auto& value = values[rng.index(values.size())];
    for (std::size_t w = 0; w < value.size(); ++w) {
      c.tokens.push_back(value[w]);
      c.tags.push_back((w == 0 ? "B-" : "I-") + type);
    }
  };

  for (const auto& w : openers[tmpl % openers.size()]) literal(w);
  literal(intent_keyword(intent));
  emit_slot(tmpl % spec.slot_types_per_intent);
  if (spec.slot_types_per_intent > 1 && tmpl % 2 == 1) {
    literal("at");
    emit_slot((tmpl + 1) % spec.slot_types_per_intent);
  }
  for (const auto& w : closers[tmpl % closers.size()]) literal(w);
  return c;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticCorpus corpus;

  std::vector<std::size_t> intent_ids(spec.num_intents);
  for (std::size_t i = 0; i < spec.num_intents; ++i) intent_ids[i] = i;

  for (std::size_t s = 0; s < spec.num_samples; ++s) {
    const std::size_t count = (s % spec.max_intents) + 1;
    std::vector<std::size_t> chosen = intent_ids;
    rng.shuffle(chosen);
    chosen.resize(count);

    Sample sample;
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      if (k > 0) {
        sample.tokens.push_back("and");
        sample.slots.push_back("O");
      }
      Clause c = instantiate(spec, chosen[k], rng.index(spec.templates_per_intent), rng);
      sample.tokens.insert(sample.tokens.end(), c.tokens.begin(), c.tokens.end());
      sample.slots.insert(sample.slots.end(), c.tags.begin(), c.tags.end());
      sample.intents.push_back(intent_name(chosen[k]));
    }
    corpus.samples.push_back(std::move(sample));
  }

  std::string& m = corpus.manifest;
  m += "synthetic corpus manifest\n";
  m += "seed = " + std::to_string(spec.seed) + "\n";
  m += "samples = " + std::to_string(spec.num_samples) + "\n";
  m += "intents = " + std::to_string(spec.num_intents) + " (up to " +
       std::to_string(spec.max_intents) + " per utterance, count cycles with sample index)\n";
  m += "templates per intent = " + std::to_string(spec.templates_per_intent) + "\n";
  for (std::size_t i = 0; i < spec.num_intents; ++i) {
    m += "intent " + intent_name(i) + ": keyword '" + intent_keyword(i) + "', slots [";
    for (std::size_t j = 0; j < spec.slot_types_per_intent; ++j) {
      if (j > 0) m += ", ";
      m += slot_type(i * spec.slot_types_per_intent + j);
    }
    m += "]\n";
  }
  for (std::size_t i = 0; i < spec.num_intents * spec.slot_types_per_intent; ++i) {
    const std::string type = slot_type(i);
    m += "slot " + type + ": values [";
    const auto values = lexicon(type);
    for (std::size_t v = 0; v < values.size(); ++v) {
      if (v > 0) m += ", ";
      m += join(values[v], " ");
    }
    m += "]\n";
  }
  return corpus;
}

}  // namespace dgif
