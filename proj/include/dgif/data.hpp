#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dgif/encoder.hpp"

namespace dgif {

/// One annotated utterance: word-tokenized text, an aligned BIO tag per
/// token, and the (unique, non-empty) set of intent names.
struct Sample {
  std::vector<std::string> tokens;
  std::vector<std::string> slots;
  std::vector<std::string> intents;

  bool operator==(const Sample&) const = default;
};

/// Corpus format: samples separated by blank lines; each sample is k lines
/// of "token<SPACE>tag" followed by one line of intent names joined by '#'.
std::vector<Sample> parse_corpus_text(const std::string& text);
std::vector<Sample> parse_corpus(const std::string& path);
std::string serialize_corpus(std::span<const Sample> samples);

/// Token vocabulary (first-occurrence order) plus lexicographically sorted
/// intent and slot label inventories.
struct CorpusTables {
  Vocab vocab;
  std::vector<std::string> intent_names;
  std::vector<std::string> slot_names;
};

CorpusTables build_tables(std::span<const Sample> samples);

/// Shape of a generated corpus. Every count must be >= 1 and utterances mix
/// at most three intents.
struct SyntheticSpec {
  std::size_t num_intents = 5;
  std::size_t slot_types_per_intent = 1;
  std::size_t templates_per_intent = 2;
  std::size_t num_samples = 200;
  std::size_t max_intents = 2;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticCorpus {
  std::vector<Sample> samples;
  std::string manifest;  // human-readable grammar description
};

/// Template-grammar generator: intent i always utters its keyword, slot
/// values come from small per-type lexicons (one- and two-word values, so
/// both B- and I- tags occur), and multi-intent utterances join clauses with
/// "and". Byte-deterministic for a given spec.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace dgif
