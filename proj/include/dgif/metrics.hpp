#pragma once

#include <compare>
#include <span>
#include <string>
#include <vector>

#include "dgif/data.hpp"

namespace dgif {

/// Half-open token range [begin, end) carrying one slot type.
struct Span {
  std::string type;
  std::size_t begin = 0;
  std::size_t end = 0;

  auto operator<=>(const Span&) const = default;
};

/// Lenient BIO span extraction: B-x opens, matching I-x extends, and an
/// orphan I-x (after O, a different type, or at the start) opens a new span.
std::vector<Span> extract_spans(std::span<const std::string> tags);

struct SpanCounts {
  std::size_t tp = 0, fp = 0, fn = 0;

  double precision() const;
  double recall() const;
  double f1() const;
};

struct EvalReport {
  double slot_f1 = 0.0;
  double intent_acc = 0.0;
  double overall_acc = 0.0;
  SpanCounts spans;  // micro-average over all classes
  std::vector<std::pair<std::string, SpanCounts>> per_class;  // sorted by type
  std::size_t utterances = 0;
};

/// Scores predictions against gold. Both sides use the corpus Sample shape;
/// sequences must align in count and per-utterance length. Intent accuracy
/// is exact set equality; overall accuracy additionally requires the whole
/// tag sequence to match.
EvalReport evaluate(std::span<const Sample> gold, std::span<const Sample> pred);

/// Aligned human-readable table followed by a machine-readable key=value
/// block (one metric per line).
std::string format_report(const EvalReport& report);

}  // namespace dgif
