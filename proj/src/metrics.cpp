#include "dgif/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "dgif/error.hpp"
#include "dgif/util.hpp"

namespace dgif {

std::vector<Span> extract_spans(std::span<const std::string> tags) {
  std::vector<Span> spans;
  Span open;
  bool active = false;
  auto close = [&](std::size_t end) {
    if (active) {
      open.end = end;
      spans.push_back(open);
      active = false;
    }
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& tag = tags[i];
    if (tag == "O") {
      close(i);
      continue;
    }
    const std::string type = tag.substr(2);
    if (tag[0] == 'B' || !active || open.type != type) {
      close(i);
      open = {type, i, i};
      active = true;
    }
    // else: I-<type> continuing the active span
  }
  close(tags.size());
  return spans;
}

double SpanCounts::precision() const {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double SpanCounts::recall() const {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double SpanCounts::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

EvalReport evaluate(std::span<const Sample> gold, std::span<const Sample> pred) {
  if (gold.size() != pred.size()) {
    throw ContractError("evaluate: " + std::to_string(gold.size()) + " gold vs " +
                        std::to_string(pred.size()) + " predicted utterances");
  }
  EvalReport report;
  report.utterances = gold.size();
  std::map<std::string, SpanCounts> per_class;
  std::size_t intent_hits = 0, overall_hits = 0;

  for (std::size_t u = 0; u < gold.size(); ++u) {
    const Sample& g = gold[u];
    const Sample& p = pred[u];
    if (g.slots.size() != p.slots.size()) {
      throw ContractError("evaluate: utterance " + std::to_string(u) +
                          " has misaligned tag sequences (" +
                          std::to_string(g.slots.size()) + " vs " +
                          std::to_string(p.slots.size()) + ")");
    }
    const auto gold_spans = extract_spans(g.slots);
    const auto pred_spans = extract_spans(p.slots);
    const std::set<Span> gold_set(gold_spans.begin(), gold_spans.end());
    const std::set<Span> pred_set(pred_spans.begin(), pred_spans.end());
    for (const Span& s : gold_spans) {
      if (pred_set.count(s)) {
        ++per_class[s.type].tp;
      } else {
        ++per_class[s.type].fn;
      }
    }
    for (const Span& s : pred_spans) {
      if (!gold_set.count(s)) ++per_class[s.type].fp;
    }

    const std::set<std::string> gi(g.intents.begin(), g.intents.end());
    const std::set<std::string> pi(p.intents.begin(), p.intents.end());
    const bool intents_ok = gi == pi;
    const bool slots_ok = g.slots == p.slots;
    if (intents_ok) ++intent_hits;
    if (intents_ok && slots_ok) ++overall_hits;
  }

  for (const auto& [type, counts] : per_class) {
    report.per_class.emplace_back(type, counts);
    report.spans.tp += counts.tp;
    report.spans.fp += counts.fp;
    report.spans.fn += counts.fn;
  }
  report.slot_f1 = report.spans.f1();
  const double total = static_cast<double>(gold.size());
  report.intent_acc = gold.empty() ? 0.0 : static_cast<double>(intent_hits) / total;
  report.overall_acc = gold.empty() ? 0.0 : static_cast<double>(overall_hits) / total;
  return report;
}

std::string format_report(const EvalReport& report) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-18s %9s %9s %9s %6s %6s %6s\n", "class", "precision",
                "recall", "f1", "tp", "fp", "fn");
  out += buf;
  auto row = [&](const std::string& name, const SpanCounts& c) {
    std::snprintf(buf, sizeof buf, "%-18s %9.4f %9.4f %9.4f %6zu %6zu %6zu\n", name.c_str(),
                  c.precision(), c.recall(), c.f1(), c.tp, c.fp, c.fn);
    out += buf;
  };
  for (const auto& [type, counts] : report.per_class) row(type, counts);
  row("(all spans)", report.spans);
  std::snprintf(buf, sizeof buf,
                "\nutterances %zu   slot f1 %.4f   intent acc %.4f   overall acc %.4f\n",
                report.utterances, report.slot_f1, report.intent_acc, report.overall_acc);
  out += buf;

  out += "\n";
  out += "slot_f1=" + fmt_double(report.slot_f1) + "\n";
  out += "intent_acc=" + fmt_double(report.intent_acc) + "\n";
  out += "overall_acc=" + fmt_double(report.overall_acc) + "\n";
  out += "span_tp=" + std::to_string(report.spans.tp) + "\n";
  out += "span_fp=" + std::to_string(report.spans.fp) + "\n";
  out += "span_fn=" + std::to_string(report.spans.fn) + "\n";
  return out;
}

}  // namespace dgif
