#include "dgif.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dgif/config.hpp"
#include "dgif/data.hpp"
#include "dgif/error.hpp"
#include "dgif/label_space.hpp"
#include "dgif/model.hpp"
#include "dgif/training.hpp"
#include "dgif/util.hpp"

// Opaque handle definitions; each wraps exactly one core object.
struct dgif_config {
  dgif::TrainConfig value;
};

struct dgif_corpus {
  std::vector<dgif::Sample> samples;
};

struct dgif_model {
  dgif::Model value;
};

namespace {

thread_local std::string g_last_error = "no error";

dgif_status fail(dgif_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

dgif_status fail_null(const char* what) {
  return fail(DGIF_ERR_CONTRACT, std::string(what) + " must not be null");
}

// Runs the body and funnels every exception into a status code so nothing
// ever propagates across the C boundary.
template <typename Fn>
dgif_status guarded(Fn&& body) {
  try {
    return body();
  } catch (const dgif::Error& e) {
    return fail(static_cast<dgif_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::exception& e) {
    return fail(DGIF_ERR_UNKNOWN, e.what());
  } catch (...) {
    return fail(DGIF_ERR_UNKNOWN, "unidentified failure");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Writes s into *out (when requested); reports failure on OOM.
dgif_status emit_string(const std::string& s, char** out) {
  if (out == nullptr) return fail_null("output pointer");
  *out = dup_string(s);
  if (*out == nullptr) return fail(DGIF_ERR_UNKNOWN, "out of memory");
  return DGIF_OK;
}

std::vector<std::string> split_utterance(const char* utterance) {
  if (utterance == nullptr) return {};
  return dgif::split_whitespace(utterance);
}

}  // namespace

extern "C" {

const char* dgif_last_error(void) { return g_last_error.c_str(); }

void dgif_string_free(char* s) { std::free(s); }

/* --- configuration ------------------------------------------------- */

dgif_status dgif_config_create(dgif_config** out) {
  if (out == nullptr) return fail_null("out");
  return guarded([&] {
    *out = new dgif_config{};
    return DGIF_OK;
  });
}

dgif_status dgif_config_load(const char* path, dgif_config** out) {
  if (path == nullptr) return fail_null("path");
  if (out == nullptr) return fail_null("out");
  return guarded([&] {
    auto handle = std::make_unique<dgif_config>();
    handle->value = dgif::load_config(path);
    *out = handle.release();
    return DGIF_OK;
  });
}

dgif_status dgif_config_set(dgif_config* config, const char* key,
                            const char* value) {
  if (config == nullptr) return fail_null("config");
  if (key == nullptr) return fail_null("key");
  if (value == nullptr) return fail_null("value");
  return guarded([&] {
    dgif::set_config_field(config->value, key, value);
    return DGIF_OK;
  });
}

dgif_status dgif_config_serialize(const dgif_config* config, char** out_text) {
  if (config == nullptr) return fail_null("config");
  return guarded(
      [&] { return emit_string(dgif::serialize_config(config->value), out_text); });
}

void dgif_config_free(dgif_config* config) { delete config; }

/* --- corpora ------------------------------------------------------- */

dgif_status dgif_corpus_load(const char* path, dgif_corpus** out) {
  if (path == nullptr) return fail_null("path");
  if (out == nullptr) return fail_null("out");
  return guarded([&] {
    auto handle = std::make_unique<dgif_corpus>();
    handle->samples = dgif::parse_corpus(path);
    *out = handle.release();
    return DGIF_OK;
  });
}

dgif_status dgif_corpus_parse(const char* text, dgif_corpus** out) {
  if (text == nullptr) return fail_null("text");
  if (out == nullptr) return fail_null("out");
  return guarded([&] {
    auto handle = std::make_unique<dgif_corpus>();
    handle->samples = dgif::parse_corpus_text(text);
    *out = handle.release();
    return DGIF_OK;
  });
}

dgif_status dgif_corpus_serialize(const dgif_corpus* corpus, char** out_text) {
  if (corpus == nullptr) return fail_null("corpus");
  return guarded(
      [&] { return emit_string(dgif::serialize_corpus(corpus->samples), out_text); });
}

size_t dgif_corpus_size(const dgif_corpus* corpus) {
  return corpus == nullptr ? 0 : corpus->samples.size();
}

dgif_status dgif_corpus_generate(size_t num_intents,
                                 size_t slot_types_per_intent,
                                 size_t templates_per_intent,
                                 size_t num_samples, size_t max_intents,
                                 uint64_t seed, dgif_corpus** out,
                                 char** out_manifest) {
  if (out == nullptr) return fail_null("out");
  return guarded([&] {
    dgif::SyntheticSpec spec;
    spec.num_intents = num_intents;
    spec.slot_types_per_intent = slot_types_per_intent;
    spec.templates_per_intent = templates_per_intent;
    spec.num_samples = num_samples;
    spec.max_intents = max_intents;
    spec.seed = seed;
    dgif::SyntheticCorpus corpus = dgif::generate_synthetic(spec);
    if (out_manifest != nullptr) {
      const dgif_status rc = emit_string(corpus.manifest, out_manifest);
      if (rc != DGIF_OK) return rc;
    }
    auto handle = std::make_unique<dgif_corpus>();
    handle->samples = std::move(corpus.samples);
    *out = handle.release();
    return DGIF_OK;
  });
}

dgif_status dgif_corpus_split(const dgif_corpus* corpus, size_t every_kth,
                              dgif_corpus** out_train, dgif_corpus** out_val) {
  if (corpus == nullptr) return fail_null("corpus");
  if (out_train == nullptr) return fail_null("out_train");
  if (out_val == nullptr) return fail_null("out_val");
  if (every_kth < 2) {
    return fail(DGIF_ERR_CONTRACT, "corpus split wants every_kth >= 2");
  }
  return guarded([&] {
    auto train = std::make_unique<dgif_corpus>();
    auto val = std::make_unique<dgif_corpus>();
    for (size_t i = 0; i < corpus->samples.size(); ++i) {
      ((i + 1) % every_kth == 0 ? val : train)
          ->samples.push_back(corpus->samples[i]);
    }
    *out_train = train.release();
    *out_val = val.release();
    return DGIF_OK;
  });
}

void dgif_corpus_free(dgif_corpus* corpus) { delete corpus; }

/* --- training and inference ---------------------------------------- */

dgif_status dgif_train(const dgif_config* config, const dgif_corpus* train_set,
                       const dgif_corpus* val_set, dgif_epoch_fn on_epoch,
                       void* user, dgif_model** out_model) {
  if (config == nullptr) return fail_null("config");
  if (train_set == nullptr) return fail_null("train_set");
  if (out_model == nullptr) return fail_null("out_model");
  return guarded([&] {
    dgif::CorpusTables tables = dgif::build_tables(train_set->samples);
    const dgif::VerbalizerOverrides no_overrides;
    dgif::LabelSet intents = dgif::LabelSet::build(
        dgif::Task::intent, tables.intent_names, no_overrides);
    dgif::LabelSet slots =
        dgif::LabelSet::build(dgif::Task::slot, tables.slot_names, no_overrides);

    auto handle = std::make_unique<dgif_model>();
    handle->value =
        dgif::build_model(config->value, tables.vocab, intents, slots);

    const std::span<const dgif::Sample> val =
        val_set != nullptr ? std::span<const dgif::Sample>(val_set->samples)
                           : std::span<const dgif::Sample>();
    auto forward_epoch = [&](const dgif::EpochLog& log) {
      if (on_epoch != nullptr) on_epoch(dgif::format_epoch(log).c_str(), user);
    };
    try {
      dgif::train(handle->value, train_set->samples, val, forward_epoch);
    } catch (const dgif::DivergedError& e) {
      // Hand the last finite state back anyway; the caller may want to
      // save it for a post-mortem.
      *out_model = handle.release();
      return fail(DGIF_ERR_DIVERGED, e.what());
    }
    *out_model = handle.release();
    return DGIF_OK;
  });
}

dgif_status dgif_model_save(const dgif_model* model, const char* path) {
  if (model == nullptr) return fail_null("model");
  if (path == nullptr) return fail_null("path");
  return guarded([&] {
    dgif::save_checkpoint(model->value, path);
    return DGIF_OK;
  });
}

dgif_status dgif_model_load(const char* path, dgif_model** out) {
  if (path == nullptr) return fail_null("path");
  if (out == nullptr) return fail_null("out");
  return guarded([&] {
    auto handle = std::make_unique<dgif_model>();
    handle->value = dgif::load_checkpoint(path);
    *out = handle.release();
    return DGIF_OK;
  });
}

dgif_status dgif_evaluate(const dgif_model* model, const dgif_corpus* gold,
                          char** out_report) {
  if (model == nullptr) return fail_null("model");
  if (gold == nullptr) return fail_null("gold");
  return guarded([&] {
    const std::vector<dgif::Sample> predicted =
        dgif::predict_corpus(model->value, gold->samples);
    const dgif::EvalReport report = dgif::evaluate(gold->samples, predicted);
    return emit_string(dgif::format_report(report), out_report);
  });
}

dgif_status dgif_predict(const dgif_model* model, const dgif_corpus* input,
                         char** out_text) {
  if (model == nullptr) return fail_null("model");
  if (input == nullptr) return fail_null("input");
  return guarded([&] {
    const std::vector<dgif::Sample> predicted =
        dgif::predict_corpus(model->value, input->samples);
    return emit_string(dgif::serialize_corpus(predicted), out_text);
  });
}

dgif_status dgif_predict_line(const dgif_model* model, const char* utterance,
                              char** out_text) {
  if (model == nullptr) return fail_null("model");
  if (utterance == nullptr) return fail_null("utterance");
  return guarded([&] {
    const std::vector<std::string> tokens = split_utterance(utterance);
    if (tokens.empty()) {
      return fail(DGIF_ERR_CONTRACT, "empty utterance");
    }
    const dgif::Sample annotated = dgif::predict(model->value, tokens);
    const dgif::Sample one[] = {annotated};
    return emit_string(dgif::serialize_corpus(one), out_text);
  });
}

dgif_status dgif_inspect(const dgif_model* model, const char* utterance,
                         char** out_csv) {
  if (model == nullptr) return fail_null("model");
  if (utterance == nullptr) return fail_null("utterance");
  return guarded([&] {
    const std::vector<std::string> tokens = split_utterance(utterance);
    return emit_string(dgif::inspect_csv(model->value, tokens), out_csv);
  });
}

void dgif_model_free(dgif_model* model) { delete model; }

}  // extern "C"
