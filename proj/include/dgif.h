#ifndef DGIF_H
#define DGIF_H

/* C interface to the joint multi-intent / slot-filling engine.
 *
 * Every fallible call returns a dgif_status; nonzero means failure and
 * dgif_last_error() holds a human-readable description (thread-local,
 * valid until the next failing call on the same thread). Output pointers
 * are written only on success, except where a function documents
 * otherwise. All char** results are heap strings the caller must release
 * with dgif_string_free().
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dgif_status {
  DGIF_OK = 0,
  DGIF_ERR_IO = 1,         /* file missing or unreadable/unwritable */
  DGIF_ERR_PARSE = 2,      /* malformed config, corpus, or label text */
  DGIF_ERR_DIMENSION = 3,  /* shape mismatch inside the numeric core */
  DGIF_ERR_SINGULAR = 4,   /* label Gram matrix not positive definite */
  DGIF_ERR_CONTRACT = 5,   /* invalid argument or call sequence */
  DGIF_ERR_DATA = 6,       /* well-formed input violating a data rule */
  DGIF_ERR_DEGENERATE = 7, /* numerically unusable input */
  DGIF_ERR_DIVERGED = 8,   /* training hit a non-finite loss/gradient */
  DGIF_ERR_TRUNCATED = 9,  /* input ended mid-record */
  DGIF_ERR_UNKNOWN = 100,
} dgif_status;

typedef struct dgif_config dgif_config; /* hyperparameter bundle */
typedef struct dgif_corpus dgif_corpus; /* list of annotated utterances */
typedef struct dgif_model dgif_model;   /* trained parameter bundle */

/* Message for the most recent failure on this thread; never NULL. */
const char* dgif_last_error(void);

void dgif_string_free(char* s);

/* --- configuration ------------------------------------------------- */

/* Fresh config holding the built-in defaults. */
dgif_status dgif_config_create(dgif_config** out);

/* Parses a key=value file ('#' comments, blank lines ok). */
dgif_status dgif_config_load(const char* path, dgif_config** out);

/* Overrides a single field; key and value follow the file format. */
dgif_status dgif_config_set(dgif_config* config, const char* key,
                            const char* value);

/* Full key=value rendering; parsing it back reproduces every field. */
dgif_status dgif_config_serialize(const dgif_config* config, char** out_text);

void dgif_config_free(dgif_config* config);

/* --- corpora ------------------------------------------------------- */

/* Corpus text: one block per utterance, "token tag" lines followed by one
 * line of intent names joined by '#', blocks separated by blank lines.
 * dgif_corpus_load reads such a file. */
dgif_status dgif_corpus_load(const char* path, dgif_corpus** out);
dgif_status dgif_corpus_parse(const char* text, dgif_corpus** out);
dgif_status dgif_corpus_serialize(const dgif_corpus* corpus, char** out_text);
size_t dgif_corpus_size(const dgif_corpus* corpus);

/* Synthetic corpus drawn from a generated template grammar; identical
 * arguments always produce identical text. out_manifest (optional, may
 * be NULL) receives a description of the generated inventory. */
dgif_status dgif_corpus_generate(size_t num_intents,
                                 size_t slot_types_per_intent,
                                 size_t templates_per_intent,
                                 size_t num_samples, size_t max_intents,
                                 uint64_t seed, dgif_corpus** out,
                                 char** out_manifest);

/* Hold-out split: every k-th utterance (k >= 2) moves to the validation
 * corpus, the rest keep their order in the training corpus. */
dgif_status dgif_corpus_split(const dgif_corpus* corpus, size_t every_kth,
                              dgif_corpus** out_train, dgif_corpus** out_val);

void dgif_corpus_free(dgif_corpus* corpus);

/* --- training and inference ---------------------------------------- */

/* Called once per epoch with a finished log line (no trailing newline). */
typedef void (*dgif_epoch_fn)(const char* line, void* user);

/* Trains a fresh model on train_set; token and label inventories come
 * from train_set alone. val_set may be NULL (no held-out metrics; the
 * final epoch's parameters are kept). on_epoch may be NULL.
 *
 * On DGIF_ERR_DIVERGED, *out_model still receives the model with its
 * last finite parameter state so the caller can save it for inspection. */
dgif_status dgif_train(const dgif_config* config, const dgif_corpus* train_set,
                       const dgif_corpus* val_set, dgif_epoch_fn on_epoch,
                       void* user, dgif_model** out_model);

dgif_status dgif_model_save(const dgif_model* model, const char* path);
dgif_status dgif_model_load(const char* path, dgif_model** out);

/* Span-level and utterance-level metrics of the model's predictions
 * against the gold annotations, rendered as a report table. */
dgif_status dgif_evaluate(const dgif_model* model, const dgif_corpus* gold,
                          char** out_report);

/* Re-annotates every utterance with predicted tags and intents; the
 * result uses the corpus text format. */
dgif_status dgif_predict(const dgif_model* model, const dgif_corpus* input,
                         char** out_text);

/* Annotates one whitespace-separated utterance. */
dgif_status dgif_predict_line(const dgif_model* model, const char* utterance,
                              char** out_text);

/* Token-to-intent relevance and per-layer graph-attention coefficients
 * for one whitespace-separated utterance, as CSV. Fails with
 * DGIF_ERR_CONTRACT if the model was configured without the graph. */
dgif_status dgif_inspect(const dgif_model* model, const char* utterance,
                         char** out_csv);

void dgif_model_free(dgif_model* model);

#ifdef __cplusplus
}
#endif

#endif /* DGIF_H */
