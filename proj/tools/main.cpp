// Command-line front end. Everything model-related goes through the C API in
// dgif.h; this file only does argument handling, file plumbing, and logging.
#include <CLI11.hpp>
#include <dgif.h>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace {

enum class LogLevel { error = 0, info = 1, debug = 2 };
LogLevel g_log_level = LogLevel::info;

void log_info(const std::string& message) {
  if (g_log_level >= LogLevel::info) {
    std::fprintf(stderr, "dgif: %s\n", message.c_str());
  }
}

void log_debug(const std::string& message) {
  if (g_log_level >= LogLevel::debug) {
    std::fprintf(stderr, "dgif: debug: %s\n", message.c_str());
  }
}

// Reports the most recent C API failure and yields the process exit code.
int fail(const std::string& context) {
  std::fprintf(stderr, "dgif: %s: %s\n", context.c_str(), dgif_last_error());
  return 1;
}

int fail_plain(const std::string& message) {
  std::fprintf(stderr, "dgif: %s\n", message.c_str());
  return 1;
}

struct ConfigDeleter { void operator()(dgif_config* p) const { dgif_config_free(p); } };
struct CorpusDeleter { void operator()(dgif_corpus* p) const { dgif_corpus_free(p); } };
struct ModelDeleter { void operator()(dgif_model* p) const { dgif_model_free(p); } };
struct StringDeleter { void operator()(char* p) const { dgif_string_free(p); } };

using ConfigPtr = std::unique_ptr<dgif_config, ConfigDeleter>;
using CorpusPtr = std::unique_ptr<dgif_corpus, CorpusDeleter>;
using ModelPtr = std::unique_ptr<dgif_model, ModelDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Stage-then-rename so readers never observe a half-written file.
bool write_file_atomic_cli(const std::string& path, const std::string& text) {
  const std::string staged = path + ".tmp";
  {
    std::ofstream out(staged, std::ios::binary | std::ios::trunc);
    if (!out.good()) return false;
    out << text;
    if (!out.good()) return false;
  }
  std::error_code ec;
  std::filesystem::rename(staged, path, ec);
  if (ec) {
    std::filesystem::remove(staged, ec);
    return false;
  }
  return true;
}

// Emits a result either to --out (atomically) or to stdout.
int deliver(const std::string& text, const std::string& out_path,
            const std::string& what) {
  if (out_path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return 0;
  }
  if (!write_file_atomic_cli(out_path, text)) {
    return fail_plain("cannot write " + out_path);
  }
  log_info(what + " written to " + out_path);
  return 0;
}

/* --- configuration assembly ----------------------------------------- */

// A config override captured from the command line, applied in flag order
// after the --config file (so flags win).
struct ConfigArgs {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_real_flag(CLI::App* cmd, ConfigArgs& args, const std::string& flag,
                   const std::string& key, const std::string& desc) {
  cmd->add_option_function<double>(
      flag, [&args, key](double v) { args.overrides.emplace_back(key, fmt17(v)); },
      desc);
}

void add_uint_flag(CLI::App* cmd, ConfigArgs& args, const std::string& flag,
                   const std::string& key, const std::string& desc) {
  cmd->add_option_function<std::uint64_t>(
      flag,
      [&args, key](std::uint64_t v) {
        args.overrides.emplace_back(key, std::to_string(v));
      },
      desc);
}

void add_bool_flag(CLI::App* cmd, ConfigArgs& args, const std::string& flag,
                   const std::string& key, const std::string& desc) {
  cmd->add_option_function<bool>(
      flag,
      [&args, key](bool v) {
        args.overrides.emplace_back(key, v ? "true" : "false");
      },
      desc);
}

void add_disable_flag(CLI::App* cmd, ConfigArgs& args, const std::string& flag,
                      const std::string& key, const std::string& desc) {
  cmd->add_flag_callback(
      flag, [&args, key] { args.overrides.emplace_back(key, "true"); }, desc);
}

// Registers every trainable hyperparameter override on a subcommand.
void add_training_flags(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config_path,
                  "key=value file with hyperparameters (flags override it)");
  add_uint_flag(cmd, args, "--seed", "seed", "RNG seed for init and shuffling");
  add_uint_flag(cmd, args, "--epochs", "epochs", "training epochs");
  add_real_flag(cmd, args, "--lr", "lr", "Adam learning rate");
  add_real_flag(cmd, args, "--alpha", "alpha",
                "weight of the intent objective (count gets 1-alpha)");
  add_real_flag(cmd, args, "--beta", "beta", "weight of the slot objective");
  add_real_flag(cmd, args, "--gamma", "gamma",
                "weight of the label-space regularizer");
  add_real_flag(cmd, args, "--lambda", "lambda",
                "margin inside the label-space regularizer");
  add_real_flag(cmd, args, "--delta", "delta",
                "relevance threshold for intent-token edges (negative: 1/n)");
  add_uint_flag(cmd, args, "--window", "window",
                "token-to-token edge window in the interaction graph");
  add_uint_flag(cmd, args, "--gat-layers", "gat_layers",
                "graph attention layers");
  add_bool_flag(cmd, args, "--teacher-forcing", "teacher_forcing",
                "feed gold intents to the interaction stage while training");
  add_disable_flag(cmd, args, "--disable-lar", "disable_lar",
                   "ablation: drop the label-space regularizer");
  add_disable_flag(cmd, args, "--disable-lsi", "disable_lsi",
                   "ablation: skip label-space injection of hidden states");
  add_disable_flag(cmd, args, "--disable-gil", "disable_gil",
                   "ablation: replace the interaction graph with plain attention");
}

// Builds the effective config: file (or defaults), then flag overrides.
int assemble_config(const ConfigArgs& args, ConfigPtr& out) {
  dgif_config* raw = nullptr;
  if (args.config_path.empty()) {
    if (dgif_config_create(&raw) != DGIF_OK) return fail("config");
  } else if (dgif_config_load(args.config_path.c_str(), &raw) != DGIF_OK) {
    return fail(args.config_path);
  }
  out.reset(raw);
  for (const auto& [key, value] : args.overrides) {
    if (dgif_config_set(out.get(), key.c_str(), value.c_str()) != DGIF_OK) {
      return fail("--" + key);
    }
  }
  if (g_log_level >= LogLevel::debug) {
    char* text = nullptr;
    if (dgif_config_serialize(out.get(), &text) == DGIF_OK) {
      log_debug("effective configuration:\n" + std::string(StringPtr(text).get()));
    }
  }
  return 0;
}

int load_corpus(const std::string& path, CorpusPtr& out) {
  dgif_corpus* raw = nullptr;
  if (dgif_corpus_load(path.c_str(), &raw) != DGIF_OK) return fail(path);
  out.reset(raw);
  return 0;
}

int load_model(const std::string& path, ModelPtr& out) {
  dgif_model* raw = nullptr;
  if (dgif_model_load(path.c_str(), &raw) != DGIF_OK) return fail(path);
  out.reset(raw);
  return 0;
}

/* --- subcommands ----------------------------------------------------- */

struct TrainArgs {
  ConfigArgs config;
  std::string train_path;
  std::string val_path;
  std::string checkpoint;
};

void print_epoch_line(const char* line, void* /*user*/) {
  if (g_log_level >= LogLevel::info) std::printf("%s\n", line);
}

int run_train(const TrainArgs& args) {
  ConfigPtr config;
  if (int rc = assemble_config(args.config, config)) return rc;

  CorpusPtr train_corpus;
  if (int rc = load_corpus(args.train_path, train_corpus)) return rc;

  CorpusPtr val_corpus;
  if (!args.val_path.empty()) {
    if (int rc = load_corpus(args.val_path, val_corpus)) return rc;
  } else {
    // No held-out file: every 5th utterance becomes the validation set.
    dgif_corpus* split_train = nullptr;
    dgif_corpus* split_val = nullptr;
    if (dgif_corpus_split(train_corpus.get(), 5, &split_train, &split_val) !=
        DGIF_OK) {
      return fail(args.train_path);
    }
    train_corpus.reset(split_train);
    val_corpus.reset(split_val);
    log_info("held out every 5th utterance for validation (" +
             std::to_string(dgif_corpus_size(split_val)) + " of " +
             std::to_string(dgif_corpus_size(split_train) +
                            dgif_corpus_size(split_val)) +
             ")");
  }
  log_debug("training on " + std::to_string(dgif_corpus_size(train_corpus.get())) +
            " utterances, validating on " +
            std::to_string(dgif_corpus_size(val_corpus.get())));

  dgif_model* raw_model = nullptr;
  const dgif_status rc =
      dgif_train(config.get(), train_corpus.get(), val_corpus.get(),
                 print_epoch_line, nullptr, &raw_model);
  ModelPtr model(raw_model);

  if (rc == DGIF_ERR_DIVERGED) {
    std::fprintf(stderr, "dgif: training diverged: %s\n", dgif_last_error());
    if (model != nullptr &&
        dgif_model_save(model.get(), args.checkpoint.c_str()) == DGIF_OK) {
      std::fprintf(stderr, "dgif: last finite parameters saved to %s\n",
                   args.checkpoint.c_str());
    }
    return 1;
  }
  if (rc != DGIF_OK) return fail("train");

  if (dgif_model_save(model.get(), args.checkpoint.c_str()) != DGIF_OK) {
    return fail(args.checkpoint);
  }
  log_info("checkpoint written to " + args.checkpoint);
  return 0;
}

struct EvalArgs {
  std::string gold_path;
  std::string checkpoint;
  std::string out_path;
};

int run_eval(const EvalArgs& args) {
  ModelPtr model;
  if (int rc = load_model(args.checkpoint, model)) return rc;
  CorpusPtr gold;
  if (int rc = load_corpus(args.gold_path, gold)) return rc;

  char* report = nullptr;
  if (dgif_evaluate(model.get(), gold.get(), &report) != DGIF_OK) {
    return fail(args.gold_path);
  }
  return deliver(StringPtr(report).get(), args.out_path, "report");
}

int run_predict(const EvalArgs& args) {
  ModelPtr model;
  if (int rc = load_model(args.checkpoint, model)) return rc;
  CorpusPtr input;
  if (int rc = load_corpus(args.gold_path, input)) return rc;

  char* text = nullptr;
  if (dgif_predict(model.get(), input.get(), &text) != DGIF_OK) {
    return fail(args.gold_path);
  }
  return deliver(StringPtr(text).get(), args.out_path, "predictions");
}

struct GenArgs {
  std::size_t num_intents = 5;
  std::size_t slot_types = 1;
  std::size_t templates = 2;
  std::size_t num_samples = 200;
  std::size_t max_intents = 2;
  std::uint64_t seed = 1;
  std::string out_path;
};

int run_gen_data(const GenArgs& args) {
  dgif_corpus* raw = nullptr;
  char* manifest = nullptr;
  if (dgif_corpus_generate(args.num_intents, args.slot_types, args.templates,
                           args.num_samples, args.max_intents, args.seed, &raw,
                           &manifest) != DGIF_OK) {
    return fail("gen-data");
  }
  CorpusPtr corpus(raw);
  StringPtr manifest_owner(manifest);

  char* text = nullptr;
  if (dgif_corpus_serialize(corpus.get(), &text) != DGIF_OK) {
    return fail("gen-data");
  }
  StringPtr text_owner(text);

  if (!write_file_atomic_cli(args.out_path, text_owner.get())) {
    return fail_plain("cannot write " + args.out_path);
  }
  const std::string manifest_path = args.out_path + ".manifest";
  if (!write_file_atomic_cli(manifest_path, manifest_owner.get())) {
    return fail_plain("cannot write " + manifest_path);
  }
  log_info("corpus (" + std::to_string(dgif_corpus_size(corpus.get())) +
           " utterances) written to " + args.out_path);
  log_info("manifest written to " + manifest_path);
  return 0;
}

struct InspectArgs {
  std::vector<std::string> words;
  std::string checkpoint;
  std::string out_path;
};

int run_inspect(const InspectArgs& args) {
  ModelPtr model;
  if (int rc = load_model(args.checkpoint, model)) return rc;

  std::string utterance;
  for (const std::string& w : args.words) {
    if (!utterance.empty()) utterance += ' ';
    utterance += w;
  }
  char* csv = nullptr;
  if (dgif_inspect(model.get(), utterance.c_str(), &csv) != DGIF_OK) {
    return fail("inspect");
  }
  return deliver(StringPtr(csv).get(), args.out_path, "matrices");
}

int parse_log_level() {
  const char* env = std::getenv("DGIF_LOG_LEVEL");
  if (env == nullptr || *env == '\0') return 0;
  const std::string value(env);
  if (value == "error") {
    g_log_level = LogLevel::error;
  } else if (value == "info") {
    g_log_level = LogLevel::info;
  } else if (value == "debug") {
    g_log_level = LogLevel::debug;
  } else {
    std::fprintf(stderr,
                 "dgif: DGIF_LOG_LEVEL must be error, info, or debug (got "
                 "'%s')\n",
                 env);
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (int rc = parse_log_level()) return rc;

  CLI::App app{"joint multi-intent detection and slot filling"};
  app.require_subcommand(1);
  int exit_code = 0;

  TrainArgs train_args;
  CLI::App* train_cmd =
      app.add_subcommand("train", "train a model and write a checkpoint");
  train_cmd->add_option("train-corpus", train_args.train_path, "training corpus file")
      ->required();
  train_cmd->add_option("val-corpus", train_args.val_path,
                        "held-out corpus (default: every 5th training utterance)");
  train_cmd->add_option("--checkpoint", train_args.checkpoint,
                        "where to write the trained model")
      ->required();
  add_training_flags(train_cmd, train_args.config);
  train_cmd->callback([&] { exit_code = run_train(train_args); });

  EvalArgs eval_args;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "score a checkpoint against gold annotations");
  eval_cmd->add_option("gold-corpus", eval_args.gold_path, "gold corpus file")
      ->required();
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "trained model")
      ->required();
  eval_cmd->add_option("--out", eval_args.out_path,
                       "write the report here instead of stdout");
  eval_cmd->callback([&] { exit_code = run_eval(eval_args); });

  EvalArgs predict_args;
  CLI::App* predict_cmd =
      app.add_subcommand("predict", "re-annotate a corpus with predictions");
  predict_cmd->add_option("input-corpus", predict_args.gold_path, "corpus file")
      ->required();
  predict_cmd->add_option("--checkpoint", predict_args.checkpoint, "trained model")
      ->required();
  predict_cmd->add_option("--out", predict_args.out_path,
                          "write predictions here instead of stdout");
  predict_cmd->callback([&] { exit_code = run_predict(predict_args); });

  GenArgs gen_args;
  CLI::App* gen_cmd =
      app.add_subcommand("gen-data", "write a synthetic corpus and its manifest");
  gen_cmd->add_option("--out", gen_args.out_path,
                      "corpus file to write (manifest goes beside it)")
      ->required();
  gen_cmd->add_option("--intents", gen_args.num_intents, "number of intents");
  gen_cmd->add_option("--slot-types", gen_args.slot_types,
                      "slot types per intent");
  gen_cmd->add_option("--templates", gen_args.templates,
                      "utterance templates per intent");
  gen_cmd->add_option("--samples", gen_args.num_samples, "utterances to generate");
  gen_cmd->add_option("--max-intents", gen_args.max_intents,
                      "most intents per utterance");
  gen_cmd->add_option("--seed", gen_args.seed, "generation seed");
  gen_cmd->callback([&] { exit_code = run_gen_data(gen_args); });

  InspectArgs inspect_args;
  CLI::App* inspect_cmd = app.add_subcommand(
      "inspect", "dump relevance and graph-attention matrices for an utterance");
  inspect_cmd
      ->add_option("utterance", inspect_args.words, "whitespace-separated tokens")
      ->required()
      ->expected(-1);
  inspect_cmd->add_option("--checkpoint", inspect_args.checkpoint, "trained model")
      ->required();
  inspect_cmd->add_option("--out", inspect_args.out_path,
                          "write the CSV here instead of stdout");
  inspect_cmd->callback([&] { exit_code = run_inspect(inspect_args); });

  CLI11_PARSE(app, argc, argv);
  return exit_code;
}
