// Exercises the extern-C surface the way a foreign-language binding would:
// everything goes through dgif.h, never the C++ headers.
#include <doctest.h>

#include <dgif.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace {

// Takes ownership of a C string result and frees it on scope exit.
std::string take(char* s) {
  REQUIRE(s != nullptr);
  std::string out(s);
  dgif_string_free(s);
  return out;
}

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "dgif_capi_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out << text;
}

void collect_line(const char* line, void* user) {
  static_cast<std::vector<std::string>*>(user)->push_back(line);
}

constexpr const char* kTinyCorpus =
    "turn O\noff O\nthe O\nlight B-device\nSwitchOff\n"
    "\n"
    "play O\nsongalpha B-song\nPlayMusic\n";

// Small-but-real hyperparameters so the training tests stay fast.
dgif_config* tiny_config() {
  dgif_config* cfg = nullptr;
  REQUIRE(dgif_config_create(&cfg) == DGIF_OK);
  const char* pairs[][2] = {
      {"hidden_dim", "8"}, {"heads", "2"},      {"blocks", "1"},
      {"pool_dim", "4"},   {"max_seq_len", "16"}, {"max_count", "2"},
      {"gat_layers", "1"}, {"batch_size", "4"},   {"epochs", "2"},
      {"lr", "0.01"},      {"seed", "11"},
  };
  for (const auto& kv : pairs) {
    REQUIRE(dgif_config_set(cfg, kv[0], kv[1]) == DGIF_OK);
  }
  return cfg;
}

}  // namespace

TEST_SUITE("capi") {

TEST_CASE("config handles: defaults, overrides, file loading") {
  dgif_config* cfg = nullptr;
  REQUIRE(dgif_config_create(&cfg) == DGIF_OK);

  char* text = nullptr;
  REQUIRE(dgif_config_serialize(cfg, &text) == DGIF_OK);
  const std::string defaults = take(text);
  CHECK(defaults.find("batch_size=32\n") != std::string::npos);
  CHECK(defaults.find("teacher_forcing=true\n") != std::string::npos);

  REQUIRE(dgif_config_set(cfg, "lr", "0.5") == DGIF_OK);
  REQUIRE(dgif_config_serialize(cfg, &text) == DGIF_OK);
  CHECK(take(text).find("lr=0.5\n") != std::string::npos);

  CHECK(dgif_config_set(cfg, "mystery", "1") == DGIF_ERR_PARSE);
  CHECK(std::string(dgif_last_error()).find("unknown key") != std::string::npos);
  CHECK(dgif_config_set(cfg, "lr", "fast") == DGIF_ERR_PARSE);

  // A round trip through a file reproduces the serialized form.
  const auto path = temp_dir() / "roundtrip.cfg";
  REQUIRE(dgif_config_serialize(cfg, &text) == DGIF_OK);
  const std::string serialized = take(text);
  write_text(path, serialized);
  dgif_config* reloaded = nullptr;
  REQUIRE(dgif_config_load(path.c_str(), &reloaded) == DGIF_OK);
  REQUIRE(dgif_config_serialize(reloaded, &text) == DGIF_OK);
  CHECK(take(text) == serialized);

  CHECK(dgif_config_load("/no/such/file.cfg", &reloaded) == DGIF_ERR_IO);

  dgif_config_free(reloaded);
  dgif_config_free(cfg);
}

TEST_CASE("corpus handles: parse, serialize, load, errors") {
  dgif_corpus* corpus = nullptr;
  REQUIRE(dgif_corpus_parse(kTinyCorpus, &corpus) == DGIF_OK);
  CHECK(dgif_corpus_size(corpus) == 2);

  char* text = nullptr;
  REQUIRE(dgif_corpus_serialize(corpus, &text) == DGIF_OK);
  const std::string serialized = take(text);

  dgif_corpus* again = nullptr;
  REQUIRE(dgif_corpus_parse(serialized.c_str(), &again) == DGIF_OK);
  REQUIRE(dgif_corpus_serialize(again, &text) == DGIF_OK);
  CHECK(take(text) == serialized);
  dgif_corpus_free(again);

  const auto path = temp_dir() / "tiny.corpus";
  write_text(path, kTinyCorpus);
  dgif_corpus* loaded = nullptr;
  REQUIRE(dgif_corpus_load(path.c_str(), &loaded) == DGIF_OK);
  CHECK(dgif_corpus_size(loaded) == 2);
  dgif_corpus_free(loaded);

  CHECK(dgif_corpus_load("/no/such/file.corpus", &loaded) == DGIF_ERR_IO);
  CHECK(dgif_corpus_parse("lonely_token_without_tag\n", &loaded) ==
        DGIF_ERR_PARSE);

  dgif_corpus_free(corpus);
}

TEST_CASE("synthetic generation is deterministic; splits partition") {
  dgif_corpus* a = nullptr;
  dgif_corpus* b = nullptr;
  char* manifest_a = nullptr;
  char* manifest_b = nullptr;
  REQUIRE(dgif_corpus_generate(3, 1, 2, 10, 2, 42, &a, &manifest_a) == DGIF_OK);
  REQUIRE(dgif_corpus_generate(3, 1, 2, 10, 2, 42, &b, &manifest_b) == DGIF_OK);
  CHECK(dgif_corpus_size(a) == 10);

  char* text = nullptr;
  REQUIRE(dgif_corpus_serialize(a, &text) == DGIF_OK);
  const std::string text_a = take(text);
  REQUIRE(dgif_corpus_serialize(b, &text) == DGIF_OK);
  CHECK(take(text) == text_a);
  CHECK(take(manifest_a) == take(manifest_b));

  dgif_corpus* train = nullptr;
  dgif_corpus* val = nullptr;
  REQUIRE(dgif_corpus_split(a, 5, &train, &val) == DGIF_OK);
  CHECK(dgif_corpus_size(train) == 8);
  CHECK(dgif_corpus_size(val) == 2);
  CHECK(dgif_corpus_split(a, 1, &train, &val) == DGIF_ERR_CONTRACT);

  dgif_corpus_free(train);
  dgif_corpus_free(val);
  dgif_corpus_free(a);
  dgif_corpus_free(b);
}

TEST_CASE("train / evaluate / predict / save / load / inspect round trip") {
  dgif_config* cfg = tiny_config();
  dgif_corpus* corpus = nullptr;
  REQUIRE(dgif_corpus_generate(3, 1, 2, 24, 2, 9, &corpus, nullptr) == DGIF_OK);
  dgif_corpus* train = nullptr;
  dgif_corpus* val = nullptr;
  REQUIRE(dgif_corpus_split(corpus, 4, &train, &val) == DGIF_OK);

  std::vector<std::string> lines;
  dgif_model* model = nullptr;
  REQUIRE(dgif_train(cfg, train, val, collect_line, &lines, &model) == DGIF_OK);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].rfind("epoch=1 ", 0) == 0);
  CHECK(lines[1].find("val_overall_acc=") != std::string::npos);

  char* out = nullptr;
  REQUIRE(dgif_evaluate(model, val, &out) == DGIF_OK);
  const std::string report = take(out);
  CHECK(report.find("slot_f1=") != std::string::npos);
  CHECK(report.find("intent_acc=") != std::string::npos);

  REQUIRE(dgif_predict(model, val, &out) == DGIF_OK);
  const std::string dump = take(out);
  dgif_corpus* parsed = nullptr;
  REQUIRE(dgif_corpus_parse(dump.c_str(), &parsed) == DGIF_OK);
  CHECK(dgif_corpus_size(parsed) == dgif_corpus_size(val));
  dgif_corpus_free(parsed);

  REQUIRE(dgif_predict_line(model, "hello world", &out) == DGIF_OK);
  const std::string line = take(out);
  CHECK(line.rfind("hello ", 0) == 0);  // token kept, some tag appended

  REQUIRE(dgif_inspect(model, "hello world again", &out) == DGIF_OK);
  const std::string csv = take(out);
  CHECK(csv.rfind("# utterance: hello world again", 0) == 0);
  CHECK(csv.find("matrix,row,col,value\n") != std::string::npos);
  CHECK(csv.find("relevance,0,0,") != std::string::npos);
  CHECK(csv.find("attention0,") != std::string::npos);

  // Persistence: the reloaded model scores the validation set identically.
  const auto path = (temp_dir() / "capi.ckpt").string();
  REQUIRE(dgif_model_save(model, path.c_str()) == DGIF_OK);
  dgif_model* reloaded = nullptr;
  REQUIRE(dgif_model_load(path.c_str(), &reloaded) == DGIF_OK);
  REQUIRE(dgif_evaluate(reloaded, val, &out) == DGIF_OK);
  CHECK(take(out) == report);

  CHECK(dgif_model_load("/no/such/model.ckpt", &reloaded) == DGIF_ERR_IO);

  dgif_model_free(reloaded);
  dgif_model_free(model);
  dgif_corpus_free(train);
  dgif_corpus_free(val);
  dgif_corpus_free(corpus);
  dgif_config_free(cfg);
}

TEST_CASE("blown-up training surfaces as a status, not a crash") {
  // An absurd learning rate wrecks the parameters after one step. Depending
  // on where the overflow lands first, the next step reports either a
  // non-finite loss/gradient or a Gram matrix that stopped being positive
  // definite; both must cross the C boundary as clean status codes.
  dgif_config* cfg = tiny_config();
  REQUIRE(dgif_config_set(cfg, "lr", "1e30") == DGIF_OK);
  REQUIRE(dgif_config_set(cfg, "epochs", "3") == DGIF_OK);
  dgif_corpus* corpus = nullptr;
  REQUIRE(dgif_corpus_generate(3, 1, 2, 12, 2, 9, &corpus, nullptr) == DGIF_OK);

  dgif_model* model = nullptr;
  const dgif_status rc =
      dgif_train(cfg, corpus, nullptr, nullptr, nullptr, &model);
  REQUIRE((rc == DGIF_ERR_DIVERGED || rc == DGIF_ERR_SINGULAR));
  CHECK(std::string(dgif_last_error()).size() > 0);

  if (rc == DGIF_ERR_DIVERGED) {
    // Documented: on divergence the last finite state is still handed back
    // so it can be saved for a post-mortem.
    REQUIRE(model != nullptr);
    const auto path = (temp_dir() / "diverged.ckpt").string();
    CHECK(dgif_model_save(model, path.c_str()) == DGIF_OK);
    dgif_model_free(model);
  } else {
    CHECK(model == nullptr);
  }

  dgif_corpus_free(corpus);
  dgif_config_free(cfg);
}

TEST_CASE("null and invalid arguments become status codes, not crashes") {
  CHECK(dgif_config_create(nullptr) == DGIF_ERR_CONTRACT);
  CHECK(std::string(dgif_last_error()).find("null") != std::string::npos);
  CHECK(dgif_corpus_parse(nullptr, nullptr) == DGIF_ERR_CONTRACT);
  CHECK(dgif_train(nullptr, nullptr, nullptr, nullptr, nullptr, nullptr) ==
        DGIF_ERR_CONTRACT);
  CHECK(dgif_corpus_size(nullptr) == 0);

  // Config invariants are enforced when training starts.
  dgif_config* cfg = nullptr;
  REQUIRE(dgif_config_create(&cfg) == DGIF_OK);
  REQUIRE(dgif_config_set(cfg, "alpha", "2.0") == DGIF_OK);  // stored as-is
  dgif_corpus* corpus = nullptr;
  REQUIRE(dgif_corpus_parse(kTinyCorpus, &corpus) == DGIF_OK);
  dgif_model* model = nullptr;
  CHECK(dgif_train(cfg, corpus, nullptr, nullptr, nullptr, &model) ==
        DGIF_ERR_CONTRACT);
  CHECK(std::string(dgif_last_error()).find("alpha") != std::string::npos);

  dgif_corpus_free(corpus);
  dgif_config_free(cfg);
}

}  // TEST_SUITE
