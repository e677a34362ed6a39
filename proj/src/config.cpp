#include "dgif/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "dgif/error.hpp"
#include "dgif/util.hpp"

namespace dgif {

namespace {

// "%.12g" is fine for logs but can lose bits; configs must round-trip.
std::string fmt_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& key, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw ParseError("config: bad numeric value for '" + key + "'", line);
  }
  return v;
}

std::uint64_t parse_uint(const std::string& s, const std::string& key,
                         std::size_t line) {
  if (s.empty() || s[0] == '-') {
    throw ParseError("config: '" + key + "' wants a non-negative integer", line);
  }
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') {
    throw ParseError("config: '" + key + "' wants a non-negative integer", line);
  }
  return v;
}

bool parse_bool(const std::string& s, const std::string& key, std::size_t line) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ParseError("config: '" + key + "' wants true/false", line);
}

// One row per field keeps parse and serialize in lockstep: adding a field
// here is the whole job.
struct FieldSpec {
  const char* key;
  std::function<void(TrainConfig&, const std::string&, std::size_t)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define REAL_FIELD(name, ref)                                               \
  FieldSpec {                                                               \
    name,                                                                   \
        [](TrainConfig& c, const std::string& v, std::size_t ln) {          \
          c.ref = parse_double(v, name, ln);                                \
        },                                                                  \
        [](const TrainConfig& c) { return fmt_exact(c.ref); }               \
  }
#define UINT_FIELD(name, ref)                                               \
  FieldSpec {                                                               \
    name,                                                                   \
        [](TrainConfig& c, const std::string& v, std::size_t ln) {          \
          c.ref = static_cast<decltype(c.ref)>(parse_uint(v, name, ln));    \
        },                                                                  \
        [](const TrainConfig& c) { return std::to_string(c.ref); }          \
  }
#define BOOL_FIELD(name, ref)                                               \
  FieldSpec {                                                               \
    name,                                                                   \
        [](TrainConfig& c, const std::string& v, std::size_t ln) {          \
          c.ref = parse_bool(v, name, ln);                                  \
        },                                                                  \
        [](const TrainConfig& c) { return c.ref ? "true" : "false"; }       \
  }

const std::vector<FieldSpec>& fields() {
  static const std::vector<FieldSpec> table = {
      REAL_FIELD("alpha", alpha),
      REAL_FIELD("beta", beta),
      REAL_FIELD("gamma", gamma),
      REAL_FIELD("lambda", lambda),
      REAL_FIELD("lr", lr),
      REAL_FIELD("grad_clip", grad_clip),
      UINT_FIELD("batch_size", batch_size),
      UINT_FIELD("epochs", epochs),
      UINT_FIELD("seed", seed),
      BOOL_FIELD("disable_lar", disable_lar),
      BOOL_FIELD("disable_lsi", disable_lsi),
      BOOL_FIELD("disable_gil", disable_gil),
      BOOL_FIELD("teacher_forcing", teacher_forcing),
      REAL_FIELD("delta", delta),
      UINT_FIELD("window", window),
      UINT_FIELD("gat_layers", gat_layers),
      BOOL_FIELD("gat_sigmoid", gat_sigmoid),
      UINT_FIELD("max_count", max_count),
      REAL_FIELD("ridge", ridge),
      UINT_FIELD("hidden_dim", encoder.hidden_dim),
      UINT_FIELD("blocks", encoder.blocks),
      UINT_FIELD("heads", encoder.heads),
      UINT_FIELD("max_seq_len", encoder.max_seq_len),
      UINT_FIELD("pool_dim", encoder.pool_dim),
      REAL_FIELD("leaky_slope", encoder.leaky_slope),
  };
  return table;
}

#undef REAL_FIELD
#undef UINT_FIELD
#undef BOOL_FIELD

void apply_field(TrainConfig& config, const std::string& key,
                 const std::string& value, std::size_t line_no) {
  for (const FieldSpec& field : fields()) {
    if (key == field.key) {
      field.set(config, value, line_no);
      return;
    }
  }
  throw ParseError("config: unknown key '" + key + "'", line_no);
}

}  // namespace

void TrainConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0) {
    throw ContractError("alpha must lie in [0, 1]");
  }
  if (beta < 0.0 || gamma < 0.0 || lambda < 0.0) {
    throw ContractError("beta, gamma, and lambda must be non-negative");
  }
  if (lr <= 0.0) throw ContractError("lr must be positive");
  if (grad_clip < 0.0) throw ContractError("grad_clip must be non-negative");
  if (batch_size < 1) throw ContractError("batch_size must be at least 1");
  if (epochs < 1) throw ContractError("epochs must be at least 1");
  if (delta >= 1.0) {
    throw ContractError("delta must be below 1 (negative means auto)");
  }
  if (gat_layers < 1) throw ContractError("gat_layers must be at least 1");
  if (max_count < 1) throw ContractError("max_count must be at least 1");
  if (ridge < 0.0) throw ContractError("ridge must be non-negative");
  encoder.validate();
}

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig config;
  std::size_t line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config: expected key=value", line_no);
    }
    apply_field(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
                line_no);
  }
  return config;
}

TrainConfig load_config(const std::string& path) {
  return parse_config_text(read_file(path));
}

void set_config_field(TrainConfig& config, const std::string& key,
                      const std::string& value) {
  apply_field(config, trim(key), trim(value), 1);
}

std::string serialize_config(const TrainConfig& config) {
  std::string out;
  for (const FieldSpec& field : fields()) {
    out += field.key;
    out += '=';
    out += field.get(config);
    out += '\n';
  }
  return out;
}

}  // namespace dgif
