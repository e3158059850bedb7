#include "setdet/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace setdet {

namespace {

struct Field {
    const char* name;
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int parse_int(const std::string& s) {
    size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters in integer: " + s);
    return v;
}

double parse_double(const std::string& s) {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters in number: " + s);
    return v;
}

uint64_t parse_u64(const std::string& s) {
    size_t pos = 0;
    const uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters in seed: " + s);
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("expected true/false: " + s);
}

#define INT_FIELD(NAME) \
    Field{#NAME, [](const TrainConfig& c) { return std::to_string(c.NAME); }, \
          [](TrainConfig& c, const std::string& v) { c.NAME = parse_int(v); }}
#define DOUBLE_FIELD(NAME) \
    Field{#NAME, [](const TrainConfig& c) { return fmt_double(c.NAME); }, \
          [](TrainConfig& c, const std::string& v) { c.NAME = parse_double(v); }}
#define U64_FIELD(NAME) \
    Field{#NAME, [](const TrainConfig& c) { return std::to_string(c.NAME); }, \
          [](TrainConfig& c, const std::string& v) { c.NAME = parse_u64(v); }}
#define BOOL_FIELD(NAME) \
    Field{#NAME, [](const TrainConfig& c) { return c.NAME ? "true" : "false"; }, \
          [](TrainConfig& c, const std::string& v) { c.NAME = parse_bool(v); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        INT_FIELD(epochs),        DOUBLE_FIELD(lr),
        INT_FIELD(lr_drop_epoch), DOUBLE_FIELD(lr_drop_factor),
        DOUBLE_FIELD(weight_decay), INT_FIELD(batch_size),
        INT_FIELD(dn_groups),     DOUBLE_FIELD(lambda1),
        DOUBLE_FIELD(lambda2),    DOUBLE_FIELD(gamma),
        BOOL_FIELD(use_mask),     INT_FIELD(hidden_dim),
        INT_FIELD(ffn_dim),       INT_FIELD(decoder_layers),
        INT_FIELD(heads),         INT_FIELD(num_queries),
        INT_FIELD(classes),       INT_FIELD(kmax),
        INT_FIELD(grid),          INT_FIELD(n_train),
        INT_FIELD(n_val),         U64_FIELD(data_seed),
        DOUBLE_FIELD(cost_class), DOUBLE_FIELD(cost_l1),
        DOUBLE_FIELD(cost_giou),  U64_FIELD(seed),
    };
    return f;
}

#undef INT_FIELD
#undef DOUBLE_FIELD
#undef U64_FIELD
#undef BOOL_FIELD

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (lr <= 0.0) throw std::invalid_argument("config: lr must be > 0");
    if (lr_drop_epoch < 1 || lr_drop_epoch > epochs)
        throw std::invalid_argument("config: lr_drop_epoch must be in [1, epochs]");
    if (lr_drop_factor <= 0.0) throw std::invalid_argument("config: lr_drop_factor must be > 0");
    if (weight_decay < 0.0) throw std::invalid_argument("config: weight_decay must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (dn_groups < 0) throw std::invalid_argument("config: dn_groups must be >= 0");
    if (!noise().valid()) throw std::invalid_argument("config: invalid noise scales");
    if (!model().valid()) throw std::invalid_argument("config: invalid model dimensions");
    if (!dataset().valid()) throw std::invalid_argument("config: invalid dataset parameters");
    if (num_queries < kmax)
        throw std::invalid_argument("config: num_queries must be >= kmax (N >= M)");
    if (cost_class < 0.0 || cost_l1 < 0.0 || cost_giou < 0.0)
        throw std::invalid_argument("config: matching weights must be >= 0");
}

std::string canonical_config(const TrainConfig& cfg) {
    std::string out;
    for (const Field& f : fields()) {
        out += f.name;
        out += " = ";
        out += f.get(cfg);
        out += "\n";
    }
    return out;
}

uint64_t config_digest(const TrainConfig& cfg) {
    const std::string text = canonical_config(cfg);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

TrainConfig parse_config_text(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        bool found = false;
        for (const Field& f : fields()) {
            if (key == f.name) {
                f.set(cfg, value);
                found = true;
                break;
            }
        }
        if (!found)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": unknown key '" + key + "'");
    }
    return cfg;
}

TrainConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

void apply_env_seed_override(TrainConfig& cfg) {
    if (const char* env = std::getenv("DN_SEED")) {
        cfg.seed = parse_u64(env);
    }
}

}  // namespace setdet
