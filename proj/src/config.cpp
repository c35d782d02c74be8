#include "fgkf/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>

#include "fgkf/common.hpp"

namespace fgkf {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    // stoull accepts and wraps negative input, so screen the sign ourselves
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    unsigned long long out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

std::string show_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct KeyDef {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::vector<KeyDef> make_registry() {
  std::vector<KeyDef> keys;
  auto str = [&](const char* name, std::string RunConfig::* field) {
    keys.push_back({name, [field](const RunConfig& c) { return c.*field; },
                    [field](RunConfig& c, const std::string& v) { c.*field = v; }});
  };
  auto add = [&](const char* name, auto get, auto set) {
    keys.push_back({name, std::move(get), std::move(set)});
  };

  str("method", &RunConfig::method);
  add(
      "seed", [](const RunConfig& c) { return std::to_string(c.seed); },
      [](RunConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); });
  str("scheme", &RunConfig::scheme);
  str("labels", &RunConfig::labels);
  str("source_train", &RunConfig::source_train);
  str("target_train", &RunConfig::target_train);
  str("target_dev", &RunConfig::target_dev);
  str("target_test", &RunConfig::target_test);
  str("dump_corpus", &RunConfig::dump_corpus);
  str("out_dir", &RunConfig::out_dir);
  str("checkpoint", &RunConfig::checkpoint);

  auto t_int = [&](const char* name, int TrainConfig::* field) {
    add(
        name, [field](const RunConfig& c) { return std::to_string(c.train.*field); },
        [field, name = std::string(name)](RunConfig& c, const std::string& v) {
          c.train.*field = parse_int(name, v);
        });
  };
  auto t_num = [&](const char* name, double TrainConfig::* field) {
    add(
        name, [field](const RunConfig& c) { return show_double(c.train.*field); },
        [field, name = std::string(name)](RunConfig& c, const std::string& v) {
          c.train.*field = parse_double(name, v);
        });
  };
  auto t_bool = [&](const char* name, bool TrainConfig::* field) {
    add(
        name, [field](const RunConfig& c) { return c.train.*field ? "true" : "false"; },
        [field, name = std::string(name)](RunConfig& c, const std::string& v) {
          c.train.*field = parse_bool(name, v);
        });
  };
  t_int("batch", &TrainConfig::batch);
  t_num("lr", &TrainConfig::lr);
  t_num("dropout", &TrainConfig::dropout);
  t_num("l2", &TrainConfig::l2);
  t_num("clip", &TrainConfig::clip);
  t_int("teach_steps", &TrainConfig::teach_steps);
  t_bool("warmup", &TrainConfig::warmup);
  t_int("warmup_epochs", &TrainConfig::warmup_epochs);
  t_bool("share_embedding", &TrainConfig::share_embedding);
  t_int("patience", &TrainConfig::patience);
  t_int("max_episodes", &TrainConfig::max_episodes);
  add(
      "distill", [](const RunConfig& c) { return c.train.distill; },
      [](RunConfig& c, const std::string& v) { c.train.distill = v; });
  t_num("soft_temp", &TrainConfig::soft_temp);
  t_int("emb_dim", &TrainConfig::emb_dim);
  t_int("hidden", &TrainConfig::hidden);

  add(
      "alpha_mode", [](const RunConfig& c) { return c.train.alpha.mode; },
      [](RunConfig& c, const std::string& v) { c.train.alpha.mode = v; });
  add(
      "fixed_alpha",
      [](const RunConfig& c) { return show_double(c.train.alpha.fixed_alpha); },
      [](RunConfig& c, const std::string& v) {
        c.train.alpha.fixed_alpha = parse_double("fixed_alpha", v);
      });
  add(
      "tau", [](const RunConfig& c) { return show_double(c.train.alpha.tau_init); },
      [](RunConfig& c, const std::string& v) {
        c.train.alpha.tau_init = parse_double("tau", v);
      });
  add(
      "gamma", [](const RunConfig& c) { return show_double(c.train.alpha.gamma_init); },
      [](RunConfig& c, const std::string& v) {
        c.train.alpha.gamma_init = parse_double("gamma", v);
      });

  add(
      "relevance_mode", [](const RunConfig& c) { return c.train.relevance.mode; },
      [](RunConfig& c, const std::string& v) { c.train.relevance.mode = v; });
  auto r_int = [&](const char* name, int RelevanceConfig::* field) {
    add(
        name,
        [field](const RunConfig& c) { return std::to_string(c.train.relevance.*field); },
        [field, name = std::string(name)](RunConfig& c, const std::string& v) {
          c.train.relevance.*field = parse_int(name, v);
        });
  };
  r_int("caps_n", &RelevanceConfig::caps_n);
  r_int("caps_dim", &RelevanceConfig::caps_dim);
  r_int("routing", &RelevanceConfig::routing);
  r_int("clf_hidden", &RelevanceConfig::clf_hidden);

  auto s_int = [&](const char* name, int SynthConfig::* field) {
    add(
        name, [field](const RunConfig& c) { return std::to_string(c.synth.*field); },
        [field, name = std::string(name)](RunConfig& c, const std::string& v) {
          c.synth.*field = parse_int(name, v);
        });
  };
  auto s_num = [&](const char* name, double SynthConfig::* field) {
    add(
        name, [field](const RunConfig& c) { return show_double(c.synth.*field); },
        [field, name = std::string(name)](RunConfig& c, const std::string& v) {
          c.synth.*field = parse_double(name, v);
        });
  };
  s_int("shared_vocab", &SynthConfig::shared_vocab);
  s_int("source_vocab", &SynthConfig::source_vocab);
  s_int("target_vocab", &SynthConfig::target_vocab);
  s_int("tags", &SynthConfig::tags);
  s_num("rho", &SynthConfig::rho);
  s_num("rho_s", &SynthConfig::rho_s);
  s_int("source_sentences", &SynthConfig::source_sentences);
  s_int("target_sentences", &SynthConfig::target_sentences);
  s_int("dev_sentences", &SynthConfig::dev_sentences);
  s_int("test_sentences", &SynthConfig::test_sentences);
  s_int("len_min", &SynthConfig::len_min);
  s_int("len_max", &SynthConfig::len_max);
  s_num("start_conc", &SynthConfig::start_conc);
  s_num("trans_conc", &SynthConfig::trans_conc);
  s_num("emit_conc", &SynthConfig::emit_conc);

  std::sort(keys.begin(), keys.end(),
            [](const KeyDef& a, const KeyDef& b) { return a.name < b.name; });
  return keys;
}

const std::vector<KeyDef>& registry() {
  static const std::vector<KeyDef> keys = make_registry();
  return keys;
}

const KeyDef* find_key(const std::string& name) {
  for (const auto& k : registry())
    if (k.name == name) return &k;
  return nullptr;
}

void apply_pairs(RunConfig& config, const KeyValues& pairs) {
  for (const auto& [key, value] : pairs) {
    const KeyDef* def = find_key(key);
    if (def == nullptr) throw ConfigError("unknown configuration key '" + key + "'");
    def->set(config, value);
  }
}

void apply_method_preset(RunConfig& config) {
  const std::string& m = config.method;
  if (m.empty()) return;
  if (m == "source-only") {
    config.train.warmup = true;
    config.train.teach_steps = 0;
    config.train.alpha.mode = "fixed";
    config.train.alpha.fixed_alpha = 0.0;
  } else if (m == "target-only") {
    config.train.warmup = false;
    config.train.teach_steps = 0;
    config.train.alpha.mode = "fixed";
    config.train.alpha.fixed_alpha = 0.0;
  } else if (m == "basickd") {
    config.train.warmup = false;
    config.train.alpha.mode = "fixed";
    config.train.alpha.fixed_alpha = 0.5;
  } else if (m == "fgkf") {
    config.train.warmup = true;
    config.train.alpha.mode = "multi";
    config.train.relevance.mode = "sample-q";
  } else {
    throw ConfigError("unknown method '" + m + "'");
  }
}

}  // namespace

KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  KeyValues pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::string text = trim(line);
    if (text.empty()) continue;
    size_t eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(text.substr(0, eq));
    std::string value = trim(text.substr(eq + 1));
    if (key.empty())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
    pairs.emplace_back(std::move(key), std::move(value));
  }
  return pairs;
}

RunConfig resolve_config(const std::string& command, const KeyValues& file_pairs,
                         const KeyValues& flag_pairs) {
  RunConfig config;
  config.command = command;

  if (const char* env = std::getenv("FGKF_SEED"))
    config.seed = parse_u64("FGKF_SEED", env);

  for (const auto& [key, value] : file_pairs)
    if (key == "method") config.method = value;
  for (const auto& [key, value] : flag_pairs)
    if (key == "method") config.method = value;
  apply_method_preset(config);

  apply_pairs(config, file_pairs);
  apply_pairs(config, flag_pairs);

  config.train.seed = config.seed;
  config.synth.seed = config.seed;
  config.synth.scheme = config.scheme;
  return config;
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& key : registry()) {
    out += key.name;
    out += " = ";
    out += key.get(config);
    out += '\n';
  }
  return out;
}

TagScheme scheme_from_config(const RunConfig& config) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : config.labels) {
    if (c == ',') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(cur);

  if (config.scheme == "bmes") return TagScheme::bmes();
  if (config.scheme == "bio") {
    if (parts.empty()) throw ConfigError("bio scheme needs entity types in 'labels'");
    return TagScheme::bio(parts);
  }
  if (config.scheme == "plain") {
    if (parts.empty()) throw ConfigError("plain scheme needs tag names in 'labels'");
    return TagScheme::plain(parts);
  }
  throw ConfigError("unknown scheme '" + config.scheme + "'");
}

}  // namespace fgkf
