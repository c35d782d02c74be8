#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fgkf/synth.hpp"
#include "fgkf/trainer.hpp"

namespace fgkf {

// Fully resolved run settings. Precedence: built-in defaults, then the
// FGKF_SEED environment variable, then the method preset, then config-file
// keys in file order, then flag overrides.
struct RunConfig {
  std::string command;  // train | evaluate | synth | relevance-dump

  std::string method;  // "", source-only, target-only, basickd, fgkf
  uint64_t seed = 1;

  std::string scheme = "plain";
  std::string labels;  // comma-separated: tag labels (plain) or entity types (bio)

  std::string source_train;
  std::string target_train;
  std::string target_dev;
  std::string target_test;
  std::string dump_corpus;  // relevance-dump input; target_test when empty
  std::string out_dir = ".";
  std::string checkpoint;  // input for evaluate/relevance-dump

  TrainConfig train;
  SynthConfig synth;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Line-based "key = value" file with '#' comments.
KeyValues read_config_file(const std::string& path);

RunConfig resolve_config(const std::string& command, const KeyValues& file_pairs,
                         const KeyValues& flag_pairs);

// One "key = value" line per registered key, sorted; loading this back
// resolves to the identical configuration.
std::string serialize_config(const RunConfig& config);

TagScheme scheme_from_config(const RunConfig& config);

}  // namespace fgkf
