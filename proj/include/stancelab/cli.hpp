// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stancelab/network.hpp"
#include "stancelab/pipeline.hpp"
#include "stancelab/training.hpp"

namespace stancelab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Everything a command needs, merged from defaults, a JSON config file and flags.
struct RunConfig {
  std::string corpus;
  std::string corpus_format = "jsonl";
  std::string sentiment_lexicon;
  std::string emotion_lexicon;
  std::string embeddings;        // contextual mode when set
  std::size_t fallback_dim = 0;  // fallback mode width when no embeddings are given
  std::string out;
  std::string split = "test";
  ModelConfig model;
  TrainConfig train;
  InputOptions input;
};

RunConfig default_run_config();
nlohmann::json to_json(const RunConfig& config);
/// Overlays the keys present in `j` onto `config`.
void merge_json(RunConfig& config, const nlohmann::json& j);

/// Worker threads: hardware concurrency, capped by STANCELAB_THREADS when set.
std::size_t thread_budget();

/// Runs one command line (args exclude the program name). Returns the exit code.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stancelab::cli
