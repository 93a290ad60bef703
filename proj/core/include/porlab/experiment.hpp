// Copyright 2026 The porlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "porlab/backdoor.hpp"
#include "porlab/metrics.hpp"
#include "porlab/training.hpp"

namespace porlab {

inline constexpr int kConfigSchema = 1;

struct DataPaths {
  std::filesystem::path corpus;  // one document per line
  std::filesystem::path vocab;   // vocabulary file
  std::filesystem::path train;   // labeled task data
  std::filesystem::path valid;
  std::filesystem::path test;
  std::filesystem::path heldout;  // clean text for injection diagnostics
};

struct TaskConfig {
  std::string format = "tsv";  // "tsv" or "tagging"
  std::size_t num_labels = 2;
  HeadKind head = HeadKind::kCls;
  std::size_t train_limit = 0;  // use only the first n training examples; 0 = all
};

/// How PORs are assigned to triggers, in trigger order.
///   constant: values[i] (one number) broadcast over K
///   explicit: values[i] holds all K numbers
///   por1 / por2: the generator's list over `blocks` blocks, cut per `split`
struct PorConfig {
  std::string kind = "por2";
  std::size_t blocks = 3;
  BlockSplit split = BlockSplit::kStrict;
  std::vector<std::vector<double>> values;
};

struct PlanConfig {
  std::vector<std::string> triggers;
  PorConfig por;
  TargetSelector selector = TargetSelector::kCls;
  std::size_t clean_count = 5000;
  std::size_t poison_per_trigger = 2000;
  std::size_t insertions = 3;
  InjectHyper hyper;
};

struct EvalConfig {
  std::size_t samples = 200;  // leading test examples scored; 0 = all
  EffectivenessOptions effectiveness;
  InsertPosition position = InsertPosition::kRandom;
  std::size_t count = 1;
  bool baseline = false;  // pipeline: also fine-tune the clean encoder
};

struct CheckpointPaths {
  std::filesystem::path clean;     // inject, analyze, pipeline
  std::filesystem::path backdoor;  // analyze
  std::filesystem::path encoder;   // finetune input
  std::filesystem::path model;     // eval input (classifier)
};

/// Structured experiment description, persisted as JSON. Every field except
/// `seed` has a default; unknown keys are rejected.
struct ExperimentConfig {
  int schema = kConfigSchema;
  std::string stage;  // pretrain | inject | finetune | eval | analyze | pipeline
  std::optional<std::uint64_t> seed;
  std::filesystem::path output_dir = "run";
  EncoderConfig model;
  std::size_t vocab_size = 400;
  DataPaths data;
  TaskConfig task;
  PretrainHyper pretrain;
  PlanConfig plan;
  FinetuneHyper finetune;
  EvalConfig eval;
  CheckpointPaths checkpoints;
};

/// Throws ConfigError naming the offending key. Relative paths resolve
/// against `base_dir`.
ExperimentConfig parse_config(std::string_view json_text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON (sorted keys, fixed formatting).
std::string config_to_json(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config);

/// Resolves the plan's PORs for hidden width `hidden`.
std::vector<PorSpec> resolve_pors(const PlanConfig& plan, std::size_t hidden);
BackdoorPlan resolve_plan(const PlanConfig& plan, const Vocab& vocab, std::size_t hidden);

struct RunSummary {
  std::string stage;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, std::filesystem::path> outputs;  // name -> file
  std::map<std::string, double> metrics;
  std::string output_hash;  // over (name, content hash) of every output
};

/// Executes config.stage in config.output_dir, writes summary.json and
/// appends a line to manifest.jsonl. Stage seeds are
/// derive_seed(seed, <stage>). Failures are rethrown as the same error type
/// with the stage and config hash prefixed.
RunSummary run(const ExperimentConfig& config);

enum class SweepAxis {
  kCleanCount,
  kPoisonCount,
  kFinetuneSize,
  kEpochs,
  kInsertions,
  kTriggerSet
};
std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(std::string_view name);

struct SweepSpec {
  ExperimentConfig base;  // stage is forced to "pipeline"
  SweepAxis axis = SweepAxis::kInsertions;
  /// Axis values as text; trigger-set values are comma-separated lists.
  std::vector<std::string> values;
  std::size_t repeats = 1;
};

/// Applies one axis value to a copy of `base`.
ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, const std::string& value);

struct SweepRecord {
  std::string value;
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
};

/// Runs every (value, repeat) cell in its own directory. Repeat r of every
/// value uses seed derive_seed(base.seed, "repeat", r), so cells that differ
/// only in the axis value share their randomness. Writes runs.jsonl and
/// sweep.csv under base.output_dir and returns the records.
std::vector<SweepRecord> sweep(const SweepSpec& spec);

/// axis,value,metric,mean,stdev,n with rows in value order then metric
/// name; stdev is the sample standard deviation (0 for n = 1).
std::string aggregate_sweep(const std::string& axis, std::span<const SweepRecord> records);
std::vector<SweepRecord> load_sweep_records(const std::filesystem::path& runs_jsonl);

/// One row per summary.json found under `root` (recursively): path, stage,
/// then every metric column seen, sorted.
std::string report_table(const std::filesystem::path& root);

/// Writes the bundled synthetic corpus and tasks to `dir`:
/// corpus.txt, sentiment_{train,valid,test}.tsv, topic_{...}.tsv and
/// tagging_{...}.jsonl.
void write_toy_assets(const std::filesystem::path& dir, std::size_t corpus_lines, std::size_t train,
                      std::size_t valid, std::size_t test, std::uint64_t seed);

/// Appends one JSON object per epoch to `path`.
EpochSink jsonl_epoch_sink(const std::filesystem::path& path);

}  // namespace porlab
