/*
 * Copyright 2026 The MBNet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Run orchestration behind the command-line tool: training with per-epoch
// validation, evaluation of checkpoints, multi-config comparison tables and
// whole-graph gradient checks.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mbnet/config.hpp"
#include "mbnet/data.hpp"
#include "mbnet/graph.hpp"
#include "mbnet/metrics.hpp"

namespace mbnet::harness {

inline constexpr int kManifestVersion = 1;

struct DataBundle {
  data::LabeledDataset train;
  data::LabeledDataset validation;
  data::LabeledDataset test;
};

/// Loads the configured dataset, carves the seeded validation split out of
/// the training records and applies the per-split limits.
DataBundle load_data(const RunConfig& config);

struct Evaluation {
  metrics::ConfusionMatrix confusion;
  metrics::MetricReport report;
  double loss = 0.0;
  std::vector<double> max_probability;  // per sample, highest softmax output
  std::vector<double> true_probability; // per sample, softmax output of the true class
};

/// Infer-mode pass over the whole dataset in fixed-size chunks.
Evaluation evaluate_model(const ModelGraph& model, const data::LabeledDataset& dataset);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
};

struct RunManifest {
  int format_version = kManifestVersion;
  std::string config_text;
  std::string config_hash;
  std::string model;
  std::string dataset;
  std::size_t param_count = 0;
  std::size_t train_samples = 0;
  std::size_t validation_samples = 0;
  std::size_t test_samples = 0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  metrics::MetricReport test_report;
  double seconds = 0.0;        // wall clock; written to timing.json, not the manifest
};

std::string manifest_json(const RunManifest& manifest);

struct TrainOptions {
  bool write_outputs = true;
  std::ostream* log = nullptr;  // per-epoch progress lines
};

struct TrainResult {
  RunManifest manifest;
  ModelGraph model;
  std::filesystem::path run_dir;  // empty when outputs are not written
};

/// Directory for a run: <output.dir>/<model>-<config hash>-s<seed>.
std::filesystem::path run_directory(const RunConfig& config);

/// Trains from the configured initialization, validating after every epoch.
/// Writes checkpoint.bin (final), best.bin (best validation epoch),
/// manifest.json, metrics.csv, the density CSVs and timing.json. A
/// non-finite loss or gradient aborts with the epoch and batch index.
TrainResult cmd_train(const RunConfig& config, const TrainOptions& options = {});
TrainResult cmd_train(const RunConfig& config, const DataBundle& data, const TrainOptions& options = {});

struct EvalResult {
  Evaluation evaluation;
  metrics::MetricRow row;
};

/// Evaluates a checkpoint on config.eval_split. When out_dir is non-empty,
/// writes eval_metrics.csv and the two density CSVs there.
EvalResult cmd_eval(const std::filesystem::path& checkpoint, const RunConfig& config,
                    const std::filesystem::path& out_dir = {});
EvalResult cmd_eval(const std::filesystem::path& checkpoint, const RunConfig& config, const DataBundle& data,
                    const std::filesystem::path& out_dir = {});

/// Trains each config in turn and writes one row per run to `table`.
std::vector<metrics::MetricRow> cmd_compare(const std::vector<RunConfig>& configs,
                                            const std::filesystem::path& table,
                                            const TrainOptions& options = {});

struct GradcheckOptions {
  std::string model = "mbinception";
  Shape input_shape = {2, 8, 8, 3};
  std::size_t num_classes = 3;
  std::uint64_t seed = 7;
  double step = 1e-5;
  double tolerance = 1e-3;
  std::size_t max_parameters = 5000;
  /// Test hook applied to the analytic gradients before comparison.
  std::function<void(BackwardPass&)> tamper;
};

struct GradcheckEntry {
  std::string node;
  std::string kind;
  std::string tensor;      // parameter name, or "input"
  std::size_t index = 0;   // flat element index of the worst entry
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradcheckReport {
  std::string model;
  std::size_t param_count = 0;
  std::size_t checked = 0;  // parameter and input elements probed
  std::size_t kinks = 0;    // probes whose +h/-h sides differ in a ReLU sign or pool choice
  std::vector<GradcheckEntry> per_node;  // worst entry per node, graph order
  std::vector<GradcheckEntry> per_kind;  // worst entry per layer kind
  GradcheckEntry worst;
  bool passed = false;
};

/// The toy model spec used by gradient checks for each architecture.
ModelSpec gradcheck_spec(const GradcheckOptions& options);

/// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric);

/// Central differences of the mean training loss with respect to every
/// parameter element and every input element, with dropout masks held fixed.
/// Probes that straddle a ReLU or max-pool switch are not differentiable
/// there and are counted instead of compared; more than 1% of them fails.
GradcheckReport cmd_gradcheck(const GradcheckOptions& options);

void print_gradcheck(std::ostream& out, const GradcheckReport& report, double tolerance, bool per_node = false);

struct DatasetInfo {
  std::string name;
  std::filesystem::path dir;
  bool present = false;
  std::string problem;  // load error when present but unreadable
  std::size_t train_records = 0;
  std::size_t test_records = 0;
  std::vector<std::size_t> train_per_class;
  std::vector<std::size_t> test_per_class;
};

/// Loads both splits of a dataset found in `dir` and tallies labels.
DatasetInfo inspect_dataset(const std::string& name, const std::filesystem::path& dir);

}  // namespace mbnet::harness
