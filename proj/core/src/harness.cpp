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

#include "mbnet/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "mbnet/checkpoint.hpp"
#include "mbnet/error.hpp"
#include "mbnet/optim.hpp"

namespace mbnet::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kEvalChunk = 250;
constexpr double kMaxKinkFraction = 0.01;

void write_file(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::data, "cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) fail(ErrorKind::data, "write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

int argmax_row(std::span<const double> row) {
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::string metrics_csv(const metrics::MetricRow& row) {
  std::ostringstream out;
  metrics::write_metric_csv_header(out);
  metrics::write_metric_csv_row(out, row);
  return out.str();
}

std::string histogram_csv(std::span<const double> values, std::size_t bins) {
  std::ostringstream out;
  metrics::write_histogram_csv(out, metrics::probability_density(values, bins));
  return out.str();
}

void write_evaluation_files(const fs::path& dir, const std::string& metrics_name, const metrics::MetricRow& row,
                            const Evaluation& ev, std::size_t bins) {
  write_file(dir / metrics_name, metrics_csv(row));
  if (ev.max_probability.empty()) return;
  write_file(dir / "density_max_probability.csv", histogram_csv(ev.max_probability, bins));
  write_file(dir / "density_true_class.csv", histogram_csv(ev.true_probability, bins));
}

json report_json(const metrics::MetricReport& r) {
  return json{{"accuracy", r.accuracy},
              {"macro_precision", r.macro_precision},
              {"macro_recall", r.macro_recall},
              {"macro_f1", r.macro_f1},
              {"micro_precision", r.micro_precision},
              {"micro_recall", r.micro_recall},
              {"micro_f1", r.micro_f1},
              {"samples", r.samples},
              {"per_class",
               {{"precision", r.per_class.precision},
                {"recall", r.per_class.recall},
                {"f1", r.per_class.f1}}}};
}

std::string node_of(const std::string& parameter) {
  const auto dot = parameter.rfind('.');
  return dot == std::string::npos ? parameter : parameter.substr(0, dot);
}

metrics::MetricRow make_row(const RunConfig& config, const ModelGraph& model, const metrics::MetricReport& report) {
  metrics::MetricRow row;
  row.model = config.model.name;
  row.dataset = config.dataset;
  row.report = report;
  row.param_count = count_parameters(model);
  row.epochs = config.epochs;
  row.seed = config.seed;
  return row;
}

}  // namespace

// ------------------------------------------------------------------ data

DataBundle load_data(const RunConfig& config) {
  auto train_set = std::make_shared<const data::ImageSet>(
      data::load_named(config.dataset, config.data_dir, data::Split::train));
  auto test_set = std::make_shared<const data::ImageSet>(
      data::load_named(config.dataset, config.data_dir, data::Split::test));
  data::LabeledDataset full(train_set, data::Split::train, config.resize);
  auto [train, validation] =
      data::split_validation(full, config.validation_fraction, derive_seed(config.seed, SeedStream::split));
  data::LabeledDataset test(test_set, data::Split::test, config.resize);
  auto limit = [](const data::LabeledDataset& d, std::size_t n) { return n ? d.head(n) : d; };
  return DataBundle{limit(train, config.train_limit), limit(validation, config.validation_limit),
                    limit(test, config.test_limit)};
}

Evaluation evaluate_model(const ModelGraph& model, const data::LabeledDataset& dataset) {
  Evaluation ev{metrics::ConfusionMatrix(model.num_classes()), {}, 0.0, {}, {}};
  if (dataset.class_count() != model.num_classes()) {
    fail(ErrorKind::data, "model has " + std::to_string(model.num_classes()) + " outputs but the dataset has " +
                              std::to_string(dataset.class_count()) + " classes");
  }
  const std::size_t n = dataset.size();
  if (n == 0) fail(ErrorKind::data, "cannot evaluate on an empty dataset");
  const std::size_t k = model.num_classes();
  ev.max_probability.reserve(n);
  ev.true_probability.reserve(n);
  double loss_sum = 0.0;
  std::vector<std::size_t> positions;
  for (std::size_t start = 0; start < n; start += kEvalChunk) {
    const std::size_t count = std::min(kEvalChunk, n - start);
    positions.resize(count);
    for (std::size_t i = 0; i < count; ++i) positions[i] = start + i;
    const auto labels = dataset.labels(positions);
    const auto sx = ops::softmax_cross_entropy(graph_predict(model, dataset.images(positions)), labels);
    loss_sum += sx.loss * static_cast<double>(count);
    const auto probs = sx.probabilities.data();
    for (std::size_t i = 0; i < count; ++i) {
      const auto row = probs.subspan(i * k, k);
      const int predicted = argmax_row(row);
      ev.confusion.add(labels[i], predicted);
      ev.max_probability.push_back(row[static_cast<std::size_t>(predicted)]);
      ev.true_probability.push_back(row[static_cast<std::size_t>(labels[i])]);
    }
  }
  ev.loss = loss_sum / static_cast<double>(n);
  ev.report = metrics::evaluate(ev.confusion);
  return ev;
}

// ----------------------------------------------------------------- train

std::string manifest_json(const RunManifest& m) {
  json config = json::object();
  for (const auto& [k, v] : parse_key_values(m.config_text)) config[k] = v;
  json epochs = json::array();
  for (const auto& e : m.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"train_accuracy", e.train_accuracy},
                      {"validation_accuracy", e.validation_accuracy}});
  }
  json doc = {{"format_version", m.format_version},
              {"config", config},
              {"config_hash", m.config_hash},
              {"model", m.model},
              {"dataset", m.dataset},
              {"param_count", m.param_count},
              {"samples", {{"train", m.train_samples}, {"validation", m.validation_samples}, {"test", m.test_samples}}},
              {"epochs", epochs},
              {"best_epoch", m.best_epoch},
              {"test", report_json(m.test_report)}};
  return doc.dump(2) + "\n";
}

fs::path run_directory(const RunConfig& config) {
  return config.output_dir / (config.model.name + "-" + config_hash(config) + "-s" + std::to_string(config.seed));
}

TrainResult cmd_train(const RunConfig& config, const TrainOptions& options) {
  return cmd_train(config, load_data(config), options);
}

TrainResult cmd_train(const RunConfig& config, const DataBundle& data, const TrainOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  if (data.train.class_count() != config.model.num_classes) {
    fail(ErrorKind::data, "dataset has " + std::to_string(data.train.class_count()) +
                              " classes but the model is configured for " +
                              std::to_string(config.model.num_classes));
  }
  ModelGraph model = build_model(config.model);
  auto optimizer = make_optimizer(config.optimizer, config.nadam);
  ops::Rng dropout_rng(derive_seed(config.seed, SeedStream::dropout));

  RunManifest manifest;
  manifest.config_text = canonical_text(config);
  manifest.config_hash = config_hash(config);
  manifest.model = config.model.name;
  manifest.dataset = config.dataset;
  manifest.param_count = count_parameters(model);
  manifest.train_samples = data.train.size();
  manifest.validation_samples = data.validation.size();
  manifest.test_samples = data.test.size();

  fs::path dir;
  if (options.write_outputs) {
    dir = run_directory(config);
    fs::create_directories(dir);
  }

  if (config.epochs > 0 && data.train.size() < 2) {
    fail(ErrorKind::data, "training needs at least 2 records, got " + std::to_string(data.train.size()));
  }
  const std::size_t k = config.model.num_classes;
  double best_accuracy = -1.0;
  data::BatchIterator batches(data.train, config.batch_size, derive_seed(config.seed, SeedStream::shuffle));
  data::Batch batch;
  const double total_steps = static_cast<double>(config.epochs * batches.batches_per_epoch());
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t seen = 0;
    std::size_t index = 0;
    while (batches.next(batch)) {
      ++index;
      const std::string where = "epoch " + std::to_string(epoch) + " batch " + std::to_string(index);
      try {
        auto fwd = graph_forward(model, batch.images, ops::Mode::train, dropout_rng);
        auto bwd = graph_backward(model, fwd, batch.labels);
        if (!std::isfinite(bwd.loss)) fail(ErrorKind::numerical, "non-finite loss");
        if (config.schedule == "cosine") {
          const double progress = static_cast<double>(step) / total_steps;
          optimizer->set_learning_rate(config.nadam.eta * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
        }
        ++step;
        apply_updates(model.parameters(), bwd.grads, *optimizer);
        const auto probs = fwd.probabilities().data();
        for (std::size_t i = 0; i < batch.labels.size(); ++i) {
          if (argmax_row(probs.subspan(i * k, k)) == batch.labels[i]) ++correct;
        }
        loss_sum += bwd.loss * static_cast<double>(batch.labels.size());
        seen += batch.labels.size();
      } catch (const Error& e) {
        fail(e.kind(), where + ": " + e.what());
      }
    }
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(seen);
    record.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    if (data.validation.size() > 0) record.validation_accuracy = evaluate_model(model, data.validation).report.accuracy;
    manifest.epochs.push_back(record);
    if (record.validation_accuracy > best_accuracy) {
      best_accuracy = record.validation_accuracy;
      manifest.best_epoch = epoch;
      if (options.write_outputs) save_checkpoint(dir / "best.bin", model, optimizer.get(), manifest.config_text);
    }
    if (options.log) {
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      *options.log << config.model.name << " epoch " << epoch << "/" << config.epochs << " loss "
                   << record.train_loss << " train_acc " << record.train_accuracy << " val_acc "
                   << record.validation_accuracy << " (" << elapsed << "s)\n";
    }
  }

  const Evaluation ev = evaluate_model(model, data.test);
  manifest.test_report = ev.report;
  manifest.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  if (options.write_outputs) {
    save_checkpoint(dir / "checkpoint.bin", model, optimizer.get(), manifest.config_text);
    write_evaluation_files(dir, "metrics.csv", make_row(config, model, ev.report), ev, config.histogram_bins);
    write_file(dir / "manifest.json", manifest_json(manifest));
    write_file(dir / "timing.json", json{{"seconds", manifest.seconds}}.dump(2) + "\n");
  }
  return TrainResult{std::move(manifest), std::move(model), dir};
}

// ------------------------------------------------------------------ eval

EvalResult cmd_eval(const fs::path& checkpoint, const RunConfig& config, const fs::path& out_dir) {
  return cmd_eval(checkpoint, config, load_data(config), out_dir);
}

EvalResult cmd_eval(const fs::path& checkpoint, const RunConfig& config, const DataBundle& data,
                    const fs::path& out_dir) {
  Checkpoint ckpt = load_checkpoint(checkpoint);
  const data::LabeledDataset& ds = config.eval_split == data::Split::train        ? data.train
                                   : config.eval_split == data::Split::validation ? data.validation
                                                                                  : data.test;
  if (ckpt.model.num_classes() != ds.class_count()) {
    fail(ErrorKind::data, "class-count mismatch: checkpoint '" + checkpoint.string() + "' predicts " +
                              std::to_string(ckpt.model.num_classes()) + " classes but dataset '" +
                              config.dataset + "' has " + std::to_string(ds.class_count()));
  }
  EvalResult result{evaluate_model(ckpt.model, ds), {}};
  result.row = make_row(config, ckpt.model, result.evaluation.report);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_evaluation_files(out_dir, "eval_metrics.csv", result.row, result.evaluation, config.histogram_bins);
  }
  return result;
}

// --------------------------------------------------------------- compare

std::vector<metrics::MetricRow> cmd_compare(const std::vector<RunConfig>& configs, const fs::path& table,
                                            const TrainOptions& options) {
  if (configs.size() < 2) fail(ErrorKind::usage, "compare needs at least two configs");
  std::vector<metrics::MetricRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const RunConfig& c = configs[i];
    try {
      auto run = cmd_train(c, options);
      rows.push_back(make_row(c, run.model, run.manifest.test_report));
    } catch (const Error& e) {
      fail(e.kind(), "config " + std::to_string(i + 1) + " (" + c.model.name + " on " + c.dataset + ", seed " +
                         std::to_string(c.seed) + "): " + e.what());
    }
  }
  std::ostringstream out;
  metrics::write_metric_csv_header(out);
  for (const auto& row : rows) metrics::write_metric_csv_row(out, row);
  if (!table.empty()) {
    if (table.has_parent_path()) fs::create_directories(table.parent_path());
    write_file(table, out.str());
  }
  return rows;
}

// ------------------------------------------------------------- gradcheck

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

ModelSpec gradcheck_spec(const GradcheckOptions& options) {
  ModelSpec spec;
  spec.name = options.model;
  spec.input_shape = options.input_shape;
  spec.num_classes = options.num_classes;
  spec.seed = options.seed;
  spec.base_filters = 4;
  spec.stage_multipliers = {1};
  spec.width = 2;
  spec.depth = 2;
  return spec;
}

GradcheckReport cmd_gradcheck(const GradcheckOptions& options) {
  const ModelSpec spec = gradcheck_spec(options);
  ModelGraph model = build_model(spec);
  GradcheckReport report;
  report.model = options.model;
  report.param_count = count_parameters(model);
  if (report.param_count > options.max_parameters) {
    fail(ErrorKind::usage, "gradcheck model has " + std::to_string(report.param_count) +
                               " parameters; the limit is " + std::to_string(options.max_parameters));
  }

  const std::size_t batch_size = spec.input_shape.at(0);
  std::mt19937_64 data_rng(options.seed ^ 0x5eedULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Zero biases make a convolution over an all-zero window (dead units,
  // dropped pixels) land exactly on a ReLU kink. Jitter them so the check
  // runs at a differentiable point.
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  for (auto& [name, theta] : model.parameters()) {
    if (name.ends_with(".bias") || name.ends_with(".beta")) {
      for (double& v : theta.data()) v = jitter(data_rng);
    }
  }
  Tensor x(spec.input_shape);
  for (double& v : x.data()) v = normal(data_rng);
  std::vector<int> labels(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) labels[i] = static_cast<int>(i % options.num_classes);

  const std::uint64_t dropout_seed = derive_seed(options.seed, SeedStream::dropout);
  const double h = options.step;
  // Loss plus a fingerprint of every ReLU sign and max-pool choice; when the
  // two sides of a central difference disagree on it, a kink lies between.
  struct Probe {
    double loss;
    std::uint64_t pattern;
  };
  auto loss_at = [&](const Tensor& input) {
    ops::Rng rng(dropout_seed);
    auto fwd = graph_forward(model, input, ops::Mode::train, rng);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) { h = (h ^ v) * 0x100000001b3ULL; };
    for (const auto& ctx : fwd.contexts) {
      if (const auto* r = std::get_if<ops::ReluContext>(&ctx)) {
        for (double v : r->input.data()) mix(v > 0.0);
      } else if (const auto* p = std::get_if<ops::PoolContext>(&ctx)) {
        for (std::size_t a : p->argmax) mix(a);
      }
    }
    return Probe{ops::softmax_cross_entropy(fwd.logits(), labels).loss, h};
  };

  ops::Rng rng(dropout_seed);
  auto fwd = graph_forward(model, x, ops::Mode::train, rng);
  BackwardPass analytic = graph_backward(model, fwd, labels);
  if (options.tamper) options.tamper(analytic);

  std::map<std::string, GradcheckEntry> worst_by_node;
  auto consider = [&](const std::string& node, const std::string& kind, const std::string& tensor, std::size_t i,
                      double a, const Probe& up, const Probe& down) {
    ++report.checked;
    if (up.pattern != down.pattern) {
      ++report.kinks;
      return;
    }
    const double n = (up.loss - down.loss) / (2.0 * h);
    GradcheckEntry e{node, kind, tensor, i, a, n, relative_error(a, n)};
    auto [it, inserted] = worst_by_node.try_emplace(node, e);
    if (!inserted && e.relative_error > it->second.relative_error) it->second = e;
  };

  for (auto& [name, theta] : model.parameters()) {
    const std::string node = node_of(name);
    const std::string kind = to_string(model.node(model.index_of(node)).kind);
    const auto grad = analytic.grads.at(name).data();
    auto values = theta.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const Probe up = loss_at(x);
      values[i] = saved - h;
      const Probe down = loss_at(x);
      values[i] = saved;
      consider(node, kind, name, i, grad[i], up, down);
    }
  }
  {
    Tensor probe = x;
    auto values = probe.data();
    const auto grad = analytic.input_grad.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const Probe up = loss_at(probe);
      values[i] = saved - h;
      const Probe down = loss_at(probe);
      values[i] = saved;
      consider("input", "input", "input", i, grad[i], up, down);
    }
  }

  std::map<std::string, GradcheckEntry> worst_by_kind;
  for (const auto& n : model.nodes()) {
    auto it = worst_by_node.find(n.id);
    if (it == worst_by_node.end()) continue;
    const GradcheckEntry& e = it->second;
    report.per_node.push_back(e);
    auto [k, inserted] = worst_by_kind.try_emplace(e.kind, e);
    if (!inserted && e.relative_error > k->second.relative_error) k->second = e;
    if (e.relative_error >= report.worst.relative_error) report.worst = e;
  }
  for (const auto& [kind, e] : worst_by_kind) report.per_kind.push_back(e);
  report.passed = report.worst.relative_error <= options.tolerance &&
                  static_cast<double>(report.kinks) <= kMaxKinkFraction * static_cast<double>(report.checked);
  return report;
}

void print_gradcheck(std::ostream& out, const GradcheckReport& report, double tolerance, bool per_node) {
  out << "gradcheck " << report.model << " (" << report.param_count << " parameters, " << report.checked
      << " entries, " << report.kinks << " skipped at kinks)\n";
  if (per_node) {
    for (const auto& e : report.per_node) {
      out << "  node " << e.node << " (" << e.kind << "): " << e.relative_error << " at " << e.tensor << "["
          << e.index << "] analytic " << e.analytic << " numeric " << e.numeric << "\n";
    }
  }
  for (const auto& e : report.per_kind) {
    out << "  " << e.kind << ": worst relative error " << e.relative_error << " at " << e.tensor << "[" << e.index
        << "]\n";
  }
  if (report.passed) {
    out << "PASS worst " << report.worst.relative_error << " <= " << tolerance << "\n";
  } else {
    out << "FAIL node '" << report.worst.node << "' (" << report.worst.kind << ") " << report.worst.tensor << "["
        << report.worst.index << "]: analytic " << report.worst.analytic << " numeric " << report.worst.numeric
        << " relative error " << report.worst.relative_error << " > " << tolerance << "\n";
  }
}

// -------------------------------------------------------------- datasets

DatasetInfo inspect_dataset(const std::string& name, const fs::path& dir) {
  DatasetInfo info;
  info.name = name;
  info.dir = dir;
  const auto files = data::locate_dataset(name, dir);
  info.present = true;
  for (const auto* list : {&files.train, &files.test}) {
    for (const auto& p : *list) {
      if (!fs::exists(p)) {
        info.present = false;
        info.problem = "missing " + p.string();
        return info;
      }
    }
  }
  try {
    const auto train = data::load_named(name, dir, data::Split::train);
    const auto test = data::load_named(name, dir, data::Split::test);
    info.train_records = train.count;
    info.test_records = test.count;
    info.train_per_class.assign(train.class_count, 0);
    info.test_per_class.assign(test.class_count, 0);
    for (int l : train.labels) ++info.train_per_class[static_cast<std::size_t>(l)];
    for (int l : test.labels) ++info.test_per_class[static_cast<std::size_t>(l)];
  } catch (const Error& e) {
    info.problem = e.what();
  }
  return info;
}

}  // namespace mbnet::harness
