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

// Confusion-matrix accounting, accuracy / precision / recall / F1 and the
// probability-density histograms used in evaluation reports.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mbnet::metrics {

/// K x K counts; entry (i, j) is the number of samples of true class i
/// predicted as class j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);

  std::size_t classes() const noexcept { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const;
  std::uint64_t total() const noexcept { return total_; }
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t column_sum(std::size_t predicted) const;
  std::uint64_t trace() const;

  void add(int truth, int predicted);
  void accumulate(std::span<const int> truth, std::span<const int> predicted);
  /// Entrywise sum; both matrices must have the same class count.
  ConfusionMatrix& merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// trace / total. Throws on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

struct ClassMetrics {
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
};

/// One-vs-rest per class; a zero denominator yields 0.
ClassMetrics per_class_metrics(const ConfusionMatrix& cm);

struct MetricReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  double micro_f1 = 0.0;
  ClassMetrics per_class;
  std::uint64_t samples = 0;
};

/// Macro values are unweighted means over classes; micro values pool the
/// one-vs-rest counts.
MetricReport evaluate(const ConfusionMatrix& cm);

/// Binary view of a matrix with respect to one positive class.
struct BinaryCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
};

BinaryCounts binary_counts(const ConfusionMatrix& cm, std::size_t positive_class);
double binary_accuracy(const BinaryCounts& c);   // (tp + tn) / total
double binary_precision(const BinaryCounts& c);  // tp / (tp + fp)
double binary_recall(const BinaryCounts& c);     // tp / (tp + fn)
double f1_score(double precision, double recall);

/// Equal-width histogram over [0,1]; 1.0 lands in the last bin. `density`
/// holds the fraction of samples per bin and sums to 1.
struct Histogram {
  std::vector<double> left;
  std::vector<double> right;
  std::vector<double> density;
};

Histogram probability_density(std::span<const double> values, std::size_t bins);

void write_histogram_csv(std::ostream& out, const Histogram& h);

/// One row of a comparison / evaluation table.
struct MetricRow {
  std::string model;
  std::string dataset;
  MetricReport report;
  std::size_t param_count = 0;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
};

void write_metric_csv_header(std::ostream& out);
void write_metric_csv_row(std::ostream& out, const MetricRow& row);
std::string format_real(double v);

}  // namespace mbnet::metrics
