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

#include "mbnet/metrics.hpp"

#include <cstdio>
#include <ostream>

#include "mbnet/error.hpp"

namespace mbnet::metrics {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
  if (classes < 2) fail(ErrorKind::usage, "confusion matrix needs at least 2 classes");
}

std::uint64_t ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
  if (truth >= classes_ || predicted >= classes_) fail(ErrorKind::domain, "confusion matrix index out of range");
  return counts_[truth * classes_ + predicted];
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < classes_; ++j) s += at(truth, j);
  return s;
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t predicted) const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < classes_; ++i) s += at(i, predicted);
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < classes_; ++i) s += counts_[i * classes_ + i];
  return s;
}

void ConfusionMatrix::add(int truth, int predicted) {
  const auto k = static_cast<int>(classes_);
  if (truth < 0 || truth >= k || predicted < 0 || predicted >= k) {
    fail(ErrorKind::domain, "label pair (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                                ") outside [0," + std::to_string(classes_) + ")");
  }
  ++counts_[static_cast<std::size_t>(truth) * classes_ + static_cast<std::size_t>(predicted)];
  ++total_;
}

void ConfusionMatrix::accumulate(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) {
    fail(ErrorKind::shape, "accumulate: " + std::to_string(truth.size()) + " true labels vs " +
                               std::to_string(predicted.size()) + " predictions");
  }
  // Validate first so a bad pair leaves the matrix untouched.
  const auto k = static_cast<int>(classes_);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= k || predicted[i] < 0 || predicted[i] >= k) {
      fail(ErrorKind::domain, "label pair (" + std::to_string(truth[i]) + ", " + std::to_string(predicted[i]) +
                                  ") at position " + std::to_string(i) + " outside [0," + std::to_string(classes_) + ")");
    }
  }
  for (std::size_t i = 0; i < truth.size(); ++i) add(truth[i], predicted[i]);
}

ConfusionMatrix& ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) fail(ErrorKind::shape, "cannot merge confusion matrices of different sizes");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
  return *this;
}

double accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) fail(ErrorKind::domain, "accuracy of an empty confusion matrix is undefined");
  return static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

ClassMetrics per_class_metrics(const ConfusionMatrix& cm) {
  const std::size_t k = cm.classes();
  ClassMetrics m;
  m.precision.resize(k);
  m.recall.resize(k);
  m.f1.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto tp = cm.at(c, c);
    m.precision[c] = ratio(tp, cm.column_sum(c));
    m.recall[c] = ratio(tp, cm.row_sum(c));
    m.f1[c] = f1_score(m.precision[c], m.recall[c]);
  }
  return m;
}

MetricReport evaluate(const ConfusionMatrix& cm) {
  MetricReport r;
  r.accuracy = accuracy(cm);
  r.samples = cm.total();
  r.per_class = per_class_metrics(cm);
  r.macro_precision = mean(r.per_class.precision);
  r.macro_recall = mean(r.per_class.recall);
  r.macro_f1 = mean(r.per_class.f1);
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    tp += cm.at(c, c);
    fp += cm.column_sum(c) - cm.at(c, c);
    fn += cm.row_sum(c) - cm.at(c, c);
  }
  r.micro_precision = ratio(tp, tp + fp);
  r.micro_recall = ratio(tp, tp + fn);
  r.micro_f1 = f1_score(r.micro_precision, r.micro_recall);
  return r;
}

BinaryCounts binary_counts(const ConfusionMatrix& cm, std::size_t positive) {
  if (positive >= cm.classes()) fail(ErrorKind::domain, "positive class out of range");
  BinaryCounts b;
  b.tp = cm.at(positive, positive);
  b.fp = cm.column_sum(positive) - b.tp;
  b.fn = cm.row_sum(positive) - b.tp;
  b.tn = cm.total() - b.tp - b.fp - b.fn;
  return b;
}

double binary_accuracy(const BinaryCounts& c) {
  const auto total = c.tp + c.tn + c.fp + c.fn;
  if (total == 0) fail(ErrorKind::domain, "accuracy of zero answers is undefined");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
}

double binary_precision(const BinaryCounts& c) { return ratio(c.tp, c.tp + c.fp); }
double binary_recall(const BinaryCounts& c) { return ratio(c.tp, c.tp + c.fn); }

Histogram probability_density(std::span<const double> values, std::size_t bins) {
  if (bins < 2) fail(ErrorKind::usage, "histogram needs at least 2 bins");
  if (values.empty()) fail(ErrorKind::domain, "histogram of an empty sample is undefined");
  std::vector<std::uint64_t> counts(bins, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      fail(ErrorKind::domain, "probability " + format_real(v) + " at position " + std::to_string(i) + " outside [0,1]");
    }
    auto b = static_cast<std::size_t>(v * static_cast<double>(bins));
    if (b >= bins) b = bins - 1;
    ++counts[b];
  }
  Histogram h;
  for (std::size_t b = 0; b < bins; ++b) {
    h.left.push_back(static_cast<double>(b) / static_cast<double>(bins));
    h.right.push_back(static_cast<double>(b + 1) / static_cast<double>(bins));
    h.density.push_back(static_cast<double>(counts[b]) / static_cast<double>(values.size()));
  }
  return h;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << "bin_left,bin_right,density\n";
  for (std::size_t b = 0; b < h.density.size(); ++b) {
    out << format_real(h.left[b]) << ',' << format_real(h.right[b]) << ',' << format_real(h.density[b]) << '\n';
  }
}

void write_metric_csv_header(std::ostream& out) {
  out << "model,dataset,accuracy,precision,recall,f1,param_count,epochs,seed\n";
}

void write_metric_csv_row(std::ostream& out, const MetricRow& row) {
  out << row.model << ',' << row.dataset << ',' << format_real(row.report.accuracy) << ','
      << format_real(row.report.macro_precision) << ',' << format_real(row.report.macro_recall) << ','
      << format_real(row.report.macro_f1) << ',' << row.param_count << ',' << row.epochs << ',' << row.seed << '\n';
}

}  // namespace mbnet::metrics
