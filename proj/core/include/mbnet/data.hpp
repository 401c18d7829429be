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

// Dataset loading: MNIST-family IDX files, CIFAR binary batches, the
// 32x32x3 preprocessing step, validation splitting and batching.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mbnet/tensor.hpp"

namespace mbnet::data {

/// Decoded images kept as raw bytes in NHWC order; tensor() maps them to
/// [0,1] by /255.
struct ImageSet {
  std::size_t count = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;
  std::size_t class_count = 0;
  std::string source;

  std::size_t image_bytes() const { return height * width * channels; }
  Tensor tensor() const;
  Tensor tensor(std::span<const std::size_t> indices) const;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Reads an IDX image file ([N,rows,cols] u8) and its IDX label file.
ImageSet load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                  std::size_t class_count = 10);

enum class CifarVariant { cifar10, cifar100 };

/// Concatenates CIFAR binary batch files. CIFAR-100 keeps the fine label.
ImageSet load_cifar(const std::vector<std::filesystem::path>& paths, CifarVariant variant);

enum class ResizeMethod { pad, bilinear };

inline constexpr std::size_t kImageSide = 32;

/// [N,H,W,1|3] in [0,1] -> [N,32,32,3]. Grayscale is replicated into three
/// identical channels. `pad` centers the image on a zero canvas (extra row
/// or column at bottom/right); `bilinear` resamples with half-pixel centers.
/// Conforming input passes through unchanged.
Tensor preprocess(const Tensor& images, ResizeMethod method = ResizeMethod::pad);

enum class Split { train, validation, test };
const char* to_string(Split split) noexcept;

/// A view of selected records of a shared ImageSet. Images are decoded and
/// preprocessed on demand, so large sets stay in their compact byte form.
class LabeledDataset {
 public:
  LabeledDataset(std::shared_ptr<const ImageSet> source, Split split,
                 ResizeMethod resize = ResizeMethod::pad);

  std::size_t size() const noexcept { return index_.size(); }
  std::size_t class_count() const noexcept { return source_->class_count; }
  Split split() const noexcept { return split_; }
  ResizeMethod resize() const noexcept { return resize_; }
  const ImageSet& source() const noexcept { return *source_; }
  /// Record index in the source set for each position of this view.
  const std::vector<std::size_t>& source_indices() const noexcept { return index_; }

  int label(std::size_t position) const { return source_->labels[index_.at(position)]; }
  std::vector<int> labels() const;
  std::vector<int> labels(std::span<const std::size_t> positions) const;

  /// Preprocessed [B,32,32,3] images for the given positions.
  Tensor images(std::span<const std::size_t> positions) const;
  Tensor images() const;

  /// Records at `positions` (relative to this view) under a new split tag.
  LabeledDataset subset(std::vector<std::size_t> positions, Split split) const;
  /// The first n records (all if n >= size()).
  LabeledDataset head(std::size_t n) const;

 private:
  LabeledDataset(std::shared_ptr<const ImageSet> source, std::vector<std::size_t> index, Split split,
                 ResizeMethod resize);

  std::shared_ptr<const ImageSet> source_;
  std::vector<std::size_t> index_;
  Split split_;
  ResizeMethod resize_;
};

/// Seeded random partition: validation gets round(fraction * N) records,
/// train the rest; both keep source order.
std::pair<LabeledDataset, LabeledDataset> split_validation(const LabeledDataset& train, double fraction,
                                                           std::uint64_t seed);

struct Batch {
  Tensor images;
  std::vector<int> labels;
  std::vector<std::size_t> positions;
};

/// Shuffled mini-batches, one permutation per epoch from a seeded generator.
/// A trailing batch of a single record is merged into the previous batch so
/// that train-mode batch norm always sees at least two samples.
class BatchIterator {
 public:
  BatchIterator(const LabeledDataset& dataset, std::size_t batch_size, std::uint64_t seed, bool shuffle = true);

  /// Fills `out` with the next batch; returns false (and begins a new epoch
  /// on the following call) once the epoch is exhausted.
  bool next(Batch& out);
  std::size_t batches_per_epoch() const;

 private:
  void begin_epoch();

  const LabeledDataset& dataset_;
  std::size_t batch_size_;
  bool shuffle_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  bool epoch_open_ = false;
};

// ------------------------------------------------------ named datasets

/// Known datasets: mnist, fashion-mnist, cifar10, cifar100. Files are looked
/// up in `dir` by their canonical names (train-images-idx3-ubyte, ...,
/// data_batch_1.bin ... test_batch.bin, train.bin/test.bin).
struct DatasetFiles {
  std::string name;
  std::vector<std::filesystem::path> train;  // images, labels for IDX
  std::vector<std::filesystem::path> test;
};

DatasetFiles locate_dataset(const std::string& name, const std::filesystem::path& dir);
std::size_t class_count_of(const std::string& name);
ImageSet load_named(const std::string& name, const std::filesystem::path& dir, Split split);

}  // namespace mbnet::data
