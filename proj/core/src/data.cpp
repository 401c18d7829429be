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

#include "mbnet/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace mbnet::data {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::data, "cannot open '" + path.string() + "'");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (static_cast<std::size_t>(in.gcount()) != size) fail(ErrorKind::data, "short read on '" + path.string() + "'");
  return bytes;
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t offset, const fs::path& path) {
  if (offset + 4 > b.size()) {
    fail(ErrorKind::data, "'" + path.string() + "' truncated: need 4 header bytes at offset " +
                              std::to_string(offset) + ", file has " + std::to_string(b.size()));
  }
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

}  // namespace

Tensor ImageSet::tensor() const {
  std::vector<std::size_t> all(count);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return tensor(all);
}

Tensor ImageSet::tensor(std::span<const std::size_t> indices) const {
  if (indices.empty()) fail(ErrorKind::data, "cannot build a tensor from zero images");
  const std::size_t per = image_bytes();
  Tensor out({indices.size(), height, width, channels});
  double* dst = out.raw();
  for (auto idx : indices) {
    if (idx >= count) fail(ErrorKind::data, "image index " + std::to_string(idx) + " out of range");
    const std::uint8_t* src = pixels.data() + idx * per;
    for (std::size_t i = 0; i < per; ++i) *dst++ = static_cast<double>(src[i]) / 255.0;
  }
  return out;
}

ImageSet load_idx(const fs::path& images, const fs::path& labels, std::size_t class_count) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);

  const auto img_magic = be32(img, 0, images);
  if (img_magic != kIdxImageMagic) {
    fail(ErrorKind::data, "'" + images.string() + "' offset 0: bad IDX image magic " + hex(img_magic) +
                              " (expected " + hex(kIdxImageMagic) + ")");
  }
  const auto lab_magic = be32(lab, 0, labels);
  if (lab_magic != kIdxLabelMagic) {
    fail(ErrorKind::data, "'" + labels.string() + "' offset 0: bad IDX label magic " + hex(lab_magic) +
                              " (expected " + hex(kIdxLabelMagic) + ")");
  }
  const std::size_t n = be32(img, 4, images);
  const std::size_t rows = be32(img, 8, images);
  const std::size_t cols = be32(img, 12, images);
  const std::size_t n_labels = be32(lab, 4, labels);
  if (n != n_labels) {
    fail(ErrorKind::data, "image count " + std::to_string(n) + " ('" + images.string() + "' offset 4) != label count " +
                              std::to_string(n_labels) + " ('" + labels.string() + "' offset 4)");
  }
  if (n == 0 || rows == 0 || cols == 0) fail(ErrorKind::data, "'" + images.string() + "': empty IDX image file");
  const std::size_t img_expected = 16 + n * rows * cols;
  if (img.size() < img_expected) {
    fail(ErrorKind::data, "'" + images.string() + "' truncated at offset " + std::to_string(img.size()) +
                              ": header promises " + std::to_string(img_expected) + " bytes");
  }
  if (lab.size() < 8 + n) {
    fail(ErrorKind::data, "'" + labels.string() + "' truncated at offset " + std::to_string(lab.size()) +
                              ": header promises " + std::to_string(8 + n) + " bytes");
  }

  ImageSet set;
  set.count = n;
  set.height = rows;
  set.width = cols;
  set.channels = 1;
  set.class_count = class_count;
  set.source = images.string();
  set.pixels.assign(img.begin() + 16, img.begin() + static_cast<std::ptrdiff_t>(img_expected));
  set.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = lab[8 + i];
    if (static_cast<std::size_t>(label) >= class_count) {
      fail(ErrorKind::data, "'" + labels.string() + "' offset " + std::to_string(8 + i) + ": label " +
                                std::to_string(label) + " outside [0," + std::to_string(class_count) + ")");
    }
    set.labels[i] = label;
  }
  return set;
}

ImageSet load_cifar(const std::vector<fs::path>& paths, CifarVariant variant) {
  if (paths.empty()) fail(ErrorKind::data, "no CIFAR files given");
  constexpr std::size_t kPlane = 32 * 32;
  const std::size_t label_bytes = variant == CifarVariant::cifar10 ? 1 : 2;
  const std::size_t record = label_bytes + 3 * kPlane;
  const std::size_t classes = variant == CifarVariant::cifar10 ? 10 : 100;

  ImageSet set;
  set.height = 32;
  set.width = 32;
  set.channels = 3;
  set.class_count = classes;
  for (const auto& path : paths) {
    const auto bytes = read_file(path);
    if (bytes.empty() || bytes.size() % record != 0) {
      fail(ErrorKind::data, "'" + path.string() + "': length " + std::to_string(bytes.size()) +
                                " is not a positive multiple of the " + std::to_string(record) + "-byte record");
    }
    const std::size_t n = bytes.size() / record;
    set.pixels.reserve(set.pixels.size() + n * 3 * kPlane);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t base = r * record;
      // CIFAR-100 stores coarse then fine; keep the fine label.
      const int label = bytes[base + label_bytes - 1];
      if (static_cast<std::size_t>(label) >= classes) {
        fail(ErrorKind::data, "'" + path.string() + "' offset " + std::to_string(base + label_bytes - 1) +
                                  ": label " + std::to_string(label) + " outside [0," + std::to_string(classes) + ")");
      }
      set.labels.push_back(label);
      const std::uint8_t* planes = bytes.data() + base + label_bytes;
      for (std::size_t p = 0; p < kPlane; ++p) {
        for (std::size_t c = 0; c < 3; ++c) set.pixels.push_back(planes[c * kPlane + p]);
      }
    }
    if (!set.source.empty()) set.source += ",";
    set.source += path.string();
  }
  set.count = set.labels.size();
  return set;
}

Tensor preprocess(const Tensor& images, ResizeMethod method) {
  const auto in = Shape4::of(images);
  if (in.c != 1 && in.c != 3) {
    fail(ErrorKind::shape, "preprocess: expected 1 or 3 channels, got " + std::to_string(in.c));
  }
  if (in.h == kImageSide && in.w == kImageSide && in.c == 3) return images;

  constexpr std::size_t S = kImageSide;
  Tensor out({in.n, S, S, 3});
  if (method == ResizeMethod::pad) {
    if (in.h > S || in.w > S) {
      fail(ErrorKind::shape, "preprocess: cannot pad " + mbnet::to_string(images.shape()) + " up to 32x32");
    }
    const std::size_t top = (S - in.h) / 2;
    const std::size_t left = (S - in.w) / 2;
    for (std::size_t n = 0; n < in.n; ++n) {
      for (std::size_t y = 0; y < in.h; ++y) {
        for (std::size_t x = 0; x < in.w; ++x) {
          const double* src = images.raw() + ((n * in.h + y) * in.w + x) * in.c;
          double* dst = out.raw() + ((n * S + y + top) * S + x + left) * 3;
          for (std::size_t c = 0; c < 3; ++c) dst[c] = src[in.c == 1 ? 0 : c];
        }
      }
    }
    return out;
  }

  // Bilinear with half-pixel centers and edge clamping.
  auto axis = [](std::size_t dst, std::size_t src_len) {
    const double pos = (static_cast<double>(dst) + 0.5) * static_cast<double>(src_len) / static_cast<double>(S) - 0.5;
    const double clamped = std::clamp(pos, 0.0, static_cast<double>(src_len - 1));
    const auto lo = static_cast<std::size_t>(std::floor(clamped));
    const std::size_t hi = std::min(lo + 1, src_len - 1);
    return std::array<double, 3>{static_cast<double>(lo), static_cast<double>(hi), clamped - static_cast<double>(lo)};
  };
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t y = 0; y < S; ++y) {
      const auto [y0, y1, fy] = axis(y, in.h);
      for (std::size_t x = 0; x < S; ++x) {
        const auto [x0, x1, fx] = axis(x, in.w);
        auto at = [&](double yy, double xx, std::size_t c) {
          return images[((n * in.h + static_cast<std::size_t>(yy)) * in.w + static_cast<std::size_t>(xx)) * in.c + c];
        };
        double* dst = out.raw() + ((n * S + y) * S + x) * 3;
        for (std::size_t c = 0; c < 3; ++c) {
          const std::size_t sc = in.c == 1 ? 0 : c;
          const double top = at(y0, x0, sc) * (1.0 - fx) + at(y0, x1, sc) * fx;
          const double bottom = at(y1, x0, sc) * (1.0 - fx) + at(y1, x1, sc) * fx;
          dst[c] = top * (1.0 - fy) + bottom * fy;
        }
      }
    }
  }
  return out;
}

const char* to_string(Split split) noexcept {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "unknown";
}

// ------------------------------------------------------------ dataset view

LabeledDataset::LabeledDataset(std::shared_ptr<const ImageSet> source, Split split, ResizeMethod resize)
    : source_(std::move(source)), split_(split), resize_(resize) {
  if (!source_) fail(ErrorKind::data, "dataset has no source");
  if (source_->labels.size() != source_->count || source_->pixels.size() != source_->count * source_->image_bytes()) {
    fail(ErrorKind::data, "image set '" + source_->source + "' is internally inconsistent");
  }
  index_.resize(source_->count);
  std::iota(index_.begin(), index_.end(), std::size_t{0});
}

LabeledDataset::LabeledDataset(std::shared_ptr<const ImageSet> source, std::vector<std::size_t> index, Split split,
                               ResizeMethod resize)
    : source_(std::move(source)), index_(std::move(index)), split_(split), resize_(resize) {}

std::vector<int> LabeledDataset::labels() const {
  std::vector<int> out;
  out.reserve(index_.size());
  for (auto i : index_) out.push_back(source_->labels[i]);
  return out;
}

std::vector<int> LabeledDataset::labels(std::span<const std::size_t> positions) const {
  std::vector<int> out;
  out.reserve(positions.size());
  for (auto p : positions) out.push_back(label(p));
  return out;
}

Tensor LabeledDataset::images(std::span<const std::size_t> positions) const {
  std::vector<std::size_t> src;
  src.reserve(positions.size());
  for (auto p : positions) src.push_back(index_.at(p));
  return preprocess(source_->tensor(src), resize_);
}

Tensor LabeledDataset::images() const { return preprocess(source_->tensor(index_), resize_); }

LabeledDataset LabeledDataset::subset(std::vector<std::size_t> positions, Split split) const {
  for (auto& p : positions) p = index_.at(p);
  return LabeledDataset(source_, std::move(positions), split, resize_);
}

LabeledDataset LabeledDataset::head(std::size_t n) const {
  n = std::min(n, index_.size());
  return LabeledDataset(source_, std::vector<std::size_t>(index_.begin(), index_.begin() + static_cast<std::ptrdiff_t>(n)),
                        split_, resize_);
}

std::pair<LabeledDataset, LabeledDataset> split_validation(const LabeledDataset& train, double fraction,
                                                           std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    fail(ErrorKind::usage, "validation fraction must lie in (0,1), got " + std::to_string(fraction));
  }
  const std::size_t n = train.size();
  const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val >= n) {
    fail(ErrorKind::data, "validation split of " + std::to_string(n) + " records at fraction " +
                              std::to_string(fraction) + " leaves an empty subset");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> val(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> rest(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(val.begin(), val.end());
  std::sort(rest.begin(), rest.end());
  return {train.subset(std::move(rest), Split::train), train.subset(std::move(val), Split::validation)};
}

// ---------------------------------------------------------------- batches

BatchIterator::BatchIterator(const LabeledDataset& dataset, std::size_t batch_size, std::uint64_t seed, bool shuffle)
    : dataset_(dataset), batch_size_(batch_size), shuffle_(shuffle), rng_(seed) {
  if (batch_size == 0) fail(ErrorKind::usage, "batch size must be >= 1");
  order_.resize(dataset.size());
}

void BatchIterator::begin_epoch() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (shuffle_) std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
  epoch_open_ = true;
}

bool BatchIterator::next(Batch& out) {
  if (!epoch_open_) begin_epoch();
  if (cursor_ >= order_.size()) {
    epoch_open_ = false;
    return false;
  }
  std::size_t take = std::min(batch_size_, order_.size() - cursor_);
  if (order_.size() - cursor_ - take == 1 && take > 1) ++take;
  out.positions.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                       order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + take));
  cursor_ += take;
  out.images = dataset_.images(out.positions);
  out.labels = dataset_.labels(out.positions);
  return true;
}

std::size_t BatchIterator::batches_per_epoch() const {
  const std::size_t n = order_.size();
  std::size_t batches = (n + batch_size_ - 1) / batch_size_;
  if (batches > 1 && n % batch_size_ == 1) --batches;
  return batches;
}

// ---------------------------------------------------------- named datasets

std::size_t class_count_of(const std::string& name) {
  if (name == "mnist" || name == "fashion-mnist" || name == "cifar10") return 10;
  if (name == "cifar100") return 100;
  fail(ErrorKind::usage, "unknown dataset '" + name + "' (expected mnist, fashion-mnist, cifar10 or cifar100)");
}

DatasetFiles locate_dataset(const std::string& name, const fs::path& dir) {
  class_count_of(name);
  DatasetFiles files{name, {}, {}};
  if (name == "mnist" || name == "fashion-mnist") {
    files.train = {dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte"};
    files.test = {dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte"};
  } else if (name == "cifar10") {
    for (int i = 1; i <= 5; ++i) files.train.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
    files.test = {dir / "test_batch.bin"};
  } else {
    files.train = {dir / "train.bin"};
    files.test = {dir / "test.bin"};
  }
  return files;
}

ImageSet load_named(const std::string& name, const fs::path& dir, Split split) {
  const auto files = locate_dataset(name, dir);
  const auto& paths = split == Split::test ? files.test : files.train;
  for (const auto& p : paths) {
    if (!fs::exists(p)) fail(ErrorKind::data, "dataset file '" + p.string() + "' not found");
  }
  if (name == "mnist" || name == "fashion-mnist") return load_idx(paths[0], paths[1], 10);
  return load_cifar(paths, name == "cifar10" ? CifarVariant::cifar10 : CifarVariant::cifar100);
}

}  // namespace mbnet::data
