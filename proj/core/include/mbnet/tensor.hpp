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

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "mbnet/error.hpp"

namespace mbnet {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Dense row-major array of doubles.
///
/// A default-constructed Tensor is a placeholder with no shape; every public
/// operation rejects it. All other tensors have rank >= 1, every dimension
/// >= 1, and exactly element_count(shape) elements.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor from(std::initializer_list<double> values);
  static Tensor scalar(double value) { return Tensor({1}, value); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return shape_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* raw() noexcept { return data_.data(); }
  const double* raw() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // Multi-index access, row-major. Bounds are checked.
  double& at(std::initializer_list<std::size_t> index);
  double at(std::initializer_list<std::size_t> index) const;

  void fill(double value);

  /// Bit-exact equality of shape and elements.
  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

/// Canonical image layout: batch, height, width, channels.
struct Shape4 {
  std::size_t n = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t c = 0;

  static Shape4 of(const Tensor& t);
  static Shape4 of(const Shape& s);
  Shape to_shape() const { return {n, h, w, c}; }
  std::size_t pixels() const { return n * h * w; }
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

Tensor zeros_like(const Tensor& t);
Tensor ones_like(const Tensor& t);

enum class BinaryOp { add, sub, mul, div };

Tensor elementwise(const Tensor& a, const Tensor& b, BinaryOp op);
inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryOp::add); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryOp::sub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryOp::mul); }
inline Tensor div(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryOp::div); }

// Scalar-tensor forms; the only broadcasting supported.
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

// In-place accumulate: dst += src. Shapes must match.
void accumulate(Tensor& dst, const Tensor& src);

/// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

enum class ReduceOp { sum, max, mean };

/// Reduces over `axes` (empty means all axes). Reduced axes are dropped
/// unless keep_dims is set, in which case they remain with size 1. Reducing
/// every axis without keep_dims yields shape [1].
Tensor reduce(const Tensor& a, std::vector<std::size_t> axes, ReduceOp op,
              bool keep_dims = false);

Tensor reshape(const Tensor& a, Shape shape);

/// General axis permutation: result.dim(i) == a.dim(perm[i]).
Tensor transpose(const Tensor& a, const std::vector<std::size_t>& perm);
/// Rank-2 transpose.
Tensor transpose(const Tensor& a);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor concat(const std::vector<const Tensor*>& parts, std::size_t axis);

/// Contiguous range [start, start+length) along one axis.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);

bool all_finite(const Tensor& t) noexcept;

}  // namespace mbnet
