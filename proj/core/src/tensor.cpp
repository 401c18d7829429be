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

#include "mbnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "gemm.hpp"

namespace mbnet {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::shape: return "shape";
    case ErrorKind::domain: return "domain";
    case ErrorKind::data: return "data";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) fail(ErrorKind::shape, "tensor rank must be >= 1");
  for (auto d : shape) {
    if (d == 0) fail(ErrorKind::shape, "tensor dimensions must be >= 1, got " + to_string(shape));
  }
}

void require_nonempty(const Tensor& t, const char* op) {
  if (t.empty()) fail(ErrorKind::shape, std::string(op) + ": placeholder tensor has no shape");
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != element_count(shape_)) {
    fail(ErrorKind::shape, "tensor data length " + std::to_string(data_.size()) +
                               " does not match shape " + to_string(shape_));
  }
}

Tensor Tensor::from(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    fail(ErrorKind::shape, "axis " + std::to_string(axis) + " out of range for " + to_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    fail(ErrorKind::shape, "index rank " + std::to_string(index.size()) + " != tensor rank " +
                               std::to_string(shape_.size()));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) fail(ErrorKind::shape, "index out of range for " + to_string(shape_));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
double Tensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool operator==(const Tensor& a, const Tensor& b) {
  if (a.shape_ != b.shape_) return false;
  // Bitwise comparison so that -0.0 vs 0.0 and NaN payloads are distinguished.
  return std::equal(a.data_.begin(), a.data_.end(), b.data_.begin(), [](double x, double y) {
    return std::memcmp(&x, &y, sizeof(double)) == 0;
  });
}

Shape4 Shape4::of(const Shape& s) {
  if (s.size() != 4) fail(ErrorKind::shape, "expected NHWC rank-4 shape, got " + to_string(s));
  return {s[0], s[1], s[2], s[3]};
}

Shape4 Shape4::of(const Tensor& t) { return of(t.shape()); }

Tensor zeros_like(const Tensor& t) {
  require_nonempty(t, "zeros_like");
  return Tensor(t.shape(), 0.0);
}

Tensor ones_like(const Tensor& t) {
  require_nonempty(t, "ones_like");
  return Tensor(t.shape(), 1.0);
}

Tensor elementwise(const Tensor& a, const Tensor& b, BinaryOp op) {
  require_nonempty(a, "elementwise");
  require_nonempty(b, "elementwise");
  if (a.shape() != b.shape()) {
    fail(ErrorKind::shape, "elementwise: shape mismatch " + to_string(a.shape()) + " vs " +
                               to_string(b.shape()));
  }
  Tensor out(a.shape());
  const std::size_t n = a.size();
  switch (op) {
    case BinaryOp::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
      break;
    case BinaryOp::sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
      break;
    case BinaryOp::mul:
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
      break;
    case BinaryOp::div:
      for (std::size_t i = 0; i < n; ++i) {
        if (b[i] == 0.0) fail(ErrorKind::domain, "elementwise div: zero divisor at index " + std::to_string(i));
        out[i] = a[i] / b[i];
      }
      break;
  }
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  require_nonempty(a, "scale");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
  return out;
}

Tensor add_scalar(const Tensor& a, double value) {
  require_nonempty(a, "add_scalar");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + value;
  return out;
}

void accumulate(Tensor& dst, const Tensor& src) {
  if (dst.shape() != src.shape()) {
    fail(ErrorKind::shape, "accumulate: shape mismatch " + to_string(dst.shape()) + " vs " +
                               to_string(src.shape()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_nonempty(a, "matmul");
  require_nonempty(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2) {
    fail(ErrorKind::shape, "matmul: expected rank-2 operands, got " + to_string(a.shape()) +
                               " and " + to_string(b.shape()));
  }
  if (a.dim(1) != b.dim(0)) {
    fail(ErrorKind::shape, "matmul: inner dimensions differ " + to_string(a.shape()) + " x " +
                               to_string(b.shape()));
  }
  Tensor out({a.dim(0), b.dim(1)});
  detail::gemm(false, false, a.dim(0), b.dim(1), a.dim(1), a.raw(), b.raw(), out.raw(), false);
  return out;
}

Tensor reduce(const Tensor& a, std::vector<std::size_t> axes, ReduceOp op, bool keep_dims) {
  require_nonempty(a, "reduce");
  const std::size_t rank = a.rank();
  if (axes.empty()) {
    axes.resize(rank);
    std::iota(axes.begin(), axes.end(), std::size_t{0});
  }
  std::vector<bool> reduced(rank, false);
  for (auto ax : axes) {
    if (ax >= rank) {
      fail(ErrorKind::shape, "reduce: axis " + std::to_string(ax) + " invalid for " + to_string(a.shape()));
    }
    if (reduced[ax]) fail(ErrorKind::shape, "reduce: axis " + std::to_string(ax) + " repeated");
    reduced[ax] = true;
  }

  Shape kept(rank);
  for (std::size_t i = 0; i < rank; ++i) kept[i] = reduced[i] ? 1 : a.dim(i);
  const auto in_strides = strides_of(a.shape());
  const auto out_strides = strides_of(kept);

  const double init = op == ReduceOp::max ? -std::numeric_limits<double>::infinity() : 0.0;
  std::vector<double> acc(element_count(kept), init);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < a.size(); ++flat) {
    std::size_t rem = flat;
    std::size_t out = 0;
    for (std::size_t ax = 0; ax < rank; ++ax) {
      const std::size_t i = rem / in_strides[ax];
      rem %= in_strides[ax];
      if (!reduced[ax]) out += i * out_strides[ax];
    }
    if (op == ReduceOp::max) {
      acc[out] = std::max(acc[out], a[flat]);
    } else {
      acc[out] += a[flat];
    }
  }
  if (op == ReduceOp::mean) {
    const double count = static_cast<double>(a.size() / acc.size());
    for (auto& v : acc) v /= count;
  }

  Shape out_shape;
  if (keep_dims) {
    out_shape = kept;
  } else {
    for (std::size_t i = 0; i < rank; ++i) {
      if (!reduced[i]) out_shape.push_back(a.dim(i));
    }
    if (out_shape.empty()) out_shape = {1};
  }
  return Tensor(std::move(out_shape), std::move(acc));
}

Tensor reshape(const Tensor& a, Shape shape) {
  require_nonempty(a, "reshape");
  check_shape(shape);
  if (element_count(shape) != a.size()) {
    fail(ErrorKind::shape, "reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  return Tensor(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()));
}

Tensor transpose(const Tensor& a, const std::vector<std::size_t>& perm) {
  require_nonempty(a, "transpose");
  const std::size_t rank = a.rank();
  if (perm.size() != rank) fail(ErrorKind::shape, "transpose: permutation length differs from rank");
  std::vector<bool> seen(rank, false);
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (perm[i] >= rank || seen[perm[i]]) fail(ErrorKind::shape, "transpose: invalid permutation");
    seen[perm[i]] = true;
    out_shape[i] = a.dim(perm[i]);
  }
  const auto in_strides = strides_of(a.shape());
  const auto out_strides = strides_of(out_shape);
  Tensor out(out_shape);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::size_t rem = flat;
    std::size_t src = 0;
    for (std::size_t ax = 0; ax < rank; ++ax) {
      const std::size_t i = rem / out_strides[ax];
      rem %= out_strides[ax];
      src += i * in_strides[perm[ax]];
    }
    out[flat] = a[src];
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) fail(ErrorKind::shape, "transpose: expected rank-2, got " + to_string(a.shape()));
  return transpose(a, {1, 0});
}

Tensor concat(const std::vector<const Tensor*>& parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorKind::shape, "concat: no inputs");
  const Tensor& first = *parts.front();
  require_nonempty(first, "concat");
  if (axis >= first.rank()) {
    fail(ErrorKind::shape, "concat: axis " + std::to_string(axis) + " invalid for " + to_string(first.shape()));
  }
  Shape out_shape = first.shape();
  out_shape[axis] = 0;
  for (const Tensor* p : parts) {
    require_nonempty(*p, "concat");
    if (p->rank() != first.rank()) fail(ErrorKind::shape, "concat: rank mismatch");
    for (std::size_t ax = 0; ax < first.rank(); ++ax) {
      if (ax != axis && p->dim(ax) != first.dim(ax)) {
        fail(ErrorKind::shape, "concat: " + to_string(p->shape()) + " incompatible with " +
                                   to_string(first.shape()) + " along axis " + std::to_string(axis));
      }
    }
    out_shape[axis] += p->dim(axis);
  }

  std::size_t outer = 1;
  for (std::size_t ax = 0; ax < axis; ++ax) outer *= first.dim(ax);
  std::size_t inner = 1;
  for (std::size_t ax = axis + 1; ax < first.rank(); ++ax) inner *= first.dim(ax);

  Tensor out(out_shape);
  const std::size_t out_row = out_shape[axis] * inner;
  std::size_t col = 0;
  for (const Tensor* p : parts) {
    const std::size_t row = p->dim(axis) * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(p->raw() + o * row, row, out.raw() + o * out_row + col);
    }
    col += row;
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  std::vector<const Tensor*> ptrs;
  ptrs.reserve(parts.size());
  for (const auto& p : parts) ptrs.push_back(&p);
  return concat(ptrs, axis);
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  require_nonempty(a, "slice");
  if (axis >= a.rank()) fail(ErrorKind::shape, "slice: axis out of range");
  if (length == 0 || start + length > a.dim(axis)) {
    fail(ErrorKind::shape, "slice: range [" + std::to_string(start) + "," + std::to_string(start + length) +
                               ") outside axis of size " + std::to_string(a.dim(axis)));
  }
  std::size_t outer = 1;
  for (std::size_t ax = 0; ax < axis; ++ax) outer *= a.dim(ax);
  std::size_t inner = 1;
  for (std::size_t ax = axis + 1; ax < a.rank(); ++ax) inner *= a.dim(ax);
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  Tensor out(out_shape);
  const std::size_t in_row = a.dim(axis) * inner;
  const std::size_t out_row = length * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(a.raw() + o * in_row + start * inner, out_row, out.raw() + o * out_row);
  }
  return out;
}

bool all_finite(const Tensor& t) noexcept {
  return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace mbnet
