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

#include "gemm.hpp"

#include <Eigen/Core>

namespace mbnet::detail {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate) {
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  Map out(c, M, N);
  if (!accumulate) out.setZero();
  if (m == 0 || n == 0 || k == 0) return;

  ConstMap lhs(a, trans_a ? K : M, trans_a ? M : K);
  ConstMap rhs(b, trans_b ? N : K, trans_b ? K : N);
  if (trans_a && trans_b) {
    out.noalias() += lhs.transpose() * rhs.transpose();
  } else if (trans_a) {
    out.noalias() += lhs.transpose() * rhs;
  } else if (trans_b) {
    out.noalias() += lhs * rhs.transpose();
  } else {
    out.noalias() += lhs * rhs;
  }
}

}  // namespace mbnet::detail
