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

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "mbnet/graph.hpp"
#include "mbnet/tensor.hpp"

namespace mbnet {

struct NadamHyper {
  double eta = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  // True: eta / sqrt(v_hat + eps). False: eta / (sqrt(v_hat) + eps).
  bool eps_inside_root = true;
};

/// Per-parameter moment estimates and step counter.
struct NadamSlot {
  Tensor m;
  Tensor v;
  std::uint64_t t = 0;
};

struct CorrectedMoments {
  double m_hat = 0.0;
  double v_hat = 0.0;
};

/// Bias-corrected moments of one element after step t, given the updated raw
/// moments and that step's gradient. At t = 1 the correction is the identity
/// on (g, g^2); returning those directly keeps it exact, since (c g) / c need
/// not round back to g.
CorrectedMoments nadam_corrected(double m, double v, double g, std::uint64_t t, const NadamHyper& hyper);

/// One NADAM update of `theta` in place:
///   m = b1 m + (1-b1) g            v = b2 v + (1-b2) g^2
///   m_hat = m / (1-b1^t)           v_hat = v / (1-b2^t)
///   theta -= eta / sqrt(v_hat + eps) * (b1 m_hat + (1-b1) / (1-b1^t) g)
/// An empty slot is initialized to zeros. `name` labels errors.
void nadam_step(Tensor& theta, const Tensor& grad, NadamSlot& slot, const NadamHyper& hyper,
                std::string_view name = "parameter");

/// theta -= lr * grad.
void sgd_step(Tensor& theta, const Tensor& grad, double lr, std::string_view name = "parameter");

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual std::string name() const = 0;
  virtual void update(const std::string& param, Tensor& theta, const Tensor& grad) = 0;
  /// Step size used by subsequent updates (eta for NADAM).
  virtual void set_learning_rate(double lr) = 0;

  // Hyperparameters and per-parameter state, for checkpoints.
  virtual void save(std::ostream& out) const = 0;
  virtual void load(std::istream& in) = 0;
};

class Nadam final : public Optimizer {
 public:
  explicit Nadam(NadamHyper hyper = {}) : hyper_(hyper) {}

  std::string name() const override { return "nadam"; }
  void update(const std::string& param, Tensor& theta, const Tensor& grad) override;
  void set_learning_rate(double lr) override { hyper_.eta = lr; }
  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

  const NadamHyper& hyper() const noexcept { return hyper_; }
  const std::map<std::string, NadamSlot>& slots() const noexcept { return slots_; }

 private:
  NadamHyper hyper_;
  std::map<std::string, NadamSlot> slots_;
};

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double lr) : lr_(lr) {}

  std::string name() const override { return "sgd"; }
  void update(const std::string& param, Tensor& theta, const Tensor& grad) override;
  void set_learning_rate(double lr) override { lr_ = lr; }
  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

  double lr() const noexcept { return lr_; }

 private:
  double lr_;
};

/// Updates every parameter in the store. The gradient keys must match the
/// parameter keys exactly; mismatches are reported by name.
void apply_updates(ParameterStore& store, const GradientStore& grads, Optimizer& optimizer);

/// "nadam" or "sgd"; lr applies to either (eta for NADAM).
std::unique_ptr<Optimizer> make_optimizer(std::string_view name, const NadamHyper& hyper);

}  // namespace mbnet
