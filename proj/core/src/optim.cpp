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

#include "mbnet/optim.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mbnet/serialize.hpp"

namespace mbnet {

namespace {

void check_update_inputs(const Tensor& theta, const Tensor& grad, std::string_view name) {
  if (theta.shape() != grad.shape()) {
    fail(ErrorKind::shape, "gradient for '" + std::string(name) + "' has shape " + to_string(grad.shape()) +
                               ", parameter has " + to_string(theta.shape()));
  }
  if (!all_finite(grad)) {
    fail(ErrorKind::numerical, "non-finite gradient for parameter '" + std::string(name) + "'");
  }
}

}  // namespace

CorrectedMoments nadam_corrected(double m, double v, double g, std::uint64_t t, const NadamHyper& h) {
  if (t == 1) return {g, g * g};
  const double td = static_cast<double>(t);
  return {m / (1.0 - std::pow(h.beta1, td)), v / (1.0 - std::pow(h.beta2, td))};
}

void nadam_step(Tensor& theta, const Tensor& grad, NadamSlot& slot, const NadamHyper& h, std::string_view name) {
  check_update_inputs(theta, grad, name);
  if (!(h.eps > 0.0)) fail(ErrorKind::domain, "nadam: eps must be positive");
  if (slot.m.empty()) {
    slot.m = Tensor(theta.shape());
    slot.v = Tensor(theta.shape());
    slot.t = 0;
  } else if (slot.m.shape() != theta.shape() || slot.v.shape() != theta.shape()) {
    fail(ErrorKind::shape, "nadam: optimizer state for '" + std::string(name) + "' does not match parameter shape");
  }
  slot.t += 1;
  const double t = static_cast<double>(slot.t);
  const double bias1 = 1.0 - std::pow(h.beta1, t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    slot.m[i] = h.beta1 * slot.m[i] + (1.0 - h.beta1) * g;
    slot.v[i] = h.beta2 * slot.v[i] + (1.0 - h.beta2) * g * g;
    const auto [m_hat, v_hat] = nadam_corrected(slot.m[i], slot.v[i], g, slot.t, h);
    const double denom = h.eps_inside_root ? std::sqrt(v_hat + h.eps) : std::sqrt(v_hat) + h.eps;
    theta[i] -= h.eta / denom * (h.beta1 * m_hat + (1.0 - h.beta1) / bias1 * g);
  }
}

void sgd_step(Tensor& theta, const Tensor& grad, double lr, std::string_view name) {
  check_update_inputs(theta, grad, name);
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
}

void Nadam::update(const std::string& param, Tensor& theta, const Tensor& grad) {
  nadam_step(theta, grad, slots_[param], hyper_, param);
}

void Nadam::save(std::ostream& out) const {
  write_f64(out, hyper_.eta);
  write_f64(out, hyper_.beta1);
  write_f64(out, hyper_.beta2);
  write_f64(out, hyper_.eps);
  write_u8(out, hyper_.eps_inside_root ? 1 : 0);
  write_u64(out, slots_.size());
  for (const auto& [name, slot] : slots_) {
    write_string(out, name);
    write_u64(out, slot.t);
    write_tensor(out, slot.m);
    write_tensor(out, slot.v);
  }
}

void Nadam::load(std::istream& in) {
  hyper_.eta = read_f64(in);
  hyper_.beta1 = read_f64(in);
  hyper_.beta2 = read_f64(in);
  hyper_.eps = read_f64(in);
  hyper_.eps_inside_root = read_u8(in) != 0;
  slots_.clear();
  const auto n = read_u64(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto name = read_string(in);
    NadamSlot slot;
    slot.t = read_u64(in);
    slot.m = read_tensor(in);
    slot.v = read_tensor(in);
    slots_.emplace(std::move(name), std::move(slot));
  }
}

void Sgd::update(const std::string& param, Tensor& theta, const Tensor& grad) { sgd_step(theta, grad, lr_, param); }

void Sgd::save(std::ostream& out) const { write_f64(out, lr_); }

void Sgd::load(std::istream& in) { lr_ = read_f64(in); }

void apply_updates(ParameterStore& store, const GradientStore& grads, Optimizer& optimizer) {
  std::vector<std::string> missing;
  std::vector<std::string> extra;
  for (const auto& [name, t] : store) {
    if (!grads.contains(name)) missing.push_back(name);
  }
  for (const auto& [name, g] : grads) {
    if (!store.contains(name)) extra.push_back(name);
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "gradient keys do not match parameters;";
    auto list = [&](const char* label, const std::vector<std::string>& names) {
      if (names.empty()) return;
      msg += std::string(" ") + label + ":";
      for (const auto& n : names) msg += " " + n;
    };
    list("missing", missing);
    list("unexpected", extra);
    fail(ErrorKind::usage, msg);
  }
  // Validate everything first so a bad entry never leaves a partial update.
  for (const auto& [name, theta] : store) check_update_inputs(theta, grads.at(name), name);
  for (auto& [name, theta] : store) optimizer.update(name, theta, grads.at(name));
}

std::unique_ptr<Optimizer> make_optimizer(std::string_view name, const NadamHyper& hyper) {
  if (name == "nadam") return std::make_unique<Nadam>(hyper);
  if (name == "sgd") return std::make_unique<Sgd>(hyper.eta);
  fail(ErrorKind::usage, "unknown optimizer '" + std::string(name) + "' (expected nadam or sgd)");
}

}  // namespace mbnet
