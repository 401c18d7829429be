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

#include "mbnet/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "gemm.hpp"

namespace mbnet::ops {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.empty() || t.rank() != rank) {
    fail(ErrorKind::shape, std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                               to_string(t.shape()));
  }
}

void require_same_shape(const Shape& expected, const Tensor& got, const char* what) {
  if (got.shape() != expected) {
    fail(ErrorKind::shape, std::string(what) + ": gradient shape " + to_string(got.shape()) +
                               " does not match forward output " + to_string(expected));
  }
}

struct ConvPlan {
  Shape4 in;
  std::size_t kh, kw, out_channels;
  WindowGeometry gy, gx;
  std::size_t stride;

  Shape4 out() const { return {in.n, gy.out, gx.out, out_channels}; }
  bool is_identity_window() const {
    return kh == 1 && kw == 1 && stride == 1 && gy.pad_before == 0 && gx.pad_before == 0;
  }
};

ConvPlan plan_conv(const Tensor& x, const Shape& kernel, ConvConfig config, bool depthwise) {
  require_rank(x, 4, "conv2d input");
  if (kernel.size() != 4) fail(ErrorKind::shape, "conv2d: kernel must be rank 4, got " + to_string(kernel));
  if (config.stride == 0) fail(ErrorKind::domain, "conv2d: stride must be >= 1");
  const auto in = Shape4::of(x);
  if (kernel[2] != in.c) {
    fail(ErrorKind::shape, "conv2d: kernel expects " + std::to_string(kernel[2]) + " input channels, input " +
                               to_string(x.shape()) + " has " + std::to_string(in.c));
  }
  if (depthwise && kernel[3] != 1) {
    fail(ErrorKind::shape, "depthwise conv: kernel must be [kh,kw,C,1], got " + to_string(kernel));
  }
  ConvPlan plan{in, kernel[0], kernel[1], depthwise ? in.c : kernel[3], {}, {}, config.stride};
  plan.gy = window_geometry(in.h, plan.kh, config.stride, config.padding);
  plan.gx = window_geometry(in.w, plan.kw, config.stride, config.padding);
  return plan;
}

void check_bias(const Tensor& bias, std::size_t channels, const char* what) {
  if (bias.empty() || bias.rank() != 1 || bias.dim(0) != channels) {
    fail(ErrorKind::shape, std::string(what) + ": bias must be [" + std::to_string(channels) + "], got " +
                               to_string(bias.shape()));
  }
}

// Unfolds every receptive field into a row: cols[P, kh*kw*C] with column
// order (ky, kx, c), matching the kernel's row-major [kh,kw,C,F] layout.
std::vector<double> im2col(const Tensor& x, const ConvPlan& p) {
  const auto& in = p.in;
  const std::size_t row_len = p.kh * p.kw * in.c;
  const std::size_t rows = in.n * p.gy.out * p.gx.out;
  std::vector<double> cols(rows * row_len, 0.0);
  const double* src = x.raw();
  std::size_t r = 0;
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t oy = 0; oy < p.gy.out; ++oy) {
      for (std::size_t ox = 0; ox < p.gx.out; ++ox, ++r) {
        double* dst = cols.data() + r * row_len;
        for (std::size_t ky = 0; ky < p.kh; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * p.stride + ky) - static_cast<std::ptrdiff_t>(p.gy.pad_before);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
          for (std::size_t kx = 0; kx < p.kw; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * p.stride + kx) - static_cast<std::ptrdiff_t>(p.gx.pad_before);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
            const double* pix = src + ((n * in.h + static_cast<std::size_t>(iy)) * in.w + static_cast<std::size_t>(ix)) * in.c;
            std::copy_n(pix, in.c, dst + (ky * p.kw + kx) * in.c);
          }
        }
      }
    }
  }
  return cols;
}

void col2im(const std::vector<double>& cols, const ConvPlan& p, Tensor& grad_x) {
  const auto& in = p.in;
  const std::size_t row_len = p.kh * p.kw * in.c;
  double* dst = grad_x.raw();
  std::size_t r = 0;
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t oy = 0; oy < p.gy.out; ++oy) {
      for (std::size_t ox = 0; ox < p.gx.out; ++ox, ++r) {
        const double* src = cols.data() + r * row_len;
        for (std::size_t ky = 0; ky < p.kh; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * p.stride + ky) - static_cast<std::ptrdiff_t>(p.gy.pad_before);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
          for (std::size_t kx = 0; kx < p.kw; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * p.stride + kx) - static_cast<std::ptrdiff_t>(p.gx.pad_before);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
            double* pix = dst + ((n * in.h + static_cast<std::size_t>(iy)) * in.w + static_cast<std::size_t>(ix)) * in.c;
            const double* g = src + (ky * p.kw + kx) * in.c;
            for (std::size_t c = 0; c < in.c; ++c) pix[c] += g[c];
          }
        }
      }
    }
  }
}

}  // namespace

WindowGeometry window_geometry(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding) {
  if (stride == 0) fail(ErrorKind::domain, "window stride must be >= 1");
  if (kernel == 0) fail(ErrorKind::domain, "window size must be >= 1");
  if (padding == Padding::valid) {
    if (kernel > in) {
      fail(ErrorKind::shape, "window of size " + std::to_string(kernel) + " does not fit input extent " +
                                 std::to_string(in));
    }
    return {(in - kernel) / stride + 1, 0};
  }
  const std::size_t out = (in + stride - 1) / stride;
  const std::size_t span = (out - 1) * stride + kernel;
  const std::size_t total = span > in ? span - in : 0;
  return {out, total / 2};
}

// ---------------------------------------------------------------- conv2d

Tensor conv2d_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias, ConvConfig config,
                      ConvContext* ctx) {
  const ConvPlan p = plan_conv(x, kernel.shape(), config, false);
  check_bias(bias, p.out_channels, "conv2d");
  const Shape4 out_shape = p.out();
  Tensor out(out_shape.to_shape());
  const std::size_t rows = out_shape.pixels();
  const std::size_t depth = p.kh * p.kw * p.in.c;

  if (p.is_identity_window()) {
    detail::gemm(false, false, rows, p.out_channels, depth, x.raw(), kernel.raw(), out.raw(), false);
  } else {
    const auto cols = im2col(x, p);
    detail::gemm(false, false, rows, p.out_channels, depth, cols.data(), kernel.raw(), out.raw(), false);
  }
  double* o = out.raw();
  for (std::size_t r = 0; r < rows; ++r, o += p.out_channels) {
    for (std::size_t f = 0; f < p.out_channels; ++f) o[f] += bias[f];
  }
  if (ctx) *ctx = ConvContext{x, kernel, config};
  return out;
}

ConvGrads conv2d_backward(const ConvContext& ctx, const Tensor& grad_out) {
  const ConvPlan p = plan_conv(ctx.input, ctx.kernel.shape(), ctx.config, false);
  require_same_shape(p.out().to_shape(), grad_out, "conv2d backward");
  const std::size_t rows = p.out().pixels();
  const std::size_t depth = p.kh * p.kw * p.in.c;
  const std::size_t f = p.out_channels;

  ConvGrads g{Tensor(ctx.input.shape()), Tensor(ctx.kernel.shape()), Tensor({f})};
  const double* go = grad_out.raw();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < f; ++j) g.bias[j] += go[r * f + j];
  }

  if (p.is_identity_window()) {
    detail::gemm(true, false, depth, f, rows, ctx.input.raw(), go, g.kernel.raw(), false);
    detail::gemm(false, true, rows, depth, f, go, ctx.kernel.raw(), g.input.raw(), false);
  } else {
    auto cols = im2col(ctx.input, p);
    detail::gemm(true, false, depth, f, rows, cols.data(), go, g.kernel.raw(), false);
    detail::gemm(false, true, rows, depth, f, go, ctx.kernel.raw(), cols.data(), false);
    col2im(cols, p, g.input);
  }
  return g;
}

Tensor pointwise_conv2d_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias, ConvContext* ctx) {
  if (kernel.rank() != 4 || kernel.dim(0) != 1 || kernel.dim(1) != 1) {
    fail(ErrorKind::shape, "pointwise conv: kernel must be [1,1,C_in,C_out], got " + to_string(kernel.shape()));
  }
  return conv2d_forward(x, kernel, bias, ConvConfig{1, Padding::same}, ctx);
}

ConvGrads pointwise_conv2d_backward(const ConvContext& ctx, const Tensor& grad_out) {
  return conv2d_backward(ctx, grad_out);
}

// ------------------------------------------------------------- depthwise

Tensor depthwise_conv2d_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias, ConvConfig config,
                                ConvContext* ctx) {
  const ConvPlan p = plan_conv(x, kernel.shape(), config, true);
  check_bias(bias, p.in.c, "depthwise conv");
  const auto& in = p.in;
  const std::size_t C = in.c;
  Tensor out(p.out().to_shape());
  double* o = out.raw();
  const double* k = kernel.raw();
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t oy = 0; oy < p.gy.out; ++oy) {
      for (std::size_t ox = 0; ox < p.gx.out; ++ox, o += C) {
        for (std::size_t c = 0; c < C; ++c) o[c] = bias[c];
        for (std::size_t ky = 0; ky < p.kh; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * p.stride + ky) - static_cast<std::ptrdiff_t>(p.gy.pad_before);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
          for (std::size_t kx = 0; kx < p.kw; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * p.stride + kx) - static_cast<std::ptrdiff_t>(p.gx.pad_before);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
            const double* pix = x.raw() + ((n * in.h + static_cast<std::size_t>(iy)) * in.w + static_cast<std::size_t>(ix)) * C;
            const double* kk = k + (ky * p.kw + kx) * C;
            for (std::size_t c = 0; c < C; ++c) o[c] += pix[c] * kk[c];
          }
        }
      }
    }
  }
  if (ctx) *ctx = ConvContext{x, kernel, config};
  return out;
}

ConvGrads depthwise_conv2d_backward(const ConvContext& ctx, const Tensor& grad_out) {
  const ConvPlan p = plan_conv(ctx.input, ctx.kernel.shape(), ctx.config, true);
  require_same_shape(p.out().to_shape(), grad_out, "depthwise conv backward");
  const auto& in = p.in;
  const std::size_t C = in.c;
  ConvGrads g{Tensor(ctx.input.shape()), Tensor(ctx.kernel.shape()), Tensor({C})};
  const double* go = grad_out.raw();
  const double* k = ctx.kernel.raw();
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t oy = 0; oy < p.gy.out; ++oy) {
      for (std::size_t ox = 0; ox < p.gx.out; ++ox, go += C) {
        for (std::size_t c = 0; c < C; ++c) g.bias[c] += go[c];
        for (std::size_t ky = 0; ky < p.kh; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * p.stride + ky) - static_cast<std::ptrdiff_t>(p.gy.pad_before);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
          for (std::size_t kx = 0; kx < p.kw; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * p.stride + kx) - static_cast<std::ptrdiff_t>(p.gx.pad_before);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
            const std::size_t pix = ((n * in.h + static_cast<std::size_t>(iy)) * in.w + static_cast<std::size_t>(ix)) * C;
            const std::size_t kk = (ky * p.kw + kx) * C;
            for (std::size_t c = 0; c < C; ++c) {
              g.kernel[kk + c] += ctx.input[pix + c] * go[c];
              g.input[pix + c] += k[kk + c] * go[c];
            }
          }
        }
      }
    }
  }
  return g;
}

// ------------------------------------------------------------- batchnorm

Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                         Tensor& running_var, BatchNormConfig config, BatchNormContext* ctx) {
  if (x.empty() || x.rank() < 2) fail(ErrorKind::shape, "batchnorm: input must have rank >= 2");
  const std::size_t C = x.shape().back();
  const std::array<const Tensor*, 4> per_channel{&gamma, &beta, &running_mean, &running_var};
  for (const Tensor* t : per_channel) {
    if (t->rank() != 1 || t->dim(0) != C) {
      fail(ErrorKind::shape, "batchnorm: per-channel tensors must be [" + std::to_string(C) + "], got " +
                                 to_string(t->shape()));
    }
  }
  if (config.eps <= 0.0) fail(ErrorKind::domain, "batchnorm: eps must be positive");
  const std::size_t M = x.size() / C;

  std::vector<double> mean(C, 0.0);
  std::vector<double> var(C, 0.0);
  if (config.mode == Mode::train) {
    if (x.dim(0) < 2) fail(ErrorKind::shape, "batchnorm: train mode needs a batch of at least 2");
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t c = 0; c < C; ++c) mean[c] += x[i * C + c];
    }
    for (auto& m : mean) m /= static_cast<double>(M);
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        const double d = x[i * C + c] - mean[c];
        var[c] += d * d;
      }
    }
    for (auto& v : var) v /= static_cast<double>(M);
    for (std::size_t c = 0; c < C; ++c) {
      running_mean[c] = config.momentum * running_mean[c] + (1.0 - config.momentum) * mean[c];
      running_var[c] = config.momentum * running_var[c] + (1.0 - config.momentum) * var[c];
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = running_mean[c];
      var[c] = running_var[c];
    }
  }

  std::vector<double> inv_std(C);
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + config.eps);

  Tensor normalized(x.shape());
  Tensor out(x.shape());
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      const double xh = (x[i * C + c] - mean[c]) * inv_std[c];
      normalized[i * C + c] = xh;
      out[i * C + c] = xh * gamma[c] + beta[c];
    }
  }
  if (ctx) *ctx = BatchNormContext{std::move(normalized), std::move(inv_std), gamma, config.mode};
  return out;
}

BatchNormGrads batchnorm_backward(const BatchNormContext& ctx, const Tensor& grad_out) {
  require_same_shape(ctx.normalized.shape(), grad_out, "batchnorm backward");
  const std::size_t C = ctx.gamma.size();
  const std::size_t M = grad_out.size() / C;
  BatchNormGrads g{Tensor(grad_out.shape()), Tensor({C}), Tensor({C})};
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      g.beta[c] += grad_out[i * C + c];
      g.gamma[c] += grad_out[i * C + c] * ctx.normalized[i * C + c];
    }
  }
  if (ctx.mode == Mode::infer) {
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        g.input[i * C + c] = grad_out[i * C + c] * ctx.gamma[c] * ctx.inv_std[c];
      }
    }
    return g;
  }
  // dx = gamma * inv_std / M * (M*dy - sum(dy) - xhat * sum(dy * xhat))
  const double m = static_cast<double>(M);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      const double dy = grad_out[i * C + c];
      g.input[i * C + c] = ctx.gamma[c] * ctx.inv_std[c] / m *
                           (m * dy - g.beta[c] - ctx.normalized[i * C + c] * g.gamma[c]);
    }
  }
  return g;
}

// ------------------------------------------------------------------ relu

Tensor relu_forward(const Tensor& x, ReluContext* ctx) {
  if (x.empty()) fail(ErrorKind::shape, "relu: placeholder input");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  if (ctx) ctx->input = x;
  return out;
}

Tensor relu_backward(const ReluContext& ctx, const Tensor& grad_out) {
  require_same_shape(ctx.input.shape(), grad_out, "relu backward");
  Tensor g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = ctx.input[i] > 0.0 ? grad_out[i] : 0.0;
  return g;
}

// --------------------------------------------------------------- maxpool

Tensor maxpool2d_forward(const Tensor& x, PoolConfig config, PoolContext* ctx) {
  require_rank(x, 4, "maxpool input");
  const auto in = Shape4::of(x);
  if (config.pool == 0 || config.stride == 0) fail(ErrorKind::domain, "maxpool: pool and stride must be >= 1");
  if (config.padding == Padding::valid && (config.pool > in.h || config.pool > in.w)) {
    fail(ErrorKind::shape, "maxpool: window " + std::to_string(config.pool) + "x" + std::to_string(config.pool) +
                               " larger than input " + to_string(x.shape()));
  }
  const auto gy = window_geometry(in.h, config.pool, config.stride, config.padding);
  const auto gx = window_geometry(in.w, config.pool, config.stride, config.padding);
  Tensor out({in.n, gy.out, gx.out, in.c});
  std::vector<std::size_t> argmax(out.size());
  std::size_t o = 0;
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t oy = 0; oy < gy.out; ++oy) {
      for (std::size_t ox = 0; ox < gx.out; ++ox) {
        for (std::size_t c = 0; c < in.c; ++c, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_at = 0;
          bool found = false;
          for (std::size_t ky = 0; ky < config.pool; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * config.stride + ky) - static_cast<std::ptrdiff_t>(gy.pad_before);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
            for (std::size_t kx = 0; kx < config.pool; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * config.stride + kx) - static_cast<std::ptrdiff_t>(gx.pad_before);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
              const std::size_t at = ((n * in.h + static_cast<std::size_t>(iy)) * in.w + static_cast<std::size_t>(ix)) * in.c + c;
              if (!found || x[at] > best) {
                best = x[at];
                best_at = at;
                found = true;
              }
            }
          }
          out[o] = best;
          argmax[o] = best_at;
        }
      }
    }
  }
  if (ctx) *ctx = PoolContext{x.shape(), std::move(argmax)};
  return out;
}

Tensor maxpool2d_backward(const PoolContext& ctx, const Tensor& grad_out) {
  if (grad_out.size() != ctx.argmax.size()) {
    fail(ErrorKind::shape, "maxpool backward: gradient " + to_string(grad_out.shape()) +
                               " does not match forward output");
  }
  Tensor g(ctx.input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i) g[ctx.argmax[i]] += grad_out[i];
  return g;
}

// --------------------------------------------------------------- dropout

Tensor dropout_forward(const Tensor& x, double rate, Rng& rng, Mode mode, DropoutContext* ctx) {
  if (x.empty()) fail(ErrorKind::shape, "dropout: placeholder input");
  if (!(rate >= 0.0 && rate < 1.0)) {
    fail(ErrorKind::domain, "dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::infer || rate == 0.0) {
    if (ctx) ctx->mask = Tensor();
    return x;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor mask(x.shape());
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = keep(rng) ? keep_scale : 0.0;
    out[i] = x[i] * mask[i];
  }
  if (ctx) ctx->mask = std::move(mask);
  return out;
}

Tensor dropout_backward(const DropoutContext& ctx, const Tensor& grad_out) {
  if (ctx.mask.empty()) return grad_out;
  return mul(grad_out, ctx.mask);
}

// ----------------------------------------------------------------- dense

Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias, DenseContext* ctx) {
  require_rank(x, 2, "dense input");
  require_rank(weight, 2, "dense weight");
  if (weight.dim(0) != x.dim(1)) {
    fail(ErrorKind::shape, "dense: input " + to_string(x.shape()) + " incompatible with weight " +
                               to_string(weight.shape()));
  }
  check_bias(bias, weight.dim(1), "dense");
  const std::size_t n = x.dim(0);
  const std::size_t out_dim = weight.dim(1);
  Tensor out({n, out_dim});
  detail::gemm(false, false, n, out_dim, x.dim(1), x.raw(), weight.raw(), out.raw(), false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < out_dim; ++j) out[i * out_dim + j] += bias[j];
  }
  if (ctx) *ctx = DenseContext{x, weight};
  return out;
}

DenseGrads dense_backward(const DenseContext& ctx, const Tensor& grad_out) {
  const std::size_t n = ctx.input.dim(0);
  const std::size_t in_dim = ctx.weight.dim(0);
  const std::size_t out_dim = ctx.weight.dim(1);
  require_same_shape({n, out_dim}, grad_out, "dense backward");
  DenseGrads g{Tensor(ctx.input.shape()), Tensor(ctx.weight.shape()), Tensor({out_dim})};
  detail::gemm(false, true, n, in_dim, out_dim, grad_out.raw(), ctx.weight.raw(), g.input.raw(), false);
  detail::gemm(true, false, in_dim, out_dim, n, ctx.input.raw(), grad_out.raw(), g.weight.raw(), false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < out_dim; ++j) g.bias[j] += grad_out[i * out_dim + j];
  }
  return g;
}

// ------------------------------------------------------------------ loss

SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax cross-entropy logits");
  const std::size_t n = logits.dim(0);
  const std::size_t k = logits.dim(1);
  if (labels.size() != n) {
    fail(ErrorKind::shape, "softmax cross-entropy: " + std::to_string(labels.size()) + " labels for " +
                               std::to_string(n) + " rows");
  }
  SoftmaxCrossEntropy r{0.0, Tensor(logits.shape()), Tensor(logits.shape())};
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      fail(ErrorKind::domain, "softmax cross-entropy: label " + std::to_string(label) + " at row " +
                                  std::to_string(i) + " outside [0," + std::to_string(k) + ")");
    }
    const double* row = logits.raw() + i * k;
    const double peak = *std::max_element(row, row + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(row[j] - peak);
    const double log_total = std::log(total);
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(row[j] - peak - log_total);
      r.probabilities[i * k + j] = p;
      r.grad_logits[i * k + j] = p / static_cast<double>(n);
    }
    r.grad_logits[i * k + static_cast<std::size_t>(label)] -= 1.0 / static_cast<double>(n);
    r.loss += -(row[label] - peak - log_total);
  }
  r.loss /= static_cast<double>(n);
  return r;
}

}  // namespace mbnet::ops
