#include "bargan/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace bargan {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

bool want_grad(Tape* tape, std::initializer_list<const TensorPtr*> inputs) {
  if (tape == nullptr) return false;
  for (const TensorPtr* t : inputs) {
    if ((*t)->requires_grad) return true;
  }
  return false;
}

}  // namespace

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

TensorPtr Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  for (int d : shape) require(d >= 0, "tensor extent must be non-negative, got " + shape_str(shape));
  auto t = std::make_shared<Tensor>();
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  t->shape = std::move(shape);
  t->values.assign(n, 0.0f);
  t->grad.assign(n, 0.0f);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr Tensor::full(std::vector<int> shape, float value, bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  for (float& v : t->values) v = value;
  return t;
}

TensorPtr Tensor::from_values(std::vector<int> shape, std::vector<float> values,
                              bool requires_grad) {
  require(shape_numel(shape) == static_cast<std::int64_t>(values.size()),
          "value count " + std::to_string(values.size()) + " does not match shape " +
              shape_str(shape));
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->values = std::move(values);
  t->grad.assign(t->values.size(), 0.0f);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr Tensor::scalar(float value, bool requires_grad) {
  return from_values({1}, {value}, requires_grad);
}

float Tensor::item() const {
  if (numel() != 1) throw std::logic_error("item() on non-scalar tensor " + shape_str(shape));
  return values[0];
}

void Tensor::zero_grad() {
  for (float& g : grad) g = 0.0f;
}

bool Tensor::all_finite() const {
  for (float v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tape::record(std::function<void()> backward_step) {
  nodes_.push_back(std::move(backward_step));
}

void Tape::backward(const TensorPtr& loss) {
  if (loss->numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss->shape));
  }
  loss->grad[0] = 1.0f;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

void Tape::clear() { nodes_.clear(); }

// ---- operations ----

TensorPtr fully_connected(Tape* tape, const TensorPtr& x, const TensorPtr& weight,
                          const TensorPtr& bias) {
  require(x->rank() == 2 && weight->rank() == 2 && bias->rank() == 1,
          "fully_connected: expected ranks 2/2/1, got " + shape_str(x->shape) + ", " +
              shape_str(weight->shape) + ", " + shape_str(bias->shape));
  require(x->dim(1) == weight->dim(0) && weight->dim(1) == bias->dim(0),
          "fully_connected: dimension mismatch between x " + shape_str(x->shape) + " and weight " +
              shape_str(weight->shape));
  const int B = x->dim(0), n = x->dim(1), m = weight->dim(1);
  auto out = Tensor::zeros({B, m}, want_grad(tape, {&x, &weight, &bias}));

  for (int b = 0; b < B; ++b) {
    float* orow = &out->values[static_cast<std::size_t>(b) * m];
    for (int j = 0; j < m; ++j) orow[j] = bias->values[static_cast<std::size_t>(j)];
    for (int i = 0; i < n; ++i) {
      const float xv = x->values[static_cast<std::size_t>(b) * n + i];
      const float* wrow = &weight->values[static_cast<std::size_t>(i) * m];
      for (int j = 0; j < m; ++j) orow[j] += xv * wrow[j];
    }
  }

  if (out->requires_grad) {
    tape->record([x, weight, bias, out, B, n, m] {
      for (int b = 0; b < B; ++b) {
        const float* grow = &out->grad[static_cast<std::size_t>(b) * m];
        if (x->requires_grad) {
          for (int i = 0; i < n; ++i) {
            const float* wrow = &weight->values[static_cast<std::size_t>(i) * m];
            float acc = 0.0f;
            for (int j = 0; j < m; ++j) acc += grow[j] * wrow[j];
            x->grad[static_cast<std::size_t>(b) * n + i] += acc;
          }
        }
        if (weight->requires_grad) {
          for (int i = 0; i < n; ++i) {
            const float xv = x->values[static_cast<std::size_t>(b) * n + i];
            float* dwrow = &weight->grad[static_cast<std::size_t>(i) * m];
            for (int j = 0; j < m; ++j) dwrow[j] += xv * grow[j];
          }
        }
        if (bias->requires_grad) {
          for (int j = 0; j < m; ++j) bias->grad[static_cast<std::size_t>(j)] += grow[j];
        }
      }
    });
  }
  return out;
}

namespace {

// Channels-last scratch layouts keep the inner loops streaming over the
// (large) channel axes; spatial extents here are tiny.

// B x C x H x W values -> [b][h][w][c]
std::vector<float> to_hwc(const float* src, int B, int C, int H, int W) {
  std::vector<float> dst(static_cast<std::size_t>(B) * C * H * W);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const float* s = src + (static_cast<std::size_t>(b) * C + c) * plane;
      float* d = dst.data() + static_cast<std::size_t>(b) * plane * C + c;
      for (std::size_t i = 0; i < plane; ++i) d[i * C] = s[i];
    }
  }
  return dst;
}

// [b][h][w][c] -> accumulate into B x C x H x W
void add_from_hwc(const std::vector<float>& src, float* dst, int B, int C, int H, int W) {
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const float* s = src.data() + static_cast<std::size_t>(b) * plane * C + c;
      float* d = dst + (static_cast<std::size_t>(b) * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) d[i] += s[i * C];
    }
  }
}

// filters [a][b][KH][KW] -> [kh][kw][a][b] (or swapped when transpose_ab)
std::vector<float> repack_filters(const float* src, int A, int Bdim, int KH, int KW,
                                  bool transpose_ab) {
  std::vector<float> dst(static_cast<std::size_t>(A) * Bdim * KH * KW);
  for (int a = 0; a < A; ++a) {
    for (int b = 0; b < Bdim; ++b) {
      for (int kh = 0; kh < KH; ++kh) {
        for (int kw = 0; kw < KW; ++kw) {
          const float v = src[((static_cast<std::size_t>(a) * Bdim + b) * KH + kh) * KW + kw];
          const std::size_t slot = transpose_ab
                                       ? (static_cast<std::size_t>(b) * A + a)
                                       : (static_cast<std::size_t>(a) * Bdim + b);
          dst[(static_cast<std::size_t>(kh) * KW + kw) * A * Bdim + slot] = v;
        }
      }
    }
  }
  return dst;
}

}  // namespace

TensorPtr conv2d(Tape* tape, const TensorPtr& x, const TensorPtr& filters, int stride_h,
                 int stride_w) {
  require(x->rank() == 4 && filters->rank() == 4,
          "conv2d: expected rank-4 input and filters, got " + shape_str(x->shape) + " and " +
              shape_str(filters->shape));
  require(stride_h >= 1 && stride_w >= 1, "conv2d: strides must be positive");
  const int B = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
  const int F = filters->dim(0), KH = filters->dim(2), KW = filters->dim(3);
  require(filters->dim(1) == C, "conv2d: channel mismatch between input " + shape_str(x->shape) +
                                    " and filters " + shape_str(filters->shape));
  require(KH <= H && KW <= W, "conv2d: kernel larger than input: input " + shape_str(x->shape) +
                                  ", filters " + shape_str(filters->shape));
  const int OH = (H - KH) / stride_h + 1;
  const int OW = (W - KW) / stride_w + 1;
  const int sh = stride_h, sw = stride_w;
  auto out = Tensor::zeros({B, F, OH, OW}, want_grad(tape, {&x, &filters}));

  auto xt = std::make_shared<std::vector<float>>(to_hwc(x->values.data(), B, C, H, W));
  // [kh][kw][c][f]
  auto wt = std::make_shared<std::vector<float>>(
      repack_filters(filters->values.data(), F, C, KH, KW, true));

  std::vector<float> out_t(static_cast<std::size_t>(B) * OH * OW * F, 0.0f);
  for (int b = 0; b < B; ++b) {
    for (int oh = 0; oh < OH; ++oh) {
      for (int ow = 0; ow < OW; ++ow) {
        float* orow = out_t.data() + ((static_cast<std::size_t>(b) * OH + oh) * OW + ow) * F;
        for (int kh = 0; kh < KH; ++kh) {
          for (int kw = 0; kw < KW; ++kw) {
            const float* xrow =
                xt->data() +
                ((static_cast<std::size_t>(b) * H + oh * sh + kh) * W + ow * sw + kw) * C;
            const float* wrow = wt->data() + (static_cast<std::size_t>(kh) * KW + kw) * C * F;
            for (int c = 0; c < C; ++c) {
              const float xv = xrow[c];
              if (xv == 0.0f) continue;
              const float* wr = wrow + static_cast<std::size_t>(c) * F;
              for (int f = 0; f < F; ++f) orow[f] += xv * wr[f];
            }
          }
        }
      }
    }
  }
  add_from_hwc(out_t, out->values.data(), B, F, OH, OW);

  if (out->requires_grad) {
    tape->record([x, filters, out, xt, wt, B, C, H, W, F, KH, KW, OH, OW, sh, sw] {
      const auto gt = to_hwc(out->grad.data(), B, F, OH, OW);
      if (x->requires_grad) {
        // [kh][kw][f][c]
        const auto wt2 = repack_filters(filters->values.data(), F, C, KH, KW, false);
        std::vector<float> dxt(static_cast<std::size_t>(B) * H * W * C, 0.0f);
        for (int b = 0; b < B; ++b) {
          for (int oh = 0; oh < OH; ++oh) {
            for (int ow = 0; ow < OW; ++ow) {
              const float* grow =
                  gt.data() + ((static_cast<std::size_t>(b) * OH + oh) * OW + ow) * F;
              for (int kh = 0; kh < KH; ++kh) {
                for (int kw = 0; kw < KW; ++kw) {
                  float* dxrow =
                      dxt.data() +
                      ((static_cast<std::size_t>(b) * H + oh * sh + kh) * W + ow * sw + kw) * C;
                  const float* wrow =
                      wt2.data() + (static_cast<std::size_t>(kh) * KW + kw) * F * C;
                  for (int f = 0; f < F; ++f) {
                    const float gv = grow[f];
                    if (gv == 0.0f) continue;
                    const float* wr = wrow + static_cast<std::size_t>(f) * C;
                    for (int c = 0; c < C; ++c) dxrow[c] += gv * wr[c];
                  }
                }
              }
            }
          }
        }
        add_from_hwc(dxt, x->grad.data(), B, C, H, W);
      }
      if (filters->requires_grad) {
        std::vector<float> dwt(static_cast<std::size_t>(KH) * KW * C * F, 0.0f);
        for (int b = 0; b < B; ++b) {
          for (int oh = 0; oh < OH; ++oh) {
            for (int ow = 0; ow < OW; ++ow) {
              const float* grow =
                  gt.data() + ((static_cast<std::size_t>(b) * OH + oh) * OW + ow) * F;
              for (int kh = 0; kh < KH; ++kh) {
                for (int kw = 0; kw < KW; ++kw) {
                  const float* xrow =
                      xt->data() +
                      ((static_cast<std::size_t>(b) * H + oh * sh + kh) * W + ow * sw + kw) * C;
                  float* dwrow =
                      dwt.data() + (static_cast<std::size_t>(kh) * KW + kw) * C * F;
                  for (int c = 0; c < C; ++c) {
                    const float xv = xrow[c];
                    if (xv == 0.0f) continue;
                    float* dwr = dwrow + static_cast<std::size_t>(c) * F;
                    for (int f = 0; f < F; ++f) dwr[f] += xv * grow[f];
                  }
                }
              }
            }
          }
        }
        // scatter [kh][kw][c][f] back into F x C x KH x KW
        for (int f = 0; f < F; ++f) {
          for (int c = 0; c < C; ++c) {
            for (int kh = 0; kh < KH; ++kh) {
              for (int kw = 0; kw < KW; ++kw) {
                filters->grad[((static_cast<std::size_t>(f) * C + c) * KH + kh) * KW + kw] +=
                    dwt[(static_cast<std::size_t>(kh) * KW + kw) * C * F +
                        static_cast<std::size_t>(c) * F + f];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

TensorPtr transposed_conv2d(Tape* tape, const TensorPtr& x, const TensorPtr& filters, int stride_h,
                            int stride_w) {
  require(x->rank() == 4 && filters->rank() == 4,
          "transposed_conv2d: expected rank-4 input and filters, got " + shape_str(x->shape) +
              " and " + shape_str(filters->shape));
  require(stride_h >= 1 && stride_w >= 1, "transposed_conv2d: strides must be positive");
  const int B = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
  const int F = filters->dim(1), KH = filters->dim(2), KW = filters->dim(3);
  require(filters->dim(0) == C,
          "transposed_conv2d: channel mismatch between input " + shape_str(x->shape) +
              " and filters " + shape_str(filters->shape));
  const int OH = (H - 1) * stride_h + KH;
  const int OW = (W - 1) * stride_w + KW;
  const int sh = stride_h, sw = stride_w;
  auto out = Tensor::zeros({B, F, OH, OW}, want_grad(tape, {&x, &filters}));

  auto xt = std::make_shared<std::vector<float>>(to_hwc(x->values.data(), B, C, H, W));
  // [kh][kw][c][f]
  auto wt = std::make_shared<std::vector<float>>(
      repack_filters(filters->values.data(), C, F, KH, KW, false));

  std::vector<float> out_t(static_cast<std::size_t>(B) * OH * OW * F, 0.0f);
  for (int b = 0; b < B; ++b) {
    for (int ih = 0; ih < H; ++ih) {
      for (int iw = 0; iw < W; ++iw) {
        const float* xrow =
            xt->data() + ((static_cast<std::size_t>(b) * H + ih) * W + iw) * C;
        for (int kh = 0; kh < KH; ++kh) {
          for (int kw = 0; kw < KW; ++kw) {
            float* orow = out_t.data() +
                          ((static_cast<std::size_t>(b) * OH + ih * sh + kh) * OW + iw * sw + kw) *
                              F;
            const float* wrow = wt->data() + (static_cast<std::size_t>(kh) * KW + kw) * C * F;
            for (int c = 0; c < C; ++c) {
              const float xv = xrow[c];
              if (xv == 0.0f) continue;
              const float* wr = wrow + static_cast<std::size_t>(c) * F;
              for (int f = 0; f < F; ++f) orow[f] += xv * wr[f];
            }
          }
        }
      }
    }
  }
  add_from_hwc(out_t, out->values.data(), B, F, OH, OW);

  if (out->requires_grad) {
    tape->record([x, filters, out, xt, wt, B, C, H, W, F, KH, KW, OH, OW, sh, sw] {
      const auto gt = to_hwc(out->grad.data(), B, F, OH, OW);
      if (x->requires_grad) {
        std::vector<float> dxt(static_cast<std::size_t>(B) * H * W * C, 0.0f);
        for (int b = 0; b < B; ++b) {
          for (int ih = 0; ih < H; ++ih) {
            for (int iw = 0; iw < W; ++iw) {
              float* dxrow =
                  dxt.data() + ((static_cast<std::size_t>(b) * H + ih) * W + iw) * C;
              for (int kh = 0; kh < KH; ++kh) {
                for (int kw = 0; kw < KW; ++kw) {
                  const float* grow =
                      gt.data() +
                      ((static_cast<std::size_t>(b) * OH + ih * sh + kh) * OW + iw * sw + kw) * F;
                  const float* wrow =
                      wt->data() + (static_cast<std::size_t>(kh) * KW + kw) * C * F;
                  for (int c = 0; c < C; ++c) {
                    const float* wr = wrow + static_cast<std::size_t>(c) * F;
                    float acc = 0.0f;
                    for (int f = 0; f < F; ++f) acc += grow[f] * wr[f];
                    dxrow[c] += acc;
                  }
                }
              }
            }
          }
        }
        add_from_hwc(dxt, x->grad.data(), B, C, H, W);
      }
      if (filters->requires_grad) {
        std::vector<float> dwt(static_cast<std::size_t>(KH) * KW * C * F, 0.0f);
        for (int b = 0; b < B; ++b) {
          for (int ih = 0; ih < H; ++ih) {
            for (int iw = 0; iw < W; ++iw) {
              const float* xrow =
                  xt->data() + ((static_cast<std::size_t>(b) * H + ih) * W + iw) * C;
              for (int kh = 0; kh < KH; ++kh) {
                for (int kw = 0; kw < KW; ++kw) {
                  const float* grow =
                      gt.data() +
                      ((static_cast<std::size_t>(b) * OH + ih * sh + kh) * OW + iw * sw + kw) * F;
                  float* dwrow = dwt.data() + (static_cast<std::size_t>(kh) * KW + kw) * C * F;
                  for (int c = 0; c < C; ++c) {
                    const float xv = xrow[c];
                    if (xv == 0.0f) continue;
                    float* dwr = dwrow + static_cast<std::size_t>(c) * F;
                    for (int f = 0; f < F; ++f) dwr[f] += xv * grow[f];
                  }
                }
              }
            }
          }
        }
        // scatter [kh][kw][c][f] back into C x F x KH x KW
        for (int c = 0; c < C; ++c) {
          for (int f = 0; f < F; ++f) {
            for (int kh = 0; kh < KH; ++kh) {
              for (int kw = 0; kw < KW; ++kw) {
                filters->grad[((static_cast<std::size_t>(c) * F + f) * KH + kh) * KW + kw] +=
                    dwt[(static_cast<std::size_t>(kh) * KW + kw) * C * F +
                        static_cast<std::size_t>(c) * F + f];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

TensorPtr concat_channels(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  require(a->rank() == 4 && b->rank() == 4,
          "concat_channels: expected rank-4 tensors, got " + shape_str(a->shape) + " and " +
              shape_str(b->shape));
  require(a->dim(0) == b->dim(0) && a->dim(2) == b->dim(2) && a->dim(3) == b->dim(3),
          "concat_channels: batch/spatial mismatch between " + shape_str(a->shape) + " and " +
              shape_str(b->shape));
  const int B = a->dim(0), C1 = a->dim(1), C2 = b->dim(1), H = a->dim(2), W = a->dim(3);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  auto out = Tensor::zeros({B, C1 + C2, H, W}, want_grad(tape, {&a, &b}));

  for (int bi = 0; bi < B; ++bi) {
    float* dst = &out->values[static_cast<std::size_t>(bi) * (C1 + C2) * plane];
    const float* asrc = C1 > 0 ? &a->values[static_cast<std::size_t>(bi) * C1 * plane] : nullptr;
    const float* bsrc = C2 > 0 ? &b->values[static_cast<std::size_t>(bi) * C2 * plane] : nullptr;
    for (std::size_t i = 0; i < C1 * plane; ++i) dst[i] = asrc[i];
    for (std::size_t i = 0; i < C2 * plane; ++i) dst[C1 * plane + i] = bsrc[i];
  }

  if (out->requires_grad) {
    tape->record([a, b, out, B, C1, C2, plane] {
      for (int bi = 0; bi < B; ++bi) {
        const float* g = &out->grad[static_cast<std::size_t>(bi) * (C1 + C2) * plane];
        if (a->requires_grad && C1 > 0) {
          float* ag = &a->grad[static_cast<std::size_t>(bi) * C1 * plane];
          for (std::size_t i = 0; i < C1 * plane; ++i) ag[i] += g[i];
        }
        if (b->requires_grad && C2 > 0) {
          float* bg = &b->grad[static_cast<std::size_t>(bi) * C2 * plane];
          for (std::size_t i = 0; i < C2 * plane; ++i) bg[i] += g[C1 * plane + i];
        }
      }
    });
  }
  return out;
}

TensorPtr add_channel_bias(Tape* tape, const TensorPtr& x, const TensorPtr& bias) {
  require(x->rank() == 4 && bias->rank() == 1 && bias->dim(0) == x->dim(1),
          "add_channel_bias: bias " + shape_str(bias->shape) + " does not match channels of " +
              shape_str(x->shape));
  const int B = x->dim(0), C = x->dim(1);
  const std::size_t plane = static_cast<std::size_t>(x->dim(2)) * x->dim(3);
  auto out = Tensor::zeros(x->shape, want_grad(tape, {&x, &bias}));

  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const float bv = bias->values[static_cast<std::size_t>(c)];
      const float* src = &x->values[(static_cast<std::size_t>(b) * C + c) * plane];
      float* dst = &out->values[(static_cast<std::size_t>(b) * C + c) * plane];
      for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] + bv;
    }
  }

  if (out->requires_grad) {
    tape->record([x, bias, out, B, C, plane] {
      for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
          const float* g = &out->grad[(static_cast<std::size_t>(b) * C + c) * plane];
          if (x->requires_grad) {
            float* xg = &x->grad[(static_cast<std::size_t>(b) * C + c) * plane];
            for (std::size_t i = 0; i < plane; ++i) xg[i] += g[i];
          }
          if (bias->requires_grad) {
            float acc = 0.0f;
            for (std::size_t i = 0; i < plane; ++i) acc += g[i];
            bias->grad[static_cast<std::size_t>(c)] += acc;
          }
        }
      }
    });
  }
  return out;
}

TensorPtr leaky_relu(Tape* tape, const TensorPtr& x, float alpha) {
  require(alpha >= 0.0f && alpha < 1.0f, "leaky_relu: alpha must be in [0,1)");
  auto out = Tensor::zeros(x->shape, want_grad(tape, {&x}));
  const std::size_t n = x->values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const float v = x->values[i];
    out->values[i] = v > 0.0f ? v : alpha * v;
  }
  if (out->requires_grad) {
    tape->record([x, out, alpha, n] {
      for (std::size_t i = 0; i < n; ++i) {
        x->grad[i] += out->grad[i] * (x->values[i] > 0.0f ? 1.0f : alpha);
      }
    });
  }
  return out;
}

TensorPtr relu(Tape* tape, const TensorPtr& x) { return leaky_relu(tape, x, 0.0f); }

TensorPtr sigmoid(Tape* tape, const TensorPtr& x) {
  auto out = Tensor::zeros(x->shape, want_grad(tape, {&x}));
  const std::size_t n = x->values.size();
  for (std::size_t i = 0; i < n; ++i) {
    out->values[i] = 1.0f / (1.0f + std::exp(-x->values[i]));
  }
  if (out->requires_grad) {
    tape->record([x, out, n] {
      for (std::size_t i = 0; i < n; ++i) {
        const float s = out->values[i];
        x->grad[i] += out->grad[i] * s * (1.0f - s);
      }
    });
  }
  return out;
}

TensorPtr sigmoid_cross_entropy(Tape* tape, const TensorPtr& logits, const TensorPtr& targets) {
  require(logits->shape == targets->shape,
          "sigmoid_cross_entropy: shape mismatch between logits " + shape_str(logits->shape) +
              " and targets " + shape_str(targets->shape));
  const std::size_t n = logits->values.size();
  require(n > 0, "sigmoid_cross_entropy: empty input");
  for (float t : targets->values) {
    require(t >= 0.0f && t <= 1.0f, "sigmoid_cross_entropy: targets must lie in [0,1]");
  }
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) {
    const float xv = logits->values[i];
    const float t = targets->values[i];
    acc += std::max(xv, 0.0f) - xv * t + std::log1p(std::exp(-std::fabs(xv)));
  }
  auto out = Tensor::scalar(acc / static_cast<float>(n));
  out->requires_grad = want_grad(tape, {&logits, &targets});
  if (out->requires_grad) {
    tape->record([logits, targets, out, n] {
      const float g = out->grad[0] / static_cast<float>(n);
      if (logits->requires_grad) {
        for (std::size_t i = 0; i < n; ++i) {
          const float s = 1.0f / (1.0f + std::exp(-logits->values[i]));
          logits->grad[i] += g * (s - targets->values[i]);
        }
      }
    });
  }
  return out;
}

TensorPtr l2_diff(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  require(a->shape == b->shape, "l2_diff: shape mismatch between " + shape_str(a->shape) + " and " +
                                    shape_str(b->shape));
  const std::size_t n = a->values.size();
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) {
    const float d = a->values[i] - b->values[i];
    acc += d * d;
  }
  auto out = Tensor::scalar(acc);
  out->requires_grad = want_grad(tape, {&a, &b});
  if (out->requires_grad) {
    tape->record([a, b, out, n] {
      const float g = out->grad[0];
      for (std::size_t i = 0; i < n; ++i) {
        const float d = a->values[i] - b->values[i];
        if (a->requires_grad) a->grad[i] += 2.0f * d * g;
        if (b->requires_grad) b->grad[i] -= 2.0f * d * g;
      }
    });
  }
  return out;
}

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  require(a->shape == b->shape,
          "add: shape mismatch between " + shape_str(a->shape) + " and " + shape_str(b->shape));
  auto out = Tensor::zeros(a->shape, want_grad(tape, {&a, &b}));
  const std::size_t n = a->values.size();
  for (std::size_t i = 0; i < n; ++i) out->values[i] = a->values[i] + b->values[i];
  if (out->requires_grad) {
    tape->record([a, b, out, n] {
      for (std::size_t i = 0; i < n; ++i) {
        if (a->requires_grad) a->grad[i] += out->grad[i];
        if (b->requires_grad) b->grad[i] += out->grad[i];
      }
    });
  }
  return out;
}

TensorPtr scale(Tape* tape, const TensorPtr& x, float factor) {
  auto out = Tensor::zeros(x->shape, want_grad(tape, {&x}));
  const std::size_t n = x->values.size();
  for (std::size_t i = 0; i < n; ++i) out->values[i] = factor * x->values[i];
  if (out->requires_grad) {
    tape->record([x, out, factor, n] {
      for (std::size_t i = 0; i < n; ++i) x->grad[i] += factor * out->grad[i];
    });
  }
  return out;
}

TensorPtr sum(Tape* tape, const TensorPtr& x) {
  float acc = 0.0f;
  for (float v : x->values) acc += v;
  auto out = Tensor::scalar(acc);
  out->requires_grad = want_grad(tape, {&x});
  if (out->requires_grad) {
    tape->record([x, out] {
      const float g = out->grad[0];
      for (float& xg : x->grad) xg += g;
    });
  }
  return out;
}

TensorPtr mean_over_batch(Tape* tape, const TensorPtr& x) {
  require(x->rank() >= 2, "mean_over_batch: expected rank >= 2, got " + shape_str(x->shape));
  const int B = x->dim(0);
  std::vector<int> out_shape(x->shape.begin() + 1, x->shape.end());
  auto out = Tensor::zeros(out_shape, want_grad(tape, {&x}));
  const std::size_t rest = out->values.size();
  const float inv = 1.0f / static_cast<float>(B);
  for (int b = 0; b < B; ++b) {
    const float* src = &x->values[static_cast<std::size_t>(b) * rest];
    for (std::size_t i = 0; i < rest; ++i) out->values[i] += src[i] * inv;
  }
  if (out->requires_grad) {
    tape->record([x, out, B, rest, inv] {
      for (int b = 0; b < B; ++b) {
        float* xg = &x->grad[static_cast<std::size_t>(b) * rest];
        for (std::size_t i = 0; i < rest; ++i) xg[i] += out->grad[i] * inv;
      }
    });
  }
  return out;
}

TensorPtr reshape(Tape* tape, const TensorPtr& x, std::vector<int> new_shape) {
  require(shape_numel(new_shape) == x->numel(), "reshape: element count of " +
                                                    shape_str(x->shape) + " does not match " +
                                                    shape_str(new_shape));
  auto out = Tensor::zeros(new_shape, want_grad(tape, {&x}));
  out->values = x->values;
  if (out->requires_grad) {
    tape->record([x, out] {
      const std::size_t n = x->grad.size();
      for (std::size_t i = 0; i < n; ++i) x->grad[i] += out->grad[i];
    });
  }
  return out;
}

// ---- optimizer ----

void adam_step(Tensor& param, AdamState& state, const AdamHyper& hyper) {
  const std::size_t n = param.values.size();
  if (state.m.empty()) {
    state.m.assign(n, 0.0f);
    state.v.assign(n, 0.0f);
  }
  if (state.m.size() != n) {
    throw std::invalid_argument("adam_step: state size " + std::to_string(state.m.size()) +
                                " does not match parameter size " + std::to_string(n));
  }
  state.step += 1;
  const float b1c = 1.0f - static_cast<float>(std::pow(hyper.beta1, state.step));
  const float b2c = 1.0f - static_cast<float>(std::pow(hyper.beta2, state.step));
  for (std::size_t i = 0; i < n; ++i) {
    const float g = param.grad[i];
    state.m[i] = hyper.beta1 * state.m[i] + (1.0f - hyper.beta1) * g;
    state.v[i] = hyper.beta2 * state.v[i] + (1.0f - hyper.beta2) * g * g;
    const float mhat = state.m[i] / b1c;
    const float vhat = state.v[i] / b2c;
    param.values[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
    param.grad[i] = 0.0f;
  }
}

AdamOptimizer::AdamOptimizer(std::vector<TensorPtr> params, AdamHyper hyper)
    : params_(std::move(params)), states_(params_.size()), hyper_(hyper) {}

void AdamOptimizer::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    adam_step(*params_[i], states_[i], hyper_);
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

// ---- gradient checking ----

double grad_check(const std::function<TensorPtr(Tape*)>& fn, const std::vector<TensorPtr>& inputs,
                  float eps) {
  if (eps <= 0.0f) throw std::invalid_argument("grad_check: eps must be positive");

  for (const auto& t : inputs) t->zero_grad();
  Tape tape;
  auto loss = fn(&tape);
  if (loss->numel() != 1) {
    throw std::invalid_argument("grad_check: fn must produce a scalar, got " +
                                shape_str(loss->shape));
  }
  tape.backward(loss);

  std::vector<std::vector<float>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& t : inputs) analytic.push_back(t->grad);

  double max_err = 0.0;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& t = *inputs[ti];
    if (!t.requires_grad) continue;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      const float orig = t.values[i];
      t.values[i] = orig + eps;
      const double fp = fn(nullptr)->item();
      t.values[i] = orig - eps;
      const double fm = fn(nullptr)->item();
      t.values[i] = orig;
      const double numeric = (fp - fm) / (2.0 * static_cast<double>(eps));
      const double a = analytic[ti][i];
      const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
      max_err = std::max(max_err, std::fabs(a - numeric) / denom);
    }
  }
  return max_err;
}

}  // namespace bargan
