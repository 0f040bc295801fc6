#pragma once

// Reference oracles shared by the unit and acceptance suites. These stay
// deliberately naive and independent of the library kernels: conv is the
// textbook output-centric sum, the transposed form gathers over output
// positions instead of scattering.

#include <cstdint>
#include <vector>

#include "bargan/rng.hpp"
#include "bargan/tensor.hpp"

namespace oracle {

inline std::vector<float> conv2d_naive(const std::vector<float>& x, int B, int C, int H, int W,
                                       const std::vector<float>& w, int F, int KH, int KW, int sh,
                                       int sw) {
  const int OH = (H - KH) / sh + 1;
  const int OW = (W - KW) / sw + 1;
  std::vector<float> out(static_cast<std::size_t>(B) * F * OH * OW, 0.0f);
  for (int b = 0; b < B; ++b)
    for (int f = 0; f < F; ++f)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          double acc = 0.0;
          for (int c = 0; c < C; ++c)
            for (int kh = 0; kh < KH; ++kh)
              for (int kw = 0; kw < KW; ++kw) {
                const int ih = oh * sh + kh;
                const int iw = ow * sw + kw;
                acc += static_cast<double>(
                           x[((static_cast<std::size_t>(b) * C + c) * H + ih) * W + iw]) *
                       w[((static_cast<std::size_t>(f) * C + c) * KH + kh) * KW + kw];
              }
          out[((static_cast<std::size_t>(b) * F + f) * OH + oh) * OW + ow] =
              static_cast<float>(acc);
        }
  return out;
}

// filters laid out C x F x KH x KW, matching the library convention
inline std::vector<float> transposed_conv2d_naive(const std::vector<float>& x, int B, int C, int H,
                                                  int W, const std::vector<float>& w, int F, int KH,
                                                  int KW, int sh, int sw) {
  const int OH = (H - 1) * sh + KH;
  const int OW = (W - 1) * sw + KW;
  std::vector<float> out(static_cast<std::size_t>(B) * F * OH * OW, 0.0f);
  for (int b = 0; b < B; ++b)
    for (int f = 0; f < F; ++f)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          double acc = 0.0;
          for (int c = 0; c < C; ++c)
            for (int kh = 0; kh < KH; ++kh) {
              const int num_h = oh - kh;
              if (num_h < 0 || num_h % sh != 0) continue;
              const int ih = num_h / sh;
              if (ih >= H) continue;
              for (int kw = 0; kw < KW; ++kw) {
                const int num_w = ow - kw;
                if (num_w < 0 || num_w % sw != 0) continue;
                const int iw = num_w / sw;
                if (iw >= W) continue;
                acc += static_cast<double>(
                           x[((static_cast<std::size_t>(b) * C + c) * H + ih) * W + iw]) *
                       w[((static_cast<std::size_t>(c) * F + f) * KH + kh) * KW + kw];
              }
            }
          out[((static_cast<std::size_t>(b) * F + f) * OH + oh) * OW + ow] =
              static_cast<float>(acc);
        }
  return out;
}

inline std::vector<float> random_values(bargan::Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

inline bargan::TensorPtr random_tensor(bargan::Rng& rng, std::vector<int> shape,
                                       bool requires_grad = false) {
  const auto n = static_cast<std::size_t>(bargan::shape_numel(shape));
  return bargan::Tensor::from_values(std::move(shape), random_values(rng, n), requires_grad);
}

inline double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::fabs(static_cast<double>(a[i]) - b[i]);
    if (d > m) m = d;
  }
  return m;
}

inline double dot(const std::vector<float>& a, const std::vector<float>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

}  // namespace oracle
