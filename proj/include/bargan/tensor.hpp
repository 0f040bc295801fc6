#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace bargan {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense float tensor, up to 4 axes, row-major. Feature maps use the
// batch x channels x height x width convention. The grad buffer always
// has the same extent as the values.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> values;
  std::vector<float> grad;
  bool requires_grad = false;

  static TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
  static TensorPtr full(std::vector<int> shape, float value, bool requires_grad = false);
  static TensorPtr from_values(std::vector<int> shape, std::vector<float> values,
                               bool requires_grad = false);
  static TensorPtr scalar(float value, bool requires_grad = false);

  std::int64_t numel() const { return static_cast<std::int64_t>(values.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int axis) const { return shape[static_cast<std::size_t>(axis)]; }
  float item() const;
  void zero_grad();
  bool all_finite() const;
};

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Execution record for one forward pass. Ops append one backward step per
// recorded operation; backward() replays them in exact reverse order.
// Parameter tensors outlive the tape; intermediate tensors are released
// with it.
class Tape {
 public:
  void record(std::function<void()> backward_step);
  void backward(const TensorPtr& loss);
  void clear();
  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<std::function<void()>> nodes_;
};

// Differentiable operations. Passing tape == nullptr runs the forward
// computation only; the result is detached (requires_grad = false).

// out[b,j] = sum_i x[b,i] * weight[i,j] + bias[j]
TensorPtr fully_connected(Tape* tape, const TensorPtr& x, const TensorPtr& weight,
                          const TensorPtr& bias);

// valid cross-correlation; x: B x C x H x W, filters: F x C x kH x kW
TensorPtr conv2d(Tape* tape, const TensorPtr& x, const TensorPtr& filters, int stride_h,
                 int stride_w);

// scatter-add of stride-spaced kernel copies; x: B x C x H x W,
// filters: C x F x kH x kW; output (H-1)*sH+kH by (W-1)*sW+kW
TensorPtr transposed_conv2d(Tape* tape, const TensorPtr& x, const TensorPtr& filters,
                            int stride_h, int stride_w);

// channels of a precede channels of b
TensorPtr concat_channels(Tape* tape, const TensorPtr& a, const TensorPtr& b);

TensorPtr add_channel_bias(Tape* tape, const TensorPtr& x, const TensorPtr& bias);
TensorPtr leaky_relu(Tape* tape, const TensorPtr& x, float alpha);
TensorPtr relu(Tape* tape, const TensorPtr& x);
TensorPtr sigmoid(Tape* tape, const TensorPtr& x);

// mean over all elements of -t*log(sigmoid(x)) - (1-t)*log(1-sigmoid(x)),
// evaluated as max(x,0) - x*t + log(1+exp(-|x|))
TensorPtr sigmoid_cross_entropy(Tape* tape, const TensorPtr& logits, const TensorPtr& targets);

// squared Euclidean norm of (a - b)
TensorPtr l2_diff(Tape* tape, const TensorPtr& a, const TensorPtr& b);

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(Tape* tape, const TensorPtr& x, float factor);
TensorPtr sum(Tape* tape, const TensorPtr& x);

// drops the leading batch axis: B x rest -> rest
TensorPtr mean_over_batch(Tape* tape, const TensorPtr& x);

TensorPtr reshape(Tape* tape, const TensorPtr& x, std::vector<int> new_shape);

// ---- optimizer ----

struct AdamHyper {
  float lr = 2e-4f;
  float beta1 = 0.5f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

struct AdamState {
  std::vector<float> m;
  std::vector<float> v;
  std::int64_t step = 0;
};

// bias-corrected update in place; zeroes param.grad afterwards
void adam_step(Tensor& param, AdamState& state, const AdamHyper& hyper);

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<TensorPtr> params, AdamHyper hyper);
  void step();
  void zero_grad();
  const std::vector<TensorPtr>& params() const { return params_; }
  std::vector<AdamState>& states() { return states_; }
  const std::vector<AdamState>& states() const { return states_; }
  const AdamHyper& hyper() const { return hyper_; }

 private:
  std::vector<TensorPtr> params_;
  std::vector<AdamState> states_;
  AdamHyper hyper_;
};

// ---- gradient checking ----

// fn builds a scalar loss from the captured inputs; it receives the tape
// (or nullptr for plain forward evaluation). Returns the maximum guarded
// relative error |analytic - numeric| / max(1, |analytic|, |numeric|)
// over every element of every requires_grad input, comparing tape
// gradients against central differences. Frozen inputs are skipped and
// left untouched. The default eps is 2^-10 (about 1e-3); a power of two
// keeps the probes exactly representable in 32-bit floats.
double grad_check(const std::function<TensorPtr(Tape*)>& fn, const std::vector<TensorPtr>& inputs,
                  float eps = 0.0009765625f);

}  // namespace bargan
