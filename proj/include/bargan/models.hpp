#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bargan/pianoroll.hpp"
#include "bargan/rng.hpp"
#include "bargan/tensor.hpp"

namespace bargan {

inline constexpr int kNoiseLen = 100;

// Architecture knobs distinguishing the three shipped setups. twod_layers
// marks which of the four upsampling layers receive the previous-bar
// condition; use_chord routes the 13-dim chord into every generator layer
// and the discriminator input.
struct ModelVariant {
  int id = 1;
  int g_filters = 256;
  int cond_filters = 256;
  std::array<bool, 4> twod_layers{true, true, true, true};
  bool use_chord = false;
  // optional: also show the discriminator the previous bar as an extra
  // input channel (off in all shipped presets)
  bool d_sees_prev = false;
  float lambda1 = 0.1f;
  float lambda2 = 1.0f;

  static ModelVariant preset(int id);
  bool has_twod() const { return twod_layers[0] || twod_layers[1] || twod_layers[2] || twod_layers[3]; }
};

// Structural sizes shared by the networks. Defaults are the full-size
// configuration; tests shrink them for finite-difference checks. The bar
// width must divide by 8 (three stride-2 upsamplings from start_w).
struct NetworkDims {
  int noise_len = kNoiseLen;
  int fc1 = 1024;
  int reshape_channels = 256;
  int d_conv1_filters = 14;
  int d_conv2_filters = 77;
  int d_fc = 1024;
  int roll_h = kNumPitches;
  int roll_w = kStepsPerBar;

  int start_w() const { return roll_w / 8; }
  int fc2() const { return reshape_channels * start_w(); }
  int d_conv1_out_w() const { return (roll_w - 2) / 2 + 1; }
  int d_conv2_out_w() const { return (d_conv1_out_w() - 4) / 2 + 1; }
  int d_flat() const { return d_conv2_filters * d_conv2_out_w(); }
  void validate() const;
};

struct DenseLayer {
  TensorPtr weight;
  TensorPtr bias;
};

struct ConvLayer {
  TensorPtr filters;
  TensorPtr bias;
};

struct GeneratorParams {
  DenseLayer fc1, fc2;
  std::array<ConvLayer, 4> tconv;
};

struct DiscriminatorParams {
  ConvLayer conv1, conv2;
  DenseLayer fc1, fc2;
};

struct ConditionerParams {
  std::array<ConvLayer, 4> conv;
};

// Generator, discriminator and conditioner with their shared
// configuration. Parameters are plain tensors; optimizers mutate them
// between forward passes.
struct MidiNetModel {
  ModelVariant variant;
  NetworkDims dims;
  GeneratorParams g;
  DiscriminatorParams d;
  ConditionerParams c;

  // weights truncated-normal (sigma 0.02), biases zero; draw order is
  // fixed (generator, discriminator, conditioner) for a given seed
  static MidiNetModel init(const ModelVariant& variant, const NetworkDims& dims, Rng& rng);

  std::vector<std::pair<std::string, TensorPtr>> named_params() const;
  std::vector<TensorPtr> d_params() const;
  std::vector<TensorPtr> g_and_cond_params() const;
  std::vector<TensorPtr> all_params() const;
};

// vec: B x n broadcast to B x n x H x W; channel i is constant vec[b,i]
TensorPtr broadcast_condition(Tape* tape, const TensorPtr& vec, int height, int width);

// prev: B x 1 x H x W (may be all-zero). Returns the four feature maps,
// index 0 the widest (c x 1 x W) down to index 3 (c x 1 x W/8).
std::array<TensorPtr, 4> conditioner_forward(Tape* tape, const ConditionerParams& params,
                                             const NetworkDims& dims, const TensorPtr& prev);

// z: B x noise_len -> activations B x 1 x H x W in [0,1]. The chord must
// be present iff the variant uses it; prev_maps iff any twod layer is
// set. Layer k consumes conditioner map 4-k (deepest map feeds the first
// layer).
TensorPtr generator_forward(Tape* tape, const GeneratorParams& params, const ModelVariant& variant,
                            const NetworkDims& dims, const TensorPtr& z, const TensorPtr& chord,
                            const std::array<TensorPtr, 4>* prev_maps);

struct DiscriminatorOutput {
  TensorPtr logit;     // B x 1
  TensorPtr prob;      // B x 1, sigmoid(logit)
  TensorPtr features;  // first-convolution activations, B x F1 x 1 x W'
};

// x: B x 1 x H x W with values in [0,1]
DiscriminatorOutput discriminator_forward(Tape* tape, const DiscriminatorParams& params,
                                          const ModelVariant& variant, const NetworkDims& dims,
                                          const TensorPtr& x, const TensorPtr& chord,
                                          const TensorPtr& prev);

// Per column keep only the highest activation (ties toward the lowest
// row), emitting a binary map. On a tape the mask is straight-through:
// each column's gradient passes only through the retained cell.
TensorPtr monophonize(Tape* tape, const TensorPtr& activations);

// roll <-> tensor bridges (single instance, 1 x 1 x 128 x 16)
TensorPtr roll_to_tensor(const BarRoll& roll);
BarRoll tensor_to_roll(const TensorPtr& binary);

TensorPtr noise_batch(Rng& rng, int batch, int noise_len);
TensorPtr chord_batch(const std::vector<ChordVec>& chords);

}  // namespace bargan
