#include "bargan/models.hpp"

#include <stdexcept>

namespace bargan {

ModelVariant ModelVariant::preset(int id) {
  switch (id) {
    case 1:
      return ModelVariant{1, 256, 256, {true, true, true, true}, false, false, 0.1f, 1.0f};
    case 2:
      return ModelVariant{2, 128, 16, {false, false, false, true}, true, false, 0.01f, 0.1f};
    case 3:
      return ModelVariant{3, 128, 16, {true, true, true, true}, true, false, 0.01f, 0.1f};
    default:
      throw std::invalid_argument("unknown model variant " + std::to_string(id));
  }
}

void NetworkDims::validate() const {
  if (roll_w < 8 || roll_w % 8 != 0) {
    throw std::invalid_argument("bar width must be a positive multiple of 8, got " +
                                std::to_string(roll_w));
  }
  if (roll_h < 2 || noise_len < 1 || fc1 < 1 || reshape_channels < 1) {
    throw std::invalid_argument("network dimensions must be positive");
  }
  if (d_conv1_out_w() < 4) {
    throw std::invalid_argument("bar width too small for the discriminator stack");
  }
}

namespace {

TensorPtr init_weight(std::vector<int> shape, Rng& rng) {
  auto t = Tensor::zeros(std::move(shape), true);
  for (float& v : t->values) v = rng.truncated_normal(0.02f);
  return t;
}

TensorPtr init_bias(int n) { return Tensor::zeros({n}, true); }

int gen_layer_in_channels(const ModelVariant& v, const NetworkDims& dims, int layer) {
  int ch = layer == 0 ? dims.reshape_channels : v.g_filters;
  if (v.use_chord) ch += kChordDims;
  if (v.twod_layers[static_cast<std::size_t>(layer)]) ch += v.cond_filters;
  return ch;
}

int disc_in_channels(const ModelVariant& v) {
  return 1 + (v.use_chord ? kChordDims : 0) + (v.d_sees_prev ? 1 : 0);
}

}  // namespace

MidiNetModel MidiNetModel::init(const ModelVariant& variant, const NetworkDims& dims, Rng& rng) {
  dims.validate();
  MidiNetModel m;
  m.variant = variant;
  m.dims = dims;

  m.g.fc1.weight = init_weight({dims.noise_len, dims.fc1}, rng);
  m.g.fc1.bias = init_bias(dims.fc1);
  m.g.fc2.weight = init_weight({dims.fc1, dims.fc2()}, rng);
  m.g.fc2.bias = init_bias(dims.fc2());
  for (int layer = 0; layer < 4; ++layer) {
    const int in_ch = gen_layer_in_channels(variant, dims, layer);
    const int out_ch = layer == 3 ? 1 : variant.g_filters;
    const int kh = layer == 3 ? dims.roll_h : 1;
    const int kw = layer == 3 ? 1 : 2;
    m.g.tconv[static_cast<std::size_t>(layer)].filters =
        init_weight({in_ch, out_ch, kh, kw}, rng);
    m.g.tconv[static_cast<std::size_t>(layer)].bias = init_bias(out_ch);
  }

  m.d.conv1.filters = init_weight({dims.d_conv1_filters, disc_in_channels(variant), dims.roll_h, 2},
                                  rng);
  m.d.conv1.bias = init_bias(dims.d_conv1_filters);
  m.d.conv2.filters = init_weight({dims.d_conv2_filters, dims.d_conv1_filters, 1, 4}, rng);
  m.d.conv2.bias = init_bias(dims.d_conv2_filters);
  m.d.fc1.weight = init_weight({dims.d_flat(), dims.d_fc}, rng);
  m.d.fc1.bias = init_bias(dims.d_fc);
  m.d.fc2.weight = init_weight({dims.d_fc, 1}, rng);
  m.d.fc2.bias = init_bias(1);

  for (int layer = 0; layer < 4; ++layer) {
    const int in_ch = layer == 0 ? 1 : variant.cond_filters;
    const int kh = layer == 0 ? dims.roll_h : 1;
    const int kw = layer == 0 ? 1 : 2;
    m.c.conv[static_cast<std::size_t>(layer)].filters =
        init_weight({variant.cond_filters, in_ch, kh, kw}, rng);
    m.c.conv[static_cast<std::size_t>(layer)].bias = init_bias(variant.cond_filters);
  }
  return m;
}

std::vector<std::pair<std::string, TensorPtr>> MidiNetModel::named_params() const {
  std::vector<std::pair<std::string, TensorPtr>> out;
  out.emplace_back("g.fc1.weight", g.fc1.weight);
  out.emplace_back("g.fc1.bias", g.fc1.bias);
  out.emplace_back("g.fc2.weight", g.fc2.weight);
  out.emplace_back("g.fc2.bias", g.fc2.bias);
  for (int i = 0; i < 4; ++i) {
    const std::string base = "g.tconv" + std::to_string(i + 1);
    out.emplace_back(base + ".filters", g.tconv[static_cast<std::size_t>(i)].filters);
    out.emplace_back(base + ".bias", g.tconv[static_cast<std::size_t>(i)].bias);
  }
  out.emplace_back("d.conv1.filters", d.conv1.filters);
  out.emplace_back("d.conv1.bias", d.conv1.bias);
  out.emplace_back("d.conv2.filters", d.conv2.filters);
  out.emplace_back("d.conv2.bias", d.conv2.bias);
  out.emplace_back("d.fc1.weight", d.fc1.weight);
  out.emplace_back("d.fc1.bias", d.fc1.bias);
  out.emplace_back("d.fc2.weight", d.fc2.weight);
  out.emplace_back("d.fc2.bias", d.fc2.bias);
  for (int i = 0; i < 4; ++i) {
    const std::string base = "c.conv" + std::to_string(i + 1);
    out.emplace_back(base + ".filters", c.conv[static_cast<std::size_t>(i)].filters);
    out.emplace_back(base + ".bias", c.conv[static_cast<std::size_t>(i)].bias);
  }
  return out;
}

std::vector<TensorPtr> MidiNetModel::d_params() const {
  return {d.conv1.filters, d.conv1.bias, d.conv2.filters, d.conv2.bias,
          d.fc1.weight,    d.fc1.bias,   d.fc2.weight,    d.fc2.bias};
}

std::vector<TensorPtr> MidiNetModel::g_and_cond_params() const {
  std::vector<TensorPtr> out = {g.fc1.weight, g.fc1.bias, g.fc2.weight, g.fc2.bias};
  for (const auto& layer : g.tconv) {
    out.push_back(layer.filters);
    out.push_back(layer.bias);
  }
  for (const auto& layer : c.conv) {
    out.push_back(layer.filters);
    out.push_back(layer.bias);
  }
  return out;
}

std::vector<TensorPtr> MidiNetModel::all_params() const {
  auto out = g_and_cond_params();
  auto dp = d_params();
  out.insert(out.end(), dp.begin(), dp.end());
  return out;
}

TensorPtr broadcast_condition(Tape* tape, const TensorPtr& vec, int height, int width) {
  if (vec->rank() != 2) {
    throw std::invalid_argument("broadcast_condition: expected B x n, got " +
                                shape_str(vec->shape));
  }
  const int B = vec->dim(0), n = vec->dim(1);
  auto out = Tensor::zeros({B, n, height, width},
                           tape != nullptr && vec->requires_grad);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int b = 0; b < B; ++b) {
    for (int i = 0; i < n; ++i) {
      const float v = vec->values[static_cast<std::size_t>(b) * n + i];
      float* dst = &out->values[(static_cast<std::size_t>(b) * n + i) * plane];
      for (std::size_t k = 0; k < plane; ++k) dst[k] = v;
    }
  }
  if (out->requires_grad) {
    tape->record([vec, out, B, n, plane] {
      for (int b = 0; b < B; ++b) {
        for (int i = 0; i < n; ++i) {
          const float* g = &out->grad[(static_cast<std::size_t>(b) * n + i) * plane];
          float acc = 0.0f;
          for (std::size_t k = 0; k < plane; ++k) acc += g[k];
          vec->grad[static_cast<std::size_t>(b) * n + i] += acc;
        }
      }
    });
  }
  return out;
}

std::array<TensorPtr, 4> conditioner_forward(Tape* tape, const ConditionerParams& params,
                                             const NetworkDims& dims, const TensorPtr& prev) {
  if (prev->rank() != 4 || prev->dim(1) != 1 || prev->dim(2) != dims.roll_h ||
      prev->dim(3) != dims.roll_w) {
    throw std::invalid_argument("conditioner_forward: expected B x 1 x " +
                                std::to_string(dims.roll_h) + " x " + std::to_string(dims.roll_w) +
                                ", got " + shape_str(prev->shape));
  }
  std::array<TensorPtr, 4> maps;
  TensorPtr x = prev;
  for (int layer = 0; layer < 4; ++layer) {
    const auto& conv = params.conv[static_cast<std::size_t>(layer)];
    const int stride = layer == 0 ? 1 : 2;
    x = conv2d(tape, x, conv.filters, stride, stride);
    x = add_channel_bias(tape, x, conv.bias);
    x = relu(tape, x);
    maps[static_cast<std::size_t>(layer)] = x;
  }
  return maps;
}

TensorPtr generator_forward(Tape* tape, const GeneratorParams& params, const ModelVariant& variant,
                            const NetworkDims& dims, const TensorPtr& z, const TensorPtr& chord,
                            const std::array<TensorPtr, 4>* prev_maps) {
  if (z->rank() != 2 || z->dim(1) != dims.noise_len) {
    throw std::invalid_argument("generator_forward: expected noise B x " +
                                std::to_string(dims.noise_len) + ", got " + shape_str(z->shape));
  }
  if (variant.use_chord != (chord != nullptr)) {
    throw std::invalid_argument(
        "generator_forward: chord condition does not match variant.use_chord");
  }
  if (variant.has_twod() != (prev_maps != nullptr)) {
    throw std::invalid_argument(
        "generator_forward: previous-bar maps do not match variant.twod_layers");
  }
  const int B = z->dim(0);

  auto h = relu(tape, fully_connected(tape, z, params.fc1.weight, params.fc1.bias));
  h = relu(tape, fully_connected(tape, h, params.fc2.weight, params.fc2.bias));
  TensorPtr x = reshape(tape, h, {B, dims.reshape_channels, 1, dims.start_w()});

  for (int layer = 0; layer < 4; ++layer) {
    if (variant.use_chord) {
      x = concat_channels(tape, x, broadcast_condition(tape, chord, x->dim(2), x->dim(3)));
    }
    if (variant.twod_layers[static_cast<std::size_t>(layer)]) {
      x = concat_channels(tape, x, (*prev_maps)[static_cast<std::size_t>(3 - layer)]);
    }
    const auto& conv = params.tconv[static_cast<std::size_t>(layer)];
    const int stride = layer == 3 ? 1 : 2;
    x = transposed_conv2d(tape, x, conv.filters, stride, stride);
    x = add_channel_bias(tape, x, conv.bias);
    x = layer == 3 ? sigmoid(tape, x) : relu(tape, x);
  }
  return x;
}

DiscriminatorOutput discriminator_forward(Tape* tape, const DiscriminatorParams& params,
                                          const ModelVariant& variant, const NetworkDims& dims,
                                          const TensorPtr& x, const TensorPtr& chord,
                                          const TensorPtr& prev) {
  if (x->rank() != 4 || x->dim(1) != 1 || x->dim(2) != dims.roll_h || x->dim(3) != dims.roll_w) {
    throw std::invalid_argument("discriminator_forward: expected B x 1 x " +
                                std::to_string(dims.roll_h) + " x " + std::to_string(dims.roll_w) +
                                ", got " + shape_str(x->shape));
  }
  if (variant.use_chord != (chord != nullptr)) {
    throw std::invalid_argument(
        "discriminator_forward: chord condition does not match variant.use_chord");
  }
  if (variant.d_sees_prev != (prev != nullptr)) {
    throw std::invalid_argument(
        "discriminator_forward: previous-bar input does not match variant.d_sees_prev");
  }
  TensorPtr input = x;
  if (variant.use_chord) {
    input = concat_channels(tape, input,
                            broadcast_condition(tape, chord, dims.roll_h, dims.roll_w));
  }
  if (variant.d_sees_prev) input = concat_channels(tape, input, prev);

  auto f1 = leaky_relu(
      tape, add_channel_bias(tape, conv2d(tape, input, params.conv1.filters, 2, 2),
                             params.conv1.bias),
      0.2f);
  auto f2 = leaky_relu(
      tape,
      add_channel_bias(tape, conv2d(tape, f1, params.conv2.filters, 2, 2), params.conv2.bias),
      0.2f);
  auto flat = reshape(tape, f2, {x->dim(0), dims.d_flat()});
  auto hidden =
      leaky_relu(tape, fully_connected(tape, flat, params.fc1.weight, params.fc1.bias), 0.2f);
  auto logit = fully_connected(tape, hidden, params.fc2.weight, params.fc2.bias);

  DiscriminatorOutput out;
  out.logit = logit;
  out.prob = sigmoid(tape, logit);
  out.features = f1;
  return out;
}

TensorPtr monophonize(Tape* tape, const TensorPtr& activations) {
  if (activations->rank() != 4 || activations->dim(1) != 1) {
    throw std::invalid_argument("monophonize: expected B x 1 x H x W, got " +
                                shape_str(activations->shape));
  }
  const int B = activations->dim(0), H = activations->dim(2), W = activations->dim(3);
  auto out = Tensor::zeros(activations->shape, tape != nullptr && activations->requires_grad);
  std::vector<int> argmax(static_cast<std::size_t>(B) * W);
  for (int b = 0; b < B; ++b) {
    for (int w = 0; w < W; ++w) {
      int best = 0;
      float best_v = activations->values[(static_cast<std::size_t>(b) * H) * W + w];
      for (int h = 1; h < H; ++h) {
        const float v = activations->values[(static_cast<std::size_t>(b) * H + h) * W + w];
        if (v > best_v) {
          best_v = v;
          best = h;
        }
      }
      argmax[static_cast<std::size_t>(b) * W + w] = best;
      out->values[(static_cast<std::size_t>(b) * H + best) * W + w] = 1.0f;
    }
  }
  if (out->requires_grad) {
    auto idx = std::make_shared<std::vector<int>>(std::move(argmax));
    tape->record([activations, out, idx, B, H, W] {
      for (int b = 0; b < B; ++b) {
        for (int w = 0; w < W; ++w) {
          const int h = (*idx)[static_cast<std::size_t>(b) * W + w];
          const std::size_t at = (static_cast<std::size_t>(b) * H + h) * W + w;
          activations->grad[at] += out->grad[at];
        }
      }
    });
  }
  return out;
}

TensorPtr roll_to_tensor(const BarRoll& roll) {
  auto t = Tensor::zeros({1, 1, kNumPitches, kStepsPerBar});
  for (int p = 0; p < kNumPitches; ++p) {
    for (int s = 0; s < kStepsPerBar; ++s) {
      if (roll.at(p, s)) t->values[static_cast<std::size_t>(p) * kStepsPerBar + s] = 1.0f;
    }
  }
  return t;
}

BarRoll tensor_to_roll(const TensorPtr& binary) {
  if (binary->numel() != kNumPitches * kStepsPerBar) {
    throw std::invalid_argument("tensor_to_roll: expected a single 128 x 16 map, got " +
                                shape_str(binary->shape));
  }
  BarRoll roll;
  for (int p = 0; p < kNumPitches; ++p) {
    for (int s = 0; s < kStepsPerBar; ++s) {
      const float v = binary->values[static_cast<std::size_t>(p) * kStepsPerBar + s];
      if (v != 0.0f && v != 1.0f) {
        throw std::invalid_argument("tensor_to_roll: values must be binary");
      }
      roll.at(p, s) = v == 1.0f ? 1 : 0;
    }
  }
  if (!roll.is_monophonic()) throw std::invalid_argument("tensor_to_roll: roll not monophonic");
  return roll;
}

TensorPtr noise_batch(Rng& rng, int batch, int noise_len) {
  auto z = Tensor::zeros({batch, noise_len});
  for (float& v : z->values) v = static_cast<float>(rng.normal());
  return z;
}

TensorPtr chord_batch(const std::vector<ChordVec>& chords) {
  auto t = Tensor::zeros({static_cast<int>(chords.size()), kChordDims});
  for (std::size_t b = 0; b < chords.size(); ++b) {
    for (int i = 0; i < kChordDims; ++i) {
      t->values[b * kChordDims + static_cast<std::size_t>(i)] =
          chords[b][static_cast<std::size_t>(i)] ? 1.0f : 0.0f;
    }
  }
  return t;
}

}  // namespace bargan
