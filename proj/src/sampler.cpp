#include "bargan/sampler.hpp"

#include <stdexcept>

namespace bargan {

std::vector<BarRoll> generate_sequence(const MidiNetModel& model, const GenerationRequest& request,
                                       GenerationTrace* trace) {
  if (request.n_bars < 1) throw std::invalid_argument("generate_sequence: n_bars must be >= 1");
  if (request.chords.has_value() != model.variant.use_chord) {
    throw std::invalid_argument(
        "generate_sequence: chord list does not match the variant's chord conditioning");
  }
  if (request.chords &&
      request.chords->size() != static_cast<std::size_t>(request.n_bars)) {
    throw std::invalid_argument("generate_sequence: need one chord per bar, got " +
                                std::to_string(request.chords->size()) + " for " +
                                std::to_string(request.n_bars) + " bars");
  }
  if (model.dims.roll_h != kNumPitches || model.dims.roll_w != kStepsPerBar) {
    throw std::invalid_argument("generate_sequence: model is not bar-sized");
  }

  Rng rng(request.seed);
  std::vector<BarRoll> bars;
  bars.reserve(static_cast<std::size_t>(request.n_bars));
  BarRoll prev{};  // all-zero before anything is emitted

  for (int k = 0; k < request.n_bars; ++k) {
    if (k == 0 && request.primer) {
      bars.push_back(*request.primer);
      prev = *request.primer;
      continue;
    }
    auto z = noise_batch(rng, 1, model.dims.noise_len);
    TensorPtr chord;
    if (request.chords) {
      chord = chord_batch({(*request.chords)[static_cast<std::size_t>(k)]});
    }
    if (trace) trace->conditions.emplace_back(k, prev);

    std::array<TensorPtr, 4> maps;
    const std::array<TensorPtr, 4>* maps_ptr = nullptr;
    if (model.variant.has_twod()) {
      maps = conditioner_forward(nullptr, model.c, model.dims, roll_to_tensor(prev));
      maps_ptr = &maps;
    }
    auto activations =
        generator_forward(nullptr, model.g, model.variant, model.dims, z, chord, maps_ptr);
    BarRoll bar = tensor_to_roll(monophonize(nullptr, activations));
    bars.push_back(bar);
    prev = bar;
  }
  return bars;
}

std::vector<BarRoll> from_scratch(const MidiNetModel& model, int n_bars,
                                  const std::optional<std::vector<ChordVec>>& chords,
                                  std::uint64_t seed) {
  GenerationRequest request;
  request.n_bars = n_bars;
  request.chords = chords;
  request.seed = seed;
  return generate_sequence(model, request);
}

}  // namespace bargan
