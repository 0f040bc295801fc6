#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bargan/models.hpp"
#include "bargan/pianoroll.hpp"

namespace bargan {

struct GenerationRequest {
  std::optional<BarRoll> primer;               // becomes bar 1 when present
  std::optional<std::vector<ChordVec>> chords; // one per bar when present
  int n_bars = 8;
  std::uint64_t seed = 0;
};

// Conditions actually fed to the conditioner, one entry per generated
// bar: (bar index, previous-bar condition).
struct GenerationTrace {
  std::vector<std::pair<int, BarRoll>> conditions;
};

// Bar-by-bar chained generation: bar 1 is the primer (or generated from
// an all-zero condition), every later bar is conditioned on the bar just
// emitted. Fresh noise per generated bar from the seeded stream; the
// checkpointed parameters are never mutated.
std::vector<BarRoll> generate_sequence(const MidiNetModel& model, const GenerationRequest& request,
                                       GenerationTrace* trace = nullptr);

// generation with no primer (all-zero initial condition)
std::vector<BarRoll> from_scratch(const MidiNetModel& model, int n_bars,
                                  const std::optional<std::vector<ChordVec>>& chords,
                                  std::uint64_t seed);

}  // namespace bargan
