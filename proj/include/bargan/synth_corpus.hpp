#pragma once

#include <cstdint>
#include <vector>

#include "bargan/pianoroll.hpp"
#include "bargan/rng.hpp"

namespace bargan {

// Seeded synthetic pop-style material: diatonic random walks over a
// I-IV-V-vi progression, one chord per bar. Stands in for a real corpus
// in tests and desk runs.
struct SyntheticSong {
  std::vector<BarRoll> bars;    // n_groups * 8 bars, every column active
  std::vector<Chord> chords;    // one per bar
};

// with_gaps leaves occasional silent columns so the preprocessing rules
// (pause prolongation, leading-silence extension) have work to do
SyntheticSong make_synthetic_song(Rng& rng, int n_groups, bool with_gaps = false);

// ready-made training triples (already preprocessed shape), count rounded
// up to whole groups then truncated
std::vector<TrainingTriple> make_synthetic_triples(std::size_t count, std::uint64_t seed,
                                                   bool with_chords = true);

}  // namespace bargan
