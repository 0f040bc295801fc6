#include "bargan/synth_corpus.hpp"

#include <algorithm>

namespace bargan {

namespace {

// C major scale degrees
constexpr int kScale[7] = {0, 2, 4, 5, 7, 9, 11};

// I-IV-V-vi in C
const Chord kProgression[4] = {{0, false}, {5, false}, {7, false}, {9, true}};

int scale_pitch(int degree) {
  // degree 0 = C4; negative degrees reach down, folding keeps the register
  const int octave = degree >= 0 ? degree / 7 : (degree - 6) / 7;
  const int idx = degree - octave * 7;
  return fold_to_register(60 + octave * 12 + kScale[idx]);
}

}  // namespace

SyntheticSong make_synthetic_song(Rng& rng, int n_groups, bool with_gaps) {
  SyntheticSong song;
  const int n_bars = n_groups * kBarsPerGroup;
  song.bars.resize(static_cast<std::size_t>(n_bars));
  song.chords.reserve(static_cast<std::size_t>(n_bars));

  int degree = 7;  // start around C5
  for (int b = 0; b < n_bars; ++b) {
    const Chord chord = kProgression[b % 4];
    song.chords.push_back(chord);
    BarRoll& bar = song.bars[static_cast<std::size_t>(b)];

    bool bar_has_note = false;
    int s = 0;
    while (s < kStepsPerBar) {
      const int run = rng.below(3) == 0 ? 4 : 2;
      const int end = std::min(s + run, kStepsPerBar);
      const bool last_chance = end >= kStepsPerBar;
      if (with_gaps && !( last_chance && !bar_has_note) && rng.below(6) == 0) {
        s = end;  // rest; preprocessing will prolong over it
        continue;
      }
      degree += static_cast<int>(rng.below(5)) - 2;  // walk up to two scale steps
      degree = std::clamp(degree, -7, 13);
      const int pitch = scale_pitch(degree);
      for (int i = s; i < end; ++i) bar.at(pitch, i) = 1;
      bar_has_note = true;
      s = end;
    }
  }
  return song;
}

std::vector<TrainingTriple> make_synthetic_triples(std::size_t count, std::uint64_t seed,
                                                   bool with_chords) {
  Rng rng(seed);
  const int n_groups = static_cast<int>((count + kBarsPerGroup - 1) / kBarsPerGroup);
  auto song = make_synthetic_song(rng, n_groups, false);

  std::vector<TrainingTriple> triples;
  triples.reserve(static_cast<std::size_t>(n_groups) * kBarsPerGroup);
  for (int g = 0; g < n_groups; ++g) {
    BarGroup group;
    for (int b = 0; b < kBarsPerGroup; ++b) {
      group.bars[static_cast<std::size_t>(b)] =
          song.bars[static_cast<std::size_t>(g * kBarsPerGroup + b)];
    }
    if (with_chords) {
      std::array<Chord, kBarsPerGroup> chords;
      for (int b = 0; b < kBarsPerGroup; ++b) {
        chords[static_cast<std::size_t>(b)] =
            song.chords[static_cast<std::size_t>(g * kBarsPerGroup + b)];
      }
      group.chords = chords;
    }
    auto group_triples = make_training_triples(group);
    triples.insert(triples.end(), group_triples.begin(), group_triples.end());
  }
  triples.resize(count);
  return triples;
}

}  // namespace bargan
