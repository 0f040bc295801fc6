#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bargan/rng.hpp"

namespace bargan {

inline constexpr int kNumPitches = 128;
inline constexpr int kStepsPerBar = 16;  // sixteenth notes in a 4/4 bar
inline constexpr int kBarsPerGroup = 8;
inline constexpr int kRegisterLow = 60;   // C4
inline constexpr int kRegisterHigh = 83;  // B5
inline constexpr int kChordDims = 13;

// One bar of music: 128 pitch rows by 16 step columns, at most one active
// pitch per column. Preprocessed real bars have exactly one active pitch
// per column, inside [kRegisterLow, kRegisterHigh].
struct BarRoll {
  std::array<std::uint8_t, static_cast<std::size_t>(kNumPitches) * kStepsPerBar> cells{};

  std::uint8_t& at(int pitch, int step) {
    return cells[static_cast<std::size_t>(pitch) * kStepsPerBar + step];
  }
  std::uint8_t at(int pitch, int step) const {
    return cells[static_cast<std::size_t>(pitch) * kStepsPerBar + step];
  }

  // active pitch of a column, or -1 when silent
  int active_pitch(int step) const;
  bool is_monophonic() const;
  bool is_empty() const;
  // every column active, all pitches within the two-octave register
  bool is_valid_real_bar() const;

  bool operator==(const BarRoll&) const = default;
};

// Major or minor triad, identified by root pitch class (C = 0).
struct Chord {
  int root_pc = 0;
  bool minor = false;
  bool operator==(const Chord&) const = default;
};

// 13-dim chord code: dims 1..12 one-hot key slot, dim 13 quality.
// A minor chord occupies the slot of its relative major.
using ChordVec = std::array<std::uint8_t, kChordDims>;

ChordVec chord_to_vec(const Chord& chord);
// nullopt for the all-zero "no chord" vector; throws on malformed vectors
std::optional<Chord> vec_to_chord(const ChordVec& vec);
bool chordvec_present(const ChordVec& vec);

std::optional<Chord> parse_chord_name(const std::string& token);  // "C", "F#", "Am", "Bbm", ...
std::string chord_name(const Chord& chord);

// Note on the sixteenth-note grid. Onset and duration are in steps.
struct GridNote {
  int pitch = 0;
  int onset = 0;
  int duration = 1;
  bool operator==(const GridNote&) const = default;
};

struct GridChord {
  Chord chord;
  int onset = 0;
  int duration = 1;
};

// ---- §-pipeline building blocks ----

// octave-shift into [kRegisterLow, kRegisterHigh]; pitch class preserved
int fold_to_register(int pitch);

// Split note events at bar boundaries and trim the song to whole 8-bar
// groups; notes crossing a barline are divided between the bars. Returned
// onsets are bar-local.
std::vector<std::vector<GridNote>> segment_into_bars(const std::vector<GridNote>& notes);

// Later-onset notes win; earlier notes are truncated at the next onset
// (dropped if nothing remains).
std::vector<GridNote> resolve_overlaps(std::vector<GridNote> notes);

// Fill silence by prolonging the preceding note; a bar that starts silent
// has its first note extended back to step 0. Returns nullopt for a bar
// with no notes at all (skip-bar signal). Expects overlap-free input.
std::optional<BarRoll> bar_to_roll(const std::vector<GridNote>& notes_in_bar);

// The chord sounding longest within [bar_start, bar_start+16) wins;
// ties go to the earliest. nullopt when no chord overlaps the bar.
std::optional<Chord> prune_chords(const std::vector<GridChord>& chords, int bar_start);

// Eight preprocessed bars plus their per-bar chords (absent for corpora
// with no chord channel).
struct BarGroup {
  std::array<BarRoll, kBarsPerGroup> bars;
  std::optional<std::array<Chord, kBarsPerGroup>> chords;
};

// Circular shift to all 12 keys: melody pitches move up by s then fold
// back into the register, chord roots rotate by s. Output holds 12 groups
// per input group, shift-0 first.
std::vector<BarGroup> transpose_augment(const std::vector<BarGroup>& groups);

struct TrainingTriple {
  BarRoll prev;  // all-zero for the empty leading bar
  BarRoll cur;
  ChordVec chord{};  // all-zero when the corpus has no chords
};

// (zero, b1, c1), (b1, b2, c2), ..., (b7, b8, c8)
std::array<TrainingTriple, kBarsPerGroup> make_training_triples(const BarGroup& group);

// ---- batching ----

// Seeded shuffled index batches for one epoch; the trailing partial batch
// is dropped. Draws from the shared Rng, so consecutive epochs differ
// while the whole stream stays reproducible.
std::vector<std::vector<std::uint32_t>> epoch_batches(std::size_t count, int batch_size, Rng& rng);

// ---- dataset file ----

// Binary triple records: per triple 16 bytes active-pitch-per-column for
// prev (255 = silent column), 16 for cur, 13 chord bytes. Header is the
// magic "MNDS", a version byte, and a little-endian u64 record count.
void write_dataset(const std::string& path, const std::vector<TrainingTriple>& triples);
std::vector<TrainingTriple> read_dataset(const std::string& path);
bool dataset_has_chords(const std::vector<TrainingTriple>& triples);

}  // namespace bargan
