#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bargan/pianoroll.hpp"

namespace bargan {

struct NoteEvent {
  int pitch = 0;     // 0..127
  long onset = 0;    // ticks
  long duration = 1; // ticks, > 0
  int channel = 0;   // 0..15
  int velocity = 0;  // recorded, ignored downstream
};

struct MidiSong {
  int ppq = 480;
  int format = 1;
  long tempo_us_per_quarter = 500000;
  int timesig_num = 4;
  int timesig_den = 4;
  std::array<std::vector<NoteEvent>, 16> channels;  // sorted by onset per channel
  std::vector<std::string> warnings;

  bool is_four_four() const { return timesig_num == 4 && timesig_den == 4; }
};

// Parse failure with the byte offset where it was detected.
class MidiError : public std::runtime_error {
 public:
  MidiError(const std::string& message, std::size_t offset)
      : std::runtime_error(message + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Standard MIDI File format 0/1 reader. Pairs note-on with the matching
// note-off (or note-on velocity 0), honors running status, closes
// unmatched notes at end of track with a warning. Rejects format 2 and
// malformed input with a positioned MidiError; never reads past declared
// chunk lengths.
MidiSong parse_midi(std::span<const std::uint8_t> bytes);

// SMF format 1 writer, ppq 480. Track 1 holds the melody on channel 0
// (each run of identical pitch over consecutive steps becomes one note);
// track 2, when chords are given, holds one whole-bar triad per bar on
// channel 1. Re-parsing reproduces the rolls exactly.
std::vector<std::uint8_t> write_midi(const std::vector<BarRoll>& bars,
                                     const std::vector<ChordVec>* chords, double tempo_bpm);

// Snap events to the sixteenth-note grid: onsets round half up, durations
// too with a 1-step floor; events shorter than half a step are dropped
// (counted in dropped_short when given).
std::vector<GridNote> quantize(const std::vector<NoteEvent>& events, int ppq,
                               int* dropped_short = nullptr);

inline constexpr int kWritePpq = 480;

}  // namespace bargan
