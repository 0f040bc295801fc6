#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "bargan/midi.hpp"
#include "bargan/pianoroll.hpp"

namespace bargan {

// Whole-file rejection (wrong meter, no melody, unsupported chords, too short).
class RejectSong : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PreprocessResult {
  std::vector<BarGroup> groups;
  int skipped_groups = 0;       // groups dropped for empty bars or unresolvable chords
  int dropped_short_notes = 0;  // melody notes below half a step
};

// Timed triads from the chord channel: simultaneous notes grouped by
// onset, classified as major/minor by pitch-class intervals. Anything
// that is not one of the 24 basic triads rejects the song.
std::vector<GridChord> extract_chords(const std::vector<NoteEvent>& events, int ppq);

// Per-song pipeline: 4/4 gate, sixteenth-note quantization, bar
// segmentation into 8-bar groups, overlap resolution, register folding,
// pause prolongation, one pruned chord per bar (carried over chordless
// bars). Melody is read from channel 0, chords from channel 1.
PreprocessResult preprocess_song(const MidiSong& song);

std::vector<TrainingTriple> groups_to_triples(const std::vector<BarGroup>& groups);

}  // namespace bargan
