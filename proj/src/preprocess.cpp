#include "bargan/preprocess.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>

namespace bargan {

namespace {

std::optional<Chord> classify_triad(const std::set<int>& pcs) {
  if (pcs.size() != 3) return std::nullopt;
  for (int root : pcs) {
    if (pcs.count((root + 7) % 12) == 0) continue;
    if (pcs.count((root + 4) % 12)) return Chord{root, false};
    if (pcs.count((root + 3) % 12)) return Chord{root, true};
  }
  return std::nullopt;
}

}  // namespace

std::vector<GridChord> extract_chords(const std::vector<NoteEvent>& events, int ppq) {
  auto grid = quantize(events, ppq);
  std::map<int, std::vector<GridNote>> by_onset;
  for (const auto& n : grid) by_onset[n.onset].push_back(n);

  std::vector<GridChord> chords;
  for (const auto& [onset, notes] : by_onset) {
    std::set<int> pcs;
    int duration = 1;
    for (const auto& n : notes) {
      pcs.insert(n.pitch % 12);
      duration = std::max(duration, n.duration);
    }
    const auto chord = classify_triad(pcs);
    if (!chord) {
      throw RejectSong("chord channel holds a chord outside the 24 basic triads (step " +
                       std::to_string(onset) + ")");
    }
    chords.push_back(GridChord{*chord, onset, duration});
  }
  return chords;
}

PreprocessResult preprocess_song(const MidiSong& song) {
  if (!song.is_four_four()) {
    throw RejectSong("time signature " + std::to_string(song.timesig_num) + "/" +
                     std::to_string(song.timesig_den) + " is not 4/4");
  }
  const auto& melody_events = song.channels[0];
  if (melody_events.empty()) throw RejectSong("no melody notes on channel 0");

  PreprocessResult result;
  auto melody = quantize(melody_events, song.ppq, &result.dropped_short_notes);

  const bool has_chords = !song.channels[1].empty();
  std::vector<GridChord> chords;
  if (has_chords) chords = extract_chords(song.channels[1], song.ppq);

  auto bars = segment_into_bars(melody);
  if (bars.empty()) throw RejectSong("shorter than one 8-bar group after quantization");

  const int n_groups = static_cast<int>(bars.size()) / kBarsPerGroup;
  std::optional<Chord> carried;
  for (int g = 0; g < n_groups; ++g) {
    BarGroup group;
    std::array<Chord, kBarsPerGroup> group_chords;
    bool ok = true;
    for (int b = 0; b < kBarsPerGroup && ok; ++b) {
      const int bar_index = g * kBarsPerGroup + b;
      auto events = resolve_overlaps(bars[static_cast<std::size_t>(bar_index)]);
      for (auto& e : events) e.pitch = fold_to_register(e.pitch);
      auto roll = bar_to_roll(events);
      if (!roll) {
        ok = false;  // an empty bar poisons the whole group
        break;
      }
      group.bars[static_cast<std::size_t>(b)] = *roll;

      if (has_chords) {
        auto chord = prune_chords(chords, bar_index * kStepsPerBar);
        if (!chord) chord = carried;  // chordless bar: carry the previous chord
        if (!chord) {
          ok = false;  // nothing to carry at the group opening
          break;
        }
        carried = chord;
        group_chords[static_cast<std::size_t>(b)] = *chord;
      }
    }
    if (!ok) {
      result.skipped_groups += 1;
      continue;
    }
    if (has_chords) group.chords = group_chords;
    result.groups.push_back(std::move(group));
  }
  return result;
}

std::vector<TrainingTriple> groups_to_triples(const std::vector<BarGroup>& groups) {
  std::vector<TrainingTriple> triples;
  triples.reserve(groups.size() * kBarsPerGroup);
  for (const auto& g : groups) {
    auto t = make_training_triples(g);
    triples.insert(triples.end(), t.begin(), t.end());
  }
  return triples;
}

}  // namespace bargan
