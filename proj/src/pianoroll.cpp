#include "bargan/pianoroll.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace bargan {

namespace {

constexpr std::uint8_t kSilentColumn = 255;

const char* kSharpNames[12] = {"C",  "C#", "D",  "D#", "E",  "F",
                               "F#", "G",  "G#", "A",  "A#", "B"};

}  // namespace

int BarRoll::active_pitch(int step) const {
  for (int p = 0; p < kNumPitches; ++p) {
    if (at(p, step)) return p;
  }
  return -1;
}

bool BarRoll::is_monophonic() const {
  for (int s = 0; s < kStepsPerBar; ++s) {
    int active = 0;
    for (int p = 0; p < kNumPitches; ++p) active += at(p, s) ? 1 : 0;
    if (active > 1) return false;
  }
  return true;
}

bool BarRoll::is_empty() const {
  for (auto c : cells) {
    if (c) return false;
  }
  return true;
}

bool BarRoll::is_valid_real_bar() const {
  if (!is_monophonic()) return false;
  for (int s = 0; s < kStepsPerBar; ++s) {
    const int p = active_pitch(s);
    if (p < kRegisterLow || p > kRegisterHigh) return false;
  }
  return true;
}

ChordVec chord_to_vec(const Chord& chord) {
  if (chord.root_pc < 0 || chord.root_pc > 11) {
    throw std::invalid_argument("chord root out of range: " + std::to_string(chord.root_pc));
  }
  ChordVec v{};
  // the minor row starts at A, so a minor chord lands on the slot of its
  // relative major
  const int slot = chord.minor ? (chord.root_pc + 3) % 12 : chord.root_pc;
  v[static_cast<std::size_t>(slot)] = 1;
  v[12] = chord.minor ? 1 : 0;
  return v;
}

bool chordvec_present(const ChordVec& vec) {
  for (int i = 0; i < 12; ++i) {
    if (vec[static_cast<std::size_t>(i)]) return true;
  }
  return false;
}

std::optional<Chord> vec_to_chord(const ChordVec& vec) {
  int slot = -1;
  int count = 0;
  for (int i = 0; i < 12; ++i) {
    if (vec[static_cast<std::size_t>(i)]) {
      slot = i;
      ++count;
    }
  }
  if (count == 0 && vec[12] == 0) return std::nullopt;
  if (count != 1 || vec[12] > 1) {
    throw std::invalid_argument("malformed chord vector: key dims must be one-hot");
  }
  Chord c;
  c.minor = vec[12] == 1;
  c.root_pc = c.minor ? (slot + 9) % 12 : slot;
  return c;
}

std::optional<Chord> parse_chord_name(const std::string& token) {
  if (token.empty()) return std::nullopt;
  int pc;
  switch (token[0]) {
    case 'C': pc = 0; break;
    case 'D': pc = 2; break;
    case 'E': pc = 4; break;
    case 'F': pc = 5; break;
    case 'G': pc = 7; break;
    case 'A': pc = 9; break;
    case 'B': pc = 11; break;
    default: return std::nullopt;
  }
  std::size_t i = 1;
  if (i < token.size() && (token[i] == '#' || token[i] == 'b')) {
    pc = (pc + (token[i] == '#' ? 1 : 11)) % 12;
    ++i;
  }
  bool minor = false;
  if (i < token.size() && token[i] == 'm') {
    minor = true;
    ++i;
  }
  if (i != token.size()) return std::nullopt;
  return Chord{pc, minor};
}

std::string chord_name(const Chord& chord) {
  std::string s = kSharpNames[chord.root_pc % 12];
  if (chord.minor) s += "m";
  return s;
}

int fold_to_register(int pitch) {
  while (pitch < kRegisterLow) pitch += 12;
  while (pitch > kRegisterHigh) pitch -= 12;
  return pitch;
}

std::vector<std::vector<GridNote>> segment_into_bars(const std::vector<GridNote>& notes) {
  if (notes.empty()) return {};
  int end_step = 0;
  for (const auto& n : notes) end_step = std::max(end_step, n.onset + n.duration);
  const int total_bars = (end_step + kStepsPerBar - 1) / kStepsPerBar;
  const int kept_bars = (total_bars / kBarsPerGroup) * kBarsPerGroup;
  if (kept_bars == 0) return {};

  std::vector<std::vector<GridNote>> bars(static_cast<std::size_t>(kept_bars));
  for (const auto& n : notes) {
    int pos = n.onset;
    const int end = n.onset + n.duration;
    while (pos < end) {
      const int bar = pos / kStepsPerBar;
      if (bar >= kept_bars) break;
      const int bar_end = (bar + 1) * kStepsPerBar;
      const int seg_end = std::min(end, bar_end);
      bars[static_cast<std::size_t>(bar)].push_back(
          GridNote{n.pitch, pos - bar * kStepsPerBar, seg_end - pos});
      pos = seg_end;
    }
  }
  for (auto& bar : bars) {
    std::stable_sort(bar.begin(), bar.end(),
                     [](const GridNote& a, const GridNote& b) { return a.onset < b.onset; });
  }
  return bars;
}

std::vector<GridNote> resolve_overlaps(std::vector<GridNote> notes) {
  std::stable_sort(notes.begin(), notes.end(),
                   [](const GridNote& a, const GridNote& b) { return a.onset < b.onset; });
  std::vector<GridNote> out;
  for (const auto& n : notes) {
    while (!out.empty() && out.back().onset >= n.onset) out.pop_back();
    if (!out.empty() && out.back().onset + out.back().duration > n.onset) {
      out.back().duration = n.onset - out.back().onset;
    }
    out.push_back(n);
  }
  return out;
}

std::optional<BarRoll> bar_to_roll(const std::vector<GridNote>& notes_in_bar) {
  if (notes_in_bar.empty()) return std::nullopt;
  BarRoll roll;
  // walk the columns, carrying the sounding pitch across silence; the
  // carried pitch starts as the first note's, which extends it back to
  // step 0 when the bar opens silent
  int idx = 0;
  const int n = static_cast<int>(notes_in_bar.size());
  int current = notes_in_bar[0].pitch;
  for (int s = 0; s < kStepsPerBar; ++s) {
    while (idx < n && notes_in_bar[static_cast<std::size_t>(idx)].onset <= s) {
      current = notes_in_bar[static_cast<std::size_t>(idx)].pitch;
      ++idx;
    }
    roll.at(current, s) = 1;
  }
  return roll;
}

std::optional<Chord> prune_chords(const std::vector<GridChord>& chords, int bar_start) {
  const int bar_end = bar_start + kStepsPerBar;
  int best = -1;
  int best_overlap = 0;
  for (std::size_t i = 0; i < chords.size(); ++i) {
    const auto& c = chords[i];
    const int overlap = std::min(bar_end, c.onset + c.duration) - std::max(bar_start, c.onset);
    if (overlap <= 0) continue;
    if (overlap > best_overlap ||
        (overlap == best_overlap && best >= 0 &&
         c.onset < chords[static_cast<std::size_t>(best)].onset)) {
      best = static_cast<int>(i);
      best_overlap = overlap;
    }
  }
  if (best < 0) return std::nullopt;
  return chords[static_cast<std::size_t>(best)].chord;
}

namespace {

BarRoll shift_roll(const BarRoll& roll, int shift) {
  BarRoll out;
  for (int s = 0; s < kStepsPerBar; ++s) {
    const int p = roll.active_pitch(s);
    if (p >= 0) out.at(fold_to_register(p + shift), s) = 1;
  }
  return out;
}

}  // namespace

std::vector<BarGroup> transpose_augment(const std::vector<BarGroup>& groups) {
  std::vector<BarGroup> out;
  out.reserve(groups.size() * 12);
  for (const auto& g : groups) {
    for (int shift = 0; shift < 12; ++shift) {
      BarGroup shifted;
      for (int b = 0; b < kBarsPerGroup; ++b) {
        shifted.bars[static_cast<std::size_t>(b)] =
            shift_roll(g.bars[static_cast<std::size_t>(b)], shift);
      }
      if (g.chords) {
        std::array<Chord, kBarsPerGroup> chords;
        for (int b = 0; b < kBarsPerGroup; ++b) {
          const Chord& c = (*g.chords)[static_cast<std::size_t>(b)];
          chords[static_cast<std::size_t>(b)] = Chord{(c.root_pc + shift) % 12, c.minor};
        }
        shifted.chords = chords;
      }
      out.push_back(std::move(shifted));
    }
  }
  return out;
}

std::array<TrainingTriple, kBarsPerGroup> make_training_triples(const BarGroup& group) {
  std::array<TrainingTriple, kBarsPerGroup> triples;
  for (int b = 0; b < kBarsPerGroup; ++b) {
    auto& t = triples[static_cast<std::size_t>(b)];
    t.cur = group.bars[static_cast<std::size_t>(b)];
    if (b > 0) t.prev = group.bars[static_cast<std::size_t>(b - 1)];
    if (group.chords) t.chord = chord_to_vec((*group.chords)[static_cast<std::size_t>(b)]);
  }
  return triples;
}

std::vector<std::vector<std::uint32_t>> epoch_batches(std::size_t count, int batch_size,
                                                      Rng& rng) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (count == 0) throw std::invalid_argument("empty dataset");
  std::vector<std::uint32_t> order(count);
  std::iota(order.begin(), order.end(), 0u);
  rng.shuffle(order);
  const std::size_t n_batches = count / static_cast<std::size_t>(batch_size);
  std::vector<std::vector<std::uint32_t>> batches(n_batches);
  for (std::size_t i = 0; i < n_batches; ++i) {
    batches[i].assign(order.begin() + static_cast<std::ptrdiff_t>(i * batch_size),
                      order.begin() + static_cast<std::ptrdiff_t>((i + 1) * batch_size));
  }
  return batches;
}

// ---- dataset file ----

namespace {

constexpr char kDatasetMagic[4] = {'M', 'N', 'D', 'S'};
constexpr std::uint8_t kDatasetVersion = 1;

void encode_roll(const BarRoll& roll, std::uint8_t* out16) {
  for (int s = 0; s < kStepsPerBar; ++s) {
    const int p = roll.active_pitch(s);
    out16[s] = p < 0 ? kSilentColumn : static_cast<std::uint8_t>(p);
  }
}

BarRoll decode_roll(const std::uint8_t* in16) {
  BarRoll roll;
  for (int s = 0; s < kStepsPerBar; ++s) {
    if (in16[s] != kSilentColumn) {
      if (in16[s] >= kNumPitches) {
        throw std::runtime_error("dataset: pitch byte out of range");
      }
      roll.at(in16[s], s) = 1;
    }
  }
  return roll;
}

}  // namespace

void write_dataset(const std::string& path, const std::vector<TrainingTriple>& triples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open dataset for writing: " + path);
  out.write(kDatasetMagic, 4);
  out.put(static_cast<char>(kDatasetVersion));
  const std::uint64_t count = triples.size();
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((count >> (8 * i)) & 0xff));
  for (const auto& t : triples) {
    std::uint8_t rec[16 + 16 + kChordDims];
    encode_roll(t.prev, rec);
    encode_roll(t.cur, rec + 16);
    for (int i = 0; i < kChordDims; ++i) rec[32 + i] = t.chord[static_cast<std::size_t>(i)];
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
  }
  if (!out) throw std::runtime_error("failed writing dataset: " + path);
}

std::vector<TrainingTriple> read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kDatasetMagic, 4)) {
    throw std::runtime_error("not a dataset file (bad magic): " + path);
  }
  const int version = in.get();
  if (version != kDatasetVersion) {
    throw std::runtime_error("unsupported dataset version " + std::to_string(version));
  }
  std::uint64_t count = 0;
  for (int i = 0; i < 8; ++i) {
    const int byte = in.get();
    if (byte < 0) throw std::runtime_error("truncated dataset header: " + path);
    count |= static_cast<std::uint64_t>(byte) << (8 * i);
  }
  std::vector<TrainingTriple> triples;
  triples.reserve(count);
  for (std::uint64_t r = 0; r < count; ++r) {
    std::uint8_t rec[16 + 16 + kChordDims];
    in.read(reinterpret_cast<char*>(rec), sizeof(rec));
    if (!in) throw std::runtime_error("truncated dataset record " + std::to_string(r));
    TrainingTriple t;
    t.prev = decode_roll(rec);
    t.cur = decode_roll(rec + 16);
    for (int i = 0; i < kChordDims; ++i) t.chord[static_cast<std::size_t>(i)] = rec[32 + i];
    triples.push_back(t);
  }
  return triples;
}

bool dataset_has_chords(const std::vector<TrainingTriple>& triples) {
  if (triples.empty()) return false;
  for (const auto& t : triples) {
    if (!chordvec_present(t.chord)) return false;
  }
  return true;
}

}  // namespace bargan
