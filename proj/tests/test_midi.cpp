#include <cstdint>
#include <vector>

#include "bargan/midi.hpp"
#include "bargan/pianoroll.hpp"
#include "bargan/rng.hpp"
#include "doctest.h"

using namespace bargan;

namespace {

using Bytes = std::vector<std::uint8_t>;

Bytes header(int format, int ntrks, int division) {
  return {'M', 'T', 'h', 'd', 0, 0, 0, 6,
          0, static_cast<std::uint8_t>(format),
          0, static_cast<std::uint8_t>(ntrks),
          static_cast<std::uint8_t>(division >> 8), static_cast<std::uint8_t>(division & 0xff)};
}

Bytes track(const Bytes& body) {
  Bytes t = {'M', 'T', 'r', 'k'};
  const std::uint32_t len = static_cast<std::uint32_t>(body.size()) + 4;
  t.push_back(static_cast<std::uint8_t>(len >> 24));
  t.push_back(static_cast<std::uint8_t>(len >> 16));
  t.push_back(static_cast<std::uint8_t>(len >> 8));
  t.push_back(static_cast<std::uint8_t>(len));
  t.insert(t.end(), body.begin(), body.end());
  t.insert(t.end(), {0x00, 0xff, 0x2f, 0x00});  // end of track
  return t;
}

Bytes cat(std::initializer_list<Bytes> parts) {
  Bytes out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// events -> raw occupancy rolls, the inverse of writing (no prolongation)
std::vector<BarRoll> mark_bars(const std::vector<std::vector<GridNote>>& bars) {
  std::vector<BarRoll> rolls(bars.size());
  for (std::size_t b = 0; b < bars.size(); ++b) {
    for (const auto& n : bars[b]) {
      for (int s = n.onset; s < n.onset + n.duration && s < kStepsPerBar; ++s) {
        rolls[b].at(n.pitch, s) = 1;
      }
    }
  }
  return rolls;
}

}  // namespace

TEST_CASE("parse_midi reads a single note") {
  // note-on pitch 60 at tick 0, note-off at tick 480
  const Bytes body = {0x00, 0x90, 60, 100, 0x83, 0x60, 0x80, 60, 0};
  auto song = parse_midi(cat({header(0, 1, 480), track(body)}));
  CHECK(song.ppq == 480);
  REQUIRE(song.channels[0].size() == 1);
  CHECK(song.channels[0][0].pitch == 60);
  CHECK(song.channels[0][0].onset == 0);
  CHECK(song.channels[0][0].duration == 480);
}

TEST_CASE("note-on with velocity zero closes the note") {
  const Bytes body = {0x00, 0x90, 64, 100, 0x60, 0x90, 64, 0};
  auto song = parse_midi(cat({header(0, 1, 96), track(body)}));
  REQUIRE(song.channels[0].size() == 1);
  CHECK(song.channels[0][0].duration == 96);
}

TEST_CASE("running status is honored") {
  // second note-on omits the status byte
  const Bytes body = {0x00, 0x90, 60, 100, 0x10, 60, 0, 0x10, 62, 100, 0x10, 62, 0};
  auto song = parse_midi(cat({header(0, 1, 480), track(body)}));
  REQUIRE(song.channels[0].size() == 2);
  CHECK(song.channels[0][1].pitch == 62);
  CHECK(song.channels[0][1].onset == 0x20);
}

TEST_CASE("bad header magic is rejected") {
  const Bytes bad = {'X', 'T', 'h', 'd', 0, 0, 0, 6};
  CHECK_THROWS_AS(parse_midi(bad), MidiError);
}

TEST_CASE("SMF format 2 is rejected with position info") {
  try {
    parse_midi(header(2, 0, 480));
    FAIL("expected MidiError");
  } catch (const MidiError& e) {
    CHECK(std::string(e.what()).find("format 2") != std::string::npos);
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
}

TEST_CASE("truncated chunk is rejected") {
  Bytes data = cat({header(1, 1, 480)});
  data.insert(data.end(), {'M', 'T', 'r', 'k', 0, 0, 0, 50, 0x00});
  CHECK_THROWS_AS(parse_midi(data), MidiError);
}

TEST_CASE("unmatched note-on closes at end of track with a warning") {
  // note-on, then a controller event 240 ticks later, never a note-off
  const Bytes body = {0x00, 0x90, 70, 100, 0x81, 0x70, 0xb0, 0x07, 0x64};
  auto song = parse_midi(cat({header(0, 1, 480), track(body)}));
  REQUIRE(song.channels[0].size() == 1);
  CHECK(song.channels[0][0].duration == 240);
  CHECK(!song.warnings.empty());
}

TEST_CASE("tempo and time signature metas are read") {
  const Bytes body = {0x00, 0xff, 0x51, 0x03, 0x06, 0x1a, 0x80,   // 400000 us/quarter
                      0x00, 0xff, 0x58, 0x04, 0x03, 0x02, 0x18, 0x08};  // 3/4
  auto song = parse_midi(cat({header(0, 1, 480), track(body)}));
  CHECK(song.tempo_us_per_quarter == 400000);
  CHECK(song.timesig_num == 3);
  CHECK(song.timesig_den == 4);
  CHECK(!song.is_four_four());
}

TEST_CASE("write_midi renders a full-bar note") {
  BarRoll bar;
  for (int s = 0; s < kStepsPerBar; ++s) bar.at(60, s) = 1;
  auto bytes = write_midi({bar}, nullptr, 120.0);
  auto song = parse_midi(bytes);
  CHECK(song.is_four_four());
  REQUIRE(song.channels[0].size() == 1);
  CHECK(song.channels[0][0].pitch == 60);
  CHECK(song.channels[0][0].duration == 16 * (kWritePpq / 4));
}

TEST_CASE("write_midi spans two bars end to end") {
  BarRoll a, b;
  for (int s = 0; s < kStepsPerBar; ++s) {
    a.at(60, s) = 1;
    b.at(62, s) = 1;
  }
  auto song = parse_midi(write_midi({a, b}, nullptr, 120.0));
  REQUIRE(song.channels[0].size() == 2);
  const auto& last = song.channels[0][1];
  CHECK(last.onset + last.duration == 32 * (kWritePpq / 4));
}

TEST_CASE("write_midi refuses an empty bar sequence") {
  CHECK_THROWS_AS(write_midi({}, nullptr, 120.0), std::invalid_argument);
}

TEST_CASE("chord track renders whole-bar triads") {
  BarRoll bar;
  for (int s = 0; s < kStepsPerBar; ++s) bar.at(72, s) = 1;
  std::vector<ChordVec> chords = {chord_to_vec(Chord{9, true})};  // A minor
  auto song = parse_midi(write_midi({bar}, &chords, 120.0));
  REQUIRE(song.channels[1].size() == 3);
  std::vector<int> pcs;
  for (const auto& n : song.channels[1]) pcs.push_back(n.pitch % 12);
  CHECK(std::count(pcs.begin(), pcs.end(), 9) == 1);   // A
  CHECK(std::count(pcs.begin(), pcs.end(), 0) == 1);   // C
  CHECK(std::count(pcs.begin(), pcs.end(), 4) == 1);   // E
  for (const auto& n : song.channels[1]) CHECK(n.duration == 16 * (kWritePpq / 4));
}

TEST_CASE("quantize snaps to the sixteenth grid") {
  std::vector<NoteEvent> events = {
      {60, 960, 480, 0, 90},  // exact grid: step 8, 4 steps
      {61, 70, 480, 0, 90},   // 70/120 = 0.58 rounds to 1
      {62, 0, 40, 0, 90},     // shorter than half a step: dropped
  };
  int dropped = 0;
  auto grid = quantize(events, 480, &dropped);
  CHECK(dropped == 1);
  REQUIRE(grid.size() == 2);
  CHECK(grid[1] == GridNote{60, 8, 4});
  CHECK(grid[0] == GridNote{61, 1, 4});
}

TEST_CASE("quantize is idempotent") {
  Rng rng(11);
  std::vector<NoteEvent> events;
  long tick = 0;
  for (int i = 0; i < 40; ++i) {
    const long dur = 60 + static_cast<long>(rng.below(900));
    events.push_back({40 + static_cast<int>(rng.below(40)), tick, dur, 0, 90});
    tick += dur + static_cast<long>(rng.below(200));
  }
  auto once = quantize(events, 480);
  // feed the grid back through at one tick per step
  std::vector<NoteEvent> regrid;
  for (const auto& g : once) regrid.push_back({g.pitch, g.onset, g.duration, 0, 90});
  auto twice = quantize(regrid, 4);
  CHECK(once == twice);
}

TEST_CASE("random monophonic rolls survive the write/parse/quantize round trip") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int n_bars = 1 + static_cast<int>(rng.below(4));
    std::vector<BarRoll> bars(static_cast<std::size_t>(n_bars));
    for (auto& bar : bars) {
      int s = 0;
      while (s < kStepsPerBar) {
        const int run = 1 + static_cast<int>(rng.below(5));
        if (rng.below(5) == 0) {  // occasional silence
          s += run;
          continue;
        }
        const int pitch = 36 + static_cast<int>(rng.below(60));
        for (int i = s; i < std::min(s + run, kStepsPerBar); ++i) bar.at(pitch, i) = 1;
        s += run;
      }
    }
    auto bytes = write_midi(bars, nullptr, 120.0);
    auto song = parse_midi(bytes);
    auto grid = quantize(song.channels[0], song.ppq);
    // pad to the written length so trailing-silence bars are kept
    std::vector<std::vector<GridNote>> per_bar(static_cast<std::size_t>(n_bars));
    for (const auto& n : grid) {
      int pos = n.onset;
      const int end = n.onset + n.duration;
      while (pos < end) {
        const int bar = pos / kStepsPerBar;
        const int seg_end = std::min(end, (bar + 1) * kStepsPerBar);
        REQUIRE(bar < n_bars);
        per_bar[static_cast<std::size_t>(bar)].push_back(
            GridNote{n.pitch, pos - bar * kStepsPerBar, seg_end - pos});
        pos = seg_end;
      }
    }
    CHECK(mark_bars(per_bar) == bars);
  }
}

TEST_CASE("parser fuzzing never crashes") {
  Rng rng(99);
  BarRoll bar;
  for (int s = 0; s < kStepsPerBar; ++s) bar.at(60 + s, s) = 1;
  const auto valid = write_midi({bar}, nullptr, 120.0);

  int parsed = 0, rejected = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Bytes data;
    if (trial % 2 == 0) {
      data.resize(rng.below(200));
      for (auto& b : data) b = static_cast<std::uint8_t>(rng.below(256));
    } else {
      data = valid;
      const int flips = 1 + static_cast<int>(rng.below(8));
      for (int i = 0; i < flips; ++i) {
        data[rng.below(static_cast<std::uint32_t>(data.size()))] ^=
            static_cast<std::uint8_t>(1u << rng.below(8));
      }
    }
    try {
      parse_midi(data);
      ++parsed;
    } catch (const MidiError&) {
      ++rejected;
    }
  }
  CHECK(parsed + rejected == 200);
}
