#include <array>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "bargan/pianoroll.hpp"
#include "bargan/rng.hpp"
#include "doctest.h"

using namespace bargan;

namespace {

// one note per bar, the whole bar long
BarRoll constant_bar(int pitch) {
  BarRoll bar;
  for (int s = 0; s < kStepsPerBar; ++s) bar.at(pitch, s) = 1;
  return bar;
}

BarGroup simple_group(int base_pitch, bool with_chords) {
  BarGroup g;
  for (int b = 0; b < kBarsPerGroup; ++b) {
    g.bars[static_cast<std::size_t>(b)] = constant_bar(fold_to_register(base_pitch + b));
  }
  if (with_chords) {
    std::array<Chord, kBarsPerGroup> chords;
    for (int b = 0; b < kBarsPerGroup; ++b) chords[static_cast<std::size_t>(b)] = {b % 12, b % 2 == 1};
    g.chords = chords;
  }
  return g;
}

std::array<int, 12> pitch_class_histogram(const BarGroup& g) {
  std::array<int, 12> hist{};
  for (const auto& bar : g.bars) {
    for (int s = 0; s < kStepsPerBar; ++s) {
      const int p = bar.active_pitch(s);
      if (p >= 0) hist[static_cast<std::size_t>(p % 12)] += 1;
    }
  }
  return hist;
}

}  // namespace

TEST_CASE("fold_to_register shifts by whole octaves") {
  CHECK(fold_to_register(48) == 60);
  CHECK(fold_to_register(95) == 83);
  CHECK(fold_to_register(62) == 62);
  for (int p = 0; p < 128; ++p) {
    const int f = fold_to_register(p);
    CHECK(f >= kRegisterLow);
    CHECK(f <= kRegisterHigh);
    CHECK(f % 12 == p % 12);
  }
}

TEST_CASE("chord code follows the key/quality table") {
  // C major sits in slot 1 with quality 0
  auto c = chord_to_vec(Chord{0, false});
  CHECK(c[0] == 1);
  CHECK(c[12] == 0);
  for (int i = 1; i < 12; ++i) CHECK(c[static_cast<std::size_t>(i)] == 0);

  // A minor shares the slot of its relative major
  auto am = chord_to_vec(Chord{9, true});
  CHECK(am[0] == 1);
  CHECK(am[12] == 1);

  // D minor: minor row runs A, A#, B, C, ... so D lands in slot 6
  auto dm = chord_to_vec(Chord{2, true});
  CHECK(dm[5] == 1);
  CHECK(dm[12] == 1);
}

TEST_CASE("chord code is a bijection over the 24 triads") {
  for (int root = 0; root < 12; ++root) {
    for (bool minor : {false, true}) {
      const Chord chord{root, minor};
      auto back = vec_to_chord(chord_to_vec(chord));
      REQUIRE(back.has_value());
      CHECK(*back == chord);
    }
  }
  CHECK(!vec_to_chord(ChordVec{}).has_value());
}

TEST_CASE("chord names parse with enharmonics and reject junk") {
  CHECK(*parse_chord_name("C") == Chord{0, false});
  CHECK(*parse_chord_name("Am") == Chord{9, true});
  CHECK(*parse_chord_name("F#") == Chord{6, false});
  CHECK(*parse_chord_name("Gb") == Chord{6, false});
  CHECK(*parse_chord_name("Bbm") == Chord{10, true});
  CHECK(!parse_chord_name("H7").has_value());
  CHECK(!parse_chord_name("Cmaj7").has_value());
  CHECK(!parse_chord_name("").has_value());
}

TEST_CASE("segment_into_bars splits crossers and trims to 8-bar groups") {
  SUBCASE("note crossing a barline is divided") {
    std::vector<GridNote> notes = {{60, 14, 5}};  // steps 14..18
    for (int filler = 1; filler < 8; ++filler) notes.push_back({62, filler * 16, 16});
    auto bars = segment_into_bars(notes);
    REQUIRE(bars.size() == 8);
    CHECK(bars[0][0] == GridNote{60, 14, 2});
    // the remainder lands at the start of the next bar
    bool found = false;
    for (const auto& n : bars[1]) {
      if (n == GridNote{60, 0, 3}) found = true;
    }
    CHECK(found);
  }

  SUBCASE("19 bars keep two groups") {
    std::vector<GridNote> notes;
    for (int b = 0; b < 19; ++b) notes.push_back({60, b * 16, 16});
    CHECK(segment_into_bars(notes).size() == 16);
  }

  SUBCASE("short songs and empty songs give nothing") {
    CHECK(segment_into_bars({}).empty());
    CHECK(segment_into_bars({{60, 0, 16}}).empty());  // single bar < one group
  }
}

TEST_CASE("bar_to_roll prolongs through silence") {
  SUBCASE("pause after a note is filled by prolonging it") {
    auto roll = bar_to_roll({{60, 0, 8}});
    REQUIRE(roll.has_value());
    for (int s = 0; s < kStepsPerBar; ++s) CHECK(roll->active_pitch(s) == 60);
  }

  SUBCASE("leading silence extends the first note back to step 0") {
    auto roll = bar_to_roll({{64, 4, 12}});
    REQUIRE(roll.has_value());
    for (int s = 0; s < kStepsPerBar; ++s) CHECK(roll->active_pitch(s) == 64);
  }

  SUBCASE("gapless pair maps directly") {
    auto roll = bar_to_roll({{60, 0, 8}, {62, 8, 8}});
    REQUIRE(roll.has_value());
    for (int s = 0; s < 8; ++s) CHECK(roll->active_pitch(s) == 60);
    for (int s = 8; s < 16; ++s) CHECK(roll->active_pitch(s) == 62);
  }

  SUBCASE("interior gap is filled by the preceding note") {
    auto roll = bar_to_roll({{60, 0, 4}, {65, 9, 7}});
    REQUIRE(roll.has_value());
    for (int s = 0; s < 9; ++s) CHECK(roll->active_pitch(s) == 60);
    for (int s = 9; s < 16; ++s) CHECK(roll->active_pitch(s) == 65);
  }

  SUBCASE("empty bar signals a skip") { CHECK(!bar_to_roll({}).has_value()); }
}

TEST_CASE("resolve_overlaps keeps the later onset and truncates the earlier") {
  auto out = resolve_overlaps({{60, 0, 10}, {62, 5, 5}});
  REQUIRE(out.size() == 2);
  CHECK(out[0] == GridNote{60, 0, 5});
  CHECK(out[1] == GridNote{62, 5, 5});

  // identical onsets: the later listed note wins outright
  auto same = resolve_overlaps({{60, 4, 4}, {65, 4, 4}});
  REQUIRE(same.size() == 1);
  CHECK(same[0].pitch == 65);
}

TEST_CASE("prune_chords picks the longest-sounding chord, earliest on ties") {
  const Chord cmaj{0, false}, gmaj{7, false};

  SUBCASE("single chord spanning the bar") {
    auto got = prune_chords({{cmaj, 0, 16}}, 0);
    REQUIRE(got.has_value());
    CHECK(*got == cmaj);
  }

  SUBCASE("longest wins") {
    auto got = prune_chords({{cmaj, 0, 12}, {gmaj, 12, 4}}, 0);
    REQUIRE(got.has_value());
    CHECK(*got == cmaj);
  }

  SUBCASE("tie goes to the earlier chord") {
    auto got = prune_chords({{cmaj, 0, 8}, {gmaj, 8, 8}}, 0);
    REQUIRE(got.has_value());
    CHECK(*got == cmaj);
  }

  SUBCASE("chordless bar yields nothing") {
    CHECK(!prune_chords({{cmaj, 0, 16}}, 16).has_value());
  }
}

TEST_CASE("transpose_augment multiplies groups by 12 and rotates pitch classes") {
  std::vector<BarGroup> groups = {simple_group(60, true), simple_group(72, true)};
  auto out = transpose_augment(groups);
  CHECK(out.size() == 24);

  // shift 0 is the identity
  CHECK(out[0].bars == groups[0].bars);
  CHECK(*out[0].chords == *groups[0].chords);

  // the pitch-class histogram of shift s is the rotated shift-0 histogram
  auto base = pitch_class_histogram(groups[0]);
  for (int s = 0; s < 12; ++s) {
    auto shifted = pitch_class_histogram(out[static_cast<std::size_t>(s)]);
    for (int pc = 0; pc < 12; ++pc) {
      CHECK(shifted[static_cast<std::size_t>((pc + s) % 12)] ==
            base[static_cast<std::size_t>(pc)]);
    }
  }

  // chords rotate with the melody, quality preserved
  for (int s = 0; s < 12; ++s) {
    const auto& chords = *out[static_cast<std::size_t>(s)].chords;
    for (int b = 0; b < kBarsPerGroup; ++b) {
      const Chord& orig = (*groups[0].chords)[static_cast<std::size_t>(b)];
      CHECK(chords[static_cast<std::size_t>(b)].root_pc == (orig.root_pc + s) % 12);
      CHECK(chords[static_cast<std::size_t>(b)].minor == orig.minor);
    }
  }

  // shifting by s then 12-s returns the original chord roots
  auto twice = transpose_augment({out[5]});
  CHECK(twice[7].chords == groups[0].chords);

  // every augmented bar stays a valid real bar
  for (const auto& g : out) {
    for (const auto& bar : g.bars) CHECK(bar.is_valid_real_bar());
  }
}

TEST_CASE("make_training_triples prepends an empty bar") {
  auto group = simple_group(60, true);
  auto triples = make_training_triples(group);
  CHECK(triples[0].prev.is_empty());
  CHECK(triples[0].cur == group.bars[0]);
  for (int k = 1; k < kBarsPerGroup; ++k) {
    CHECK(triples[static_cast<std::size_t>(k)].prev ==
          group.bars[static_cast<std::size_t>(k - 1)]);
    CHECK(triples[static_cast<std::size_t>(k)].cur == group.bars[static_cast<std::size_t>(k)]);
    // consecutive triples chain: this cur is the next prev
    CHECK(triples[static_cast<std::size_t>(k)].prev ==
          triples[static_cast<std::size_t>(k - 1)].cur);
  }
  for (const auto& t : triples) {
    int active = 0;
    for (int s = 0; s < kStepsPerBar; ++s) active += t.cur.active_pitch(s) >= 0 ? 1 : 0;
    CHECK(active == kStepsPerBar);
    CHECK(chordvec_present(t.chord));
  }
}

TEST_CASE("epoch_batches is seeded and drops the partial batch") {
  Rng rng_a(42), rng_b(42), rng_c(43);
  auto a = epoch_batches(10, 3, rng_a);
  CHECK(a.size() == 3);

  auto b = epoch_batches(10, 3, rng_b);
  CHECK(a == b);

  auto c = epoch_batches(10, 3, rng_c);
  CHECK(a != c);

  // consecutive epochs from one stream differ but stay reproducible
  auto a2 = epoch_batches(10, 3, rng_a);
  auto b2 = epoch_batches(10, 3, rng_b);
  CHECK(a2 == b2);
  CHECK(a != a2);

  CHECK_THROWS_AS(epoch_batches(0, 3, rng_a), std::invalid_argument);
  CHECK_THROWS_AS(epoch_batches(10, 0, rng_a), std::invalid_argument);
}

TEST_CASE("dataset file round trip") {
  auto group = simple_group(60, true);
  auto triples_arr = make_training_triples(group);
  std::vector<TrainingTriple> triples(triples_arr.begin(), triples_arr.end());

  const auto path = (std::filesystem::temp_directory_path() / "bargan_test_dataset.bin").string();
  write_dataset(path, triples);
  auto back = read_dataset(path);
  REQUIRE(back.size() == triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    CHECK(back[i].prev == triples[i].prev);
    CHECK(back[i].cur == triples[i].cur);
    CHECK(back[i].chord == triples[i].chord);
  }
  CHECK(dataset_has_chords(back));

  // corrupt the magic
  {
    std::FILE* f = std::fopen(path.c_str(), "r+b");
    REQUIRE(f != nullptr);
    std::fputc('X', f);
    std::fclose(f);
  }
  CHECK_THROWS(read_dataset(path));
  std::filesystem::remove(path);
}
