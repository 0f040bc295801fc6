#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bargan/pianoroll.hpp"

namespace bargan {

// Register and diversity statistics over bar rolls; out-of-register mass
// is the working signal for spotting a collapsed generator.
struct CorpusStats {
  std::array<std::int64_t, kNumPitches> pitch_hist{};
  std::array<std::int64_t, 12> pitch_class_hist{};
  std::int64_t bars = 0;
  std::int64_t active_cells = 0;
  std::int64_t out_of_register_cells = 0;
  double note_change_rate = 0.0;  // mean fraction of adjacent columns changing pitch

  double out_of_register_fraction() const {
    return active_cells == 0 ? 0.0
                             : static_cast<double>(out_of_register_cells) /
                                   static_cast<double>(active_cells);
  }
};

CorpusStats stats_from_rolls(const std::vector<BarRoll>& rolls);

// human-readable summary followed by a machine-readable tab-separated
// block (#TSV key/value lines, then the two histograms)
std::string render_stats_report(const CorpusStats& stats);

}  // namespace bargan
