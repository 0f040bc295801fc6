#include "bargan/stats.hpp"

#include <sstream>

namespace bargan {

CorpusStats stats_from_rolls(const std::vector<BarRoll>& rolls) {
  CorpusStats stats;
  stats.bars = static_cast<std::int64_t>(rolls.size());
  double change_sum = 0.0;
  for (const auto& roll : rolls) {
    int changes = 0;
    int prev_pitch = -2;
    for (int s = 0; s < kStepsPerBar; ++s) {
      const int p = roll.active_pitch(s);
      if (p >= 0) {
        stats.active_cells += 1;
        stats.pitch_hist[static_cast<std::size_t>(p)] += 1;
        stats.pitch_class_hist[static_cast<std::size_t>(p % 12)] += 1;
        if (p < kRegisterLow || p > kRegisterHigh) stats.out_of_register_cells += 1;
      }
      if (s > 0 && p != prev_pitch) ++changes;
      prev_pitch = p;
    }
    change_sum += static_cast<double>(changes) / (kStepsPerBar - 1);
  }
  if (!rolls.empty()) stats.note_change_rate = change_sum / static_cast<double>(rolls.size());
  return stats;
}

std::string render_stats_report(const CorpusStats& stats) {
  std::ostringstream out;
  out << "bars analyzed: " << stats.bars << "\n";
  out << "active cells: " << stats.active_cells << "\n";
  out << "outside C4-B5: " << stats.out_of_register_cells << " ("
      << stats.out_of_register_fraction() << ")\n";
  out << "note-change rate per bar: " << stats.note_change_rate << "\n";
  out << "\n#TSV\n";
  out << "bars\t" << stats.bars << "\n";
  out << "active_cells\t" << stats.active_cells << "\n";
  out << "out_of_register_cells\t" << stats.out_of_register_cells << "\n";
  out << "out_of_register_fraction\t" << stats.out_of_register_fraction() << "\n";
  out << "note_change_rate\t" << stats.note_change_rate << "\n";
  out << "\n#PITCH_HIST\n";
  for (int p = 0; p < kNumPitches; ++p) {
    if (stats.pitch_hist[static_cast<std::size_t>(p)] > 0) {
      out << p << "\t" << stats.pitch_hist[static_cast<std::size_t>(p)] << "\n";
    }
  }
  out << "\n#PITCH_CLASS_HIST\n";
  for (int pc = 0; pc < 12; ++pc) {
    out << pc << "\t" << stats.pitch_class_hist[static_cast<std::size_t>(pc)] << "\n";
  }
  return out.str();
}

}  // namespace bargan
