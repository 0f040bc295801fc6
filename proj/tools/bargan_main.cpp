// bargan: bar-by-bar melody generation toolkit.
//
// Subcommands: preprocess (MIDI corpus -> training dataset), train
// (adversarial training), generate (chained bar-by-bar melody to MIDI),
// stats (register/diversity report), synth (seeded synthetic corpus).
//
// Exit codes: 0 ok, 1 usage/config/runtime error, 2 unreadable input,
// 3 zero accepted files, 4 variant/dataset mismatch, 5 bad chord token.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bargan/midi.hpp"
#include "bargan/models.hpp"
#include "bargan/pianoroll.hpp"
#include "bargan/preprocess.hpp"
#include "bargan/sampler.hpp"
#include "bargan/stats.hpp"
#include "bargan/synth_corpus.hpp"
#include "bargan/trainer.hpp"

namespace fs = std::filesystem;
using namespace bargan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUnreadable = 2;
constexpr int kExitNothingAccepted = 3;
constexpr int kExitMismatch = 4;
constexpr int kExitBadChord = 5;

// Bridges `key = value` config files onto CLI11 options. Explicit flags
// win over file entries, file entries over defaults; unknown keys are
// rejected with their line number.
class ConfigBinding {
 public:
  template <typename T>
  void bind(CLI::Option* opt, const std::string& name, T* target) {
    options_[name] = opt;
    setters_[name] = [target](const std::string& text) {
      std::istringstream in(text);
      T value;
      in >> value;
      if (in.fail()) return false;
      *target = value;
      return true;
    };
  }

  void bind_string(CLI::Option* opt, const std::string& name, std::string* target) {
    options_[name] = opt;
    setters_[name] = [target](const std::string& text) {
      *target = text;
      return true;
    };
  }

  void bind_flag(CLI::Option* opt, const std::string& name, bool* target) {
    options_[name] = opt;
    setters_[name] = [target](const std::string& text) {
      if (text == "true" || text == "1") {
        *target = true;
      } else if (text == "false" || text == "0") {
        *target = false;
      } else {
        return false;
      }
      return true;
    };
  }

  // returns an error message, or empty on success
  std::string apply_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) return "cannot open config file: " + path;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
      };
      const std::string stripped = trim(line);
      if (stripped.empty()) continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos) {
        return path + ":" + std::to_string(line_no) + ": expected key = value";
      }
      const std::string key = trim(stripped.substr(0, eq));
      const std::string value = trim(stripped.substr(eq + 1));
      auto it = setters_.find(key);
      if (it == setters_.end()) {
        return path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'";
      }
      if (options_[key]->count() > 0) continue;  // explicit flag wins
      if (!it->second(value)) {
        return path + ":" + std::to_string(line_no) + ": bad value for '" + key + "'";
      }
    }
    return {};
  }

 private:
  std::map<std::string, std::function<bool(const std::string&)>> setters_;
  std::map<std::string, CLI::Option*> options_;
};

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  return data;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("failed writing file: " + path);
}

bool has_midi_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".mid" || ext == ".midi" || ext == ".smf";
}

// raw occupancy bars (no trimming, folding or prolongation), for reports
std::vector<BarRoll> occupancy_bars(const MidiSong& song) {
  auto grid = quantize(song.channels[0], song.ppq);
  if (grid.empty()) return {};
  int end_step = 0;
  for (const auto& n : grid) end_step = std::max(end_step, n.onset + n.duration);
  const int n_bars = (end_step + kStepsPerBar - 1) / kStepsPerBar;
  std::vector<BarRoll> bars(static_cast<std::size_t>(n_bars));
  for (const auto& n : grid) {
    for (int s = n.onset; s < n.onset + n.duration; ++s) {
      bars[static_cast<std::size_t>(s / kStepsPerBar)].at(n.pitch, s % kStepsPerBar) = 1;
    }
  }
  return bars;
}

// ---- preprocess ----

struct PreprocessArgs {
  std::string in_dir;
  std::string out_dataset;
  std::string report_path;
  bool no_augment = false;
};

int run_preprocess(const PreprocessArgs& args) {
  std::error_code ec;
  if (!fs::is_directory(args.in_dir, ec)) {
    std::cerr << "error: '" << args.in_dir << "' is not a readable directory\n";
    return kExitUnreadable;
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(args.in_dir, ec)) {
    if (entry.is_regular_file() && has_midi_extension(entry.path())) {
      files.push_back(entry.path());
    }
  }
  if (ec) {
    std::cerr << "error: cannot list '" << args.in_dir << "': " << ec.message() << "\n";
    return kExitUnreadable;
  }
  std::sort(files.begin(), files.end());

  std::ostringstream report;
  std::vector<BarGroup> groups;
  int accepted = 0, rejected = 0, skipped_groups = 0, dropped_notes = 0;
  for (const auto& path : files) {
    try {
      auto song = parse_midi(read_file(path.string()));
      auto result = preprocess_song(song);
      if (result.groups.empty()) throw RejectSong("no usable 8-bar group");
      groups.insert(groups.end(), result.groups.begin(), result.groups.end());
      skipped_groups += result.skipped_groups;
      dropped_notes += result.dropped_short_notes;
      ++accepted;
      report << "ACCEPT\t" << path.filename().string() << "\t" << result.groups.size()
             << " groups";
      if (result.skipped_groups > 0) report << " (" << result.skipped_groups << " skipped)";
      report << "\n";
      for (const auto& w : song.warnings) {
        report << "NOTE\t" << path.filename().string() << "\t" << w << "\n";
      }
    } catch (const std::exception& e) {
      ++rejected;
      report << "REJECT\t" << path.filename().string() << "\t" << e.what() << "\n";
    }
  }

  report << "files accepted\t" << accepted << "\n";
  report << "files rejected\t" << rejected << "\n";
  report << "groups kept\t" << groups.size() << "\n";
  report << "groups skipped\t" << skipped_groups << "\n";
  report << "short notes dropped\t" << dropped_notes << "\n";

  const std::size_t base_groups = groups.size();
  if (accepted > 0) {
    if (!args.no_augment) groups = transpose_augment(groups);
    auto triples = groups_to_triples(groups);
    report << "groups after augmentation\t" << groups.size() << "\n";
    report << "triples written\t" << triples.size() << "\n";
    write_dataset(args.out_dataset, triples);
    std::cerr << "accepted " << accepted << " files, " << base_groups << " groups -> "
              << triples.size() << " triples\n";
  }

  const std::string report_path =
      args.report_path.empty() ? args.out_dataset + ".report.txt" : args.report_path;
  std::ofstream rep(report_path);
  if (!rep) {
    std::cerr << "error: cannot write report to " << report_path << "\n";
    return kExitError;
  }
  rep << report.str();
  rep.close();

  if (accepted == 0) {
    std::cerr << "error: no files accepted; see " << report_path << "\n";
    return kExitNothingAccepted;
  }
  return kExitOk;
}

// ---- train ----

struct TrainArgs {
  std::string dataset_path;
  std::string out_ckpt;
  int variant = 1;
  int epochs = 20;
  int batch_size = 64;
  long iterations = 0;
  int checkpoint_every = 0;
  std::uint64_t seed = 1;
  double lr = 2e-4;
  double label_smooth = 0.9;
};

int run_train(const TrainArgs& args) {
  std::vector<TrainingTriple> dataset;
  try {
    dataset = read_dataset(args.dataset_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUnreadable;
  }

  TrainConfig config;
  config.variant = ModelVariant::preset(args.variant);
  config.epochs = args.epochs;
  config.batch_size = args.batch_size;
  config.seed = args.seed;
  config.adam.lr = static_cast<float>(args.lr);
  config.label_smooth = static_cast<float>(args.label_smooth);
  config.max_iterations = args.iterations;
  config.checkpoint_every = args.checkpoint_every;
  config.checkpoint_path = args.out_ckpt;
  config.metrics_path = args.out_ckpt + ".metrics.tsv";

  if (config.variant.use_chord && !dataset_has_chords(dataset)) {
    std::cerr << "error: variant " << args.variant
              << " conditions on chords but the dataset has none\n";
    return kExitMismatch;
  }
  if (dataset.size() < static_cast<std::size_t>(config.batch_size)) {
    std::cerr << "error: dataset holds " << dataset.size() << " triples, batch size is "
              << config.batch_size << "\n";
    return kExitMismatch;
  }

  try {
    auto result = train(dataset, config);
    std::cerr << "trained " << result.checkpoint.step << " iterations ("
              << result.log.d_steps << " d steps, " << result.log.g_steps << " g steps)\n";
    std::cerr << "checkpoint: " << args.out_ckpt << "\n";
    std::cerr << "metrics: " << config.metrics_path << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitOk;
}

// ---- generate ----

struct GenerateArgs {
  std::string ckpt_path;
  std::string out_path;
  std::string primer_path;
  std::string chord_spec;
  int bars = 8;
  std::uint64_t seed = 0;
  double tempo = 120.0;
};

int run_generate(const GenerateArgs& args) {
  Checkpoint ckpt;
  try {
    ckpt = load_checkpoint(args.ckpt_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUnreadable;
  }

  std::optional<std::vector<ChordVec>> chords;
  if (!args.chord_spec.empty()) {
    std::vector<ChordVec> parsed;
    std::stringstream ss(args.chord_spec);
    std::string token;
    while (std::getline(ss, token, ',')) {
      const auto chord = parse_chord_name(token);
      if (!chord) {
        std::cerr << "error: unparsable chord token '" << token << "'\n";
        return kExitBadChord;
      }
      parsed.push_back(chord_to_vec(*chord));
    }
    if (parsed.empty()) {
      std::cerr << "error: empty chord list\n";
      return kExitBadChord;
    }
    // cycle the progression over the requested bars
    std::vector<ChordVec> per_bar(static_cast<std::size_t>(args.bars));
    for (int b = 0; b < args.bars; ++b) {
      per_bar[static_cast<std::size_t>(b)] = parsed[static_cast<std::size_t>(b) % parsed.size()];
    }
    chords = std::move(per_bar);
  }

  if (chords.has_value() != ckpt.model.variant.use_chord) {
    std::cerr << "error: checkpoint variant " << ckpt.model.variant.id
              << (ckpt.model.variant.use_chord ? " needs --chords" : " does not take --chords")
              << "\n";
    return kExitMismatch;
  }

  GenerationRequest request;
  request.n_bars = args.bars;
  request.seed = args.seed;
  request.chords = chords;

  if (!args.primer_path.empty()) {
    try {
      auto song = parse_midi(read_file(args.primer_path));
      auto grid = quantize(song.channels[0], song.ppq);
      std::vector<GridNote> first_bar;
      for (const auto& n : grid) {
        if (n.onset < kStepsPerBar) first_bar.push_back(n);
      }
      auto events = resolve_overlaps(first_bar);
      for (auto& e : events) e.pitch = fold_to_register(e.pitch);
      auto roll = bar_to_roll(events);
      if (!roll) throw std::runtime_error("primer has no notes in its first bar");
      request.primer = *roll;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUnreadable;
    }
  }

  try {
    auto bars = generate_sequence(ckpt.model, request);
    auto bytes = write_midi(bars, chords ? &*chords : nullptr, args.tempo);
    write_file(args.out_path, bytes);
    std::cerr << "wrote " << bars.size() << " bars to " << args.out_path << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitOk;
}

// ---- stats ----

struct StatsArgs {
  std::string in_path;
  std::string out_path;  // empty = stdout
};

int run_stats(const StatsArgs& args) {
  std::vector<BarRoll> rolls;
  std::error_code ec;
  try {
    if (fs::is_directory(args.in_path, ec)) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(args.in_path)) {
        if (entry.is_regular_file() && has_midi_extension(entry.path())) {
          files.push_back(entry.path());
        }
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        auto bars = occupancy_bars(parse_midi(read_file(f.string())));
        rolls.insert(rolls.end(), bars.begin(), bars.end());
      }
    } else {
      auto bytes = read_file(args.in_path);
      if (bytes.size() >= 4 && bytes[0] == 'M' && bytes[1] == 'N' && bytes[2] == 'D' &&
          bytes[3] == 'S') {
        for (const auto& t : read_dataset(args.in_path)) rolls.push_back(t.cur);
      } else {
        rolls = occupancy_bars(parse_midi(bytes));
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUnreadable;
  }

  const std::string report = render_stats_report(stats_from_rolls(rolls));
  if (args.out_path.empty()) {
    std::cout << report;
  } else {
    std::ofstream out(args.out_path);
    if (!out) {
      std::cerr << "error: cannot write report to " << args.out_path << "\n";
      return kExitError;
    }
    out << report;
  }
  return kExitOk;
}

// ---- synth ----

struct SynthArgs {
  std::string out_dir;
  int songs = 10;
  int groups_per_song = 2;
  std::uint64_t seed = 7;
  bool no_chords = false;
};

int run_synth(const SynthArgs& args) {
  std::error_code ec;
  fs::create_directories(args.out_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create '" << args.out_dir << "': " << ec.message() << "\n";
    return kExitError;
  }
  Rng rng(args.seed);
  for (int i = 0; i < args.songs; ++i) {
    auto song = make_synthetic_song(rng, args.groups_per_song, true);
    std::vector<ChordVec> chords;
    for (const auto& c : song.chords) chords.push_back(chord_to_vec(c));
    auto bytes = write_midi(song.bars, args.no_chords ? nullptr : &chords, 120.0);
    std::ostringstream name;
    name << "song" << (i < 100 ? (i < 10 ? "00" : "0") : "") << i << ".mid";
    try {
      write_file((fs::path(args.out_dir) / name.str()).string(), bytes);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitError;
    }
  }
  std::cerr << "wrote " << args.songs << " songs to " << args.out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bar-by-bar melody generation toolkit"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  TrainArgs tr;
  GenerateArgs gen;
  StatsArgs st;
  SynthArgs sy;
  std::string config_path;

  ConfigBinding pre_cfg, tr_cfg, gen_cfg, st_cfg, sy_cfg;

  auto* pre_cmd = app.add_subcommand("preprocess", "convert a MIDI corpus into a dataset");
  pre_cfg.bind_string(pre_cmd->add_option("--in", pre.in_dir, "MIDI directory")->required(),
                      "in", &pre.in_dir);
  pre_cfg.bind_string(pre_cmd->add_option("--out", pre.out_dataset, "dataset path")->required(),
                      "out", &pre.out_dataset);
  pre_cfg.bind_string(pre_cmd->add_option("--report", pre.report_path, "report path"), "report",
                      &pre.report_path);
  pre_cfg.bind_flag(pre_cmd->add_flag("--no-augment", pre.no_augment, "skip key augmentation"),
                    "no-augment", &pre.no_augment);
  pre_cmd->add_option("--config", config_path, "key = value config file");

  auto* tr_cmd = app.add_subcommand("train", "train a generator on a dataset");
  tr_cfg.bind_string(tr_cmd->add_option("--dataset", tr.dataset_path, "dataset path")->required(),
                     "dataset", &tr.dataset_path);
  tr_cfg.bind_string(tr_cmd->add_option("--out", tr.out_ckpt, "checkpoint path")->required(),
                     "out", &tr.out_ckpt);
  tr_cfg.bind(tr_cmd->add_option("--variant", tr.variant, "model variant 1, 2 or 3")
                  ->check(CLI::Range(1, 3)),
              "variant", &tr.variant);
  tr_cfg.bind(tr_cmd->add_option("--epochs", tr.epochs, "training epochs"), "epochs", &tr.epochs);
  tr_cfg.bind(tr_cmd->add_option("--batch-size", tr.batch_size, "batch size"), "batch-size",
              &tr.batch_size);
  tr_cfg.bind(tr_cmd->add_option("--iterations", tr.iterations,
                                 "stop after this many iterations (0 = all epochs)"),
              "iterations", &tr.iterations);
  tr_cfg.bind(tr_cmd->add_option("--checkpoint-every", tr.checkpoint_every,
                                 "periodic checkpoint cadence in iterations"),
              "checkpoint-every", &tr.checkpoint_every);
  tr_cfg.bind(tr_cmd->add_option("--seed", tr.seed, "training seed"), "seed", &tr.seed);
  tr_cfg.bind(tr_cmd->add_option("--lr", tr.lr, "learning rate"), "lr", &tr.lr);
  tr_cfg.bind(tr_cmd->add_option("--label-smooth", tr.label_smooth, "real-data target"),
              "label-smooth", &tr.label_smooth);
  tr_cmd->add_option("--config", config_path, "key = value config file");

  auto* gen_cmd = app.add_subcommand("generate", "generate a melody from a checkpoint");
  gen_cfg.bind_string(gen_cmd->add_option("--ckpt", gen.ckpt_path, "checkpoint path")->required(),
                      "ckpt", &gen.ckpt_path);
  gen_cfg.bind_string(gen_cmd->add_option("--out", gen.out_path, "output MIDI path")->required(),
                      "out", &gen.out_path);
  gen_cfg.bind(gen_cmd->add_option("--bars", gen.bars, "bars to generate")->check(CLI::Range(1, 512)),
               "bars", &gen.bars);
  gen_cfg.bind_string(gen_cmd->add_option("--primer", gen.primer_path, "primer MIDI (first bar)"),
                      "primer", &gen.primer_path);
  gen_cfg.bind_string(
      gen_cmd->add_option("--chords", gen.chord_spec, "chord list such as C,Am,F,G"), "chords",
      &gen.chord_spec);
  gen_cfg.bind(gen_cmd->add_option("--seed", gen.seed, "noise seed"), "seed", &gen.seed);
  gen_cfg.bind(gen_cmd->add_option("--tempo", gen.tempo, "tempo in BPM"), "tempo", &gen.tempo);
  gen_cmd->add_option("--config", config_path, "key = value config file");

  auto* st_cmd = app.add_subcommand("stats", "report pitch statistics of a dataset or MIDI");
  st_cfg.bind_string(st_cmd->add_option("--in", st.in_path, "dataset, MIDI file or directory")
                         ->required(),
                     "in", &st.in_path);
  st_cfg.bind_string(st_cmd->add_option("--out", st.out_path, "report path (default stdout)"),
                     "out", &st.out_path);
  st_cmd->add_option("--config", config_path, "key = value config file");

  auto* sy_cmd = app.add_subcommand("synth", "write a synthetic MIDI corpus");
  sy_cfg.bind_string(sy_cmd->add_option("--out", sy.out_dir, "output directory")->required(),
                     "out", &sy.out_dir);
  sy_cfg.bind(sy_cmd->add_option("--songs", sy.songs, "number of songs"), "songs", &sy.songs);
  sy_cfg.bind(sy_cmd->add_option("--groups", sy.groups_per_song, "8-bar groups per song"),
              "groups", &sy.groups_per_song);
  sy_cfg.bind(sy_cmd->add_option("--seed", sy.seed, "corpus seed"), "seed", &sy.seed);
  sy_cfg.bind_flag(sy_cmd->add_flag("--no-chords", sy.no_chords, "omit the chord track"),
                   "no-chords", &sy.no_chords);
  sy_cmd->add_option("--config", config_path, "key = value config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // keep usage errors on a single stable exit code
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  if (!config_path.empty()) {
    ConfigBinding* binding = nullptr;
    if (pre_cmd->parsed()) binding = &pre_cfg;
    if (tr_cmd->parsed()) binding = &tr_cfg;
    if (gen_cmd->parsed()) binding = &gen_cfg;
    if (st_cmd->parsed()) binding = &st_cfg;
    if (sy_cmd->parsed()) binding = &sy_cfg;
    if (binding) {
      const std::string err = binding->apply_file(config_path);
      if (!err.empty()) {
        std::cerr << "error: " << err << "\n";
        return kExitError;
      }
    }
  }

  try {
    if (pre_cmd->parsed()) return run_preprocess(pre);
    if (tr_cmd->parsed()) return run_train(tr);
    if (gen_cmd->parsed()) return run_generate(gen);
    if (st_cmd->parsed()) return run_stats(st);
    if (sy_cmd->parsed()) return run_synth(sy);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitOk;
}
