// Drives the installed command-line binary end to end through small
// corpora in a temp directory.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "bargan/pianoroll.hpp"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const std::string kCli = BARGAN_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("bargan_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string str(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args, const std::string& capture_stderr_to = "") {
  std::string cmd = kCli + " " + args + " >/dev/null";
  cmd += capture_stderr_to.empty() ? " 2>/dev/null" : " 2>" + capture_stderr_to;
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double tsv_value(const std::string& report, const std::string& key) {
  std::istringstream in(report);
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab != std::string::npos && line.substr(0, tab) == key) {
      return std::stod(line.substr(tab + 1));
    }
  }
  FAIL("key not found in report: " << key);
  return 0.0;
}

}  // namespace

TEST_CASE("synth/preprocess pipeline produces the expected triple count") {
  TempDir tmp;
  const std::string corpus = tmp.str("corpus");
  REQUIRE(run("synth --out " + corpus + " --songs 10 --groups 2 --seed 3") == 0);

  const std::string dataset = tmp.str("data.mnds");
  const std::string report = tmp.str("report.txt");
  REQUIRE(run("preprocess --in " + corpus + " --out " + dataset + " --report " + report) == 0);

  // 10 songs x 2 groups x 8 bars x 12 keys
  auto triples = bargan::read_dataset(dataset);
  CHECK(triples.size() == 10 * 2 * 8 * 12);
  CHECK(bargan::dataset_has_chords(triples));
  for (const auto& t : triples) CHECK(t.cur.is_valid_real_bar());

  const std::string rep = slurp(report);
  CHECK(rep.find("files accepted\t10") != std::string::npos);

  SUBCASE("a corrupt file among good ones is skipped with exit 0") {
    std::ofstream bad(tmp.str("corpus") + "/broken.mid", std::ios::binary);
    bad << "this is not midi";
    bad.close();
    REQUIRE(run("preprocess --in " + corpus + " --out " + dataset + " --report " + report) == 0);
    const std::string rep2 = slurp(report);
    CHECK(rep2.find("REJECT\tbroken.mid") != std::string::npos);
    CHECK(rep2.find("files accepted\t10") != std::string::npos);
  }
}

TEST_CASE("preprocess exit codes for bad inputs") {
  TempDir tmp;
  CHECK(run("preprocess --in " + tmp.str("missing") + " --out " + tmp.str("d.mnds")) == 2);

  const std::string empty = tmp.str("empty");
  fs::create_directories(empty);
  CHECK(run("preprocess --in " + empty + " --out " + tmp.str("d.mnds") + " --report " +
            tmp.str("r.txt")) == 3);
}

TEST_CASE("train/generate/stats round trip with exit-code contracts") {
  TempDir tmp;
  const std::string corpus = tmp.str("corpus");
  REQUIRE(run("synth --out " + corpus + " --songs 2 --groups 1 --seed 5") == 0);
  const std::string dataset = tmp.str("data.mnds");
  REQUIRE(run("preprocess --in " + corpus + " --out " + dataset) == 0);

  const std::string chordless_corpus = tmp.str("plain");
  REQUIRE(run("synth --out " + chordless_corpus + " --songs 2 --groups 1 --seed 5 --no-chords") ==
          0);
  const std::string chordless = tmp.str("plain.mnds");
  REQUIRE(run("preprocess --in " + chordless_corpus + " --out " + chordless) == 0);

  // variant 2 needs chords
  CHECK(run("train --dataset " + chordless + " --variant 2 --out " + tmp.str("x.ckpt")) == 4);

  // variant 1 trains on a chordless dataset (one iteration keeps it quick)
  const std::string ckpt = tmp.str("v1.ckpt");
  REQUIRE(run("train --dataset " + chordless + " --variant 1 --epochs 1 --iterations 1 "
              "--batch-size 8 --seed 11 --out " + ckpt) == 0);
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(ckpt + ".metrics.tsv"));

  // deterministic generation: identical bytes for identical seeds
  const std::string out1 = tmp.str("gen1.mid");
  const std::string out2 = tmp.str("gen2.mid");
  REQUIRE(run("generate --ckpt " + ckpt + " --bars 8 --seed 7 --out " + out1) == 0);
  REQUIRE(run("generate --ckpt " + ckpt + " --bars 8 --seed 7 --out " + out2) == 0);
  CHECK(slurp(out1) == slurp(out2));
  CHECK(!slurp(out1).empty());

  // chords against a chordless variant: mismatch
  CHECK(run("generate --ckpt " + ckpt + " --bars 4 --chords C,Am --seed 1 --out " +
            tmp.str("no.mid")) == 4);

  // bad chord token
  CHECK(run("generate --ckpt " + ckpt + " --bars 4 --chords H7 --seed 1 --out " +
            tmp.str("no.mid")) == 5);

  // missing checkpoint
  CHECK(run("generate --ckpt " + tmp.str("nope.ckpt") + " --bars 4 --seed 1 --out " +
            tmp.str("no.mid")) == 2);

  // stats over the preprocessed dataset: everything inside the register
  const std::string report = tmp.str("stats.txt");
  REQUIRE(run("stats --in " + dataset + " --out " + report) == 0);
  const std::string rep = slurp(report);
  CHECK(tsv_value(rep, "out_of_register_fraction") == 0.0);
  CHECK(tsv_value(rep, "bars") > 0.0);

  // stats over generated MIDI runs the occupancy path
  REQUIRE(run("stats --in " + out1 + " --out " + report) == 0);
  CHECK(tsv_value(slurp(report), "bars") == 8.0);

  CHECK(run("stats --in " + tmp.str("absent.bin") + " --out " + report) == 2);
}

TEST_CASE("config files fill in unset flags and reject unknown keys") {
  TempDir tmp;

  // file value is used when the flag is absent
  {
    std::ofstream cfg(tmp.str("synth.cfg"));
    cfg << "# corpus settings\n";
    cfg << "songs = 2\n";
    cfg << "groups = 1\n";
  }
  const std::string dir1 = tmp.str("c1");
  REQUIRE(run("synth --out " + dir1 + " --seed 9 --config " + tmp.str("synth.cfg")) == 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir1)) {
    (void)e;
    ++files;
  }
  CHECK(files == 2);

  // explicit flag beats the file
  const std::string dir2 = tmp.str("c2");
  REQUIRE(run("synth --out " + dir2 + " --seed 9 --songs 3 --config " + tmp.str("synth.cfg")) ==
          0);
  files = 0;
  for (const auto& e : fs::directory_iterator(dir2)) {
    (void)e;
    ++files;
  }
  CHECK(files == 3);

  // unknown keys are rejected with their line number
  {
    std::ofstream cfg(tmp.str("bad.cfg"));
    cfg << "songs = 2\n";
    cfg << "bogus = 1\n";
  }
  const std::string errfile = tmp.str("stderr.txt");
  CHECK(run("synth --out " + tmp.str("c3") + " --config " + tmp.str("bad.cfg"), errfile) == 1);
  const std::string err = slurp(errfile);
  CHECK(err.find(":2:") != std::string::npos);
  CHECK(err.find("bogus") != std::string::npos);
}
