#include "bargan/midi.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace bargan {

namespace {

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::size_t base_offset = 0)
      : data_(data), base_(base_offset) {}

  std::size_t pos() const { return base_ + pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ >= data_.size(); }

  std::uint8_t u8() {
    need(1, "unexpected end of data");
    return data_[pos_++];
  }

  std::uint8_t peek() {
    need(1, "unexpected end of data");
    return data_[pos_];
  }

  std::uint16_t u16be() {
    need(2, "unexpected end of data");
    const std::uint16_t v = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
    pos_ += 2;
    return v;
  }

  std::uint32_t u32be() {
    need(4, "unexpected end of data");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 4;
    return v;
  }

  // variable-length quantity, at most four bytes
  std::uint32_t vlq() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint8_t b = u8();
      v = (v << 7) | static_cast<std::uint32_t>(b & 0x7f);
      if ((b & 0x80) == 0) return v;
    }
    throw MidiError("variable-length quantity longer than 4 bytes", pos());
  }

  void skip(std::size_t n, const char* what) {
    need(n, what);
    pos_ += n;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) {
    if (pos_ + n > data_.size()) throw MidiError(what, base_ + data_.size());
  }

  std::span<const std::uint8_t> data_;
  std::size_t base_ = 0;
  std::size_t pos_ = 0;
};

struct OpenNote {
  long onset = 0;
  int velocity = 0;
  int count = 0;  // overlapping same-pitch note-ons merge into one span
};

void parse_track(ByteReader& r, MidiSong& song, bool* saw_tempo, bool* saw_timesig) {
  long tick = 0;
  int running_status = -1;
  std::map<std::pair<int, int>, OpenNote> open;  // (channel, pitch)

  auto close_note = [&](int channel, int pitch, long end_tick) {
    const auto key = std::make_pair(channel, pitch);
    auto it = open.find(key);
    if (it == open.end()) return;  // stray note-off, ignore
    if (--it->second.count > 0) return;
    if (end_tick > it->second.onset) {
      song.channels[static_cast<std::size_t>(channel)].push_back(
          NoteEvent{pitch, it->second.onset, end_tick - it->second.onset, channel,
                    it->second.velocity});
    } else {
      song.warnings.push_back("dropped zero-length note (pitch " + std::to_string(pitch) + ")");
    }
    open.erase(it);
  };

  bool ended = false;
  while (!r.at_end() && !ended) {
    tick += r.vlq();
    std::uint8_t status = r.peek();
    if (status & 0x80) {
      r.u8();
      if (status < 0xf0) running_status = status;
    } else {
      if (running_status < 0) throw MidiError("data byte with no running status", r.pos());
      status = static_cast<std::uint8_t>(running_status);
    }

    if (status == 0xff) {  // meta
      const std::uint8_t type = r.u8();
      const std::uint32_t len = r.vlq();
      auto data = r.take(len, "meta event truncated");
      if (type == 0x2f) {
        ended = true;
      } else if (type == 0x51 && len == 3) {
        const long tempo = (static_cast<long>(data[0]) << 16) | (data[1] << 8) | data[2];
        if (!*saw_tempo) {
          song.tempo_us_per_quarter = tempo;
          *saw_tempo = true;
        }
      } else if (type == 0x58 && len >= 2) {
        if (!*saw_timesig) {
          song.timesig_num = data[0];
          song.timesig_den = 1 << data[1];
          *saw_timesig = true;
        }
      }
      continue;
    }
    if (status == 0xf0 || status == 0xf7) {  // sysex, skip payload
      const std::uint32_t len = r.vlq();
      r.skip(len, "sysex event truncated");
      continue;
    }
    if (status >= 0xf0) {
      throw MidiError("unsupported system message " + std::to_string(status), r.pos());
    }

    const int kind = status >> 4;
    const int channel = status & 0x0f;
    switch (kind) {
      case 0x8: {  // note off
        const int pitch = r.u8() & 0x7f;
        r.u8();  // release velocity
        close_note(channel, pitch, tick);
        break;
      }
      case 0x9: {  // note on (velocity 0 closes)
        const int pitch = r.u8() & 0x7f;
        const int velocity = r.u8() & 0x7f;
        if (velocity == 0) {
          close_note(channel, pitch, tick);
        } else {
          auto& slot = open[std::make_pair(channel, pitch)];
          if (slot.count == 0) {
            slot.onset = tick;
            slot.velocity = velocity;
          } else {
            song.warnings.push_back("merged overlapping note (pitch " + std::to_string(pitch) +
                                    ")");
          }
          slot.count += 1;
        }
        break;
      }
      case 0xa:  // aftertouch
      case 0xb:  // controller
      case 0xe:  // pitch bend
        r.u8();
        r.u8();
        break;
      case 0xc:  // program change
      case 0xd:  // channel pressure
        r.u8();
        break;
      default:
        throw MidiError("unexpected status byte", r.pos());
    }
  }

  for (auto& [key, note] : open) {
    song.warnings.push_back("note-on without note-off closed at end of track (pitch " +
                            std::to_string(key.second) + ")");
    if (tick > note.onset) {
      song.channels[static_cast<std::size_t>(key.first)].push_back(
          NoteEvent{key.second, note.onset, tick - note.onset, key.first, note.velocity});
    }
  }
}

}  // namespace

MidiSong parse_midi(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.take(4, "file shorter than a header");
  if (!(magic[0] == 'M' && magic[1] == 'T' && magic[2] == 'h' && magic[3] == 'd')) {
    throw MidiError("missing MThd header", 0);
  }
  const std::uint32_t header_len = r.u32be();
  if (header_len < 6) throw MidiError("header chunk too short", r.pos());
  const std::uint16_t format = r.u16be();
  const std::uint16_t ntrks = r.u16be();
  const std::uint16_t division = r.u16be();
  r.skip(header_len - 6, "header chunk truncated");

  if (format > 1) throw MidiError("unsupported SMF format " + std::to_string(format), 8);
  if (division & 0x8000) throw MidiError("SMPTE division is unsupported", 12);
  if (division == 0) throw MidiError("division must be positive", 12);

  MidiSong song;
  song.format = format;
  song.ppq = division;

  bool saw_tempo = false;
  bool saw_timesig = false;
  std::uint16_t tracks_done = 0;
  while (tracks_done < ntrks) {
    auto id = r.take(4, "expected a track chunk");
    const std::uint32_t len = r.u32be();
    auto body = r.take(len, "chunk body truncated");
    if (id[0] == 'M' && id[1] == 'T' && id[2] == 'r' && id[3] == 'k') {
      ByteReader tr(body, r.pos() - len);
      parse_track(tr, song, &saw_tempo, &saw_timesig);
      ++tracks_done;
    }
    // other chunk types are skipped by their declared length
  }

  for (auto& channel : song.channels) {
    std::stable_sort(channel.begin(), channel.end(),
                     [](const NoteEvent& a, const NoteEvent& b) { return a.onset < b.onset; });
  }
  return song;
}

// ---- writing ----

namespace {

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u16be(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_vlq(std::vector<std::uint8_t>& out, long v) {
  std::uint8_t stack[5];
  int n = 0;
  do {
    stack[n++] = static_cast<std::uint8_t>(v & 0x7f);
    v >>= 7;
  } while (v > 0);
  while (n > 1) out.push_back(static_cast<std::uint8_t>(stack[--n] | 0x80));
  out.push_back(stack[0]);
}

struct TimedMessage {
  long tick;
  int order;  // stable tie-break: offs before ons at the same tick
  std::vector<std::uint8_t> bytes;
};

std::vector<std::uint8_t> render_track(std::vector<TimedMessage> messages, long end_tick) {
  std::stable_sort(messages.begin(), messages.end(), [](const auto& a, const auto& b) {
    return a.tick != b.tick ? a.tick < b.tick : a.order < b.order;
  });
  std::vector<std::uint8_t> body;
  long tick = 0;
  for (const auto& m : messages) {
    put_vlq(body, m.tick - tick);
    tick = m.tick;
    body.insert(body.end(), m.bytes.begin(), m.bytes.end());
  }
  put_vlq(body, end_tick - tick);
  body.insert(body.end(), {0xff, 0x2f, 0x00});

  std::vector<std::uint8_t> chunk = {'M', 'T', 'r', 'k'};
  put_u32be(chunk, static_cast<std::uint32_t>(body.size()));
  chunk.insert(chunk.end(), body.begin(), body.end());
  return chunk;
}

}  // namespace

std::vector<std::uint8_t> write_midi(const std::vector<BarRoll>& bars,
                                     const std::vector<ChordVec>* chords, double tempo_bpm) {
  if (bars.empty()) throw std::invalid_argument("write_midi: empty bar sequence");
  if (chords && chords->size() != bars.size()) {
    throw std::invalid_argument("write_midi: chord count " + std::to_string(chords->size()) +
                                " does not match bar count " + std::to_string(bars.size()));
  }
  if (tempo_bpm <= 0.0) throw std::invalid_argument("write_midi: tempo must be positive");

  const int step = kWritePpq / 4;
  const long end_tick =
      static_cast<long>(bars.size()) * kStepsPerBar * step;

  // conductor track: time signature and tempo
  std::vector<TimedMessage> meta;
  meta.push_back({0, 0, {0xff, 0x58, 0x04, 0x04, 0x02, 0x18, 0x08}});
  const long uspq = std::lround(60000000.0 / tempo_bpm);
  meta.push_back({0, 1,
                  {0xff, 0x51, 0x03, static_cast<std::uint8_t>((uspq >> 16) & 0xff),
                   static_cast<std::uint8_t>((uspq >> 8) & 0xff),
                   static_cast<std::uint8_t>(uspq & 0xff)}});

  // melody: runs of identical pitch across consecutive steps become notes
  std::vector<TimedMessage> melody;
  for (std::size_t b = 0; b < bars.size(); ++b) {
    const long bar_tick = static_cast<long>(b) * kStepsPerBar * step;
    int s = 0;
    while (s < kStepsPerBar) {
      const int pitch = bars[b].active_pitch(s);
      if (pitch < 0) {
        ++s;
        continue;
      }
      int run_end = s + 1;
      while (run_end < kStepsPerBar && bars[b].active_pitch(run_end) == pitch) ++run_end;
      const long on = bar_tick + static_cast<long>(s) * step;
      const long off = bar_tick + static_cast<long>(run_end) * step;
      melody.push_back({on, 1, {0x90, static_cast<std::uint8_t>(pitch), 96}});
      melody.push_back({off, 0, {0x80, static_cast<std::uint8_t>(pitch), 0}});
      s = run_end;
    }
  }

  std::vector<std::uint8_t> out = {'M', 'T', 'h', 'd'};
  put_u32be(out, 6);
  put_u16be(out, 1);  // format 1
  put_u16be(out, chords ? 3 : 2);
  put_u16be(out, kWritePpq);

  auto conductor = render_track(std::move(meta), 0);
  out.insert(out.end(), conductor.begin(), conductor.end());
  auto track1 = render_track(std::move(melody), end_tick);
  out.insert(out.end(), track1.begin(), track1.end());

  if (chords) {
    std::vector<TimedMessage> chord_track;
    for (std::size_t b = 0; b < chords->size(); ++b) {
      const auto chord = vec_to_chord((*chords)[b]);
      if (!chord) continue;  // all-zero vector: no chord this bar
      const long on = static_cast<long>(b) * kStepsPerBar * step;
      const long off = on + kStepsPerBar * step;
      const int root = 48 + chord->root_pc;  // triads around C3
      const int third = root + (chord->minor ? 3 : 4);
      const int fifth = root + 7;
      for (int pitch : {root, third, fifth}) {
        chord_track.push_back({on, 1, {0x91, static_cast<std::uint8_t>(pitch), 80}});
        chord_track.push_back({off, 0, {0x81, static_cast<std::uint8_t>(pitch), 0}});
      }
    }
    auto track2 = render_track(std::move(chord_track), end_tick);
    out.insert(out.end(), track2.begin(), track2.end());
  }
  return out;
}

std::vector<GridNote> quantize(const std::vector<NoteEvent>& events, int ppq, int* dropped_short) {
  if (ppq <= 0) throw std::invalid_argument("quantize: ppq must be positive");
  const double step = static_cast<double>(ppq) / 4.0;
  std::vector<GridNote> out;
  out.reserve(events.size());
  int dropped = 0;
  for (const auto& e : events) {
    if (static_cast<double>(e.duration) < step / 2.0) {
      ++dropped;  // shorter than half a step: excluded from the grid
      continue;
    }
    const int onset = static_cast<int>(std::floor(static_cast<double>(e.onset) / step + 0.5));
    const int dur =
        std::max(1, static_cast<int>(std::floor(static_cast<double>(e.duration) / step + 0.5)));
    out.push_back(GridNote{e.pitch, onset, dur});
  }
  if (dropped_short) *dropped_short = dropped;
  std::stable_sort(out.begin(), out.end(),
                   [](const GridNote& a, const GridNote& b) { return a.onset < b.onset; });
  return out;
}

}  // namespace bargan
