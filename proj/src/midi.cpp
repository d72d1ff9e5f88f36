#include "imime/midi.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <iterator>
#include <map>

#include <fmt/format.h>

#include "imime/error.hpp"

namespace imime::midi {

std::uint32_t decode_vlq(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) {
    if (pos >= bytes.size()) throw Error(Errc::TruncatedChunk, "variable-length quantity truncated");
    const std::uint8_t b = bytes[pos++];
    value = (value << 7) | (b & 0x7F);
    if ((b & 0x80) == 0) return value;
  }
  throw Error(Errc::BadVLQ, "variable-length quantity longer than 4 bytes");
}

namespace {

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t pos) {
  return (std::uint32_t{b[pos]} << 24) | (std::uint32_t{b[pos + 1]} << 16) |
         (std::uint32_t{b[pos + 2]} << 8) | std::uint32_t{b[pos + 3]};
}

std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t pos) {
  return static_cast<std::uint16_t>((b[pos] << 8) | b[pos + 1]);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t pos, const char* tag) {
  return std::equal(tag, tag + 4, b.begin() + static_cast<std::ptrdiff_t>(pos));
}

std::size_t channel_data_length(std::uint8_t status) {
  switch (status & 0xF0) {
    case 0xC0:
    case 0xD0: return 1;
    default: return 2;
  }
}

void parse_track(std::span<const std::uint8_t> data, std::uint16_t track,
                 std::vector<MidiEvent>& out) {
  std::size_t pos = 0;
  std::uint64_t tick = 0;
  std::uint8_t running = 0;
  auto need = [&](std::size_t n) {
    if (data.size() - pos < n) throw Error(Errc::TruncatedChunk, "track event runs past chunk end");
  };
  while (pos < data.size()) {
    tick += decode_vlq(data, pos);
    need(1);
    std::uint8_t status = data[pos];
    if (status & 0x80) {
      ++pos;
    } else {
      if (running == 0) throw Error(Errc::BadHeader, "data byte without running status");
      status = running;
    }

    MidiEvent ev{tick, 0, Other{}, track};
    if (status == 0xFF) {
      running = 0;
      need(1);
      const std::uint8_t type = data[pos++];
      const std::uint32_t len = decode_vlq(data, pos);
      need(len);
      const auto body = data.subspan(pos, len);
      pos += len;
      if (type == 0x2F) return;  // end of track
      if (type == 0x51 && len == 3) {
        ev.kind = Tempo{(std::uint32_t{body[0]} << 16) | (std::uint32_t{body[1]} << 8) | body[2]};
      } else {
        std::vector<std::uint8_t> raw{0xFF, type};
        raw.insert(raw.end(), body.begin(), body.end());
        ev.kind = Other{std::move(raw)};
      }
    } else if (status == 0xF0 || status == 0xF7) {
      running = 0;
      const std::uint32_t len = decode_vlq(data, pos);
      need(len);
      std::vector<std::uint8_t> raw{status};
      raw.insert(raw.end(), data.begin() + static_cast<std::ptrdiff_t>(pos),
                 data.begin() + static_cast<std::ptrdiff_t>(pos + len));
      pos += len;
      ev.kind = Other{std::move(raw)};
    } else if (status >= 0xF1) {
      throw Error(Errc::BadHeader, fmt::format("system message 0x{:02X} not allowed in a file", status));
    } else {
      running = status;
      const std::size_t n = channel_data_length(status);
      need(n);
      const std::uint8_t d0 = data[pos];
      const std::uint8_t d1 = n > 1 ? data[pos + 1] : 0;
      if ((d0 & 0x80) || (d1 & 0x80)) throw Error(Errc::BadHeader, "channel data byte >= 0x80");
      pos += n;
      ev.channel = status & 0x0F;
      switch (status & 0xF0) {
        case 0x80: ev.kind = NoteOff{d0}; break;
        case 0x90: ev.kind = d1 == 0 ? EventKind{NoteOff{d0}} : EventKind{NoteOn{d0, d1}}; break;
        default: {
          std::vector<std::uint8_t> raw{status, d0};
          if (n > 1) raw.push_back(d1);
          ev.kind = Other{std::move(raw)};
        }
      }
    }
    out.push_back(std::move(ev));
  }
}

}  // namespace

MidiFile parse_midi(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 14 || !tag_is(bytes, 0, "MThd")) {
    throw Error(Errc::BadHeader, "missing MThd header chunk");
  }
  if (be32(bytes, 4) != 6) throw Error(Errc::BadHeader, "MThd length must be 6");
  MidiFile file;
  file.format = be16(bytes, 8);
  file.track_count = be16(bytes, 10);
  file.division = be16(bytes, 12);
  if (file.format == 2) throw Error(Errc::UnsupportedFormat, "format 2 files are not supported");
  if (file.format > 2) throw Error(Errc::BadHeader, fmt::format("unknown SMF format {}", file.format));
  if (file.format == 0 && file.track_count != 1) {
    throw Error(Errc::BadHeader, "format 0 requires exactly one track");
  }
  if (file.division == 0) throw Error(Errc::BadHeader, "division must be nonzero");

  std::size_t pos = 14;
  std::uint16_t tracks = 0;
  while (tracks < file.track_count) {
    if (bytes.size() - pos < 8) throw Error(Errc::TruncatedChunk, "missing track chunk");
    const std::uint32_t len = be32(bytes, pos + 4);
    if (bytes.size() - pos - 8 < len) throw Error(Errc::TruncatedChunk, "chunk longer than file");
    if (tag_is(bytes, pos, "MTrk")) {
      parse_track(bytes.subspan(pos + 8, len), tracks, file.events);
      ++tracks;
    }
    pos += 8 + len;  // unknown chunk types are skipped
  }
  std::stable_sort(file.events.begin(), file.events.end(),
                   [](const MidiEvent& a, const MidiEvent& b) { return a.tick < b.tick; });
  return file;
}

MidiFile read_midi(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_midi(bytes);
}

std::vector<double> event_seconds(std::span<const MidiEvent> events, std::uint16_t division) {
  std::vector<double> out;
  out.reserve(events.size());
  if (division & 0x8000) {
    // SMPTE: -frames per second in the high byte, ticks per frame in the low byte
    const int fps = -static_cast<std::int8_t>(division >> 8);
    const int per_frame = division & 0xFF;
    for (const auto& e : events) {
      out.push_back(static_cast<double>(e.tick) / (fps * per_frame));
    }
    return out;
  }
  double seconds = 0;
  std::uint64_t last_tick = 0;
  double us_per_quarter = 500'000;
  for (const auto& e : events) {
    seconds += static_cast<double>(e.tick - last_tick) * us_per_quarter / 1e6 / division;
    last_tick = e.tick;
    out.push_back(seconds);
    if (const auto* t = std::get_if<Tempo>(&e.kind)) us_per_quarter = t->us_per_quarter;
  }
  return out;
}

namespace {

// Attack / hold / release trapezoid of one note.
struct NoteShape {
  double on = 0;
  double off = 0;
  double peak = 0;
};

double shape_at(const NoteShape& n, double t, const EnvelopeConfig& cfg) {
  if (t <= n.on) return 0;
  auto rising = [&](double x) {
    return cfg.attack_seconds > 0 ? n.peak * std::min(1.0, (x - n.on) / cfg.attack_seconds) : n.peak;
  };
  if (t <= n.off) return rising(t);
  const double level = rising(n.off);
  if (cfg.release_seconds <= 0) return 0;
  return std::max(0.0, level * (1.0 - (t - n.off) / cfg.release_seconds));
}

std::vector<double> breakpoints(const NoteShape& n, const EnvelopeConfig& cfg) {
  std::vector<double> t{n.on, n.off, n.off + cfg.release_seconds};
  if (n.on + cfg.attack_seconds < n.off) t.push_back(n.on + cfg.attack_seconds);
  return t;
}

}  // namespace

std::vector<ExpressionEnvelope> events_to_envelopes(std::span<const MidiEvent> events,
                                                    std::uint16_t division,
                                                    const EnvelopeConfig& cfg,
                                                    std::vector<std::string>* warnings) {
  const auto secs = event_seconds(events, division);
  std::map<std::pair<int, int>, std::deque<std::size_t>> open;  // (channel, pitch) -> notes
  std::vector<NoteShape> notes;
  std::vector<std::string> note_label;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (const auto* on = std::get_if<NoteOn>(&e.kind)) {
      notes.push_back({secs[i], secs[i], std::clamp(on->velocity / 127.0, 0.0, 1.0)});
      note_label.push_back(cfg.mapping[on->pitch % 12]);
      open[{e.channel, on->pitch}].push_back(notes.size() - 1);
    } else if (const auto* off = std::get_if<NoteOff>(&e.kind)) {
      auto it = open.find({e.channel, off->pitch});
      if (it == open.end() || it->second.empty()) {
        if (warnings) {
          warnings->push_back(fmt::format("UnmatchedNoteOff: pitch {} channel {} at tick {}",
                                          off->pitch, e.channel, e.tick));
        }
        continue;
      }
      notes[it->second.front()].off = secs[i];
      it->second.pop_front();
    }
  }
  const double end = secs.empty() ? 0.0 : secs.back();
  for (auto& [key, q] : open) {
    for (std::size_t n : q) notes[n].off = std::max(notes[n].off, end);
  }

  std::map<std::string, std::vector<std::size_t>> by_label;
  std::vector<std::string> order;
  for (std::size_t n = 0; n < notes.size(); ++n) {
    if (!by_label.contains(note_label[n])) order.push_back(note_label[n]);
    by_label[note_label[n]].push_back(n);
  }

  std::vector<ExpressionEnvelope> out;
  for (const auto& label : order) {
    const auto& ids = by_label[label];
    std::vector<double> times;
    for (std::size_t n : ids) {
      const auto b = breakpoints(notes[n], cfg);
      times.insert(times.end(), b.begin(), b.end());
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    // crossings between notes inside each linear piece
    std::vector<double> extra;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
      const double ta = times[k];
      const double tb = times[k + 1];
      for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
          const double da = shape_at(notes[ids[i]], ta, cfg) - shape_at(notes[ids[j]], ta, cfg);
          const double db = shape_at(notes[ids[i]], tb, cfg) - shape_at(notes[ids[j]], tb, cfg);
          if ((da < 0 && db > 0) || (da > 0 && db < 0)) extra.push_back(ta + (tb - ta) * da / (da - db));
        }
      }
    }
    times.insert(times.end(), extra.begin(), extra.end());
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());

    ExpressionEnvelope env{label, {}};
    for (double t : times) {
      double w = 0;
      for (std::size_t n : ids) w = std::max(w, shape_at(notes[n], t, cfg));
      env.points.emplace_back(t, std::clamp(w, 0.0, 1.0));
    }
    out.push_back(std::move(env));
  }
  return out;
}

double envelope_at(const ExpressionEnvelope& env, double t) {
  const auto& p = env.points;
  if (p.empty() || t < p.front().first || t > p.back().first) return 0;
  const auto it = std::upper_bound(p.begin(), p.end(), t,
                                   [](double x, const auto& pt) { return x < pt.first; });
  if (it == p.begin()) return p.front().second;
  if (it == p.end()) return p.back().second;
  const auto& [t0, w0] = *(it - 1);
  const auto& [t1, w1] = *it;
  return w0 + (w1 - w0) * (t - t0) / (t1 - t0);
}

void write_envelopes_csv(const std::filesystem::path& path,
                         std::span<const ExpressionEnvelope> envelopes) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "label,time,weight\n";
  for (const auto& env : envelopes) {
    for (const auto& [t, w] : env.points) out << fmt::format("{},{},{}\n", env.label, t, w);
  }
}

}  // namespace imime::midi
