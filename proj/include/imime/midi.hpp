#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace imime::midi {

struct NoteOn {
  std::uint8_t pitch = 0;
  std::uint8_t velocity = 0;
  friend bool operator==(const NoteOn&, const NoteOn&) = default;
};
struct NoteOff {
  std::uint8_t pitch = 0;
  friend bool operator==(const NoteOff&, const NoteOff&) = default;
};
struct Tempo {
  std::uint32_t us_per_quarter = 500'000;
  friend bool operator==(const Tempo&, const Tempo&) = default;
};
// Anything else, kept verbatim starting with its status byte.
struct Other {
  std::vector<std::uint8_t> raw;
  friend bool operator==(const Other&, const Other&) = default;
};

using EventKind = std::variant<NoteOn, NoteOff, Tempo, Other>;

struct MidiEvent {
  std::uint64_t tick = 0;  // absolute
  std::uint8_t channel = 0;
  EventKind kind;
  std::uint16_t track = 0;

  friend bool operator==(const MidiEvent&, const MidiEvent&) = default;
};

struct MidiFile {
  std::uint16_t format = 0;
  std::uint16_t track_count = 0;
  std::uint16_t division = 480;  // raw header field
  std::vector<MidiEvent> events;  // merged, sorted by tick, stable by track
};

// Reads one variable-length quantity at `pos`, advancing it. At most 4 bytes.
std::uint32_t decode_vlq(std::span<const std::uint8_t> bytes, std::size_t& pos);

MidiFile parse_midi(std::span<const std::uint8_t> bytes);
MidiFile read_midi(const std::filesystem::path& path);

// Seconds at each event, honouring tempo changes (default 500000 us/quarter).
std::vector<double> event_seconds(std::span<const MidiEvent> events, std::uint16_t division);

struct ExpressionEnvelope {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (seconds, weight), strictly increasing time
};

struct EnvelopeConfig {
  std::array<std::string, 12> mapping{"smile",        "brow_raise_left",  "mouth_open",
                                      "brow_raise_right", "surprise",     "eye_blink_left",
                                      "eye_blink_right",  "mouth_pucker", "frown",
                                      "cheek_raise",  "tongue_out",       "jaw_open"};
  double attack_seconds = 0.05;
  double release_seconds = 0.2;
};

std::vector<ExpressionEnvelope> events_to_envelopes(std::span<const MidiEvent> events,
                                                    std::uint16_t division,
                                                    const EnvelopeConfig& cfg = {},
                                                    std::vector<std::string>* warnings = nullptr);

// Piecewise-linear evaluation; 0 outside the breakpoints.
double envelope_at(const ExpressionEnvelope& env, double seconds);

// CSV columns: label,time,weight
void write_envelopes_csv(const std::filesystem::path& path,
                         std::span<const ExpressionEnvelope> envelopes);

}  // namespace imime::midi
