#include "imime/frame.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "imime/error.hpp"

namespace imime {

namespace {

void check_dims(int width, int height) {
  if (width < kMinFrameSide || height < kMinFrameSide) {
    throw Error(Errc::InvalidArgument, "frame must be at least 16x16, got " +
                                           std::to_string(width) + "x" + std::to_string(height));
  }
}

}  // namespace

Frame::Frame(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  check_dims(width, height);
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

Frame::Frame(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height);
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(Errc::DimensionMismatch, "pixel buffer length does not match width*height");
  }
}

std::vector<std::uint8_t> encode_pgm(const Frame& frame) {
  const std::string header = "P5\n" + std::to_string(frame.width()) + " " +
                             std::to_string(frame.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto px = frame.pixels();
  out.insert(out.end(), px.begin(), px.end());
  return out;
}

Frame decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw Error(Errc::BadHeader, "malformed PGM header");
    }
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1'000'000) throw Error(Errc::BadHeader, "PGM dimension out of range");
    }
    return static_cast<int>(v);
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw Error(Errc::BadHeader, "not a binary PGM (P5)");
  }
  pos = 2;
  const int width = read_int();
  const int height = read_int();
  const int maxval = read_int();
  if (maxval != 255) throw Error(Errc::UnsupportedFormat, "only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw Error(Errc::BadHeader, "missing separator after PGM header");
  }
  ++pos;
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos < n) throw Error(Errc::TruncatedChunk, "PGM pixel data truncated");
  return Frame(width, height,
               std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                         bytes.begin() + static_cast<std::ptrdiff_t>(pos + n)));
}

void write_pgm(const std::filesystem::path& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  const auto bytes = encode_pgm(frame);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Frame read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_pgm(bytes);
}

}  // namespace imime
