#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace imime {

struct PixelRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  [[nodiscard]] long area() const noexcept { return static_cast<long>(w) * h; }
  [[nodiscard]] int right() const noexcept { return x + w; }
  [[nodiscard]] int bottom() const noexcept { return y + h; }
  [[nodiscard]] bool contains(int px, int py) const noexcept {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
  [[nodiscard]] bool intersects(const PixelRect& o) const noexcept {
    return x < o.right() && o.x < right() && y < o.bottom() && o.y < bottom();
  }

  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

inline constexpr int kMinFrameSide = 16;

// Grayscale 8-bit image, row-major.
class Frame {
 public:
  Frame() = default;
  Frame(int width, int height, std::uint8_t fill = 0);
  Frame(int width, int height, std::vector<std::uint8_t> data);

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  std::uint8_t operator()(int x, int y) const { return data_[index(x, y)]; }
  std::uint8_t& operator()(int x, int y) { return data_[index(x, y)]; }

  [[nodiscard]] std::span<const std::uint8_t> pixels() const noexcept { return data_; }
  [[nodiscard]] std::span<std::uint8_t> pixels() noexcept { return data_; }

  [[nodiscard]] bool contains(const PixelRect& r) const noexcept {
    return r.x >= 0 && r.y >= 0 && r.w > 0 && r.h > 0 && r.right() <= width_ &&
           r.bottom() <= height_;
  }
  [[nodiscard]] bool same_shape(const Frame& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  [[nodiscard]] std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Binary PGM (P5, maxval 255).
std::vector<std::uint8_t> encode_pgm(const Frame& frame);
Frame decode_pgm(std::span<const std::uint8_t> bytes);
void write_pgm(const std::filesystem::path& path, const Frame& frame);
Frame read_pgm(const std::filesystem::path& path);

}  // namespace imime
