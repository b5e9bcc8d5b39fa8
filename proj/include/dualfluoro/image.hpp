#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dualfluoro {

/// Row-major grayscale image. Storage is 0-based; in image-coordinate terms
/// pixel (col, row) has its center at 1-based coordinates (col + 1, row + 1).
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  double& at(int col, int row) { return pixels_[index(col, row)]; }
  double at(int col, int row) const { return pixels_[index(col, row)]; }

  std::vector<double>& pixels() { return pixels_; }
  const std::vector<double>& pixels() const { return pixels_; }

 private:
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

using Rgb = std::array<std::uint8_t, 3>;

class ColorImage {
 public:
  ColorImage(int width, int height);
  /// Gray background from an image already in [0, 255].
  static ColorImage from_gray(const Image& gray);

  int width() const { return width_; }
  int height() const { return height_; }
  void set(int col, int row, Rgb c);
  Rgb get(int col, int row) const;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> rgb_;
};

/// Binary PGM (P5, maxval 255). Pixels are rounded and clamped to [0, 255].
/// Each comment line is written as "# <line>" after the magic number.
std::string encode_pgm(const Image& image, const std::vector<std::string>& comments = {});
Image decode_pgm(std::string_view bytes);
void write_pgm(const std::filesystem::path& path, const Image& image, const std::vector<std::string>& comments = {});
Image read_pgm(const std::filesystem::path& path);

/// Binary PPM (P6).
std::string encode_ppm(const ColorImage& image, const std::vector<std::string>& comments = {});
void write_ppm(const std::filesystem::path& path, const ColorImage& image, const std::vector<std::string>& comments = {});

/// Overlay markers, centered at 1-based pixel coordinates.
void draw_circle(ColorImage& img, double col, double row, double radius, Rgb color);
void draw_cross(ColorImage& img, double col, double row, int half, Rgb color);
void draw_square(ColorImage& img, double col, double row, int half, Rgb color);

}  // namespace dualfluoro
