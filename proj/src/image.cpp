#include "dualfluoro/image.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "dualfluoro/errors.hpp"
#include "dualfluoro/text_io.hpp"

namespace dualfluoro {

Image::Image(int width, int height, double fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error(ErrorCode::InvalidArgument, "negative image size");
  pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

ColorImage::ColorImage(int width, int height)
    : width_(width), height_(height), rgb_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3, 0) {}

ColorImage ColorImage::from_gray(const Image& gray) {
  ColorImage out(gray.width(), gray.height());
  for (int r = 0; r < gray.height(); ++r)
    for (int c = 0; c < gray.width(); ++c) {
      const auto v = static_cast<std::uint8_t>(std::clamp(std::lround(gray.at(c, r)), 0L, 255L));
      out.set(c, r, {v, v, v});
    }
  return out;
}

void ColorImage::set(int col, int row, Rgb c) {
  if (col < 0 || row < 0 || col >= width_ || row >= height_) return;
  const std::size_t i = (static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col)) * 3;
  rgb_[i] = c[0];
  rgb_[i + 1] = c[1];
  rgb_[i + 2] = c[2];
}

Rgb ColorImage::get(int col, int row) const {
  const std::size_t i = (static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col)) * 3;
  return {rgb_[i], rgb_[i + 1], rgb_[i + 2]};
}

namespace {

std::string header(std::string_view magic, int w, int h, const std::vector<std::string>& comments) {
  std::string out = std::string(magic) + "\n";
  for (const auto& c : comments) out += "# " + c + "\n";
  out += fmt::format("{} {}\n255\n", w, h);
  return out;
}

}  // namespace

std::string encode_pgm(const Image& image, const std::vector<std::string>& comments) {
  std::string out = header("P5", image.width(), image.height(), comments);
  out.reserve(out.size() + image.pixels().size());
  for (double v : image.pixels()) out.push_back(static_cast<char>(std::clamp(std::lround(v), 0L, 255L)));
  return out;
}

Image decode_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space_and_comments();
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos++] - '0');
      any = true;
    }
    if (!any) throw Error(ErrorCode::Parse, "malformed PGM header");
    return v;
  };
  if (bytes.substr(0, 2) != "P5") throw Error(ErrorCode::Parse, "not a binary PGM (P5)");
  pos = 2;
  const long w = read_int(), h = read_int(), maxval = read_int();
  if (maxval <= 0 || maxval > 65535) throw Error(ErrorCode::Parse, "bad PGM maxval");
  ++pos;  // single whitespace before raster
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() < pos + n * bpp) throw Error(ErrorCode::Parse, "truncated PGM raster");
  Image img(static_cast<int>(w), static_cast<int>(h));
  const double scale = 255.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < n; ++i) {
    unsigned v = static_cast<unsigned char>(bytes[pos + i * bpp]);
    if (bpp == 2) v = (v << 8) | static_cast<unsigned char>(bytes[pos + i * 2 + 1]);
    img.pixels()[i] = bpp == 1 ? v : v * scale;
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image& image, const std::vector<std::string>& comments) {
  text::write_file(path, encode_pgm(image, comments));
}

Image read_pgm(const std::filesystem::path& path) { return decode_pgm(text::read_file(path)); }

std::string encode_ppm(const ColorImage& image, const std::vector<std::string>& comments) {
  std::string out = header("P6", image.width(), image.height(), comments);
  for (int r = 0; r < image.height(); ++r)
    for (int c = 0; c < image.width(); ++c)
      for (std::uint8_t v : image.get(c, r)) out.push_back(static_cast<char>(v));
  return out;
}

void write_ppm(const std::filesystem::path& path, const ColorImage& image, const std::vector<std::string>& comments) {
  text::write_file(path, encode_ppm(image, comments));
}

void draw_circle(ColorImage& img, double col, double row, double radius, Rgb color) {
  const int steps = std::max(16, static_cast<int>(radius * 8));
  for (int i = 0; i < steps; ++i) {
    const double a = 2.0 * M_PI * i / steps;
    img.set(static_cast<int>(std::lround(col - 1 + radius * std::cos(a))),
            static_cast<int>(std::lround(row - 1 + radius * std::sin(a))), color);
  }
}

void draw_cross(ColorImage& img, double col, double row, int half, Rgb color) {
  const int c = static_cast<int>(std::lround(col - 1)), r = static_cast<int>(std::lround(row - 1));
  for (int d = -half; d <= half; ++d) {
    img.set(c + d, r, color);
    img.set(c, r + d, color);
  }
}

void draw_square(ColorImage& img, double col, double row, int half, Rgb color) {
  const int c = static_cast<int>(std::lround(col - 1)), r = static_cast<int>(std::lround(row - 1));
  for (int d = -half; d <= half; ++d) {
    img.set(c + d, r - half, color);
    img.set(c + d, r + half, color);
    img.set(c - half, r + d, color);
    img.set(c + half, r + d, color);
  }
}

}  // namespace dualfluoro
