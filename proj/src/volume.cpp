#include "dualfluoro/volume.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "dualfluoro/errors.hpp"
#include "dualfluoro/text_io.hpp"

namespace dualfluoro {

CtVolume::CtVolume(std::array<int, 3> dims, Vec3 spacing, Vec3 origin, std::vector<float> intensities,
                   std::optional<std::vector<std::uint8_t>> skull_label)
    : dims_(dims), spacing_(spacing), origin_(origin), intensities_(std::move(intensities)), label_(std::move(skull_label)) {
  for (int d : dims_)
    if (d < 0) throw Error(ErrorCode::InvalidArgument, "negative volume dimension");
  if (!(spacing_.minCoeff() > 0.0)) throw Error(ErrorCode::InvalidArgument, "voxel spacing must be positive");
  if (intensities_.size() != voxel_count())
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("intensity buffer has {} values, expected {}", intensities_.size(), voxel_count()));
  if (label_ && label_->size() != voxel_count())
    throw Error(ErrorCode::InvalidArgument, "label buffer size differs from the voxel count");
}

std::size_t CtVolume::voxel_count() const {
  return static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(dims_[2]);
}

const std::vector<std::uint8_t>& CtVolume::label() const {
  if (!label_) throw Error(ErrorCode::MissingLabel, "volume has no skull label");
  return *label_;
}

Vec3 CtVolume::center() const {
  return origin_ + 0.5 * Vec3(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1).cwiseProduct(spacing_);
}

template <typename Fetch>
double CtVolume::trilinear(const Vec3& ijk, Fetch fetch) const {
  const double fx = std::floor(ijk.x()), fy = std::floor(ijk.y()), fz = std::floor(ijk.z());
  const int i0 = static_cast<int>(fx), j0 = static_cast<int>(fy), k0 = static_cast<int>(fz);
  if (i0 < -1 || j0 < -1 || k0 < -1 || i0 >= dims_[0] || j0 >= dims_[1] || k0 >= dims_[2]) return 0.0;
  const double tx = ijk.x() - fx, ty = ijk.y() - fy, tz = ijk.z() - fz;
  double acc = 0.0;
  for (int dk = 0; dk < 2; ++dk) {
    const int k = k0 + dk;
    if (k < 0 || k >= dims_[2]) continue;
    const double wz = dk ? tz : 1.0 - tz;
    for (int dj = 0; dj < 2; ++dj) {
      const int j = j0 + dj;
      if (j < 0 || j >= dims_[1]) continue;
      const double wy = dj ? ty : 1.0 - ty;
      for (int di = 0; di < 2; ++di) {
        const int i = i0 + di;
        if (i < 0 || i >= dims_[0]) continue;
        acc += (di ? tx : 1.0 - tx) * wy * wz * fetch(index(i, j, k));
      }
    }
  }
  return acc;
}

double CtVolume::sample(const Vec3& ijk) const {
  return trilinear(ijk, [this](std::size_t n) { return static_cast<double>(intensities_[n]); });
}

double CtVolume::sample_label(const Vec3& ijk) const {
  const auto& lab = label();
  return trilinear(ijk, [&lab](std::size_t n) { return lab[n] ? 1.0 : 0.0; });
}

namespace {

template <typename T>
std::vector<float> decode_raw(const std::vector<std::uint8_t>& bytes, double slope, double intercept) {
  std::vector<float> out(bytes.size() / 2);
  for (std::size_t n = 0; n < out.size(); ++n) {
    const auto u = static_cast<std::uint16_t>(bytes[2 * n] | (bytes[2 * n + 1] << 8));
    out[n] = static_cast<float>(slope * static_cast<double>(static_cast<T>(u)) + intercept);
  }
  return out;
}

}  // namespace

CtVolume load_volume(const std::filesystem::path& header_path) {
  std::map<std::string, text::Row> keys;
  for (auto& row : text::parse_rows(text::read_file(header_path))) {
    const std::string key = row.fields[0];
    if (!keys.emplace(key, std::move(row)).second)
      throw Error(ErrorCode::Parse, fmt::format("{}: duplicate key '{}'", header_path.string(), key));
  }
  auto need = [&](const std::string& key, std::size_t n) -> const text::Row& {
    auto it = keys.find(key);
    if (it == keys.end()) throw Error(ErrorCode::Parse, fmt::format("{}: missing '{}'", header_path.string(), key));
    if (it->second.fields.size() != n + 1)
      throw Error(ErrorCode::Parse, fmt::format("{}: '{}' expects {} values", header_path.string(), key, n));
    return it->second;
  };
  const auto& d = need("dims", 3);
  const std::array<int, 3> dims{static_cast<int>(d.integer(1)), static_cast<int>(d.integer(2)), static_cast<int>(d.integer(3))};
  const auto& s = need("spacing", 3);
  const auto& o = need("origin", 3);
  const std::string type = need("voxel_type", 1).fields[1];
  if (type != "int16" && type != "uint16") throw Error(ErrorCode::Parse, "voxel_type must be int16 or uint16");
  double slope = 1.0, intercept = 0.0;
  if (keys.count("rescale")) {
    const auto& r = need("rescale", 2);
    slope = r.number(1);
    intercept = r.number(2);
  }
  const auto dir = header_path.parent_path();
  const std::size_t count = static_cast<std::size_t>(std::max(dims[0], 0)) * static_cast<std::size_t>(std::max(dims[1], 0)) *
                            static_cast<std::size_t>(std::max(dims[2], 0));
  const auto raw = text::read_binary(dir / need("data", 1).fields[1]);
  if (raw.size() != 2 * count)
    throw Error(ErrorCode::Parse, fmt::format("voxel file has {} bytes, expected {}", raw.size(), 2 * count));
  std::vector<float> values = type == "int16" ? decode_raw<std::int16_t>(raw, slope, intercept)
                                              : decode_raw<std::uint16_t>(raw, slope, intercept);
  std::optional<std::vector<std::uint8_t>> label;
  if (keys.count("label")) {
    label = text::read_binary(dir / need("label", 1).fields[1]);
    if (label->size() != count)
      throw Error(ErrorCode::Parse, fmt::format("label file has {} bytes, expected {}", label->size(), count));
  }
  try {
    return CtVolume(dims, Vec3(s.number(1), s.number(2), s.number(3)), Vec3(o.number(1), o.number(2), o.number(3)),
                    std::move(values), std::move(label));
  } catch (const Error& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
}

void save_volume(const std::filesystem::path& header_path, const CtVolume& volume, double slope) {
  const std::string stem = header_path.stem().string();
  const auto dir = header_path.parent_path();
  std::string raw;
  raw.reserve(volume.voxel_count() * 2);
  for (float v : volume.intensities()) {
    const long q = std::clamp(std::lround(v / slope), -32768L, 32767L);
    const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(q));
    raw.push_back(static_cast<char>(u & 0xff));
    raw.push_back(static_cast<char>(u >> 8));
  }
  text::write_file(dir / (stem + ".raw"), raw);
  std::string hdr = fmt::format("dims {} {} {}\nspacing {} {} {}\norigin {} {} {}\nvoxel_type int16\nrescale {} 0\ndata {}.raw\n",
                                volume.dims()[0], volume.dims()[1], volume.dims()[2], volume.spacing().x(),
                                volume.spacing().y(), volume.spacing().z(), volume.origin().x(), volume.origin().y(),
                                volume.origin().z(), slope, stem);
  if (volume.has_label()) {
    const auto& lab = volume.label();
    text::write_file(dir / (stem + "_label.raw"), std::string(lab.begin(), lab.end()));
    hdr += fmt::format("label {}_label.raw\n", stem);
  }
  text::write_file(header_path, hdr);
}

}  // namespace dualfluoro
