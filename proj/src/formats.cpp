#include "clothsense/formats.hpp"

#include <fstream>
#include <limits>

#include "clothsense/binary_io.hpp"
#include "clothsense/error.hpp"

namespace clothsense {
namespace {

constexpr std::string_view kHmapMagic{"HMAP\x01", 5};
constexpr std::string_view kTseqMagic{"TSEQ\x01", 5};

}  // namespace

void write_hmap(std::ostream& out, const HeightRaster& raster) {
  io::put_magic(out, kHmapMagic);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(raster.values.width()));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(raster.values.height()));
  io::put<float>(out, static_cast<float>(raster.meters_per_pixel));
  io::put<std::uint8_t>(out, static_cast<std::uint8_t>(raster.tag));
  for (double v : raster.values.values()) io::put<float>(out, static_cast<float>(v));
}

HeightRaster read_hmap(std::istream& in) {
  io::expect_magic(in, kHmapMagic);
  const auto w = io::get<std::uint32_t>(in);
  const auto h = io::get<std::uint32_t>(in);
  if (w > (1u << 16) || h > (1u << 16)) throw FormatError("implausible HMAP dimensions");
  HeightRaster r;
  r.meters_per_pixel = io::get<float>(in);
  const auto tag = io::get<std::uint8_t>(in);
  if (tag > static_cast<std::uint8_t>(FrameTag::kTactile)) throw FormatError("unknown HMAP frame tag");
  r.tag = static_cast<FrameTag>(tag);
  r.values = RasterD(static_cast<int>(w), static_cast<int>(h));
  for (double& v : r.values.values()) v = io::get<float>(in);
  return r;
}

void write_hmap(const std::filesystem::path& path, const HeightRaster& raster) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_hmap(out, raster);
  if (!out) throw IoError("write failed: " + path.string());
}

HeightRaster read_hmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return read_hmap(in);
}

void write_tseq(const std::filesystem::path& path, const std::vector<TactileFrame>& frames) {
  if (frames.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw ShapeError("too many frames for TSEQ");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  io::put_magic(out, kTseqMagic);
  io::put<std::uint16_t>(out, static_cast<std::uint16_t>(frames.size()));
  for (const TactileFrame& f : frames) {
    io::put<float>(out, static_cast<float>(f.force_proxy));
    write_hmap(out, {f.deformation, kTactileMmPerPixel * 1e-3, FrameTag::kTactile});
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<TactileFrame> read_tseq(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  io::expect_magic(in, kTseqMagic);
  const auto n = io::get<std::uint16_t>(in);
  std::vector<TactileFrame> frames(n);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    frames[i].force_proxy = io::get<float>(in);
    HeightRaster r = read_hmap(in);
    if (r.tag != FrameTag::kTactile) throw FormatError("TSEQ frame is not a tactile raster");
    frames[i].deformation = std::move(r.values);
    frames[i].timestamp = static_cast<int>(i);
  }
  return frames;
}

void round_to_float(RasterD& raster) {
  for (double& v : raster.values()) v = static_cast<float>(v);
}

void round_to_float(TactileSequence& seq) {
  for (TactileFrame& f : seq.frames) {
    round_to_float(f.deformation);
    f.force_proxy = static_cast<float>(f.force_proxy);
  }
}

}  // namespace clothsense
