#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "clothsense/clothsim.hpp"
#include "clothsense/raster.hpp"

namespace clothsense {

/// Which frame an HMAP raster lives in.
enum class FrameTag : std::uint8_t {
  kCamera = 0,   // depth along the camera axis
  kWorld = 1,    // height above the table
  kTactile = 2,  // gel indentation, mm
};

struct HeightRaster {
  RasterD values;
  double meters_per_pixel = 0.0;
  FrameTag tag = FrameTag::kWorld;
};

/// "HMAP\x01", u32 LE width, u32 LE height, f32 LE meters per pixel, u8 frame
/// tag, then width*height f32 LE values in row-major order.
void write_hmap(std::ostream& out, const HeightRaster& raster);
HeightRaster read_hmap(std::istream& in);
void write_hmap(const std::filesystem::path& path, const HeightRaster& raster);
HeightRaster read_hmap(const std::filesystem::path& path);

/// "TSEQ\x01", u16 LE frame count, then per frame an f32 LE force proxy and
/// an embedded HMAP of the deformation (tactile tag). Frame timestamps are
/// their indices. Values are stored as f32.
void write_tseq(const std::filesystem::path& path, const std::vector<TactileFrame>& frames);
std::vector<TactileFrame> read_tseq(const std::filesystem::path& path);

/// Rounds every value to f32 so that in-memory data equals what the file
/// formats store.
void round_to_float(RasterD& raster);
void round_to_float(TactileSequence& seq);

}  // namespace clothsense
