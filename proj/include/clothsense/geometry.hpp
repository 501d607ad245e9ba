#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "clothsense/raster.hpp"

namespace clothsense {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  bool operator==(const Point3&) const = default;
};

/// Pinhole camera with intrinsics embedded in a homogeneous 4x4 matrix and a
/// rigid camera-to-world transform. Camera frame: x right, y down, z forward.
struct CameraModel {
  Eigen::Matrix4d intrinsics = Eigen::Matrix4d::Identity();
  Eigen::Matrix4d camera_to_world = Eigen::Matrix4d::Identity();
  int width = 0;
  int height = 0;

  static CameraModel pinhole(double fx, double fy, double cx, double cy, int width,
                             int height, const Eigen::Matrix4d& camera_to_world);

  /// Throws CalibrationError unless K is invertible with positive focal
  /// entries and the pose is a proper rigid transform.
  void validate() const;

  Point3 center() const;
};

/// Pose of a camera `height` meters above the table, pitched `tilt` radians
/// away from straight down, with its optical axis through the world origin.
Eigen::Matrix4d overhead_pose(double height, double tilt);

/// The simulated depth camera used by the collection and exploration loops.
CameraModel default_table_camera();

struct DepthImage {
  RasterD depth;  // meters along the camera z axis; 0 where invalid
  Mask valid;

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
};

/// Square world raster centered on the world origin (the table center).
struct GridSpec {
  int size = 600;
  double meters_per_pixel = 0.001;
};

/// Height above the table on a regular grid, plus (for projected maps) the
/// per-camera-pixel world points the grid was gathered from.
struct WorldHeightMap {
  RasterD z;
  double meters_per_pixel = 0.001;
  Raster<Point3> points;
  Mask point_valid;

  int width() const { return z.width(); }
  int height() const { return z.height(); }
  double world_x(double col) const { return (col - 0.5 * (width() - 1)) * meters_per_pixel; }
  double world_y(double row) const { return (row - 0.5 * (height() - 1)) * meters_per_pixel; }
  double col_of(double x) const { return x / meters_per_pixel + 0.5 * (width() - 1); }
  double row_of(double y) const { return y / meters_per_pixel + 0.5 * (height() - 1); }

  /// Bilinear height at world (x, y); `outside` beyond the pixel-center extent.
  double sample(double x, double y, double outside = 0.0) const;

  static WorldHeightMap flat(const GridSpec& grid, double height = 0.0);
};

/// Back-projects every valid pixel with T_K2W * K^-1 * [u*d, v*d, d, 1]^T and
/// gathers heights onto `grid`: each cell takes the sample nearest its center,
/// empty cells take the value of the nearest filled cell (breadth-first).
WorldHeightMap project_to_world(const DepthImage& depth, const CameraModel& cam,
                                const GridSpec& grid = {});

/// How per-level stencil values are scaled before being reported.
enum class ResponseNormalization {
  /// Raw 4-neighbour stencil on the level raster: the Laplacian times the
  /// squared level pixel spacing, in meters. Used for candidate thresholds.
  kSpacing,
  /// Spacing response times 2^(-1.5 * level): peaks at the level whose
  /// spacing matches the ridge width, for cross-level scale comparison.
  kScaleSelective,
};

/// Gaussian pyramid: level 0 is `z`, each further level is a 5-tap binomial
/// blur (mirror borders) followed by keeping even rows and columns.
std::vector<RasterD> gaussian_pyramid(const RasterD& z, int levels);

RasterD binomial_blur(const RasterD& z);
RasterD decimate(const RasterD& z);
/// |[0,1,0; 1,-4,1; 0,1,0] * z| with mirror borders.
RasterD laplacian_magnitude(const RasterD& z);

std::vector<RasterD> laplacian_pyramid_responses(
    const WorldHeightMap& hm, int levels = 3,
    ResponseNormalization normalization = ResponseNormalization::kSpacing);

struct GripCandidate {
  Point3 position;
  double direction = 0.0;  // radians in [0, pi)
  int pyramid_level = 0;
  double response = 0.0;
  int col = 0;  // level-0 grid pixel
  int row = 0;
  bool operator==(const GripCandidate&) const = default;
};

struct CandidateOptions {
  /// Heights at or below this are bare table and never become candidates.
  double min_cloth_height = 0.001;
};

/// One candidate per above-threshold 8-neighbour local maximum of each level.
/// The position is the highest level-0 pixel inside the level pixel's
/// footprint; the direction is evaluated on the level raster itself. Output
/// is sorted then shuffled by `seed`.
std::vector<GripCandidate> extract_candidates(const std::vector<RasterD>& responses,
                                              const WorldHeightMap& hm, double threshold,
                                              std::uint64_t seed,
                                              const CandidateOptions& options = {});

/// atan2 of the central-difference gradient, folded into [0, pi).
double wrinkle_direction(const RasterD& z, int x, int y);
double wrinkle_direction(const WorldHeightMap& hm, int x, int y);

inline constexpr double kGripWindowSide = 0.11;
inline constexpr int kGripWindowPixels = 64;

/// Axis-aligned side x side window around (center_x, center_y), bilinearly
/// resampled to pixels x pixels; area beyond the raster reads as table (0).
RasterD crop_grip_window(const WorldHeightMap& hm, double center_x, double center_y,
                         double side = kGripWindowSide, int pixels = kGripWindowPixels);

}  // namespace clothsense
