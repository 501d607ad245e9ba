#include "clothsense/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "clothsense/error.hpp"
#include "clothsense/random.hpp"

namespace clothsense {
namespace {

int mirror(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

constexpr std::array<double, 5> kBinomial{1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

}  // namespace

CameraModel CameraModel::pinhole(double fx, double fy, double cx, double cy, int width,
                                 int height, const Eigen::Matrix4d& camera_to_world) {
  CameraModel cam;
  cam.intrinsics << fx, 0, cx, 0,  //
      0, fy, cy, 0,                //
      0, 0, 1, 0,                  //
      0, 0, 0, 1;
  cam.camera_to_world = camera_to_world;
  cam.width = width;
  cam.height = height;
  return cam;
}

void CameraModel::validate() const {
  if (width <= 0 || height <= 0) throw CalibrationError("camera image size must be positive");
  if (!(intrinsics(0, 0) > 0.0) || !(intrinsics(1, 1) > 0.0)) {
    throw CalibrationError("camera focal entries must be positive");
  }
  const double det_k = intrinsics.determinant();
  if (!std::isfinite(det_k) || std::abs(det_k) < 1e-12) {
    throw CalibrationError("camera intrinsics are singular");
  }
  const Eigen::Matrix3d r = camera_to_world.topLeftCorner<3, 3>();
  if ((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(r.determinant() - 1.0) > 1e-9) {
    throw CalibrationError("camera pose rotation is not orthonormal with det +1");
  }
  const Eigen::RowVector4d last = camera_to_world.row(3);
  if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-12) {
    throw CalibrationError("camera pose is not a rigid homogeneous transform");
  }
}

Point3 CameraModel::center() const {
  return {camera_to_world(0, 3), camera_to_world(1, 3), camera_to_world(2, 3)};
}

Eigen::Matrix4d overhead_pose(double height, double tilt) {
  const double s = std::sin(tilt);
  const double c = std::cos(tilt);
  // Columns are the camera axes in world coordinates.
  Eigen::Matrix3d r;
  r.col(0) = Eigen::Vector3d(1, 0, 0);
  r.col(2) = Eigen::Vector3d(0, s, -c);
  r.col(1) = r.col(2).cross(r.col(0));
  Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
  pose.topLeftCorner<3, 3>() = r;
  pose(1, 3) = -height * std::tan(tilt);
  pose(2, 3) = height;
  return pose;
}

CameraModel default_table_camera() {
  constexpr int kSize = 1024;
  constexpr double kHalfFov = 17.5 * std::numbers::pi / 180.0;
  const double f = 0.5 * kSize / std::tan(kHalfFov);
  return CameraModel::pinhole(f, f, 0.5 * (kSize - 1), 0.5 * (kSize - 1), kSize, kSize,
                              overhead_pose(1.06, 23.5 * std::numbers::pi / 180.0));
}

double WorldHeightMap::sample(double x, double y, double outside) const {
  const double c = col_of(x);
  const double r = row_of(y);
  if (!(c >= 0.0 && r >= 0.0 && c <= width() - 1 && r <= height() - 1)) return outside;
  const int c0 = std::min(static_cast<int>(c), width() - 2 < 0 ? 0 : width() - 2);
  const int r0 = std::min(static_cast<int>(r), height() - 2 < 0 ? 0 : height() - 2);
  const int c1 = std::min(c0 + 1, width() - 1);
  const int r1 = std::min(r0 + 1, height() - 1);
  const double fc = c - c0;
  const double fr = r - r0;
  const double top = z(c0, r0) * (1 - fc) + z(c1, r0) * fc;
  const double bottom = z(c0, r1) * (1 - fc) + z(c1, r1) * fc;
  return top * (1 - fr) + bottom * fr;
}

WorldHeightMap WorldHeightMap::flat(const GridSpec& grid, double height) {
  WorldHeightMap hm;
  hm.z = RasterD(grid.size, grid.size, height);
  hm.meters_per_pixel = grid.meters_per_pixel;
  return hm;
}

WorldHeightMap project_to_world(const DepthImage& depth, const CameraModel& cam,
                                const GridSpec& grid) {
  cam.validate();
  if (depth.width() != cam.width || depth.height() != cam.height) {
    throw ShapeError("depth image size does not match the camera");
  }
  const Eigen::Matrix4d back = cam.camera_to_world * cam.intrinsics.inverse();

  WorldHeightMap hm = WorldHeightMap::flat(grid);
  hm.points = Raster<Point3>(depth.width(), depth.height());
  hm.point_valid = Mask(depth.width(), depth.height(), 0);

  RasterD best_dist(grid.size, grid.size, std::numeric_limits<double>::infinity());
  std::size_t n_valid = 0;
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      const double d = depth.depth(u, v);
      if (!depth.valid(u, v) || !(d > 0.0) || !std::isfinite(d)) continue;
      const Eigen::Vector4d w = back * Eigen::Vector4d(u * d, v * d, d, 1.0);
      const Point3 p{w.x(), w.y(), w.z()};
      hm.points(u, v) = p;
      hm.point_valid(u, v) = 1;
      ++n_valid;
      const double c = hm.col_of(p.x);
      const double r = hm.row_of(p.y);
      const int ci = static_cast<int>(std::lround(c));
      const int ri = static_cast<int>(std::lround(r));
      if (!hm.z.contains(ci, ri)) continue;
      const double dist = (c - ci) * (c - ci) + (r - ri) * (r - ri);
      if (dist < best_dist(ci, ri)) {
        best_dist(ci, ri) = dist;
        hm.z(ci, ri) = p.z;
      }
    }
  }
  if (n_valid == 0) throw EmptyInputError("depth image has no valid pixels");

  // Breadth-first fill of cells no sample landed in.
  std::deque<std::pair<int, int>> queue;
  Mask filled(grid.size, grid.size, 0);
  for (int r = 0; r < grid.size; ++r) {
    for (int c = 0; c < grid.size; ++c) {
      if (std::isfinite(best_dist(c, r))) {
        filled(c, r) = 1;
        queue.emplace_back(c, r);
      }
    }
  }
  if (queue.empty()) throw EmptyInputError("no depth sample falls inside the world grid");
  constexpr std::array<std::pair<int, int>, 4> kSteps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  while (!queue.empty()) {
    const auto [c, r] = queue.front();
    queue.pop_front();
    for (const auto& [dc, dr] : kSteps) {
      const int nc = c + dc;
      const int nr = r + dr;
      if (!hm.z.contains(nc, nr) || filled(nc, nr)) continue;
      filled(nc, nr) = 1;
      hm.z(nc, nr) = hm.z(c, r);
      queue.emplace_back(nc, nr);
    }
  }
  return hm;
}

RasterD binomial_blur(const RasterD& z) {
  const int w = z.width();
  const int h = z.height();
  RasterD tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -2; k <= 2; ++k) acc += kBinomial[k + 2] * z(mirror(x + k, w), y);
      tmp(x, y) = acc;
    }
  }
  RasterD out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -2; k <= 2; ++k) acc += kBinomial[k + 2] * tmp(x, mirror(y + k, h));
      out(x, y) = acc;
    }
  }
  return out;
}

RasterD decimate(const RasterD& z) {
  RasterD out((z.width() + 1) / 2, (z.height() + 1) / 2);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) out(x, y) = z(2 * x, 2 * y);
  }
  return out;
}

RasterD laplacian_magnitude(const RasterD& z) {
  const int w = z.width();
  const int h = z.height();
  RasterD out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double lap = z(mirror(x - 1, w), y) + z(mirror(x + 1, w), y) +
                         z(x, mirror(y - 1, h)) + z(x, mirror(y + 1, h)) - 4.0 * z(x, y);
      out(x, y) = std::abs(lap);
    }
  }
  return out;
}

std::vector<RasterD> gaussian_pyramid(const RasterD& z, int levels) {
  std::vector<RasterD> pyr;
  pyr.reserve(static_cast<std::size_t>(levels));
  pyr.push_back(z);
  for (int l = 1; l < levels; ++l) pyr.push_back(decimate(binomial_blur(pyr.back())));
  return pyr;
}

std::vector<RasterD> laplacian_pyramid_responses(const WorldHeightMap& hm, int levels,
                                                 ResponseNormalization normalization) {
  if (levels < 1) throw SizeError("pyramid needs at least one level");
  const int min_side = (1 << (levels - 1)) * 8;
  if (hm.width() < min_side || hm.height() < min_side) {
    throw SizeError("raster smaller than " + std::to_string(min_side) + " px per side");
  }
  std::vector<RasterD> out;
  const auto pyr = gaussian_pyramid(hm.z, levels);
  for (int l = 0; l < levels; ++l) {
    RasterD resp = laplacian_magnitude(pyr[static_cast<std::size_t>(l)]);
    if (normalization == ResponseNormalization::kScaleSelective && l > 0) {
      const double scale = std::pow(2.0, -1.5 * l);
      for (double& v : resp.values()) v *= scale;
    }
    out.push_back(std::move(resp));
  }
  return out;
}

double wrinkle_direction(const RasterD& z, int x, int y) {
  if (x < 1 || y < 1 || x >= z.width() - 1 || y >= z.height() - 1) {
    throw MarginError("wrinkle direction needs a 1 px margin");
  }
  const double gx = 0.5 * (z(x + 1, y) - z(x - 1, y));
  const double gy = 0.5 * (z(x, y + 1) - z(x, y - 1));
  double angle = std::atan2(gy, gx);
  if (angle < 0.0) angle += std::numbers::pi;
  if (angle >= std::numbers::pi) angle -= std::numbers::pi;
  return angle;
}

double wrinkle_direction(const WorldHeightMap& hm, int x, int y) {
  return wrinkle_direction(hm.z, x, y);
}

std::vector<GripCandidate> extract_candidates(const std::vector<RasterD>& responses,
                                              const WorldHeightMap& hm, double threshold,
                                              std::uint64_t seed,
                                              const CandidateOptions& options) {
  std::vector<GripCandidate> out;
  if (responses.empty()) return out;
  const auto pyr = gaussian_pyramid(hm.z, static_cast<int>(responses.size()));
  Mask taken(hm.width(), hm.height(), 0);

  for (std::size_t l = 0; l < responses.size(); ++l) {
    const RasterD& resp = responses[l];
    const RasterD& level = pyr[l];
    if (resp.width() != level.width() || resp.height() != level.height()) {
      throw ShapeError("response map does not match the heightmap pyramid");
    }
    const int step = 1 << l;
    const int half = step / 2;
    for (int y = 1; y < resp.height() - 1; ++y) {
      for (int x = 1; x < resp.width() - 1; ++x) {
        const double v = resp(x, y);
        if (!(v > threshold)) continue;
        // Ties: strictly above interior neighbours earlier in scan order, at
        // least equal to the rest, so a plateau yields exactly one maximum.
        bool is_max = true;
        for (int dy = -1; dy <= 1 && is_max; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = x + dx;
            const int ny = y + dy;
            const double n = resp(nx, ny);
            const bool interior = nx >= 1 && ny >= 1 && nx < resp.width() - 1 && ny < resp.height() - 1;
            const bool earlier = interior && (dy < 0 || (dy == 0 && dx < 0));
            if (earlier ? n >= v : n > v) {
              is_max = false;
              break;
            }
          }
        }
        if (!is_max) continue;

        int best_c = -1;
        int best_r = -1;
        double best_z = -std::numeric_limits<double>::infinity();
        for (int r = y * step - half; r <= y * step + half; ++r) {
          for (int c = x * step - half; c <= x * step + half; ++c) {
            if (!hm.z.contains(c, r)) continue;
            if (hm.z(c, r) > best_z) {
              best_z = hm.z(c, r);
              best_c = c;
              best_r = r;
            }
          }
        }
        if (best_c < 0 || !(best_z > options.min_cloth_height) || taken(best_c, best_r)) continue;
        taken(best_c, best_r) = 1;
        GripCandidate cand;
        cand.position = {hm.world_x(best_c), hm.world_y(best_r), best_z};
        cand.direction = wrinkle_direction(level, x, y);
        cand.pyramid_level = static_cast<int>(l);
        cand.response = v;
        cand.col = best_c;
        cand.row = best_r;
        out.push_back(cand);
      }
    }
  }
  Rng rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

RasterD crop_grip_window(const WorldHeightMap& hm, double center_x, double center_y,
                         double side, int pixels) {
  const double c = hm.col_of(center_x);
  const double r = hm.row_of(center_y);
  if (!(c >= 0.0 && r >= 0.0 && c <= hm.width() - 1 && r <= hm.height() - 1)) {
    throw BoundsError("crop center lies outside the heightmap");
  }
  RasterD patch(pixels, pixels);
  const double step = side / pixels;
  for (int j = 0; j < pixels; ++j) {
    const double y = center_y + (j + 0.5) * step - 0.5 * side;
    for (int i = 0; i < pixels; ++i) {
      const double x = center_x + (i + 0.5) * step - 0.5 * side;
      patch(i, j) = hm.sample(x, y, 0.0);
    }
  }
  return patch;
}

}  // namespace clothsense
