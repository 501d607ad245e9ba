#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "clothsense/geometry.hpp"

namespace testing {

using clothsense::CameraModel;
using clothsense::DepthImage;
using clothsense::RasterD;

inline constexpr double kPi = std::numbers::pi;
inline double deg(double d) { return d * kPi / 180.0; }

/// Depth of the world plane z = 0 seen by `cam`, by explicit ray-plane
/// intersection (independent of the library renderer).
inline DepthImage table_depth(const CameraModel& cam) {
  DepthImage img{RasterD(cam.width, cam.height), clothsense::Mask(cam.width, cam.height, 1)};
  const Eigen::Matrix3d k = cam.intrinsics.topLeftCorner<3, 3>();
  const Eigen::Matrix3d r = cam.camera_to_world.topLeftCorner<3, 3>();
  const Eigen::Vector3d c = cam.camera_to_world.topRightCorner<3, 1>();
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Eigen::Vector3d ray_cam = k.inverse() * Eigen::Vector3d(u, v, 1.0);  // z component 1
      const Eigen::Vector3d ray_world = r * ray_cam;
      img.depth(u, v) = -c.z() / ray_world.z();  // camera-z depth equals the ray parameter
    }
  }
  return img;
}

inline Eigen::Matrix4d rigid(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

/// Camera `height` above the table, optical axis tilted `tilt` from the
/// downward vertical about the world x axis.
inline Eigen::Matrix4d tilted_pose(double height, double tilt) {
  // Camera looking straight down: x right, y toward -y world, z down.
  Eigen::Matrix3d down;
  down << 1, 0, 0,  //
      0, -1, 0,     //
      0, 0, -1;
  const Eigen::Matrix3d tilt_x = Eigen::AngleAxisd(tilt, Eigen::Vector3d::UnitX()).toRotationMatrix();
  return rigid(tilt_x * down, Eigen::Vector3d(0, -height * std::tan(tilt), height));
}

inline RasterD random_raster(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  RasterD r(w, h);
  for (double& v : r.values()) v = u(rng);
  return r;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("clothsense_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
