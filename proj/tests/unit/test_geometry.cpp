#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "doctest.h"

#include "clothsense/error.hpp"
#include "clothsense/geometry.hpp"
#include "test_support.hpp"

using namespace clothsense;
using testing::deg;
using testing::kPi;

namespace {

WorldHeightMap map_from(const RasterD& z, double mpp = 0.001) {
  WorldHeightMap hm;
  hm.z = z;
  hm.meters_per_pixel = mpp;
  return hm;
}

// Reflect-101 index, written independently of the library.
int reflect(int i, int n) {
  const int period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

// Full 5x5 convolution with the outer-product binomial kernel.
RasterD blur_2d(const RasterD& z) {
  const double k[5] = {1, 4, 6, 4, 1};
  RasterD out(z.width(), z.height());
  for (int y = 0; y < z.height(); ++y) {
    for (int x = 0; x < z.width(); ++x) {
      double acc = 0.0;
      for (int j = -2; j <= 2; ++j) {
        for (int i = -2; i <= 2; ++i) {
          acc += k[i + 2] * k[j + 2] / 256.0 * z(reflect(x + i, z.width()), reflect(y + j, z.height()));
        }
      }
      out(x, y) = acc;
    }
  }
  return out;
}

std::vector<RasterD> brute_pyramid_responses(const RasterD& z, int levels) {
  std::vector<RasterD> out;
  RasterD cur = z;
  for (int l = 0; l < levels; ++l) {
    if (l > 0) {
      const RasterD b = blur_2d(cur);
      RasterD d((b.width() + 1) / 2, (b.height() + 1) / 2);
      for (int y = 0; y < d.height(); ++y)
        for (int x = 0; x < d.width(); ++x) d(x, y) = b(2 * x, 2 * y);
      cur = d;
    }
    RasterD r(cur.width(), cur.height());
    for (int y = 0; y < cur.height(); ++y) {
      for (int x = 0; x < cur.width(); ++x) {
        const int w = cur.width();
        const int h = cur.height();
        r(x, y) = std::abs(cur(reflect(x - 1, w), y) + cur(reflect(x + 1, w), y) +
                           cur(x, reflect(y - 1, h)) + cur(x, reflect(y + 1, h)) - 4 * cur(x, y));
      }
    }
    out.push_back(r);
  }
  return out;
}

RasterD gaussian_ridges(int size, const std::vector<std::pair<double, double>>& center_fwhm,
                        double height) {
  RasterD z(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double v = 0.0;
      for (auto [c, fwhm] : center_fwhm) {
        const double s = fwhm / 2.354820045;
        v += height * std::exp(-0.5 * (x - c) * (x - c) / (s * s));
      }
      z(x, y) = v;
    }
  }
  return z;
}

}  // namespace

TEST_SUITE("camera") {
  TEST_CASE("identity camera maps pixels to scaled homogeneous coordinates") {
    CameraModel cam;
    cam.width = 4;
    cam.height = 3;
    DepthImage img{RasterD(4, 3, 1.0), Mask(4, 3, 1)};
    const WorldHeightMap hm = project_to_world(img, cam, {16, 1.0});
    for (int v = 0; v < 3; ++v) {
      for (int u = 0; u < 4; ++u) {
        CHECK(hm.points(u, v) == Point3{double(u), double(v), 1.0});
      }
    }
  }

  TEST_CASE("single pixels match hand-computed back-projection") {
    // K: fx=2, fy=4, cx=1, cy=2. Pose: 90 deg about z, then translate (1,2,3).
    Eigen::Matrix4d pose;
    pose << 0, -1, 0, 1,  //
        1, 0, 0, 2,       //
        0, 0, 1, 3,       //
        0, 0, 0, 1;
    const CameraModel cam = CameraModel::pinhole(2, 4, 1, 2, 8, 8, pose);
    DepthImage img{RasterD(8, 8), Mask(8, 8, 0)};
    // (u, v, d) -> camera (x, y, z) = ((u-1)d/2, (v-2)d/4, d) -> world (-y+1, x+2, z+3)
    struct Case {
      int u, v;
      double d;
      Point3 world;
    };
    const Case cases[] = {{3, 6, 2.0, {-1.0, 4.0, 5.0}},
                          {1, 2, 1.5, {1.0, 2.0, 4.5}},
                          {5, 0, 4.0, {3.0, 10.0, 7.0}}};
    for (const Case& c : cases) {
      img.depth(c.u, c.v) = c.d;
      img.valid(c.u, c.v) = 1;
    }
    const WorldHeightMap hm = project_to_world(img, cam, {64, 0.5});
    for (const Case& c : cases) {
      const Point3 p = hm.points(c.u, c.v);
      CHECK(p.x == doctest::Approx(c.world.x).epsilon(1e-12));
      CHECK(p.y == doctest::Approx(c.world.y).epsilon(1e-12));
      CHECK(p.z == doctest::Approx(c.world.z).epsilon(1e-12));
    }
  }

  TEST_CASE("tilted pinhole recovers the table plane") {
    const CameraModel cam =
        CameraModel::pinhole(100, 100, 64, 64, 128, 128, testing::tilted_pose(1.06, deg(23.5)));
    const WorldHeightMap hm = project_to_world(testing::table_depth(cam), cam);
    double worst = 0.0;
    for (int v = 0; v < 128; ++v)
      for (int u = 0; u < 128; ++u) worst = std::max(worst, std::abs(hm.points(u, v).z));
    CHECK(worst <= 1e-6);
    for (double z : hm.z.values()) CHECK(std::abs(z) <= 1e-6);
  }

  TEST_CASE("rotating the pose preserves distances between back-projected points") {
    std::mt19937_64 rng(5);
    const CameraModel base = CameraModel::pinhole(100, 100, 64, 64, 128, 128, Eigen::Matrix4d::Identity());
    const RasterD depth = testing::random_raster(128, 128, 11, 0.5, 2.0);
    DepthImage img{depth, Mask(128, 128, 1)};
    const WorldHeightMap a = project_to_world(img, base, {8, 1.0});
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::Quaterniond q = Eigen::Quaterniond::UnitRandom();
      CameraModel moved = base;
      moved.camera_to_world = testing::rigid(q.toRotationMatrix(), Eigen::Vector3d(0.3, -0.2, 1.5));
      const WorldHeightMap b = project_to_world(img, moved, {8, 1.0});
      std::uniform_int_distribution<int> px(0, 127);
      for (int k = 0; k < 50; ++k) {
        const int u1 = px(rng), v1 = px(rng), u2 = px(rng), v2 = px(rng);
        auto dist = [](const Point3& p, const Point3& q2) {
          return std::sqrt(std::pow(p.x - q2.x, 2) + std::pow(p.y - q2.y, 2) + std::pow(p.z - q2.z, 2));
        };
        CHECK(std::abs(dist(a.points(u1, v1), a.points(u2, v2)) - dist(b.points(u1, v1), b.points(u2, v2))) <= 1e-9);
      }
    }
  }

  TEST_CASE("invalid calibration and empty depth are rejected") {
    CameraModel cam = CameraModel::pinhole(100, 100, 64, 64, 128, 128, Eigen::Matrix4d::Identity());
    DepthImage img{RasterD(128, 128, 1.0), Mask(128, 128, 1)};
    CameraModel singular = cam;
    singular.intrinsics(2, 2) = 0.0;
    singular.intrinsics(2, 0) = 0.0;
    CHECK_THROWS_AS(project_to_world(img, singular), CalibrationError);
    CameraModel skewed = cam;
    skewed.camera_to_world(0, 1) = 0.2;
    CHECK_THROWS_AS(project_to_world(img, skewed), CalibrationError);
    DepthImage none{RasterD(128, 128, 1.0), Mask(128, 128, 0)};
    CHECK_THROWS_AS(project_to_world(none, cam), EmptyInputError);
  }
}

TEST_SUITE("pyramid") {
  TEST_CASE("constant and affine surfaces give no response") {
    const WorldHeightMap flat = map_from(RasterD(64, 64, 0.02));
    for (const RasterD& r : laplacian_pyramid_responses(flat))
      for (double v : r.values()) CHECK(v == 0.0);

    RasterD plane(64, 64);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) plane(x, y) = 0.003 * x - 0.002 * y + 0.01;
    const auto responses = laplacian_pyramid_responses(map_from(plane));
    for (std::size_t l = 0; l < responses.size(); ++l) {
      const RasterD& r = responses[l];
      // Interior: away from the mirrored border by the blur support of every level so far.
      const int margin = 3;
      for (int y = margin; y < r.height() - margin; ++y)
        for (int x = margin; x < r.width() - margin; ++x) CHECK(r(x, y) <= 1e-9);
    }
  }

  TEST_CASE("responses equal a brute-force 2D convolution pyramid") {
    const RasterD z = testing::random_raster(40, 36, 3, 0.0, 0.05);
    const auto lib = laplacian_pyramid_responses(map_from(z), 3);
    const auto ref = brute_pyramid_responses(z, 3);
    REQUIRE(lib.size() == ref.size());
    for (std::size_t l = 0; l < lib.size(); ++l) {
      REQUIRE(lib[l].width() == ref[l].width());
      REQUIRE(lib[l].height() == ref[l].height());
      for (std::size_t i = 0; i < lib[l].size(); ++i)
        CHECK(lib[l].values()[i] == doctest::Approx(ref[l].values()[i]).epsilon(1e-12).scale(1e-6));
    }
  }

  TEST_CASE("ridge width selects the pyramid level") {
    const int size = 256;
    const std::vector<std::pair<double, double>> ridges{{48, 4}, {128, 8}, {208, 16}};
    const RasterD z = gaussian_ridges(size, ridges, 0.01);
    const auto responses =
        laplacian_pyramid_responses(map_from(z), 3, ResponseNormalization::kScaleSelective);
    for (std::size_t i = 0; i < ridges.size(); ++i) {
      const double c = ridges[i].first;
      int best_level = -1;
      double best = -1.0;
      for (int l = 0; l < 3; ++l) {
        const RasterD& r = responses[static_cast<std::size_t>(l)];
        const int step = 1 << l;
        double peak = 0.0;
        for (int x = 0; x < r.width(); ++x) {
          if (std::abs(x * step - c) > 20) continue;
          peak = std::max(peak, r(x, r.height() / 2));
        }
        if (peak > best) {
          best = peak;
          best_level = l;
        }
      }
      CHECK(best_level == static_cast<int>(i));
    }
  }

  TEST_CASE("shifting the input by 2^level shifts that level by one pixel") {
    const RasterD base = testing::random_raster(96, 96, 9, 0.0, 0.02);
    for (int l = 0; l < 3; ++l) {
      const int s = 1 << l;
      RasterD shifted(96, 96);
      for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 96; ++x) shifted(x, y) = base(std::min(95, x + s), y);
      const auto a = laplacian_pyramid_responses(map_from(base), 3);
      const auto b = laplacian_pyramid_responses(map_from(shifted), 3);
      const RasterD& ra = a[static_cast<std::size_t>(l)];
      const RasterD& rb = b[static_cast<std::size_t>(l)];
      const int margin = 8;
      for (int y = margin; y < ra.height() - margin; ++y)
        for (int x = margin; x < ra.width() - margin; ++x) CHECK(rb(x, y) == doctest::Approx(ra(x + 1, y)).epsilon(1e-12).scale(1e-9));
    }
  }

  TEST_CASE("too-small rasters are rejected") {
    CHECK_THROWS_AS(laplacian_pyramid_responses(map_from(RasterD(31, 40)), 3), SizeError);
    CHECK_NOTHROW(laplacian_pyramid_responses(map_from(RasterD(32, 32)), 3));
    CHECK_THROWS_AS(laplacian_pyramid_responses(map_from(RasterD(32, 32)), 0), SizeError);
  }
}

TEST_SUITE("candidates") {
  TEST_CASE("zero responses yield no candidates") {
    const WorldHeightMap hm = map_from(RasterD(64, 64, 0.01));
    std::vector<RasterD> zero{RasterD(64, 64), RasterD(32, 32), RasterD(16, 16)};
    CHECK(extract_candidates(zero, hm, 0.0, 1).empty());
  }

  TEST_CASE("a ridge along y gives crest candidates oriented across it") {
    const RasterD z = gaussian_ridges(128, {{64, 12}}, 0.02);
    const WorldHeightMap hm = map_from(z);
    const auto responses = laplacian_pyramid_responses(hm);
    // Per level, a threshold between the flank lobes (0.45 of the crest) and the crest.
    std::vector<GripCandidate> cands;
    for (std::size_t l = 0; l < responses.size(); ++l) {
      std::vector<RasterD> only = responses;
      for (std::size_t k = 0; k < only.size(); ++k)
        if (k != l) only[k] = RasterD(only[k].width(), only[k].height());
      const double peak = *std::max_element(responses[l].values().begin(), responses[l].values().end());
      const auto level = extract_candidates(only, hm, 0.6 * peak, 3);
      CHECK(level.size() >= 1);
      cands.insert(cands.end(), level.begin(), level.end());
    }
    for (const GripCandidate& c : cands) {
      CHECK(std::abs(c.col - 64) <= 1);
      const double d = std::min(c.direction, kPi - c.direction);
      CHECK(d <= deg(2.0));
      CHECK(c.position.z > 0.0);
    }
  }

  TEST_CASE("candidate set equals a brute-force scan on 32x32 rasters") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const RasterD z = testing::random_raster(32, 32, 100 + seed, 0.002, 0.02);
      const WorldHeightMap hm = map_from(z);
      std::vector<RasterD> responses{testing::random_raster(32, 32, 200 + seed),
                                     testing::random_raster(16, 16, 300 + seed)};
      const double threshold = 0.5;
      std::set<std::tuple<int, int, int, double>> expected;
      std::set<std::pair<int, int>> taken;
      for (int l = 0; l < 2; ++l) {
        const RasterD& r = responses[static_cast<std::size_t>(l)];
        const int step = 1 << l;
        for (int y = 1; y < r.height() - 1; ++y) {
          for (int x = 1; x < r.width() - 1; ++x) {
            bool peak = r(x, y) > threshold;
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx)
                if ((dx || dy) && r(x + dx, y + dy) >= r(x, y)) peak = false;
            if (!peak) continue;
            int bc = -1, br = -1;
            double bz = -1.0;
            for (int rr = y * step - step / 2; rr <= y * step + step / 2; ++rr)
              for (int cc = x * step - step / 2; cc <= x * step + step / 2; ++cc)
                if (cc >= 0 && rr >= 0 && cc < 32 && rr < 32 && z(cc, rr) > bz) {
                  bz = z(cc, rr);
                  bc = cc;
                  br = rr;
                }
            if (!taken.insert({bc, br}).second) continue;
            expected.insert({l, bc, br, r(x, y)});
          }
        }
      }
      std::set<std::tuple<int, int, int, double>> got;
      for (const GripCandidate& c : extract_candidates(responses, hm, threshold, seed))
        got.insert({c.pyramid_level, c.col, c.row, c.response});
      CHECK(got == expected);
    }
  }

  TEST_CASE("extraction is pure and the seed only permutes") {
    const RasterD z = testing::random_raster(64, 64, 8, 0.002, 0.03);
    const WorldHeightMap hm = map_from(z);
    const auto responses = laplacian_pyramid_responses(hm);
    const auto a = extract_candidates(responses, hm, 1e-3, 42);
    const auto b = extract_candidates(responses, hm, 1e-3, 42);
    CHECK(a == b);
    auto c = extract_candidates(responses, hm, 1e-3, 43);
    REQUIRE(c.size() == a.size());
    auto key = [](const GripCandidate& g) { return std::make_tuple(g.pyramid_level, g.col, g.row); };
    auto sorted = [&](std::vector<GripCandidate> v) {
      std::sort(v.begin(), v.end(), [&](auto& p, auto& q) { return key(p) < key(q); });
      return v;
    };
    CHECK(sorted(a) == sorted(c));
    for (const GripCandidate& g : a) {
      CHECK(g.direction >= 0.0);
      CHECK(g.direction < kPi);
      CHECK(g.position.z > 0.0);
    }
  }

  TEST_CASE("bare table never yields candidates") {
    RasterD z(64, 64, 0.0);
    z(30, 30) = 0.0005;  // a spike below the cloth floor
    const WorldHeightMap hm = map_from(z);
    CHECK(extract_candidates(laplacian_pyramid_responses(hm), hm, 1e-6, 1).empty());
  }
}

TEST_SUITE("direction") {
  RasterD plane(double a, double b) {
    RasterD z(9, 9);
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 9; ++x) z(x, y) = a * x + b * y;
    return z;
  }

  TEST_CASE("analytic planes") {
    CHECK(wrinkle_direction(plane(5, 0), 4, 4) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(wrinkle_direction(plane(0, 5), 4, 4) == doctest::Approx(kPi / 2).epsilon(1e-12));
    CHECK(std::abs(wrinkle_direction(plane(3, 4), 4, 4) - 0.927295218001612) <= 1e-6);
    CHECK(std::abs(wrinkle_direction(plane(-3, 4), 4, 4) - (kPi - 0.927295218001612)) <= 1e-6);
  }

  TEST_CASE("output range and 90 degree rotation") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int k = 0; k < 200; ++k) {
      const double a = u(rng), b = u(rng);
      const double d = wrinkle_direction(plane(a, b), 4, 4);
      CHECK(d >= 0.0);
      CHECK(d < kPi);
      // Rotating the surface by +90 deg: new(x, y) = old(y, -x) has gradient (-b, a).
      const double r = wrinkle_direction(plane(-b, a), 4, 4);
      const double expected = std::fmod(d + kPi / 2, kPi);
      const double diff = std::abs(r - expected);
      CHECK(std::min(diff, kPi - diff) <= 1e-6);
    }
  }

  TEST_CASE("boundary pixels need a margin") {
    const RasterD z = plane(1, 1);
    CHECK_THROWS_AS(wrinkle_direction(z, 0, 4), MarginError);
    CHECK_THROWS_AS(wrinkle_direction(z, 4, 8), MarginError);
    CHECK_NOTHROW(wrinkle_direction(z, 1, 7));
  }
}

TEST_SUITE("crop") {
  TEST_CASE("flat table crops are zero") {
    const WorldHeightMap hm = map_from(RasterD(300, 300));
    const RasterD p = crop_grip_window(hm, 0.05, -0.07);
    CHECK(p.width() == 64);
    CHECK(p.height() == 64);
    for (double v : p.values()) CHECK(v == 0.0);
  }

  TEST_CASE("a centered bump peaks at the patch center") {
    RasterD z(301, 301);
    for (int y = 0; y < 301; ++y)
      for (int x = 0; x < 301; ++x) z(x, y) = 0.02 * std::exp(-((x - 150.0) * (x - 150.0) + (y - 150.0) * (y - 150.0)) / 400.0);
    const WorldHeightMap hm = map_from(z);
    const RasterD p = crop_grip_window(hm, 0.0, 0.0);
    const auto it = std::max_element(p.values().begin(), p.values().end());
    const int idx = static_cast<int>(it - p.values().begin());
    CHECK(std::abs(idx % 64 - 31.5) <= 1.5);
    CHECK(std::abs(idx / 64 - 31.5) <= 1.5);
  }

  TEST_CASE("the part beyond the raster edge is padded with table") {
    const RasterD z = testing::random_raster(200, 200, 12, 0.001, 0.01);
    const WorldHeightMap hm = map_from(z);
    const double cx = hm.world_x(199);  // right edge: right half lies off-raster
    const double cy = 0.0;
    const RasterD p = crop_grip_window(hm, cx, cy);
    const double step = 0.11 / 64;
    for (int j = 0; j < 64; ++j) {
      for (int i = 0; i < 64; ++i) {
        const double x = cx + (i + 0.5) * step - 0.055;
        const double y = cy + (j + 0.5) * step - 0.055;
        const double col = x / 0.001 + 99.5;
        const double row = y / 0.001 + 99.5;
        if (col > 199.0) {
          CHECK(p(i, j) == 0.0);
          continue;
        }
        const int c0 = static_cast<int>(std::floor(col));
        const int r0 = static_cast<int>(std::floor(row));
        const double fc = col - c0, fr = row - r0;
        auto at = [&](int c, int r) { return z(std::min(c, 199), std::min(r, 199)); };
        const double expected = (1 - fr) * ((1 - fc) * at(c0, r0) + fc * at(c0 + 1, r0)) +
                                fr * ((1 - fc) * at(c0, r0 + 1) + fc * at(c0 + 1, r0 + 1));
        CHECK(p(i, j) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("center off the raster is rejected") {
    const WorldHeightMap hm = map_from(RasterD(100, 100));
    CHECK_THROWS_AS(crop_grip_window(hm, 0.2, 0.0), BoundsError);
  }
}
