#include "clothsense/clothsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "clothsense/error.hpp"
#include "clothsense/random.hpp"

namespace clothsense {
namespace {

constexpr double kPi = std::numbers::pi;

double smoothstep(double edge0, double edge1, double x) {
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Distance from p to segment [a, b] and the segment parameter of the foot.
std::pair<double, double> segment_distance(double px, double py, const std::array<double, 2>& a,
                                           const std::array<double, 2>& b) {
  const double dx = b[0] - a[0];
  const double dy = b[1] - a[1];
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - a[0]) * dx + (py - a[1]) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = px - (a[0] + t * dx);
  const double ey = py - (a[1] + t * dy);
  return {std::sqrt(ex * ex + ey * ey), t};
}

// Unit-variance smooth random field on the tactile grid.
RasterD smooth_noise(Rng& rng, double sigma_px) {
  RasterD white(kTactileWidth, kTactileHeight);
  for (double& v : white.values()) v = normal(rng, 0.0, 1.0);
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_px)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma_px * sigma_px));
    sum += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= sum;
  auto clampi = [](int i, int n) { return std::clamp(i, 0, n - 1); };
  RasterD tmp(kTactileWidth, kTactileHeight);
  for (int y = 0; y < kTactileHeight; ++y) {
    for (int x = 0; x < kTactileWidth; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] * white(clampi(x + i, kTactileWidth), y);
      }
      tmp(x, y) = acc;
    }
  }
  RasterD out(kTactileWidth, kTactileHeight);
  double mean = 0.0;
  for (int y = 0; y < kTactileHeight; ++y) {
    for (int x = 0; x < kTactileWidth; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp(x, clampi(y + i, kTactileHeight));
      }
      out(x, y) = acc;
      mean += acc;
    }
  }
  mean /= static_cast<double>(out.size());
  double var = 0.0;
  for (double v : out.values()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(out.size()));
  for (double& v : out.values()) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  return out;
}

// Unit-amplitude weave pattern for a motif id in sensor pixel coordinates.
double weave_pattern(int motif, double u, double v, double period, double angle, double phase1,
                     double phase2, const RasterD& random_field, int px, int py) {
  const double w = 2.0 * kPi / period;
  if (motif < 10) {
    const double th = angle + motif * kPi / 10.0;
    return std::cos(w * (u * std::cos(th) + v * std::sin(th)) + phase1);
  }
  if (motif < 18) {
    const double th = angle + (motif - 10) * kPi / 8.0;
    const double a = u * std::cos(th) + v * std::sin(th);
    const double b = -u * std::sin(th) + v * std::cos(th);
    return (std::cos(w * a + phase1) + 0.45 * std::cos(w * b + phase2)) / 1.1;
  }
  if (motif == 18) {
    const double s3 = std::sqrt(3.0) / 2.0;
    return (std::cos(w * u + phase1) + std::cos(w * (0.5 * u + s3 * v) + phase2) +
            std::cos(w * (0.5 * u - s3 * v) + phase1 - phase2)) /
           1.5;
  }
  return random_field(px, py);
}

// Standard normal quantiles at evenly spaced probabilities; interpolating
// them turns one uniform draw into a (tail-clipped) Gaussian draw, several
// times faster than std::normal_distribution for per-pixel sensor noise.
constexpr std::size_t kQuantileCount = 4097;

const std::vector<double>& normal_quantiles() {
  static const std::vector<double> table = [] {
    std::vector<double> q(kQuantileCount);
    for (std::size_t i = 0; i < kQuantileCount; ++i) {
      const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(kQuantileCount);
      double lo = -10.0;
      double hi = 10.0;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
      }
      q[i] = 0.5 * (lo + hi);
    }
    return q;
  }();
  return table;
}

}  // namespace

MaterialParams label_to_material(const PropertyLabels& labels, std::uint64_t item_seed) {
  labels.validate();
  static constexpr std::array<double, 5> kThickness{0.3, 0.8, 1.8, 3.5, 8.0};
  static constexpr std::array<double, 5> kPeriod{3.0, 2.2, 1.6, 1.2, 0.9};
  static constexpr std::array<double, 5> kAmplitude{0.02, 0.04, 0.07, 0.11, 0.16};
  static constexpr std::array<double, 4> kFiber{0.0, 0.035, 0.08, 0.14};

  Rng rng(derive_seed({item_seed, 0x6d617465ull}));
  MaterialParams m;
  m.thickness_mm = kThickness[static_cast<std::size_t>(labels[Property::kThickness])] *
                   uniform(rng, 0.9, 1.1);
  m.texture_period_mm = kPeriod[static_cast<std::size_t>(labels[Property::kSmoothness])] *
                        uniform(rng, 0.94, 1.06);
  m.texture_amp_mm = kAmplitude[static_cast<std::size_t>(labels[Property::kSmoothness])] *
                     uniform(rng, 0.9, 1.1);
  m.fiber_noise_amp = kFiber[static_cast<std::size_t>(labels[Property::kFuzziness])] *
                      uniform(rng, 0.9, 1.1);
  m.compliance = std::min(1.0, (labels[Property::kSoftness] ? 0.95 : 0.6) * uniform(rng, 0.95, 1.05));
  m.texture_motif = labels[Property::kTextile];
  m.motif_angle = uniform(rng, -3.0, 3.0) * kPi / 180.0;
  m.stretch_coeff = (labels[Property::kStretchiness] ? 0.35 : 0.05) * uniform(rng, 0.9, 1.1);
  m.durability_coeff = labels[Property::kDurability] ? 1.0 : 0.3;
  m.woolen_flag = labels[Property::kWoolen] != 0;
  m.windproof_flag = labels[Property::kWindproof] != 0;
  return m;
}

ClothItem ClothItem::make(int item_id, const PropertyLabels& labels, std::uint64_t item_seed,
                          std::uint64_t layout_seed) {
  ClothItem item;
  item.item_id = item_id;
  item.labels = labels;
  item.material = label_to_material(labels, item_seed);
  item.item_seed = item_seed;
  item.layout_seed = layout_seed;
  return item;
}

ClothLayout cloth_layout(const ClothItem& item, double table_extent,
                         const LayoutOverride& override_) {
  if (table_extent < 0.3) throw SizeError("table extent must be at least 0.3 m");
  static constexpr std::array<double, 5> kWrinkleScale{0.55, 0.7, 0.8, 0.9, 1.0};
  const double s = table_extent / 0.6;
  Rng rng(derive_seed({static_cast<std::uint64_t>(item.item_id), item.layout_seed, 0x6c61796full}));

  ClothLayout layout;
  layout.center_x = uniform(rng, -0.04, 0.04) * s;
  layout.center_y = uniform(rng, -0.04, 0.04) * s;
  layout.half_x = uniform(rng, 0.15, 0.22) * s;
  layout.half_y = uniform(rng, 0.15, 0.22) * s;
  layout.rotation = uniform(rng, 0.0, kPi);
  layout.edge_rolloff = 0.04 * s;
  layout.wrinkle_scale = kWrinkleScale[static_cast<std::size_t>(item.labels[Property::kThickness])];

  for (int i = 0; i < 5; ++i) {
    DrapeBump b;
    b.x = uniform(rng, -layout.half_x, layout.half_x);
    b.y = uniform(rng, -layout.half_y, layout.half_y);
    b.radius = uniform(rng, 0.06, 0.15) * s;
    b.height = uniform(rng, 0.0, 0.012);
    layout.drape.push_back(b);
  }

  const int n = uniform_int(rng, 3, 8);
  const int count = override_.wrinkle_count.value_or(n);
  for (int i = 0; i < count; ++i) {
    Wrinkle w;
    const double cx = uniform(rng, -0.75, 0.75) * layout.half_x;
    const double cy = uniform(rng, -0.75, 0.75) * layout.half_y;
    const double angle = uniform(rng, 0.0, kPi);
    const double bend = uniform(rng, -20.0, 20.0) * kPi / 180.0;
    const double half_len = 0.5 * uniform(rng, 0.08, 0.22) * s;
    w.b = {cx, cy};
    w.a = {cx - half_len * std::cos(angle - bend), cy - half_len * std::sin(angle - bend)};
    w.c = {cx + half_len * std::cos(angle + bend), cy + half_len * std::sin(angle + bend)};
    w.width = uniform(rng, 0.005, 0.040);
    w.height = std::clamp(w.width * uniform(rng, 0.7, 1.6), 0.005, 0.050) * layout.wrinkle_scale;
    layout.wrinkles.push_back(w);
  }
  return layout;
}

WorldHeightMap synth_cloth(const ClothItem& item, double table_extent,
                           const LayoutOverride& override_, double meters_per_pixel) {
  const ClothLayout layout = cloth_layout(item, table_extent, override_);
  const int size = static_cast<int>(std::lround(table_extent / meters_per_pixel));
  WorldHeightMap hm = WorldHeightMap::flat({size, meters_per_pixel});

  const double cr = std::cos(layout.rotation);
  const double sr = std::sin(layout.rotation);
  const double thickness = item.material.thickness_mm * 1e-3;
  const double micro_amp = 0.5 * item.material.texture_amp_mm * 1e-3;
  const double micro_k = 2.0 * kPi / (item.material.texture_period_mm * 1e-3);

  struct Prepared {
    const Wrinkle* w;
    double sigma;
    double min_x, max_x, min_y, max_y;
  };
  std::vector<Prepared> wrinkles;
  for (const Wrinkle& w : layout.wrinkles) {
    const double sigma = w.width / 2.354820045;
    const double reach = 4.0 * sigma;
    wrinkles.push_back({&w, sigma, std::min({w.a[0], w.b[0], w.c[0]}) - reach,
                        std::max({w.a[0], w.b[0], w.c[0]}) + reach,
                        std::min({w.a[1], w.b[1], w.c[1]}) - reach,
                        std::max({w.a[1], w.b[1], w.c[1]}) + reach});
  }

  for (int row = 0; row < size; ++row) {
    const double y = hm.world_y(row);
    for (int col = 0; col < size; ++col) {
      const double x = hm.world_x(col);
      // Cloth frame coordinates.
      const double dx = x - layout.center_x;
      const double dy = y - layout.center_y;
      const double px = cr * dx + sr * dy;
      const double py = -sr * dx + cr * dy;
      const double inside = std::min(layout.half_x - std::abs(px), layout.half_y - std::abs(py));
      const double footprint = smoothstep(0.0, layout.edge_rolloff, inside);
      if (footprint <= 0.0) continue;

      double base = thickness;
      for (const DrapeBump& b : layout.drape) {
        const double ex = px - b.x;
        const double ey = py - b.y;
        base += b.height * std::exp(-0.5 * (ex * ex + ey * ey) / (b.radius * b.radius));
      }
      double ridge = 0.0;
      for (const Prepared& p : wrinkles) {
        if (px < p.min_x || px > p.max_x || py < p.min_y || py > p.max_y) continue;
        const auto [d1, t1] = segment_distance(px, py, p.w->a, p.w->b);
        const auto [d2, t2] = segment_distance(px, py, p.w->b, p.w->c);
        const double d = std::min(d1, d2);
        const double t = d1 <= d2 ? 0.5 * t1 : 0.5 + 0.5 * t2;
        const double taper = smoothstep(0.0, 0.25, t) * smoothstep(0.0, 0.25, 1.0 - t);
        ridge = std::max(ridge, p.w->height * taper * std::exp(-0.5 * d * d / (p.sigma * p.sigma)));
      }
      const double micro = micro_amp * (1.0 + std::sin(micro_k * px));
      hm.z(col, row) = footprint * (base + ridge + micro);
    }
  }
  return hm;
}

DepthImage render_depth(const WorldHeightMap& hm, const CameraModel& cam, double noise_sd,
                        std::uint64_t seed, double dropout) {
  cam.validate();
  const Point3 o = cam.center();
  if (!(o.z > 0.0)) throw PoseError("camera must be above the table plane");

  const Eigen::Matrix3d rot = cam.camera_to_world.topLeftCorner<3, 3>();
  const Eigen::Matrix3d rot_t = rot.transpose();
  const Eigen::Vector3d origin(o.x, o.y, o.z);
  const double fx = cam.intrinsics(0, 0);
  const double fy = cam.intrinsics(1, 1);
  const double cx = cam.intrinsics(0, 2);
  const double cy = cam.intrinsics(1, 2);

  // Z-buffer over the triangulated heightmap surface. Inverse depth is affine
  // in screen space on each planar triangle, so planes render exactly.
  RasterD zbuf(cam.width, cam.height, std::numeric_limits<double>::infinity());
  struct Vertex {
    double u, v, inv_z;
    bool ok;
  };
  const int w = hm.width();
  const int h = hm.height();
  std::vector<Vertex> verts(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Eigen::Vector3d pc =
          rot_t * (Eigen::Vector3d(hm.world_x(c), hm.world_y(r), hm.z(c, r)) - origin);
      Vertex& vx = verts[static_cast<std::size_t>(r) * static_cast<std::size_t>(w) +
                         static_cast<std::size_t>(c)];
      vx.ok = pc.z() > 1e-9;
      if (!vx.ok) continue;
      vx.u = fx * pc.x() / pc.z() + cx;
      vx.v = fy * pc.y() / pc.z() + cy;
      vx.inv_z = 1.0 / pc.z();
    }
  }
  auto raster_triangle = [&](const Vertex& a, const Vertex& b, const Vertex& c) {
    if (!a.ok || !b.ok || !c.ok) return;
    const double area = (b.u - a.u) * (c.v - a.v) - (b.v - a.v) * (c.u - a.u);
    if (std::abs(area) < 1e-18) return;
    const int u0 = std::max(0, static_cast<int>(std::ceil(std::min({a.u, b.u, c.u}))));
    const int u1 = std::min(cam.width - 1, static_cast<int>(std::floor(std::max({a.u, b.u, c.u}))));
    const int v0 = std::max(0, static_cast<int>(std::ceil(std::min({a.v, b.v, c.v}))));
    const int v1 = std::min(cam.height - 1, static_cast<int>(std::floor(std::max({a.v, b.v, c.v}))));
    constexpr double kEdgeTolerance = -1e-9;
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        const double la = ((b.u - u) * (c.v - v) - (b.v - v) * (c.u - u)) / area;
        const double lb = ((c.u - u) * (a.v - v) - (c.v - v) * (a.u - u)) / area;
        const double lc = 1.0 - la - lb;
        if (la < kEdgeTolerance || lb < kEdgeTolerance || lc < kEdgeTolerance) continue;
        const double inv_z = la * a.inv_z + lb * b.inv_z + lc * c.inv_z;
        if (!(inv_z > 0.0)) continue;
        const double z = 1.0 / inv_z;
        if (z < zbuf(u, v)) zbuf(u, v) = z;
      }
    }
  };
  for (int r = 0; r + 1 < h; ++r) {
    for (int c = 0; c + 1 < w; ++c) {
      const std::size_t i00 = static_cast<std::size_t>(r) * static_cast<std::size_t>(w) +
                              static_cast<std::size_t>(c);
      const std::size_t i10 = i00 + 1;
      const std::size_t i01 = i00 + static_cast<std::size_t>(w);
      const std::size_t i11 = i01 + 1;
      raster_triangle(verts[i00], verts[i10], verts[i11]);
      raster_triangle(verts[i00], verts[i11], verts[i01]);
    }
  }

  DepthImage out;
  out.depth = RasterD(cam.width, cam.height, 0.0);
  out.valid = Mask(cam.width, cam.height, 0);
  Rng rng(seed);
  auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  const auto& quantiles = normal_quantiles();
  auto gaussian = [&]() {
    const double pos = unit() * (kQuantileCount - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double t = pos - static_cast<double>(i);
    return (1.0 - t) * quantiles[i] + t * quantiles[std::min(i + 1, kQuantileCount - 1)];
  };
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const bool keep = !(unit() < dropout);
      const double noise = noise_sd > 0.0 ? noise_sd * gaussian() : 0.0;
      double d = zbuf(u, v);
      if (!std::isfinite(d)) {
        // Beyond the heightmap the table plane continues.
        const Eigen::Vector3d dir = rot * Eigen::Vector3d((u - cx) / fx, (v - cy) / fy, 1.0);
        if (!(dir.z() < 0.0)) continue;
        d = -o.z / dir.z();
      }
      if (!keep) continue;
      d += noise;
      if (d > 0.0) {
        out.depth(u, v) = d;
        out.valid(u, v) = 1;
      }
    }
  }
  return out;
}

double contact_quality(double prominence_mm, double misalign_deg) {
  const double c = std::cos(misalign_deg * kPi / 180.0);
  return sigmoid(prominence_mm / kProminenceScaleMm) * c * c;
}

double local_prominence(const WorldHeightMap& hm, double x, double y, double window) {
  const int c0 = static_cast<int>(std::lround(hm.col_of(x)));
  const int r0 = static_cast<int>(std::lround(hm.row_of(y)));
  const int half = static_cast<int>(std::lround(0.5 * window / hm.meters_per_pixel));
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>((2 * half + 1) * (2 * half + 1)));
  for (int r = r0 - half; r <= r0 + half; ++r) {
    for (int c = c0 - half; c <= c0 + half; ++c) {
      values.push_back(hm.z.contains(c, r) ? hm.z(c, r) : 0.0);
    }
  }
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  return (hm.sample(x, y, 0.0) - *mid) * 1e3;
}

double wrinkle_normal(const WorldHeightMap& hm, int col, int row) {
  constexpr int kRadius = 6;
  constexpr int kStep = 2;
  constexpr double kSigma = 3.0;
  double jxx = 0.0;
  double jxy = 0.0;
  double jyy = 0.0;
  auto at = [&](int c, int r) {
    return hm.z(std::clamp(c, 0, hm.width() - 1), std::clamp(r, 0, hm.height() - 1));
  };
  for (int dr = -kRadius; dr <= kRadius; ++dr) {
    for (int dc = -kRadius; dc <= kRadius; ++dc) {
      const int c = col + dc;
      const int r = row + dr;
      const double gx = at(c + kStep, r) - at(c - kStep, r);
      const double gy = at(c, r + kStep) - at(c, r - kStep);
      const double w = std::exp(-0.5 * (dc * dc + dr * dr) / (kSigma * kSigma));
      jxx += w * gx * gx;
      jxy += w * gx * gy;
      jyy += w * gy * gy;
    }
  }
  double angle = 0.5 * std::atan2(2.0 * jxy, jxx - jyy);
  if (angle < 0.0) angle += kPi;
  if (angle >= kPi) angle -= kPi;
  return angle;
}

double orientation_difference_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), kPi);
  if (d > 0.5 * kPi) d = kPi - d;
  return d * 180.0 / kPi;
}

SensorProfile sensor_profile(int sensor_id) {
  static constexpr std::array<SensorProfile, kNumSensors> kProfiles{{
      {1.0, 0.0}, {0.94, 0.01}, {1.06, -0.01}, {0.9, 0.015}, {1.1, -0.015}}};
  if (sensor_id < 0 || sensor_id >= kNumSensors) throw ShapeError("unknown sensor id");
  return kProfiles[static_cast<std::size_t>(sensor_id)];
}

TactileSequence simulate_grip(const ClothItem& item, const WorldHeightMap& hm,
                              const GripCandidate& cand, double misalign_deg,
                              std::uint64_t seed, int sensor_id) {
  const MaterialParams& m = item.material;
  const SensorProfile sensor = sensor_profile(sensor_id);
  Rng rng(seed);

  TactileSequence seq;
  seq.item_id = item.item_id;
  seq.candidate = cand;
  seq.sensor_id = sensor_id;
  const double height = hm.sample(cand.position.x, cand.position.y, 0.0);
  const bool cloth_present = height > 1e-4;
  seq.prominence_mm = local_prominence(hm, cand.position.x, cand.position.y);
  seq.contact_quality = cloth_present ? contact_quality(seq.prominence_mm, misalign_deg) : 0.0;
  seq.valid_contact = cloth_present && seq.prominence_mm > 0.0 && seq.contact_quality >= 0.5;

  const int frames = uniform_int(rng, kMinFrames, kMaxFrames);
  const double tn = std::clamp(std::log(m.thickness_mm / 0.3) / std::log(8.0 / 0.3), 0.0, 1.0);
  const int onset = std::clamp(
      static_cast<int>(std::lround(frames * (0.22 - 0.2 * tn) + normal(rng, 0.0, 0.5))), 0,
      frames - 2);
  const int saturation = std::clamp(
      onset + static_cast<int>(std::lround(frames * (0.18 + 0.8 * tn))), onset + 1, frames - 1);

  // Per-grip static fields; frames at equal engagement are identical.
  RasterD speckle(kTactileWidth, kTactileHeight);
  for (double& v : speckle.values()) v = std::min(0.03, std::abs(normal(rng, 0.0, 0.01)));
  const double cu = 0.5 * (kTactileWidth - 1) + normal(rng, 0.0, 2.0);
  const double cv = 0.5 * (kTactileHeight - 1) + normal(rng, 0.0, 1.5);
  const double phase1 = uniform(rng, 0.0, 2.0 * kPi);
  const double phase2 = uniform(rng, 0.0, 2.0 * kPi);
  const double grip_angle = m.motif_angle + normal(rng, 0.0, 4.0) * kPi / 180.0;
  const double clarity = std::clamp((seq.contact_quality - 0.5) / 0.35, 0.0, 1.0);
  const double area_fraction = std::max(0.05, 0.6 * m.compliance + normal(rng, 0.0, 0.02));
  const double aspect = 1.6 * (1.0 + 1.5 * m.stretch_coeff) * uniform(rng, 0.95, 1.05);
  const double depth_mm = (0.55 + 1.15 * tn) * uniform(rng, 0.97, 1.03);
  // Poor contact blurs the imprint: texture fades and a smeared fold appears.
  const double texture_gain = 0.4 + 0.6 * clarity;
  const double smear_amp = 0.15 * (1.0 - clarity);
  const RasterD fuzz = smooth_noise(rng, 0.8);
  const RasterD mottle = smooth_noise(rng, 4.0);
  const RasterD smear = smooth_noise(rng, 2.5);
  const RasterD random_weave =
      smooth_noise(rng, std::max(0.7, m.texture_period_mm / kTactileMmPerPixel / 4.5));
  struct Pill {
    double u, v;
  };
  std::vector<Pill> pills;
  const int n_pills = static_cast<int>(std::lround(16.0 * (1.0 - m.durability_coeff)));
  for (int i = 0; i < n_pills; ++i) {
    pills.push_back({cu + uniform(rng, -22.0, 22.0), cv + uniform(rng, -12.0, 12.0)});
  }
  const double period_px = m.texture_period_mm / kTactileMmPerPixel;
  constexpr double kPorePeriodPx = 5.0;

  auto engagement = [&](int k) {
    if (k < onset) return 0.0;
    return std::min(1.0, static_cast<double>(k - onset + 1) / (saturation - onset + 1));
  };

  auto render_frame = [&](double e) {
    RasterD d = speckle;
    if (e <= 0.0 || !cloth_present) return d;
    if (!seq.valid_contact) {
      // Grazing touch: a small faint patch, well below the contact criteria.
      const double ab = 0.012 * kTactileWidth * kTactileHeight / kPi * e;
      const double a = std::sqrt(ab * 2.0);
      const double b = std::sqrt(ab / 2.0);
      for (int y = 0; y < kTactileHeight; ++y) {
        for (int x = 0; x < kTactileWidth; ++x) {
          const double r2 = std::pow((x - cu) / a, 2) + std::pow((y - cv) / b, 2);
          if (r2 < 1.0) d(x, y) = std::max(d(x, y), 0.2 * e * (1.0 - r2));
        }
      }
      return d;
    }
    const double ab = area_fraction * kTactileWidth * kTactileHeight / kPi * e;
    const double a = std::sqrt(ab * aspect);
    const double b = std::sqrt(ab / aspect);
    const double dome = depth_mm * std::pow(e, 0.7);
    const double se = std::sqrt(e);
    const double stretch = 1.0 + m.stretch_coeff * e;
    for (int y = 0; y < kTactileHeight; ++y) {
      for (int x = 0; x < kTactileWidth; ++x) {
        const double du = x - cu;
        const double dv = y - cv;
        const double r2 = (du / a) * (du / a) + (dv / b) * (dv / b);
        if (r2 >= 1.0) continue;
        const double pressure = 1.0 - r2;
        double v = dome * std::pow(pressure, 0.6);
        double t = m.texture_amp_mm * (0.45 + 0.55 * pressure) *
                   weave_pattern(m.texture_motif, du / stretch, dv, period_px, grip_angle, phase1,
                                 phase2, random_weave, x, y);
        t += m.fiber_noise_amp * fuzz(x, y);
        for (const Pill& p : pills) {
          const double q2 = (x - p.u) * (x - p.u) + (y - p.v) * (y - p.v);
          t += 0.25 * std::exp(-0.5 * q2 / (1.6 * 1.6));
        }
        if (!m.windproof_flag) {
          const double ca = std::cos(grip_angle);
          const double sa = std::sin(grip_angle);
          const double pu = du * ca + dv * sa;
          const double pv = -du * sa + dv * ca;
          const double lattice = std::pow(0.25 * (1.0 + std::cos(2.0 * kPi * pu / kPorePeriodPx)) *
                                              (1.0 + std::cos(2.0 * kPi * pv / kPorePeriodPx)),
                                          4);
          t -= 0.28 * lattice;
        }
        if (m.woolen_flag) t += 0.16 * mottle(x, y);
        v += se * (texture_gain * t + smear_amp * smear(x, y));
        v = std::clamp(v, 0.0, kGelThicknessMm);
        d(x, y) = std::clamp(sensor.gain * v + sensor.bias_mm, 0.0, kGelThicknessMm);
      }
    }
    return d;
  };

  seq.frames.reserve(static_cast<std::size_t>(frames));
  double last_e = -1.0;
  for (int k = 0; k < frames; ++k) {
    const double e = engagement(k);
    TactileFrame frame;
    if (e == last_e && !seq.frames.empty()) {
      frame.deformation = seq.frames.back().deformation;
    } else {
      frame.deformation = render_frame(e);
    }
    frame.force_proxy = e;
    frame.timestamp = k;
    last_e = e;
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

Scene make_scene(const ClothItem& item, std::uint64_t arrangement_seed, double noise_sd) {
  Scene scene;
  scene.placed = item;
  scene.placed.layout_seed = derive_seed({item.layout_seed, arrangement_seed});
  scene.truth = synth_cloth(scene.placed);
  const CameraModel cam = default_table_camera();
  scene.depth = render_depth(scene.truth, cam, noise_sd, derive_seed({arrangement_seed, 0x64657074ull}));
  scene.observed = project_to_world(scene.depth, cam);
  return scene;
}

double grip_misalignment(const WorldHeightMap& truth, const GripCandidate& cand, Rng& rng,
                         double execution_noise_deg) {
  const int col = std::clamp(static_cast<int>(std::lround(truth.col_of(cand.position.x))), 0,
                             truth.width() - 1);
  const int row = std::clamp(static_cast<int>(std::lround(truth.row_of(cand.position.y))), 0,
                             truth.height() - 1);
  const double planned = orientation_difference_deg(cand.direction, wrinkle_normal(truth, col, row));
  const double prominence = local_prominence(truth, cand.position.x, cand.position.y);
  const double slip = kGripSlipNoiseDeg / (1.0 + std::exp((prominence - kGripSlipProminenceMm) / 1.5));
  return planned + normal(rng, 0.0, execution_noise_deg + slip);
}

}  // namespace clothsense
