#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "clothsense/geometry.hpp"
#include "clothsense/labels.hpp"
#include "clothsense/random.hpp"
#include "clothsense/raster.hpp"

namespace clothsense {

/// Physical parameters the simulated world derives from an item's labels.
struct MaterialParams {
  double thickness_mm = 1.0;
  double texture_period_mm = 2.0;  // weave spacing, from smoothness
  double texture_amp_mm = 0.05;    // weave relief, from smoothness
  double fiber_noise_amp = 0.0;    // mm, from fuzziness
  double compliance = 0.8;         // (0, 1], from softness
  int texture_motif = 0;           // [0, 20), from textile type
  double motif_angle = 0.0;        // radians, item-specific weave orientation offset
  double stretch_coeff = 0.05;     // from stretchiness
  double durability_coeff = 1.0;   // from durability; low values pill
  bool woolen_flag = false;
  bool windproof_flag = false;

  bool operator==(const MaterialParams&) const = default;
};

/// Fixed monotone label -> material table with a small per-item jitter drawn
/// from `item_seed`. Equal inputs give equal parameters.
MaterialParams label_to_material(const PropertyLabels& labels, std::uint64_t item_seed);

struct ClothItem {
  int item_id = 0;
  PropertyLabels labels;
  MaterialParams material;
  std::uint64_t item_seed = 0;
  std::uint64_t layout_seed = 0;

  static ClothItem make(int item_id, const PropertyLabels& labels, std::uint64_t item_seed,
                        std::uint64_t layout_seed);
  bool operator==(const ClothItem&) const = default;
};

/// Raised fold: a two-segment centerline with a Gaussian cross-section.
struct Wrinkle {
  std::array<double, 2> a{};
  std::array<double, 2> b{};
  std::array<double, 2> c{};
  double width = 0.01;   // full width at half maximum, meters
  double height = 0.01;  // meters
};

struct DrapeBump {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.1;
  double height = 0.0;
};

struct ClothLayout {
  double center_x = 0.0;
  double center_y = 0.0;
  double half_x = 0.2;
  double half_y = 0.2;
  double rotation = 0.0;
  double edge_rolloff = 0.04;
  double wrinkle_scale = 1.0;
  std::vector<DrapeBump> drape;
  std::vector<Wrinkle> wrinkles;
};

struct LayoutOverride {
  std::optional<int> wrinkle_count;
};

/// Placement of the cloth and its wrinkles for (item, layout_seed).
ClothLayout cloth_layout(const ClothItem& item, double table_extent,
                         const LayoutOverride& override_ = {});

/// Heightmap of the draped item on a grid covering the table. Deterministic
/// per (item, layout_seed).
WorldHeightMap synth_cloth(const ClothItem& item, double table_extent = 0.6,
                           const LayoutOverride& override_ = {},
                           double meters_per_pixel = 0.001);

/// Ray-cast depth image of `hm` with additive Gaussian depth noise and
/// random pixel dropout.
DepthImage render_depth(const WorldHeightMap& hm, const CameraModel& cam, double noise_sd,
                        std::uint64_t seed, double dropout = 0.02);

inline constexpr int kTactileWidth = 64;
inline constexpr int kTactileHeight = 48;
inline constexpr double kTactileMmPerPixel = 18.6 / kTactileWidth;
inline constexpr double kGelThicknessMm = 2.5;
inline constexpr int kMinFrames = 10;
inline constexpr int kMaxFrames = 25;
inline constexpr int kNumSensors = 5;

struct TactileFrame {
  RasterD deformation;  // mm of gel indentation
  double force_proxy = 0.0;
  int timestamp = 0;
  bool operator==(const TactileFrame&) const = default;
};

struct TactileSequence {
  std::vector<TactileFrame> frames;
  bool valid_contact = false;
  int item_id = 0;
  GripCandidate candidate;
  int sensor_id = 0;
  double contact_quality = 0.0;
  double prominence_mm = 0.0;
  bool operator==(const TactileSequence&) const = default;
};

/// Logistic contact-quality model: sigma(prominence / 5 mm) * cos^2(misalign).
double contact_quality(double prominence_mm, double misalign_deg);
inline constexpr double kProminenceScaleMm = 5.0;

/// Height of (x, y) above the median of the surrounding window, in mm.
double local_prominence(const WorldHeightMap& hm, double x, double y,
                        double window = kGripWindowSide);

/// Dominant gradient orientation of the neighbourhood of (col, row) from the
/// smoothed structure tensor, in [0, pi). Stable on ridge crests.
double wrinkle_normal(const WorldHeightMap& hm, int col, int row);

/// Angle between two undirected orientations, degrees in [0, 90].
double orientation_difference_deg(double a, double b);

struct SensorProfile {
  double gain = 1.0;
  double bias_mm = 0.0;
};
SensorProfile sensor_profile(int sensor_id);

/// Squeezes `item` at `cand` with the gripper rotated `misalign_deg` away from
/// the true wrinkle normal, recording 10-25 frames.
TactileSequence simulate_grip(const ClothItem& item, const WorldHeightMap& hm,
                              const GripCandidate& cand, double misalign_deg,
                              std::uint64_t seed, int sensor_id = 0);

/// Default sensor noise of the simulated depth camera, meters.
inline constexpr double kDefaultDepthNoise = 1e-4;
/// Standard deviation of the gripper's rotation error on execution, degrees.
inline constexpr double kGripExecutionNoiseDeg = 10.0;
/// Extra rotation error when the fingers slip off a low ridge, degrees; it
/// fades in logistically below kGripSlipProminenceMm.
inline constexpr double kGripSlipNoiseDeg = 120.0;
inline constexpr double kGripSlipProminenceMm = 8.0;

/// One arrangement of an item on the table and what the camera sees of it.
struct Scene {
  ClothItem placed;  // the item with this arrangement's layout seed
  WorldHeightMap truth;
  DepthImage depth;
  WorldHeightMap observed;
};

Scene make_scene(const ClothItem& item, std::uint64_t arrangement_seed,
                 double noise_sd = kDefaultDepthNoise);

/// Angle between the planned grip and the true local wrinkle normal plus
/// execution noise drawn from `rng`, degrees. The noise deviation is
/// execution_noise_deg plus the slip term for the local prominence.
double grip_misalignment(const WorldHeightMap& truth, const GripCandidate& cand, Rng& rng,
                         double execution_noise_deg = kGripExecutionNoiseDeg);

}  // namespace clothsense
