#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "clothsense/clothsim.hpp"
#include "clothsense/raster.hpp"

namespace clothsense {

/// Pixels deeper than this count as touching cloth.
inline constexpr double kContactMaskMm = 0.05;

/// True iff the deepest frame's whole-frame mean deformation is at least
/// 0.1 mm and at least 3% of its pixels are in contact.
bool detect_contact(const TactileSequence& seq);

/// Mean deformation of one frame, mm.
double mean_deformation(const RasterD& frame);

/// Argmax of mean deformation; ties go to the latest index.
int max_contact_frame(const TactileSequence& seq);

/// Frame indices m - (n-1)*step ... m ending at the max-contact frame m;
/// negative entries stand for blank frames.
std::vector<int> sequence_frame_indices(const TactileSequence& seq, int n = 9, int step = 1);

/// The frames named by sequence_frame_indices, blank-padded.
std::vector<RasterD> select_sequence_frames(const TactileSequence& seq, int n = 9, int step = 1);

struct FilterBankConfig {
  std::vector<double> scales{1.0, 2.0, 4.0, 8.0};
  int orientations = 6;
  /// Contact masks beyond the base one keep pixels at or above these
  /// fractions of the masked maximum.
  std::vector<double> mask_fractions{0.25, 0.5, 0.75};
  /// Energy statistics are reported as log1p(stat / energy_floor).
  double energy_floor = 1e-5;

  int energy_stat_count() const;
  int dims() const;
  /// FNV-1a over the canonical configuration text.
  std::uint64_t hash() const;
};

inline constexpr int kGlobalFeatureCount = 16;

using FeatureVector = std::vector<double>;

/// Steered second-derivative-of-Gaussian responses of `frame` (zero padding,
/// scale-normalized by sigma^2), indexed [scale][orientation] with
/// orientations k * pi / n.
std::vector<std::vector<RasterD>> filter_responses(const RasterD& frame,
                                                   const FilterBankConfig& bank = {});

/// Mean and standard deviation of squared responses over each contact mask,
/// laid out [scale][orientation][mask][mean, std]. All zero for an empty mask.
std::vector<double> energy_statistics(const RasterD& frame, const FilterBankConfig& bank = {});

/// Bound on |change| of any energy statistic per mm of pixel perturbation,
/// for perturbations that keep every mask unchanged and frames within the gel.
double energy_lipschitz_bound(const FilterBankConfig& bank = {}, double delta_mm = 0.01);

/// Log-scaled energy statistics followed by 16 contact-shape scalars. The
/// zero vector iff the frame has no contact pixels.
FeatureVector extract_features(const RasterD& frame, const FilterBankConfig& bank = {});
FeatureVector extract_features(const TactileFrame& frame, const FilterBankConfig& bank = {});

/// Shifts every pixel by `offset_mm`, clamped to the gel range.
RasterD offset_frame(const RasterD& frame, double offset_mm);

/// Concatenated per-dimension mean and max over the frames' features.
FeatureVector pool_features(const std::vector<FeatureVector>& per_frame);

/// Classifier input for a sequence: the max-contact frame's features when
/// `frames` is 1, otherwise pooled features of the selected frames. Every
/// frame is shifted by `offset_mm` first.
FeatureVector sequence_features(const TactileSequence& seq, int frames,
                                const FilterBankConfig& bank = {}, double offset_mm = 0.0);

/// Feature container: magic "FVEC", u32 LE length, u64 LE bank hash, then
/// length f32 LE values.
void write_feature_file(const std::filesystem::path& path, const FeatureVector& features,
                        std::uint64_t bank_hash);
FeatureVector read_feature_file(const std::filesystem::path& path, std::uint64_t expected_hash);

}  // namespace clothsense
