#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "clothsense/classifier.hpp"
#include "clothsense/dataset.hpp"
#include "clothsense/tactile.hpp"

namespace clothsense {

/// Features for one frame count, split by the item/iteration protocol.
struct FeatureSets {
  std::vector<TrainingSample> train;  // augmented
  std::vector<TrainingSample> val;
  std::vector<FeatureVector> val_x;
  std::vector<PropertyLabels> val_y;
  std::vector<FeatureVector> test_x;
  std::vector<PropertyLabels> test_y;
};

/// Uses only valid grips. Pool iterations in `iterations.val` form the
/// seen-validation set; test items form the unseen set.
FeatureSets build_feature_sets(const std::vector<Collected>& data, const std::vector<ClothItem>& items,
                               const SplitSpec& split, const IterationSplit& iterations, int frames,
                               const FilterBankConfig& bank = {}, double augment_offset_mm = 0.05);

/// Iteration split of the valid pool grips.
IterationSplit valid_iteration_split(const std::vector<Collected>& data, const SplitSpec& split);

struct GripSet {
  std::vector<FeatureVector> features;
  std::vector<bool> success;
};

/// Crop features of grips on the selected items, subsampled (seeded) so both
/// outcomes are equally frequent.
GripSet balanced_grip_set(const std::vector<Collected>& data, const std::vector<int>& item_ids,
                          std::uint64_t seed);
double grip_accuracy(const GripModel& model, const GripSet& set);

struct PropertyEval {
  std::array<double, kNumProperties> seen{};
  std::array<double, kNumProperties> unseen{};
};
PropertyEval evaluate_property_model(const MultiHeadModel& model, const FeatureSets& sets);

/// Rows = properties; columns chance, image_seen, video_seen, image_unseen, video_unseen.
std::string eval_csv(const PropertyEval& image, const PropertyEval& video);

}  // namespace clothsense
