#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clothsense/clothsim.hpp"
#include "clothsense/geometry.hpp"
#include "clothsense/labels.hpp"

namespace clothsense {

/// Desk-scale corpus defaults.
inline constexpr int kDefaultItems = 60;
inline constexpr int kDefaultGrips = 10;
inline constexpr double kDefaultTestRatio = 0.2;
inline constexpr double kValidationRatio = 0.15;
inline constexpr double kDefaultThreshold = 0.003;

/// Draws a plausible label set for an item of the given textile type:
/// physical labels follow the textile's prototype with occasional
/// perturbation, season and washing method follow care rules with noise.
PropertyLabels generate_labels(int textile, Rng& rng);

/// `n_items` items, textile types balanced across the corpus.
std::vector<ClothItem> generate_corpus(int n_items, std::uint64_t seed);

/// One grip of the collection loop.
struct GripRecord {
  int item_id = 0;
  int iteration = 0;
  std::uint64_t arrangement_seed = 0;
  GripCandidate candidate;
  double misalign_deg = 0.0;
  int sensor_id = 0;
  int frame_count = 0;
  int max_contact_frame = 0;
  double contact_quality = 0.0;
  double prominence_mm = 0.0;
  bool sim_valid = false;  // simulator ground truth
  bool detected = false;   // detect_contact on the recorded frames
  std::string tactile_path;  // relative to the corpus root
  std::string depth_path;

  bool valid() const { return sim_valid && detected; }
  bool operator==(const GripRecord&) const = default;
};

/// A collected grip with its data held in memory.
struct Collected {
  GripRecord record;
  TactileSequence sequence;
  RasterD crop;  // observed height around the grip point, meters
};

struct CollectConfig {
  int grips_per_item = kDefaultGrips;
  double threshold = kDefaultThreshold;
  double depth_noise = kDefaultDepthNoise;
  double execution_noise_deg = kGripExecutionNoiseDeg;
  std::uint64_t seed = 0;
  /// Re-arrangements tried when a scene yields no candidate.
  int max_arrangement_attempts = 8;
};

/// Grips a random candidate of a fresh arrangement, `grips_per_item` times
/// per item. Output is ordered by (item_id, iteration); values are rounded
/// to the precision of the file formats.
std::vector<Collected> collect(const std::vector<ClothItem>& items, const CollectConfig& config);
Collected collect_grip(const ClothItem& item, int iteration, const CollectConfig& config);

/// Keeps records whose grip made genuine contact.
std::vector<GripRecord> filter_valid(const std::vector<GripRecord>& records);
std::vector<Collected> filter_valid(const std::vector<Collected>& records);

struct IterationKey {
  int item_id = 0;
  int iteration = 0;
  auto operator<=>(const IterationKey&) const = default;
};

struct SplitSpec {
  std::vector<int> test_items;
  std::vector<int> pool_items;
  double test_ratio = kDefaultTestRatio;
  double val_ratio = kValidationRatio;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  bool is_test(int item_id) const;
  bool operator==(const SplitSpec& o) const {
    return test_items == o.test_items && pool_items == o.pool_items &&
           test_ratio == o.test_ratio && val_ratio == o.val_ratio && seed == o.seed;
  }
};

/// Item-level split. Test items are picked greedily to cover every class of
/// every head, washing method first, without taking the last pool item of a
/// class; falls back to a random pick (with a warning) for tiny corpora.
SplitSpec build_split(const std::vector<ClothItem>& items, double ratio_test, std::uint64_t seed);

/// Exactly round(val_ratio * n) of the pool iterations go to validation.
struct IterationSplit {
  std::vector<IterationKey> train;
  std::vector<IterationKey> val;
};
IterationSplit split_iterations(const SplitSpec& split, std::vector<IterationKey> keys);

/// Throws Error if any train/val key belongs to a test item.
void check_no_leakage(const SplitSpec& split, const IterationSplit& iterations);

// Corpus directory I/O.
void save_items(const std::filesystem::path& path, const std::vector<ClothItem>& items);
std::vector<ClothItem> load_items(const std::filesystem::path& path);
void save_records(const std::filesystem::path& path, const std::vector<GripRecord>& records);
std::vector<GripRecord> load_records(const std::filesystem::path& path);
void save_split(const std::filesystem::path& path, const SplitSpec& split);
SplitSpec load_split(const std::filesystem::path& path);

/// Writes records.jsonl plus every tactile and depth file under `root`.
void save_collection(const std::filesystem::path& root, const std::vector<Collected>& data);
std::vector<Collected> load_collection(const std::filesystem::path& root);

std::string labels_to_string(const PropertyLabels& labels);

}  // namespace clothsense
