#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "clothsense/classifier.hpp"
#include "clothsense/clothsim.hpp"
#include "clothsense/dataset.hpp"
#include "clothsense/geometry.hpp"

namespace clothsense {

/// Scores how likely a grip at the center of a depth crop yields contact.
class GripScorer {
 public:
  virtual ~GripScorer() = default;
  virtual double score(const RasterD& crop) const = 0;
};

/// Turns a recorded grip into per-property class distributions.
class PropertyPredictor {
 public:
  virtual ~PropertyPredictor() = default;
  virtual PropertyPrediction predict(const TactileSequence& seq) const = 0;
};

class GripModelScorer : public GripScorer {
 public:
  explicit GripModelScorer(const GripModel& model) : model_(model) {}
  double score(const RasterD& crop) const override { return model_.score(crop); }

 private:
  const GripModel& model_;
};

class ModelPredictor : public PropertyPredictor {
 public:
  ModelPredictor(const MultiHeadModel& model, int frames, FilterBankConfig bank = {});
  PropertyPrediction predict(const TactileSequence& seq) const override;

 private:
  const MultiHeadModel& model_;
  int frames_;
  FilterBankConfig bank_;
};

struct ExplorePolicy {
  Property confidence_head = Property::kWashMethod;
  double threshold = 0.75;  // stop once confidence >= threshold
  int max_retries = 5;      // total grips per episode
  double exclusion_radius = 0.02;
  double candidate_threshold = kDefaultThreshold;

  /// Throws ShapeError unless threshold is in (0, 1) and max_retries >= 1.
  void validate() const;
};

struct RankedCandidate {
  GripCandidate candidate;
  double score = 0.0;
};

/// Candidates of the observed scene ordered by descending grip score; equal
/// scores keep extraction order.
std::vector<RankedCandidate> plan_candidates(const DepthImage& depth, const CameraModel& cam,
                                             const GripScorer& scorer,
                                             double threshold = kDefaultThreshold,
                                             std::uint64_t seed = 0);
/// Same ranking for an already projected height map.
std::vector<RankedCandidate> rank_candidates(const WorldHeightMap& observed,
                                             const std::vector<GripCandidate>& candidates,
                                             const GripScorer& scorer);

struct Trial {
  RankedCandidate candidate;
  bool valid_contact = false;  // detect_contact on the recorded grip
  bool sim_valid = false;
  PropertyPrediction prediction;
  double confidence = 0.0;
};

struct ExplorationRecord {
  int item_id = 0;
  std::vector<Trial> trials;
  PropertyPrediction final_prediction;
  int final_trial = 0;
  bool confident = false;
  bool easy = false;  // confident within two grips
  int trial_count() const { return static_cast<int>(trials.size()); }
};

using GripExecutor = std::function<TactileSequence(const GripCandidate&, int trial)>;

/// The re-trial state machine over a ranked plan. Every trial is predicted;
/// only trials with detected contact can stop the episode or supply the
/// final answer (unless none has contact).
ExplorationRecord run_exploration(int item_id, const std::vector<RankedCandidate>& plan,
                                  const ExplorePolicy& policy, const GripExecutor& grip,
                                  const PropertyPredictor& predictor);

/// One episode on a fresh arrangement of `item` derived from `seed`. Throws
/// UnexplorableItemError when the scene has no candidates.
ExplorationRecord explore_item(const ClothItem& item, const ExplorePolicy& policy,
                               const GripScorer& scorer, const PropertyPredictor& predictor,
                               std::uint64_t seed);

struct HeadMetrics {
  double chance = 0.0;
  double without_retrial = 0.0;
  double with_retrial = 0.0;
  double easy = 0.0;
};

struct PolicyReport {
  std::array<HeadMetrics, kNumProperties> heads{};
  double mean_trials = 0.0;
  double easy_fraction = 0.0;  // of items
  int items = 0;
  int episodes = 0;
  int easy_episodes = 0;
  int easy_items = 0;  // items with a strict majority of easy episodes
  std::vector<ExplorationRecord> records;
  std::vector<std::uint64_t> episode_seeds;
};

using EpisodeRunner = std::function<ExplorationRecord(const ClothItem&, std::uint64_t seed)>;

/// Runs every item `grips_per_item` times in item_id order. The easy column
/// scores all episodes of easy items. An episode that
/// throws UnexplorableItemError is retried on a new arrangement seed (up to 8).
PolicyReport evaluate_policy(const std::vector<ClothItem>& items, const EpisodeRunner& run,
                             int grips_per_item = 5, std::uint64_t seed = 0);
/// Episodes are explore_item calls against the simulator.
PolicyReport evaluate_policy(const std::vector<ClothItem>& items, const GripScorer& scorer,
                             const PropertyPredictor& predictor, const ExplorePolicy& policy,
                             int grips_per_item = 5, std::uint64_t seed = 0);

/// Rows = properties; columns chance, without_retrial, with_retrial, easy.
std::string policy_csv(const PolicyReport& report);
std::string policy_summary_csv(const PolicyReport& report);
std::string episodes_jsonl(const PolicyReport& report, const std::vector<ClothItem>& items);

}  // namespace clothsense
