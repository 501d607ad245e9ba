#include "clothsense/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

#include "clothsense/error.hpp"
#include "clothsense/random.hpp"

namespace clothsense {

IterationSplit valid_iteration_split(const std::vector<Collected>& data, const SplitSpec& split) {
  std::vector<IterationKey> keys;
  for (const Collected& c : data) {
    if (c.record.valid()) keys.push_back({c.record.item_id, c.record.iteration});
  }
  return split_iterations(split, std::move(keys));
}

FeatureSets build_feature_sets(const std::vector<Collected>& data, const std::vector<ClothItem>& items,
                               const SplitSpec& split, const IterationSplit& iterations, int frames,
                               const FilterBankConfig& bank, double augment_offset_mm) {
  std::map<int, const ClothItem*> by_id;
  for (const ClothItem& it : items) by_id[it.item_id] = &it;
  const std::set<IterationKey> train(iterations.train.begin(), iterations.train.end());
  const std::set<IterationKey> val(iterations.val.begin(), iterations.val.end());

  FeatureSets sets;
  for (const Collected& c : data) {
    if (!c.record.valid()) continue;
    const auto item = by_id.find(c.record.item_id);
    if (item == by_id.end()) throw Error("record for unknown item " + std::to_string(c.record.item_id));
    const IterationKey key{c.record.item_id, c.record.iteration};
    TrainingSample s;
    s.labels = item->second->labels;
    if (train.count(key)) {
      for (double o : kAugmentGrid) {
        s.variants.push_back(sequence_features(c.sequence, frames, bank, o * augment_offset_mm));
      }
      sets.train.push_back(std::move(s));
    } else if (val.count(key)) {
      s.variants.push_back(sequence_features(c.sequence, frames, bank));
      sets.val_x.push_back(s.variants.front());
      sets.val_y.push_back(s.labels);
      sets.val.push_back(std::move(s));
    } else if (split.is_test(key.item_id)) {
      sets.test_x.push_back(sequence_features(c.sequence, frames, bank));
      sets.test_y.push_back(s.labels);
    }
  }
  return sets;
}

GripSet balanced_grip_set(const std::vector<Collected>& data, const std::vector<int>& item_ids,
                          std::uint64_t seed) {
  const std::set<int> wanted(item_ids.begin(), item_ids.end());
  std::vector<const Collected*> pos;
  std::vector<const Collected*> neg;
  for (const Collected& c : data) {
    if (!wanted.count(c.record.item_id)) continue;
    (c.record.valid() ? pos : neg).push_back(&c);
  }
  Rng rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  const std::size_t n = std::min(pos.size(), neg.size());
  pos.resize(n);
  neg.resize(n);
  std::vector<const Collected*> all;
  for (std::size_t i = 0; i < n; ++i) {
    all.push_back(pos[i]);
    all.push_back(neg[i]);
  }
  GripSet set;
  for (const Collected* c : all) {
    set.features.push_back(grip_crop_features(c->crop));
    set.success.push_back(c->record.valid());
  }
  return set;
}

double grip_accuracy(const GripModel& model, const GripSet& set) {
  if (set.features.empty()) throw EmptyInputError("empty grip set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.features.size(); ++i) {
    correct += (model.score_features(set.features[i]) >= 0.5) == set.success[i];
  }
  return static_cast<double>(correct) / static_cast<double>(set.features.size());
}

PropertyEval evaluate_property_model(const MultiHeadModel& model, const FeatureSets& sets) {
  return {head_accuracy(model, sets.val_x, sets.val_y), head_accuracy(model, sets.test_x, sets.test_y)};
}

std::string eval_csv(const PropertyEval& image, const PropertyEval& video) {
  std::string out = "property,chance,image_seen,video_seen,image_unseen,video_unseen\n";
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    out += fmt::format("{},{:.2f},{:.4f},{:.4f},{:.4f},{:.4f}\n", kPropertyTable[k].name,
                       kPropertyTable[k].chance, image.seen[k], video.seen[k], image.unseen[k],
                       video.unseen[k]);
  }
  return out;
}

}  // namespace clothsense
