#include "clothsense/explorer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include "clothsense/error.hpp"
#include "clothsense/formats.hpp"
#include "clothsense/tactile.hpp"

namespace clothsense {

ModelPredictor::ModelPredictor(const MultiHeadModel& model, int frames, FilterBankConfig bank)
    : model_(model), frames_(frames), bank_(std::move(bank)) {
  if (frames_ != 1 && frames_ < 2) throw ShapeError("frames must be 1 or at least 2");
}

PropertyPrediction ModelPredictor::predict(const TactileSequence& seq) const {
  return model_.predict(sequence_features(seq, frames_, bank_));
}

void ExplorePolicy::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ShapeError("threshold must be in (0, 1)");
  if (max_retries < 1) throw ShapeError("max_retries must be at least 1");
  if (exclusion_radius < 0.0) throw ShapeError("exclusion radius must be non-negative");
}

std::vector<RankedCandidate> rank_candidates(const WorldHeightMap& observed,
                                             const std::vector<GripCandidate>& candidates,
                                             const GripScorer& scorer) {
  std::vector<RankedCandidate> ranked;
  ranked.reserve(candidates.size());
  for (const GripCandidate& c : candidates) {
    ranked.push_back({c, scorer.score(crop_grip_window(observed, c.position.x, c.position.y))});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedCandidate& a, const RankedCandidate& b) { return a.score > b.score; });
  return ranked;
}

std::vector<RankedCandidate> plan_candidates(const DepthImage& depth, const CameraModel& cam,
                                             const GripScorer& scorer, double threshold,
                                             std::uint64_t seed) {
  const WorldHeightMap observed = project_to_world(depth, cam);
  const auto candidates =
      extract_candidates(laplacian_pyramid_responses(observed), observed, threshold, seed);
  return rank_candidates(observed, candidates, scorer);
}

ExplorationRecord run_exploration(int item_id, const std::vector<RankedCandidate>& plan,
                                  const ExplorePolicy& policy, const GripExecutor& grip,
                                  const PropertyPredictor& predictor) {
  policy.validate();
  if (plan.empty()) throw UnexplorableItemError("no grip candidates for item " + std::to_string(item_id));
  ExplorationRecord rec;
  rec.item_id = item_id;
  std::vector<Point3> tried;
  const double r2 = policy.exclusion_radius * policy.exclusion_radius;
  for (const RankedCandidate& rc : plan) {
    if (rec.trial_count() >= policy.max_retries) break;
    const Point3& p = rc.candidate.position;
    const bool near_tried = std::any_of(tried.begin(), tried.end(), [&](const Point3& q) {
      return (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) < r2;
    });
    if (near_tried) continue;
    tried.push_back(p);

    const TactileSequence seq = grip(rc.candidate, rec.trial_count());
    Trial t;
    t.candidate = rc;
    t.valid_contact = detect_contact(seq);
    t.sim_valid = seq.valid_contact;
    t.prediction = predictor.predict(seq);
    t.confidence = confidence(t.prediction, policy.confidence_head);
    rec.trials.push_back(std::move(t));
    const Trial& last = rec.trials.back();
    if (last.valid_contact && last.confidence >= policy.threshold) {
      rec.confident = true;
      break;
    }
  }

  if (rec.confident) {
    rec.final_trial = rec.trial_count() - 1;
  } else {
    // Highest confidence among trials with contact, else among all; earliest wins ties.
    const bool any_valid = std::any_of(rec.trials.begin(), rec.trials.end(),
                                       [](const Trial& t) { return t.valid_contact; });
    double best = -1.0;
    for (int i = 0; i < rec.trial_count(); ++i) {
      const Trial& t = rec.trials[static_cast<std::size_t>(i)];
      if (any_valid && !t.valid_contact) continue;
      if (t.confidence > best) {
        best = t.confidence;
        rec.final_trial = i;
      }
    }
  }
  rec.final_prediction = rec.trials[static_cast<std::size_t>(rec.final_trial)].prediction;
  rec.easy = rec.confident && rec.trial_count() <= 2;
  return rec;
}

ExplorationRecord explore_item(const ClothItem& item, const ExplorePolicy& policy,
                               const GripScorer& scorer, const PropertyPredictor& predictor,
                               std::uint64_t seed) {
  policy.validate();
  const Scene scene = make_scene(item, derive_seed({seed, 0x7363656eull}));
  const auto candidates = extract_candidates(laplacian_pyramid_responses(scene.observed),
                                             scene.observed, policy.candidate_threshold,
                                             derive_seed({seed, 1}));
  const auto plan = rank_candidates(scene.observed, candidates, scorer);
  Rng rng(derive_seed({seed, 2}));
  const int sensor = uniform_int(rng, 0, kNumSensors - 1);
  GripExecutor grip = [&](const GripCandidate& cand, int trial) {
    Rng trial_rng(derive_seed({seed, 3, static_cast<std::uint64_t>(trial)}));
    const double misalign = grip_misalignment(scene.truth, cand, trial_rng);
    TactileSequence seq = simulate_grip(scene.placed, scene.truth, cand, misalign,
                                        derive_seed({seed, 4, static_cast<std::uint64_t>(trial)}),
                                        sensor);
    round_to_float(seq);
    return seq;
  };
  return run_exploration(item.item_id, plan, policy, grip, predictor);
}

PolicyReport evaluate_policy(const std::vector<ClothItem>& items, const GripScorer& scorer,
                             const PropertyPredictor& predictor, const ExplorePolicy& policy,
                             int grips_per_item, std::uint64_t seed) {
  policy.validate();
  return evaluate_policy(
      items,
      [&](const ClothItem& item, std::uint64_t episode_seed) {
        return explore_item(item, policy, scorer, predictor, episode_seed);
      },
      grips_per_item, seed);
}

PolicyReport evaluate_policy(const std::vector<ClothItem>& items, const EpisodeRunner& run,
                             int grips_per_item, std::uint64_t seed) {
  if (grips_per_item < 1) throw ShapeError("grips_per_item must be positive");
  constexpr int kArrangementAttempts = 8;
  PolicyReport report;
  std::array<double, kNumProperties> without{};
  std::array<double, kNumProperties> with{};
  std::array<double, kNumProperties> easy{};
  double trials = 0.0;

  std::vector<const ClothItem*> sorted;
  for (const ClothItem& it : items) sorted.push_back(&it);
  std::sort(sorted.begin(), sorted.end(),
            [](const ClothItem* a, const ClothItem* b) { return a->item_id < b->item_id; });

  for (const ClothItem* item : sorted) {
    std::array<double, kNumProperties> item_with{};
    int item_easy_episodes = 0;
    for (int e = 0; e < grips_per_item; ++e) {
      std::optional<ExplorationRecord> rec;
      std::uint64_t episode_seed = 0;
      for (int attempt = 0; attempt < kArrangementAttempts && !rec; ++attempt) {
        episode_seed = derive_seed({seed, static_cast<std::uint64_t>(item->item_id),
                                    static_cast<std::uint64_t>(e), static_cast<std::uint64_t>(attempt)});
        try {
          rec = run(*item, episode_seed);
        } catch (const UnexplorableItemError&) {
          spdlog::debug("item {} episode {}: no candidates, re-arranging", item->item_id, e);
        }
      }
      if (!rec) throw UnexplorableItemError("item " + std::to_string(item->item_id) + " never offered a candidate");

      const PropertyLabels first = rec->trials.front().prediction.labels();
      const PropertyLabels final = rec->final_prediction.labels();
      for (std::size_t k = 0; k < kNumProperties; ++k) {
        without[k] += first.value[k] == item->labels.value[k];
        item_with[k] += final.value[k] == item->labels.value[k];
      }
      trials += rec->trial_count();
      item_easy_episodes += rec->easy;
      report.easy_episodes += rec->easy;
      ++report.episodes;
      report.records.push_back(std::move(*rec));
      report.episode_seeds.push_back(episode_seed);
    }
    // An item is easy when most of its episodes were.
    const bool item_easy = 2 * item_easy_episodes > grips_per_item;
    report.easy_items += item_easy;
    ++report.items;
    for (std::size_t k = 0; k < kNumProperties; ++k) {
      with[k] += item_with[k];
      if (item_easy) easy[k] += item_with[k];
    }
  }

  const double n = report.episodes;
  const double easy_n = static_cast<double>(report.easy_items) * grips_per_item;
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    HeadMetrics& h = report.heads[k];
    h.chance = kPropertyTable[k].chance;
    h.without_retrial = without[k] / n;
    h.with_retrial = with[k] / n;
    h.easy = easy_n > 0 ? easy[k] / easy_n : 0.0;
  }
  report.mean_trials = trials / n;
  report.easy_fraction = static_cast<double>(report.easy_items) / report.items;
  return report;
}

std::string policy_csv(const PolicyReport& report) {
  std::string out = "property,chance,without_retrial,with_retrial,easy\n";
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    const HeadMetrics& h = report.heads[k];
    out += fmt::format("{},{:.2f},{:.4f},{:.4f},{:.4f}\n", kPropertyTable[k].name, h.chance,
                       h.without_retrial, h.with_retrial, h.easy);
  }
  return out;
}

std::string policy_summary_csv(const PolicyReport& report) {
  return fmt::format(
      "metric,value\nitems,{}\nepisodes,{}\nmean_trials,{:.4f}\neasy_episodes,{}\neasy_items,{}\n"
      "easy_fraction,{:.4f}\n",
      report.items, report.episodes, report.mean_trials, report.easy_episodes, report.easy_items,
      report.easy_fraction);
}

std::string episodes_jsonl(const PolicyReport& report, const std::vector<ClothItem>& items) {
  using nlohmann::json;
  std::map<int, const ClothItem*> by_id;
  for (const ClothItem& it : items) by_id[it.item_id] = &it;
  auto labels_json = [](const PropertyLabels& l) {
    json j = json::object();
    for (std::size_t k = 0; k < kNumProperties; ++k) j[std::string(kPropertyTable[k].name)] = l.value[k];
    return j;
  };
  std::string out;
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    const ExplorationRecord& r = report.records[i];
    json trials = json::array();
    for (const Trial& t : r.trials) {
      const GripCandidate& c = t.candidate.candidate;
      trials.push_back({{"x", c.position.x}, {"y", c.position.y}, {"z", c.position.z},
                        {"direction", c.direction}, {"level", c.pyramid_level},
                        {"score", t.candidate.score}, {"valid_contact", t.valid_contact},
                        {"sim_valid", t.sim_valid}, {"confidence", t.confidence},
                        {"predicted", labels_json(t.prediction.labels())}});
    }
    json j = {{"item_id", r.item_id},
              {"seed", report.episode_seeds[i]},
              {"trial_count", r.trial_count()},
              {"confident", r.confident},
              {"easy", r.easy},
              {"final_trial", r.final_trial},
              {"final", labels_json(r.final_prediction.labels())},
              {"trials", trials}};
    if (auto it = by_id.find(r.item_id); it != by_id.end()) j["truth"] = labels_json(it->second->labels);
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace clothsense
