#pragma once

#include <random>
#include <vector>

#include "clothsense/explorer.hpp"

namespace testing {

using namespace clothsense;

/// Frames that detect_contact accepts (touch) or rejects.
inline TactileSequence stub_sequence(bool touch, int tag) {
  TactileSequence seq;
  seq.frames.push_back({RasterD(kTactileWidth, kTactileHeight, touch ? 0.3 : 0.0), 0.0, 0});
  seq.valid_contact = touch;
  seq.sensor_id = tag;
  return seq;
}

/// Prediction whose wash head puts `wash_confidence` on `wash_class`;
/// every other head is one-hot on `others`.
inline PropertyPrediction stub_prediction(double wash_confidence, int wash_class = 0,
                                          const PropertyLabels& others = {}) {
  PropertyPrediction p;
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    const auto classes = static_cast<std::size_t>(kPropertyTable[k].classes);
    p.probabilities[k].assign(classes, 0.0);
    p.probabilities[k][static_cast<std::size_t>(others.value[k])] = 1.0;
  }
  auto& wash = p.probabilities[index(Property::kWashMethod)];
  std::fill(wash.begin(), wash.end(), (1.0 - wash_confidence) / 5.0);
  wash[static_cast<std::size_t>(wash_class)] = wash_confidence;
  return p;
}

/// Replays a fixed list of predictions; the executor stores the trial index in
/// the sequence's sensor id.
class ScriptedPredictor : public PropertyPredictor {
 public:
  explicit ScriptedPredictor(std::vector<double> confidences) : confidences_(std::move(confidences)) {}
  PropertyPrediction predict(const TactileSequence& seq) const override {
    return stub_prediction(confidences_.at(static_cast<std::size_t>(seq.sensor_id)));
  }

 private:
  std::vector<double> confidences_;
};

inline GripExecutor scripted_contacts(std::vector<bool> touches) {
  return [touches = std::move(touches)](const GripCandidate&, int trial) {
    return stub_sequence(touches.at(static_cast<std::size_t>(trial)), trial);
  };
}

/// `n` candidates 5 cm apart along x, scores descending.
inline std::vector<RankedCandidate> spaced_plan(int n) {
  std::vector<RankedCandidate> plan;
  for (int i = 0; i < n; ++i) {
    RankedCandidate rc;
    rc.candidate.position = {0.05 * i, 0.0, 0.01};
    rc.candidate.col = i;
    rc.score = 1.0 - 0.01 * i;
    plan.push_back(rc);
  }
  return plan;
}

/// One scripted episode and the trace it must produce.
struct ScriptedCase {
  const char* name;
  std::vector<double> confidences;
  std::vector<bool> touches;
  int max_retries;
  int expected_trials;
  bool expected_confident;
  int expected_final;
  bool expected_easy;
};

inline std::vector<ScriptedCase> scripted_cases() {
  return {
      {"first grip confident", {0.9}, {true}, 5, 1, true, 0, true},
      {"rising confidence stops at the third grip", {0.4, 0.6, 0.8}, {true, true, true}, 5, 3, true, 2, false},
      {"exactly the threshold counts as confident", {0.75}, {true}, 5, 1, true, 0, true},
      {"just below the threshold retries", {0.7499, 0.75}, {true, true}, 5, 2, true, 1, true},
      {"budget exhausted keeps the most confident grip", {0.5, 0.7, 0.3, 0.6, 0.2}, {true, true, true, true, true}, 5, 5, false, 1, false},
      {"a confident grip without contact does not stop", {0.95, 0.8}, {false, true}, 5, 2, true, 1, true},
      {"failed grips never supply the answer when one succeeds", {0.95, 0.3, 0.99}, {false, true, false}, 3, 3, false, 1, false},
      {"no contact at all falls back to the most confident grip", {0.4, 0.9}, {false, false}, 2, 2, false, 1, false},
      {"single-grip budget", {0.3, 0.9}, {true, true}, 1, 1, false, 0, false},
      {"earliest grip wins confidence ties", {0.6, 0.6, 0.6}, {true, true, true}, 3, 3, false, 0, false},
  };
}

}  // namespace testing
