#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "clothsense/labels.hpp"
#include "clothsense/raster.hpp"
#include "clothsense/tactile.hpp"

namespace clothsense {

/// Per-head class distributions, argmax and confidence.
struct PropertyPrediction {
  std::array<std::vector<double>, kNumProperties> probabilities;

  int label(Property p) const;
  PropertyLabels labels() const;
};

/// Max probability of the head; in (0, 1] for any valid distribution.
double confidence(const PropertyPrediction& pred, Property head);

struct TrainConfig {
  double learning_rate = 0.05;
  int batch_size = 32;
  int epochs = 200;
  double weight_decay = 1e-4;
  int hidden = 128;
  std::uint64_t seed = 1;
  /// Scale each sample's per-head loss by the inverse frequency of its class.
  bool class_weighting = true;
  /// Relative weight of each head in the summed loss.
  std::array<double, kNumProperties> head_weights{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  /// Uniform deformation offset range for augmentation, mm.
  double augment_offset_mm = 0.05;
};

/// Offsets at which augmented copies of each sample are precomputed; an
/// epoch's random offset interpolates linearly between neighbours.
inline constexpr std::array<double, 5> kAugmentGrid{-1.0, -0.5, 0.0, 0.5, 1.0};

struct TrainingSample {
  /// Features at each kAugmentGrid offset (times augment_offset_mm), or a
  /// single entry when the sample is not augmented.
  std::vector<FeatureVector> variants;
  PropertyLabels labels;
  const FeatureVector& clean() const {
    return variants.size() == kAugmentGrid.size() ? variants[2] : variants.front();
  }
};

/// Standardize -> tanh hidden layer -> 11 softmax heads.
class MultiHeadModel {
 public:
  MultiHeadModel() = default;
  MultiHeadModel(int input_dims, int hidden, std::uint64_t bank_hash);

  int input_dims() const { return static_cast<int>(input_mean.size()); }
  int hidden() const { return static_cast<int>(b1.size()); }

  PropertyPrediction predict(const FeatureVector& features) const;

  /// Batch mean of the head-weighted sum of class-weighted cross-entropies,
  /// plus half the weight decay times the squared weight norm.
  double loss(const std::vector<const FeatureVector*>& x, const std::vector<PropertyLabels>& y,
              const std::vector<std::array<double, kNumProperties>>& sample_weights,
              const TrainConfig& config) const;

  /// Flattened view of every trainable parameter, in serialization order.
  std::vector<double> parameters() const;
  void set_parameters(const std::vector<double>& values);
  std::vector<double> gradient(const std::vector<const FeatureVector*>& x,
                               const std::vector<PropertyLabels>& y,
                               const std::vector<std::array<double, kNumProperties>>& sample_weights,
                               const TrainConfig& config) const;

  /// Rounds every parameter to float precision so saved files reload exactly.
  void round_to_float();

  void save(const std::filesystem::path& path) const;
  static MultiHeadModel load(const std::filesystem::path& path, std::uint64_t expected_hash);
  bool operator==(const MultiHeadModel&) const;

  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;  // multiplies (x - mean)
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  std::array<Eigen::MatrixXd, kNumProperties> head_w;
  std::array<Eigen::VectorXd, kNumProperties> head_b;
  /// Classes seen in training; others get probability 0.
  std::array<std::vector<unsigned char>, kNumProperties> present;
  std::uint64_t bank_hash = 0;

 private:
  Eigen::VectorXd standardize(const FeatureVector& x) const;
  void check_dims(const FeatureVector& x) const;
};

struct TrainReport {
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
  std::vector<double> train_loss;  // index 0 is before the first epoch
  std::vector<double> val_accuracy;
  std::vector<std::string> warnings;
};

/// Mini-batch SGD on the summed per-head cross-entropy, returning the
/// parameters of the epoch with the best mean validation accuracy (the last
/// epoch when `val` is empty). Throws TrainingError if the loss diverges.
MultiHeadModel train_property_model(const std::vector<TrainingSample>& train,
                                    const std::vector<TrainingSample>& val,
                                    const TrainConfig& config, std::uint64_t bank_hash,
                                    TrainReport* report = nullptr);

/// Per-sample, per-head loss weights used by training.
std::vector<std::array<double, kNumProperties>> class_weights(
    const std::vector<PropertyLabels>& labels, bool inverse_frequency);

/// Fraction of samples whose argmax matches, per head.
std::array<double, kNumProperties> head_accuracy(const MultiHeadModel& model,
                                                 const std::vector<FeatureVector>& x,
                                                 const std::vector<PropertyLabels>& y);

/// Scalar summary of a depth crop around a grip point.
FeatureVector grip_crop_features(const RasterD& crop);
int grip_feature_dims();

struct GripTrainConfig {
  double learning_rate = 0.05;
  int batch_size = 32;
  int epochs = 200;
  double weight_decay = 1e-4;
  std::uint64_t seed = 1;
};

/// Logistic regression over standardized crop features.
class GripModel {
 public:
  GripModel() = default;
  explicit GripModel(int input_dims);

  int input_dims() const { return static_cast<int>(weights.size()); }
  double score_features(const FeatureVector& f) const;
  /// Probability that gripping at the crop's center gives valid contact.
  double score(const RasterD& crop) const;

  double loss(const std::vector<const FeatureVector*>& x, const std::vector<int>& y,
              double weight_decay) const;
  std::vector<double> parameters() const;
  void set_parameters(const std::vector<double>& values);
  std::vector<double> gradient(const std::vector<const FeatureVector*>& x,
                               const std::vector<int>& y, double weight_decay) const;
  void round_to_float();

  void save(const std::filesystem::path& path) const;
  static GripModel load(const std::filesystem::path& path);
  bool operator==(const GripModel&) const;

  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;
  Eigen::VectorXd weights;
  double bias = 0.0;
};

/// Throws TrainingError unless both classes are present.
GripModel train_grip_model(const std::vector<RasterD>& crops, const std::vector<bool>& success,
                           const GripTrainConfig& config = {});
GripModel train_grip_model_features(const std::vector<FeatureVector>& features,
                                    const std::vector<bool>& success,
                                    const GripTrainConfig& config = {});

/// Hash stored in grip model files: a fixed tag for the crop featurizer.
std::uint64_t grip_feature_hash();

}  // namespace clothsense
