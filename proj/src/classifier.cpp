#include "clothsense/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "clothsense/binary_io.hpp"
#include "clothsense/error.hpp"
#include "clothsense/random.hpp"

namespace clothsense {
namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Gradients {
  Matrix w1;
  Vector b1;
  std::array<Matrix, kNumProperties> head_w;
  std::array<Vector, kNumProperties> head_b;
};

// Column-wise softmax restricted to present classes.
void masked_softmax(Matrix& z, const std::vector<unsigned char>& present) {
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    double peak = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < z.rows(); ++c) {
      if (present[static_cast<std::size_t>(c)]) peak = std::max(peak, z(c, j));
    }
    double sum = 0.0;
    for (Eigen::Index c = 0; c < z.rows(); ++c) {
      const double e = present[static_cast<std::size_t>(c)] ? std::exp(z(c, j) - peak) : 0.0;
      z(c, j) = e;
      sum += e;
    }
    z.col(j) /= sum;
  }
}

Matrix stack_standardized(const MultiHeadModel& m, const std::vector<const FeatureVector*>& x) {
  Matrix s(m.input_dims(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (static_cast<int>(x[j]->size()) != m.input_dims()) {
      throw ShapeError("feature length " + std::to_string(x[j]->size()) + " != model input " +
                       std::to_string(m.input_dims()));
    }
    const Eigen::Map<const Vector> raw(x[j]->data(), m.input_dims());
    s.col(static_cast<Eigen::Index>(j)) = (raw - m.input_mean).cwiseProduct(m.input_scale);
  }
  return s;
}

// Loss of a standardized batch; fills `grad` when given.
double batch_objective(const MultiHeadModel& m, const Matrix& s,
                       const std::vector<PropertyLabels>& y,
                       const std::vector<std::array<double, kNumProperties>>& w,
                       const TrainConfig& config, Gradients* grad) {
  const auto batch = static_cast<double>(s.cols());
  const Matrix h = ((m.w1 * s).colwise() + m.b1).array().tanh().matrix();
  Matrix dh;
  if (grad) dh = Matrix::Zero(h.rows(), h.cols());
  double loss = 0.0;
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    Matrix p = (m.head_w[k] * h).colwise() + m.head_b[k];
    masked_softmax(p, m.present[k]);
    Matrix dz;
    if (grad) dz = p;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      const int label = y[static_cast<std::size_t>(j)].value[k];
      const double scale = config.head_weights[k] * w[static_cast<std::size_t>(j)][k] / batch;
      loss -= scale * std::log(p(label, j));
      if (grad) {
        dz(label, j) -= 1.0;
        dz.col(j) *= scale;
      }
    }
    if (grad) {
      grad->head_w[k] = dz * h.transpose() + config.weight_decay * m.head_w[k];
      grad->head_b[k] = dz.rowwise().sum();
      dh.noalias() += m.head_w[k].transpose() * dz;
    }
  }
  double norm = m.w1.squaredNorm();
  for (const Matrix& hw : m.head_w) norm += hw.squaredNorm();
  loss += 0.5 * config.weight_decay * norm;
  if (grad) {
    const Matrix da = dh.cwiseProduct((1.0 - h.array().square()).matrix());
    grad->w1 = da * s.transpose() + config.weight_decay * m.w1;
    grad->b1 = da.rowwise().sum();
  }
  return loss;
}

template <typename Fn>
void for_each_block(const MultiHeadModel& m, Fn&& fn) {
  fn(m.w1.data(), m.w1.size());
  fn(m.b1.data(), m.b1.size());
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    fn(m.head_w[k].data(), m.head_w[k].size());
    fn(m.head_b[k].data(), m.head_b[k].size());
  }
}

std::vector<double> flatten(const Gradients& g) {
  std::vector<double> out;
  auto add = [&](const double* p, Eigen::Index n) { out.insert(out.end(), p, p + n); };
  add(g.w1.data(), g.w1.size());
  add(g.b1.data(), g.b1.size());
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    add(g.head_w[k].data(), g.head_w[k].size());
    add(g.head_b[k].data(), g.head_b[k].size());
  }
  return out;
}

void apply_step(MultiHeadModel& m, const Gradients& g, double lr) {
  m.w1 -= lr * g.w1;
  m.b1 -= lr * g.b1;
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    m.head_w[k] -= lr * g.head_w[k];
    m.head_b[k] -= lr * g.head_b[k];
  }
}

void write_floats(std::ostream& out, const double* p, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) io::put<float>(out, static_cast<float>(p[i]));
}
void read_floats(std::istream& in, double* p, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) p[i] = io::get<float>(in);
}

// Row-major blob order for matrices.
void write_matrix(std::ostream& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) io::put<float>(out, static_cast<float>(m(r, c)));
  }
}
void read_matrix(std::istream& in, Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = io::get<float>(in);
  }
}

constexpr std::string_view kModelMagic{"TMDL\x01", 5};

std::pair<Vector, Vector> fit_standardizer(const std::vector<const FeatureVector*>& x, int dims) {
  Vector mean = Vector::Zero(dims);
  for (const FeatureVector* f : x) mean += Eigen::Map<const Vector>(f->data(), dims);
  mean /= static_cast<double>(x.size());
  Vector var = Vector::Zero(dims);
  for (const FeatureVector* f : x) {
    var += (Eigen::Map<const Vector>(f->data(), dims) - mean).array().square().matrix();
  }
  var /= static_cast<double>(x.size());
  Vector scale(dims);
  for (int i = 0; i < dims; ++i) scale(i) = var(i) > 1e-20 ? 1.0 / std::sqrt(var(i)) : 0.0;
  return {mean, scale};
}

}  // namespace

int PropertyPrediction::label(Property p) const {
  const auto& v = probabilities[index(p)];
  if (v.empty()) throw ShapeError("empty prediction head");
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

PropertyLabels PropertyPrediction::labels() const {
  PropertyLabels out;
  for (std::size_t k = 0; k < kNumProperties; ++k) out.value[k] = label(static_cast<Property>(k));
  return out;
}

double confidence(const PropertyPrediction& pred, Property head) {
  const auto& v = pred.probabilities[index(head)];
  if (v.empty()) throw ShapeError("empty prediction head");
  return *std::max_element(v.begin(), v.end());
}

MultiHeadModel::MultiHeadModel(int input_dims, int hidden, std::uint64_t hash)
    : input_mean(Vector::Zero(input_dims)),
      input_scale(Vector::Ones(input_dims)),
      w1(Matrix::Zero(hidden, input_dims)),
      b1(Vector::Zero(hidden)),
      bank_hash(hash) {
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    const int classes = kPropertyTable[k].classes;
    head_w[k] = Matrix::Zero(classes, hidden);
    head_b[k] = Vector::Zero(classes);
    present[k].assign(static_cast<std::size_t>(classes), 1);
  }
}

void MultiHeadModel::check_dims(const FeatureVector& x) const {
  if (static_cast<int>(x.size()) != input_dims()) {
    throw ShapeError("feature length " + std::to_string(x.size()) + " != model input " +
                     std::to_string(input_dims()));
  }
}

Vector MultiHeadModel::standardize(const FeatureVector& x) const {
  check_dims(x);
  return (Eigen::Map<const Vector>(x.data(), input_dims()) - input_mean).cwiseProduct(input_scale);
}

PropertyPrediction MultiHeadModel::predict(const FeatureVector& features) const {
  const Vector h = (w1 * standardize(features) + b1).array().tanh().matrix();
  PropertyPrediction out;
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    Matrix z = head_w[k] * h + head_b[k];
    masked_softmax(z, present[k]);
    out.probabilities[k].assign(z.data(), z.data() + z.size());
  }
  return out;
}

double MultiHeadModel::loss(const std::vector<const FeatureVector*>& x,
                            const std::vector<PropertyLabels>& y,
                            const std::vector<std::array<double, kNumProperties>>& sample_weights,
                            const TrainConfig& config) const {
  return batch_objective(*this, stack_standardized(*this, x), y, sample_weights, config, nullptr);
}

std::vector<double> MultiHeadModel::gradient(
    const std::vector<const FeatureVector*>& x, const std::vector<PropertyLabels>& y,
    const std::vector<std::array<double, kNumProperties>>& sample_weights,
    const TrainConfig& config) const {
  Gradients g;
  batch_objective(*this, stack_standardized(*this, x), y, sample_weights, config, &g);
  return flatten(g);
}

std::vector<double> MultiHeadModel::parameters() const {
  std::vector<double> out;
  for_each_block(*this, [&](const double* p, Eigen::Index n) { out.insert(out.end(), p, p + n); });
  return out;
}

void MultiHeadModel::set_parameters(const std::vector<double>& values) {
  std::size_t offset = 0;
  for_each_block(*this, [&](const double* p, Eigen::Index n) {
    if (offset + static_cast<std::size_t>(n) > values.size()) {
      throw ShapeError("parameter vector too short");
    }
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), n, const_cast<double*>(p));
    offset += static_cast<std::size_t>(n);
  });
  if (offset != values.size()) throw ShapeError("parameter vector too long");
}

void MultiHeadModel::round_to_float() {
  auto round = [](auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(m.data()[i]);
  };
  round(input_mean);
  round(input_scale);
  round(w1);
  round(b1);
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    round(head_w[k]);
    round(head_b[k]);
  }
}

bool MultiHeadModel::operator==(const MultiHeadModel& o) const {
  if (bank_hash != o.bank_hash || input_dims() != o.input_dims() || hidden() != o.hidden()) {
    return false;
  }
  if (input_mean != o.input_mean || input_scale != o.input_scale || w1 != o.w1 || b1 != o.b1) {
    return false;
  }
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    if (head_w[k] != o.head_w[k] || head_b[k] != o.head_b[k] || present[k] != o.present[k]) {
      return false;
    }
  }
  return true;
}

void MultiHeadModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  io::put_magic(out, kModelMagic);
  io::put<std::uint64_t>(out, bank_hash);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(input_dims()));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(hidden()));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(kNumProperties));
  for (const auto& p : kPropertyTable) io::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.classes));
  write_floats(out, input_mean.data(), input_mean.size());
  write_floats(out, input_scale.data(), input_scale.size());
  write_matrix(out, w1);
  write_floats(out, b1.data(), b1.size());
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    for (unsigned char c : present[k]) io::put<std::uint8_t>(out, c);
    write_matrix(out, head_w[k]);
    write_floats(out, head_b[k].data(), head_b[k].size());
  }
  if (!out) throw IoError("write failed: " + path.string());
}

MultiHeadModel MultiHeadModel::load(const std::filesystem::path& path,
                                    std::uint64_t expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  io::expect_magic(in, kModelMagic);
  const auto hash = io::get<std::uint64_t>(in);
  if (hash != expected_hash) throw FormatError("model bank hash mismatch: " + path.string());
  const auto dims = io::get<std::uint32_t>(in);
  const auto hidden = io::get<std::uint32_t>(in);
  const auto heads = io::get<std::uint32_t>(in);
  if (heads != kNumProperties || hidden == 0) throw FormatError("not a property model");
  for (const auto& p : kPropertyTable) {
    if (io::get<std::uint32_t>(in) != static_cast<std::uint32_t>(p.classes)) {
      throw FormatError("head dimension mismatch");
    }
  }
  MultiHeadModel m(static_cast<int>(dims), static_cast<int>(hidden), hash);
  read_floats(in, m.input_mean.data(), m.input_mean.size());
  read_floats(in, m.input_scale.data(), m.input_scale.size());
  read_matrix(in, m.w1);
  read_floats(in, m.b1.data(), m.b1.size());
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    for (unsigned char& c : m.present[k]) c = io::get<std::uint8_t>(in);
    read_matrix(in, m.head_w[k]);
    read_floats(in, m.head_b[k].data(), m.head_b[k].size());
  }
  return m;
}

std::vector<std::array<double, kNumProperties>> class_weights(
    const std::vector<PropertyLabels>& labels, bool inverse_frequency) {
  std::vector<std::array<double, kNumProperties>> out(labels.size());
  for (auto& w : out) w.fill(1.0);
  if (!inverse_frequency || labels.empty()) return out;
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    std::vector<double> count(static_cast<std::size_t>(kPropertyTable[k].classes), 0.0);
    for (const PropertyLabels& l : labels) count[static_cast<std::size_t>(l.value[k])] += 1.0;
    const double present = static_cast<double>(
        std::count_if(count.begin(), count.end(), [](double c) { return c > 0.0; }));
    // N / (present classes * class count): averages to 1 over the samples.
    for (std::size_t i = 0; i < labels.size(); ++i) {
      out[i][k] = static_cast<double>(labels.size()) /
                  (present * count[static_cast<std::size_t>(labels[i].value[k])]);
    }
  }
  return out;
}

std::array<double, kNumProperties> head_accuracy(const MultiHeadModel& model,
                                                 const std::vector<FeatureVector>& x,
                                                 const std::vector<PropertyLabels>& y) {
  std::array<double, kNumProperties> acc{};
  if (x.empty()) return acc;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const PropertyLabels pred = model.predict(x[i]).labels();
    for (std::size_t k = 0; k < kNumProperties; ++k) acc[k] += pred.value[k] == y[i].value[k];
  }
  for (double& a : acc) a /= static_cast<double>(x.size());
  return acc;
}

MultiHeadModel train_property_model(const std::vector<TrainingSample>& train,
                                    const std::vector<TrainingSample>& val,
                                    const TrainConfig& config, std::uint64_t bank_hash,
                                    TrainReport* report) {
  if (train.empty()) throw EmptyInputError("empty training set");
  if (config.epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0.0)) {
    throw TrainingError("invalid training configuration");
  }
  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = {};

  const int dims = static_cast<int>(train.front().clean().size());
  std::vector<const FeatureVector*> clean;
  std::vector<PropertyLabels> labels;
  for (const TrainingSample& s : train) {
    if (s.variants.empty()) throw EmptyInputError("training sample without features");
    for (const FeatureVector& v : s.variants) {
      if (static_cast<int>(v.size()) != dims) throw ShapeError("inconsistent feature lengths");
    }
    clean.push_back(&s.clean());
    labels.push_back(s.labels);
  }

  MultiHeadModel model(dims, config.hidden, bank_hash);
  std::tie(model.input_mean, model.input_scale) = fit_standardizer(clean, dims);

  for (std::size_t k = 0; k < kNumProperties; ++k) {
    auto& present = model.present[k];
    std::fill(present.begin(), present.end(), 0);
    for (const PropertyLabels& l : labels) present[static_cast<std::size_t>(l.value[k])] = 1;
    const auto missing = std::count(present.begin(), present.end(), 0);
    if (missing > 0) {
      const std::string msg = std::string(kPropertyTable[k].name) + ": " +
                              std::to_string(missing) +
                              " class(es) absent from training data; head restricted";
      spdlog::warn(msg);
      rep.warnings.push_back(msg);
    }
  }

  Rng rng(config.seed);
  const double w1_sd = 1.0 / std::sqrt(static_cast<double>(dims));
  for (Eigen::Index i = 0; i < model.w1.size(); ++i) model.w1.data()[i] = normal(rng, 0.0, w1_sd);
  const double head_sd = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  for (auto& hw : model.head_w) {
    for (Eigen::Index i = 0; i < hw.size(); ++i) hw.data()[i] = normal(rng, 0.0, head_sd);
  }

  const auto weights = class_weights(labels, config.class_weighting);

  // Standardize every variant up front; interpolation commutes with it.
  std::vector<std::vector<Vector>> variants(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (const FeatureVector& v : train[i].variants) {
      variants[i].push_back(
          (Eigen::Map<const Vector>(v.data(), dims) - model.input_mean).cwiseProduct(model.input_scale));
    }
  }
  Matrix clean_matrix(dims, static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    clean_matrix.col(static_cast<Eigen::Index>(i)) =
        variants[i].size() == kAugmentGrid.size() ? variants[i][2] : variants[i][0];
  }

  std::vector<FeatureVector> val_x;
  std::vector<PropertyLabels> val_y;
  for (const TrainingSample& s : val) {
    val_x.push_back(s.clean());
    val_y.push_back(s.labels);
  }

  auto full_loss = [&]() {
    return batch_objective(model, clean_matrix, labels, weights, config, nullptr);
  };
  rep.train_loss.push_back(full_loss());

  MultiHeadModel best = model;
  double best_acc = -1.0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Gradients grad;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      Matrix s(dims, static_cast<Eigen::Index>(end - start));
      std::vector<PropertyLabels> y;
      std::vector<std::array<double, kNumProperties>> w;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        const auto col = static_cast<Eigen::Index>(b - start);
        if (variants[i].size() == kAugmentGrid.size()) {
          // Position of a uniform offset in [-1, 1] on the precomputed grid.
          const double u = uniform(rng, -1.0, 1.0);
          const double pos = (u + 1.0) * 2.0;
          const auto lo = std::min<std::size_t>(3, static_cast<std::size_t>(pos));
          const double t = pos - static_cast<double>(lo);
          s.col(col) = (1.0 - t) * variants[i][lo] + t * variants[i][lo + 1];
        } else {
          s.col(col) = variants[i][0];
        }
        y.push_back(labels[i]);
        w.push_back(weights[i]);
      }
      const double l = batch_objective(model, s, y, w, config, &grad);
      if (!std::isfinite(l)) throw TrainingError("loss diverged at epoch " + std::to_string(epoch));
      apply_step(model, grad, config.learning_rate);
    }
    const double l = full_loss();
    if (!std::isfinite(l)) throw TrainingError("loss diverged at epoch " + std::to_string(epoch));
    rep.train_loss.push_back(l);

    double acc = 0.0;
    if (!val_x.empty()) {
      const auto per_head = head_accuracy(model, val_x, val_y);
      acc = std::accumulate(per_head.begin(), per_head.end(), 0.0) / kNumProperties;
    }
    rep.val_accuracy.push_back(acc);
    if (val_x.empty() || acc > best_acc) {
      best_acc = acc;
      best = model;
      rep.best_epoch = epoch;
    }
  }
  rep.best_val_accuracy = best_acc;
  spdlog::debug("property model: best epoch {} val accuracy {:.3f}", rep.best_epoch, best_acc);
  best.round_to_float();
  return best;
}

// ---------------------------------------------------------------------------
// Grip-quality model.

namespace {

constexpr int kGripHandcrafted = 10;

FilterBankConfig grip_bank() {
  FilterBankConfig bank;
  bank.mask_fractions.clear();
  return bank;
}

double crop_median(const RasterD& crop) {
  std::vector<double> v(crop.values().begin(), crop.values().end());
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

int grip_feature_dims() { return grip_bank().energy_stat_count() + kGripHandcrafted; }

std::uint64_t grip_feature_hash() { return io::fnv1a("grip-crop-features-v1") ^ grip_bank().hash(); }

FeatureVector grip_crop_features(const RasterD& crop) {
  if (crop.width() < 16 || crop.height() < 16) throw ShapeError("grip crop too small");
  const int w = crop.width();
  const int h = crop.height();
  const double base = crop_median(crop);
  RasterD rel(w, h);
  for (std::size_t i = 0; i < crop.size(); ++i) rel.values()[i] = (crop.values()[i] - base) * 1e3;
  auto at = [&](int x, int y) { return rel(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };

  const int cx = w / 2;
  const int cy = h / 2;
  // Center value between the four middle pixels.
  const double center = 0.25 * (at(cx - 1, cy - 1) + at(cx, cy - 1) + at(cx - 1, cy) + at(cx, cy));
  const double center_height =
      0.25 * 1e3 * (crop(cx - 1, cy - 1) + crop(cx, cy - 1) + crop(cx - 1, cy) + crop(cx, cy));

  double peak = -1e300;
  double cover = 0.0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    peak = std::max(peak, rel.values()[i]);
    cover += crop.values()[i] > 1e-3;
  }

  // Structure tensor around the center versus the central-difference gradient.
  double jxx = 0.0;
  double jxy = 0.0;
  double jyy = 0.0;
  for (int dy = -5; dy <= 5; ++dy) {
    for (int dx = -5; dx <= 5; ++dx) {
      const double gx = at(cx + dx + 1, cy + dy) - at(cx + dx - 1, cy + dy);
      const double gy = at(cx + dx, cy + dy + 1) - at(cx + dx, cy + dy - 1);
      const double wgt = std::exp(-(dx * dx + dy * dy) / 18.0);
      jxx += wgt * gx * gx;
      jxy += wgt * gx * gy;
      jyy += wgt * gy * gy;
    }
  }
  const double tr = jxx + jyy;
  const double coherence = tr > 0.0 ? std::hypot(jxx - jyy, 2.0 * jxy) / tr : 0.0;
  const double tensor_angle = 0.5 * std::atan2(2.0 * jxy, jxx - jyy);
  const double gx = at(cx + 1, cy) - at(cx - 2, cy);
  const double gy = at(cx, cy + 1) - at(cx, cy - 2);
  const double grad_angle = std::atan2(gy, gx);
  const double agreement = std::pow(std::cos(grad_angle - tensor_angle), 2);

  auto ring_mean = [&](int r) {
    double s = 0.0;
    int n = 0;
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
        s += at(cx + dx, cy + dy);
        ++n;
      }
    }
    return s / n;
  };

  FeatureVector f;
  const auto stats = energy_statistics(rel, grip_bank());
  for (double s : stats) f.push_back(std::log1p(s));
  f.push_back(center);
  f.push_back(sigmoid(center / kProminenceScaleMm));
  f.push_back(center_height);
  f.push_back(center_height > 0.1 ? 1.0 : 0.0);
  f.push_back(coherence);
  f.push_back(agreement);
  f.push_back(center - ring_mean(3));
  f.push_back(center - ring_mean(8));
  f.push_back(peak - center);
  f.push_back(cover / static_cast<double>(rel.size()));
  return f;
}

GripModel::GripModel(int input_dims)
    : input_mean(Vector::Zero(input_dims)),
      input_scale(Vector::Ones(input_dims)),
      weights(Vector::Zero(input_dims)) {}

double GripModel::score_features(const FeatureVector& f) const {
  if (static_cast<int>(f.size()) != input_dims()) throw ShapeError("grip feature length mismatch");
  const Vector s = (Eigen::Map<const Vector>(f.data(), input_dims()) - input_mean).cwiseProduct(input_scale);
  return sigmoid(weights.dot(s) + bias);
}

double GripModel::score(const RasterD& crop) const { return score_features(grip_crop_features(crop)); }

double GripModel::loss(const std::vector<const FeatureVector*>& x, const std::vector<int>& y,
                       double weight_decay) const {
  double l = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = std::clamp(score_features(*x[i]), 1e-300, 1.0 - 1e-16);
    l -= y[i] ? std::log(p) : std::log1p(-p);
  }
  return l / static_cast<double>(x.size()) + 0.5 * weight_decay * weights.squaredNorm();
}

std::vector<double> GripModel::gradient(const std::vector<const FeatureVector*>& x,
                                        const std::vector<int>& y, double weight_decay) const {
  Vector gw = weight_decay * weights;
  double gb = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Vector s =
        (Eigen::Map<const Vector>(x[i]->data(), input_dims()) - input_mean).cwiseProduct(input_scale);
    const double d = (sigmoid(weights.dot(s) + bias) - y[i]) / n;
    gw += d * s;
    gb += d;
  }
  std::vector<double> out(gw.data(), gw.data() + gw.size());
  out.push_back(gb);
  return out;
}

std::vector<double> GripModel::parameters() const {
  std::vector<double> out(weights.data(), weights.data() + weights.size());
  out.push_back(bias);
  return out;
}

void GripModel::set_parameters(const std::vector<double>& values) {
  if (values.size() != static_cast<std::size_t>(weights.size()) + 1) {
    throw ShapeError("grip parameter vector length mismatch");
  }
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights(i) = values[static_cast<std::size_t>(i)];
  bias = values.back();
}

void GripModel::round_to_float() {
  for (auto* v : {&input_mean, &input_scale, &weights}) {
    for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = static_cast<float>((*v)(i));
  }
  bias = static_cast<float>(bias);
}

bool GripModel::operator==(const GripModel& o) const {
  return input_mean == o.input_mean && input_scale == o.input_scale && weights == o.weights &&
         bias == o.bias;
}

void GripModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  io::put_magic(out, kModelMagic);
  io::put<std::uint64_t>(out, grip_feature_hash());
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(input_dims()));
  io::put<std::uint32_t>(out, 0);  // no hidden layer
  io::put<std::uint32_t>(out, 1);
  io::put<std::uint32_t>(out, 1);
  write_floats(out, input_mean.data(), input_mean.size());
  write_floats(out, input_scale.data(), input_scale.size());
  write_floats(out, weights.data(), weights.size());
  io::put<float>(out, static_cast<float>(bias));
  if (!out) throw IoError("write failed: " + path.string());
}

GripModel GripModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  io::expect_magic(in, kModelMagic);
  if (io::get<std::uint64_t>(in) != grip_feature_hash()) {
    throw FormatError("grip model feature hash mismatch: " + path.string());
  }
  const auto dims = io::get<std::uint32_t>(in);
  if (io::get<std::uint32_t>(in) != 0 || io::get<std::uint32_t>(in) != 1 ||
      io::get<std::uint32_t>(in) != 1) {
    throw FormatError("not a grip model");
  }
  GripModel m(static_cast<int>(dims));
  read_floats(in, m.input_mean.data(), m.input_mean.size());
  read_floats(in, m.input_scale.data(), m.input_scale.size());
  read_floats(in, m.weights.data(), m.weights.size());
  m.bias = io::get<float>(in);
  return m;
}

GripModel train_grip_model_features(const std::vector<FeatureVector>& features,
                                    const std::vector<bool>& success,
                                    const GripTrainConfig& config) {
  if (features.size() != success.size()) throw ShapeError("crop and label counts differ");
  const auto positives = std::count(success.begin(), success.end(), true);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(success.size())) {
    throw TrainingError("grip training needs both successful and failed grips");
  }
  const int dims = static_cast<int>(features.front().size());
  std::vector<const FeatureVector*> x;
  for (const FeatureVector& f : features) {
    if (static_cast<int>(f.size()) != dims) throw ShapeError("inconsistent grip feature lengths");
    x.push_back(&f);
  }
  std::vector<int> y(success.begin(), success.end());
  GripModel model(dims);
  std::tie(model.input_mean, model.input_scale) = fit_standardizer(x, dims);

  Rng rng(config.seed);
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<const FeatureVector*> bx;
      std::vector<int> by;
      for (std::size_t b = start; b < end; ++b) {
        bx.push_back(x[order[b]]);
        by.push_back(y[order[b]]);
      }
      const auto g = model.gradient(bx, by, config.weight_decay);
      for (Eigen::Index i = 0; i < model.weights.size(); ++i) {
        model.weights(i) -= config.learning_rate * g[static_cast<std::size_t>(i)];
      }
      model.bias -= config.learning_rate * g.back();
    }
    if (!std::isfinite(model.bias)) throw TrainingError("grip model diverged");
  }
  model.round_to_float();
  return model;
}

GripModel train_grip_model(const std::vector<RasterD>& crops, const std::vector<bool>& success,
                           const GripTrainConfig& config) {
  std::vector<FeatureVector> features;
  features.reserve(crops.size());
  for (const RasterD& c : crops) features.push_back(grip_crop_features(c));
  return train_grip_model_features(features, success, config);
}

}  // namespace clothsense
