#include "clothsense/tactile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "clothsense/binary_io.hpp"
#include "clothsense/error.hpp"

namespace clothsense {
namespace {

constexpr double kContactMeanMm = 0.1;
constexpr double kContactAreaFraction = 0.03;

double contact_fraction(const RasterD& frame) {
  if (frame.empty()) return 0.0;
  std::size_t n = 0;
  for (double v : frame.values()) n += v > kContactMaskMm;
  return static_cast<double>(n) / static_cast<double>(frame.size());
}

struct Kernels {
  std::vector<double> smooth;      // unit-mass Gaussian
  std::vector<double> first;       // sigma * d/dx
  std::vector<double> second;      // sigma^2 * d2/dx2, zero-sum
  int radius = 0;
};

Kernels make_kernels(double sigma) {
  Kernels k;
  k.radius = static_cast<int>(std::ceil(3.0 * sigma));
  const auto n = static_cast<std::size_t>(2 * k.radius + 1);
  k.smooth.resize(n);
  k.first.resize(n);
  k.second.resize(n);
  double sum = 0.0;
  for (int i = -k.radius; i <= k.radius; ++i) {
    k.smooth[static_cast<std::size_t>(i + k.radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k.smooth[static_cast<std::size_t>(i + k.radius)];
  }
  double second_sum = 0.0;
  for (int i = -k.radius; i <= k.radius; ++i) {
    const auto j = static_cast<std::size_t>(i + k.radius);
    k.smooth[j] /= sum;
    k.first[j] = -static_cast<double>(i) / sigma * k.smooth[j];
    k.second[j] = (static_cast<double>(i * i) / (sigma * sigma) - 1.0) * k.smooth[j];
    second_sum += k.second[j];
  }
  for (std::size_t j = 0; j < n; ++j) k.second[j] -= second_sum * k.smooth[j];
  return k;
}

RasterD correlate_x(const RasterD& in, const std::vector<double>& k, int radius) {
  RasterD out(in.width(), in.height());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      double acc = 0.0;
      const int lo = std::max(-radius, -x);
      const int hi = std::min(radius, in.width() - 1 - x);
      for (int i = lo; i <= hi; ++i) acc += k[static_cast<std::size_t>(i + radius)] * in(x + i, y);
      out(x, y) = acc;
    }
  }
  return out;
}

RasterD correlate_y(const RasterD& in, const std::vector<double>& k, int radius) {
  RasterD out(in.width(), in.height());
  for (int y = 0; y < in.height(); ++y) {
    const int lo = std::max(-radius, -y);
    const int hi = std::min(radius, in.height() - 1 - y);
    for (int x = 0; x < in.width(); ++x) {
      double acc = 0.0;
      for (int i = lo; i <= hi; ++i) acc += k[static_cast<std::size_t>(i + radius)] * in(x, y + i);
      out(x, y) = acc;
    }
  }
  return out;
}

std::vector<Mask> contact_masks(const RasterD& frame, const FilterBankConfig& bank) {
  std::vector<Mask> masks;
  Mask base(frame.width(), frame.height(), 0);
  double peak = 0.0;
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      if (frame(x, y) > kContactMaskMm) {
        base(x, y) = 1;
        peak = std::max(peak, frame(x, y));
      }
    }
  }
  masks.push_back(base);
  for (double fraction : bank.mask_fractions) {
    Mask m(frame.width(), frame.height(), 0);
    for (int y = 0; y < frame.height(); ++y) {
      for (int x = 0; x < frame.width(); ++x) {
        m(x, y) = base(x, y) && frame(x, y) >= fraction * peak;
      }
    }
    masks.push_back(std::move(m));
  }
  return masks;
}

void check_frame(const RasterD& frame) {
  if (frame.width() != kTactileWidth || frame.height() != kTactileHeight) {
    throw ShapeError("tactile frame must be 64x48");
  }
}

}  // namespace

double mean_deformation(const RasterD& frame) {
  if (frame.empty()) return 0.0;
  double sum = 0.0;
  for (double v : frame.values()) sum += v;
  return sum / static_cast<double>(frame.size());
}

bool detect_contact(const TactileSequence& seq) {
  double best_mean = 0.0;
  double best_area = 0.0;
  for (const TactileFrame& f : seq.frames) {
    best_mean = std::max(best_mean, mean_deformation(f.deformation));
    best_area = std::max(best_area, contact_fraction(f.deformation));
  }
  return best_mean >= kContactMeanMm && best_area >= kContactAreaFraction;
}

int max_contact_frame(const TactileSequence& seq) {
  if (seq.frames.empty()) throw EmptyInputError("empty tactile sequence");
  int best = 0;
  double best_mean = -1.0;
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const double m = mean_deformation(seq.frames[i].deformation);
    if (m >= best_mean) {
      best_mean = m;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<int> sequence_frame_indices(const TactileSequence& seq, int n, int step) {
  if (n < 2) throw ShapeError("need at least two frames");
  if (step < 1) throw ShapeError("frame step must be positive");
  const int m = max_contact_frame(seq);
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = m - (n - 1 - i) * step;
  return idx;
}

std::vector<RasterD> select_sequence_frames(const TactileSequence& seq, int n, int step) {
  std::vector<RasterD> out;
  const RasterD& shape = seq.frames.front().deformation;
  for (int i : sequence_frame_indices(seq, n, step)) {
    out.push_back(i < 0 ? RasterD(shape.width(), shape.height(), 0.0)
                        : seq.frames[static_cast<std::size_t>(i)].deformation);
  }
  return out;
}

int FilterBankConfig::energy_stat_count() const {
  return static_cast<int>(scales.size()) * orientations *
         static_cast<int>(mask_fractions.size() + 1) * 2;
}

int FilterBankConfig::dims() const { return energy_stat_count() + kGlobalFeatureCount; }

std::uint64_t FilterBankConfig::hash() const {
  std::ostringstream text;
  text.precision(17);
  text << "dog2-bank;scales=";
  for (double s : scales) text << s << ',';
  text << ";orientations=" << orientations << ";fractions=";
  for (double f : mask_fractions) text << f << ',';
  text << ";floor=" << energy_floor << ";mask=" << kContactMaskMm << ";globals="
       << kGlobalFeatureCount;
  return io::fnv1a(text.str());
}

std::vector<std::vector<RasterD>> filter_responses(const RasterD& frame,
                                                   const FilterBankConfig& bank) {
  std::vector<std::vector<RasterD>> out;
  for (double sigma : bank.scales) {
    const Kernels k = make_kernels(sigma);
    const RasterD gxx = correlate_y(correlate_x(frame, k.second, k.radius), k.smooth, k.radius);
    const RasterD gyy = correlate_y(correlate_x(frame, k.smooth, k.radius), k.second, k.radius);
    const RasterD gxy = correlate_y(correlate_x(frame, k.first, k.radius), k.first, k.radius);
    std::vector<RasterD> per_orientation;
    for (int o = 0; o < bank.orientations; ++o) {
      const double theta = o * std::numbers::pi / bank.orientations;
      const double c = std::cos(theta);
      const double s = std::sin(theta);
      RasterD r(frame.width(), frame.height());
      for (std::size_t i = 0; i < r.size(); ++i) {
        r.values()[i] = c * c * gxx.values()[i] + 2.0 * c * s * gxy.values()[i] +
                        s * s * gyy.values()[i];
      }
      per_orientation.push_back(std::move(r));
    }
    out.push_back(std::move(per_orientation));
  }
  return out;
}

std::vector<double> energy_statistics(const RasterD& frame, const FilterBankConfig& bank) {
  std::vector<double> stats(static_cast<std::size_t>(bank.energy_stat_count()), 0.0);
  const std::vector<Mask> masks = contact_masks(frame, bank);
  std::size_t base_count = 0;
  for (unsigned char m : masks.front().values()) base_count += m;
  if (base_count == 0) return stats;

  const auto responses = filter_responses(frame, bank);
  std::size_t k = 0;
  for (const auto& per_orientation : responses) {
    for (const RasterD& r : per_orientation) {
      for (const Mask& mask : masks) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < r.size(); ++i) {
          if (mask.values()[i]) {
            sum += r.values()[i] * r.values()[i];
            ++n;
          }
        }
        double mean = 0.0;
        double sd = 0.0;
        if (n > 0) {
          mean = sum / static_cast<double>(n);
          double var = 0.0;
          for (std::size_t i = 0; i < r.size(); ++i) {
            if (mask.values()[i]) {
              const double e = r.values()[i] * r.values()[i] - mean;
              var += e * e;
            }
          }
          sd = std::sqrt(var / static_cast<double>(n));
        }
        stats[k++] = mean;
        stats[k++] = sd;
      }
    }
  }
  return stats;
}

double energy_lipschitz_bound(const FilterBankConfig& bank, double delta_mm) {
  // With L the largest kernel L1 norm, |r| <= L * 2.5 and |dr| <= L * delta,
  // so |d(r^2)| <= L^2 (5 + delta) delta; a masked mean or standard deviation
  // moves no more than its worst pixel.
  double l = 0.0;
  for (double sigma : bank.scales) {
    const Kernels k = make_kernels(sigma);
    for (int o = 0; o < bank.orientations; ++o) {
      const double theta = o * std::numbers::pi / bank.orientations;
      const double c = std::cos(theta);
      const double s = std::sin(theta);
      double norm = 0.0;
      for (std::size_t y = 0; y < k.smooth.size(); ++y) {
        for (std::size_t x = 0; x < k.smooth.size(); ++x) {
          norm += std::abs(c * c * k.second[x] * k.smooth[y] + 2.0 * c * s * k.first[x] * k.first[y] +
                           s * s * k.smooth[x] * k.second[y]);
        }
      }
      l = std::max(l, norm);
    }
  }
  return l * l * (2.0 * kGelThicknessMm + delta_mm);
}

FeatureVector extract_features(const RasterD& frame, const FilterBankConfig& bank) {
  check_frame(frame);
  FeatureVector f(static_cast<std::size_t>(bank.dims()), 0.0);
  const std::vector<double> stats = energy_statistics(frame, bank);
  for (std::size_t i = 0; i < stats.size(); ++i) f[i] = std::log1p(stats[i] / bank.energy_floor);

  const int w = frame.width();
  const int h = frame.height();
  std::size_t n = 0;
  double sum = 0.0;
  double peak = 0.0;
  double sx = 0.0;
  double sy = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = frame(x, y);
      if (!(v > kContactMaskMm)) continue;
      ++n;
      sum += v;
      peak = std::max(peak, v);
      sx += x;
      sy += y;
    }
  }
  if (n == 0) return f;

  const double count = static_cast<double>(n);
  const double mean = sum / count;
  const double mx = sx / count;
  const double my = sy / count;
  double var = 0.0;
  double cxx = 0.0;
  double cxy = 0.0;
  double cyy = 0.0;
  std::array<double, 8> hist{};
  double lap = 0.0;
  double grad = 0.0;
  auto at = [&](int x, int y) { return frame.contains(x, y) ? frame(x, y) : 0.0; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = frame(x, y);
      if (!(v > kContactMaskMm)) continue;
      var += (v - mean) * (v - mean);
      cxx += (x - mx) * (x - mx);
      cxy += (x - mx) * (y - my);
      cyy += (y - my) * (y - my);
      const int bin = std::clamp(static_cast<int>((v - kContactMaskMm) / 0.25), 0, 7);
      hist[static_cast<std::size_t>(bin)] += 1.0;
      lap += std::abs(at(x + 1, y) + at(x - 1, y) + at(x, y + 1) + at(x, y - 1) - 4.0 * v);
      grad += 0.5 * std::hypot(at(x + 1, y) - at(x - 1, y), at(x, y + 1) - at(x, y - 1));
    }
  }
  cxx /= count;
  cxy /= count;
  cyy /= count;
  const double tr = cxx + cyy;
  const double disc = std::sqrt(std::max(0.0, 0.25 * (cxx - cyy) * (cxx - cyy) + cxy * cxy));
  const double l1 = 0.5 * tr + disc;
  const double l2 = std::max(0.0, 0.5 * tr - disc);

  std::size_t k = stats.size();
  f[k++] = count / static_cast<double>(frame.size());
  f[k++] = mean;
  f[k++] = peak;
  f[k++] = std::sqrt(var / count);
  for (double b : hist) f[k++] = b / count;
  f[k++] = std::sqrt(std::sqrt(l1 * l2)) / 4.0;
  f[k++] = l2 > 0.0 ? std::sqrt(l1 / l2) : 1.0;
  f[k++] = lap / count;
  f[k++] = grad / count;
  return f;
}

FeatureVector extract_features(const TactileFrame& frame, const FilterBankConfig& bank) {
  return extract_features(frame.deformation, bank);
}

RasterD offset_frame(const RasterD& frame, double offset_mm) {
  RasterD out = frame;
  for (double& v : out.values()) v = std::clamp(v + offset_mm, 0.0, kGelThicknessMm);
  return out;
}

FeatureVector pool_features(const std::vector<FeatureVector>& per_frame) {
  if (per_frame.empty()) throw EmptyInputError("no frames to pool");
  const std::size_t d = per_frame.front().size();
  FeatureVector out(2 * d, 0.0);
  for (std::size_t j = 0; j < d; ++j) out[d + j] = per_frame.front()[j];
  for (const FeatureVector& f : per_frame) {
    if (f.size() != d) throw ShapeError("pooled feature lengths differ");
    for (std::size_t j = 0; j < d; ++j) {
      out[j] += f[j];
      out[d + j] = std::max(out[d + j], f[j]);
    }
  }
  for (std::size_t j = 0; j < d; ++j) out[j] /= static_cast<double>(per_frame.size());
  return out;
}

FeatureVector sequence_features(const TactileSequence& seq, int frames,
                                const FilterBankConfig& bank, double offset_mm) {
  if (frames == 1) {
    const RasterD& f = seq.frames[static_cast<std::size_t>(max_contact_frame(seq))].deformation;
    return extract_features(offset_mm == 0.0 ? f : offset_frame(f, offset_mm), bank);
  }
  std::vector<FeatureVector> per_frame;
  const std::vector<RasterD> selected = select_sequence_frames(seq, frames);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (i > 0 && selected[i] == selected[i - 1]) {
      per_frame.push_back(per_frame.back());
      continue;
    }
    per_frame.push_back(extract_features(
        offset_mm == 0.0 ? selected[i] : offset_frame(selected[i], offset_mm), bank));
  }
  return pool_features(per_frame);
}

void write_feature_file(const std::filesystem::path& path, const FeatureVector& features,
                        std::uint64_t bank_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  io::put_magic(out, "FVEC");
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(features.size()));
  io::put<std::uint64_t>(out, bank_hash);
  for (double v : features) io::put<float>(out, static_cast<float>(v));
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureVector read_feature_file(const std::filesystem::path& path, std::uint64_t expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  io::expect_magic(in, "FVEC");
  const auto n = io::get<std::uint32_t>(in);
  const auto hash = io::get<std::uint64_t>(in);
  if (hash != expected_hash) throw FormatError("feature file bank hash mismatch");
  FeatureVector f(n);
  for (double& v : f) v = io::get<float>(in);
  return f;
}

}  // namespace clothsense
