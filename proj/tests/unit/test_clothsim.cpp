#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"

#include "clothsense/clothsim.hpp"
#include "clothsense/dataset.hpp"
#include "clothsense/error.hpp"
#include "clothsense/tactile.hpp"
#include "test_support.hpp"

using namespace clothsense;

namespace {

PropertyLabels labels_with(int thickness, int smoothness = 2, int textile = 0) {
  PropertyLabels l;
  l[Property::kThickness] = thickness;
  l[Property::kSmoothness] = smoothness;
  l[Property::kTextile] = textile;
  return l;
}

ClothItem item_with(const PropertyLabels& l, int id = 0, std::uint64_t seed = 1) {
  return ClothItem::make(id, l, derive_seed({seed, 1}), derive_seed({seed, 2}));
}

double mean_of(const RasterD& r) {
  return std::accumulate(r.values().begin(), r.values().end(), 0.0) / static_cast<double>(r.size());
}

// Highest pixel of the clean heightmap, used as an on-crest grip point.
GripCandidate crest_candidate(const WorldHeightMap& hm) {
  const auto it = std::max_element(hm.z.values().begin(), hm.z.values().end());
  const int idx = static_cast<int>(it - hm.z.values().begin());
  GripCandidate c;
  c.col = idx % hm.width();
  c.row = idx / hm.width();
  c.position = {hm.world_x(c.col), hm.world_y(c.row), *it};
  c.direction = wrinkle_normal(hm, c.col, c.row);
  return c;
}

}  // namespace

TEST_SUITE("materials") {
  TEST_CASE("label_to_material is a pure function") {
    const PropertyLabels l = labels_with(3, 1, 7);
    CHECK(label_to_material(l, 99) == label_to_material(l, 99));
    CHECK(label_to_material(l, 99).texture_motif == 7);
  }

  TEST_CASE("material tables are monotone in the driving label") {
    for (int c = 0; c + 1 < 5; ++c) {
      // Jitter is at most 10 percent while table steps exceed 25 percent.
      CHECK(label_to_material(labels_with(c + 1), 5).thickness_mm > label_to_material(labels_with(c), 5).thickness_mm);
      CHECK(label_to_material(labels_with(2, c + 1), 5).texture_period_mm <
            label_to_material(labels_with(2, c), 5).texture_period_mm);
    }
    PropertyLabels soft = labels_with(2);
    soft[Property::kSoftness] = 1;
    CHECK(label_to_material(soft, 3).compliance > label_to_material(labels_with(2), 3).compliance);
    const MaterialParams m = label_to_material(soft, 3);
    CHECK(m.compliance > 0.0);
    CHECK(m.compliance <= 1.0);
  }
}

TEST_SUITE("synth") {
  TEST_CASE("same item twice gives identical heightmaps") {
    const ClothItem item = item_with(labels_with(2), 4, 17);
    CHECK(synth_cloth(item).z == synth_cloth(item).z);
  }

  TEST_CASE("thick items wrinkle higher than thin ones") {
    double thin = 0.0, thick = 0.0;
    for (int k = 0; k < 20; ++k) {
      for (int cls : {0, 4}) {
        const ClothItem item = item_with(labels_with(cls), k, 1000 + k);
        const ClothLayout layout = cloth_layout(item, 0.6);
        double h = 0.0;
        for (const Wrinkle& w : layout.wrinkles) h += w.height;
        (cls == 0 ? thin : thick) += h / static_cast<double>(layout.wrinkles.size());
      }
    }
    CHECK(thick > thin);
  }

  TEST_CASE("wrinkle count and sizes follow the layout ranges") {
    for (int k = 0; k < 30; ++k) {
      const ClothLayout layout = cloth_layout(item_with(labels_with(k % 5), k, 50 + k), 0.6);
      CHECK(layout.wrinkles.size() >= 3);
      CHECK(layout.wrinkles.size() <= 8);
      for (const Wrinkle& w : layout.wrinkles) {
        CHECK(w.width >= 0.005);
        CHECK(w.width <= 0.040);
        CHECK(w.height >= 0.005 * 0.5);
        CHECK(w.height <= 0.050);
      }
    }
    CHECK_THROWS_AS(cloth_layout(item_with(labels_with(1)), 0.2), SizeError);
  }

  TEST_CASE("removing wrinkles removes nearly all candidates") {
    const CameraModel cam = default_table_camera();
    std::size_t with = 0, without = 0;
    for (int k = 0; k < 4; ++k) {
      const ClothItem item = item_with(labels_with(k % 5), k, 300 + k);
      for (int forced : {-1, 0}) {
        LayoutOverride o;
        if (forced == 0) o.wrinkle_count = 0;
        const WorldHeightMap truth = synth_cloth(item, 0.6, o);
        const WorldHeightMap seen = project_to_world(render_depth(truth, cam, kDefaultDepthNoise, 7 + k), cam);
        const auto n = extract_candidates(laplacian_pyramid_responses(seen), seen, kDefaultThreshold, 1).size();
        (forced == 0 ? without : with) += n;
      }
    }
    REQUIRE(with > 0);
    CHECK(static_cast<double>(without) <= 0.05 * static_cast<double>(with));
  }
}

TEST_SUITE("render") {
  TEST_CASE("noise-free table renders back to the plane") {
    const CameraModel cam = default_table_camera();
    const WorldHeightMap table = WorldHeightMap::flat({});
    const DepthImage img = render_depth(table, cam, 0.0, 3, 0.0);
    const WorldHeightMap back = project_to_world(img, cam);
    double worst = 0.0;
    for (int v = 0; v < cam.height; ++v)
      for (int u = 0; u < cam.width; ++u) worst = std::max(worst, std::abs(back.points(u, v).z));
    CHECK(worst <= 1e-6);
  }

  TEST_CASE("depth equals the analytic ray-plane intersection on a bare table") {
    const CameraModel cam =
        CameraModel::pinhole(100, 100, 64, 64, 128, 128, testing::tilted_pose(1.06, testing::deg(23.5)));
    const DepthImage lib = render_depth(WorldHeightMap::flat({}), cam, 0.0, 1, 0.0);
    const DepthImage ref = testing::table_depth(cam);
    for (std::size_t i = 0; i < ref.depth.size(); ++i)
      CHECK(lib.depth.values()[i] == doctest::Approx(ref.depth.values()[i]).epsilon(1e-9));
  }

  TEST_CASE("round trip error stays within the noise allowance") {
    const CameraModel cam = default_table_camera();
    const WorldHeightMap truth = synth_cloth(item_with(labels_with(3), 2, 77));
    for (double noise : {0.0, 0.002}) {
      const WorldHeightMap back = project_to_world(render_depth(truth, cam, noise, 5), cam);
      double sum = 0.0;
      for (std::size_t i = 0; i < truth.z.size(); ++i) {
        const double e = back.z.values()[i] - truth.z.values()[i];
        sum += e * e;
      }
      const double rms = std::sqrt(sum / static_cast<double>(truth.z.size()));
      CHECK(rms <= 2.0 * noise + 0.001);
    }
  }

  TEST_CASE("dropout marks about two percent of pixels invalid") {
    const CameraModel cam =
        CameraModel::pinhole(100, 100, 64, 64, 128, 128, testing::tilted_pose(1.06, testing::deg(23.5)));
    const DepthImage img = render_depth(WorldHeightMap::flat({}), cam, 0.001, 21);
    const double invalid =
        static_cast<double>(std::count(img.valid.values().begin(), img.valid.values().end(), 0)) / (128.0 * 128.0);
    CHECK(invalid == doctest::Approx(0.02).epsilon(0.25));
    for (std::size_t i = 0; i < img.depth.size(); ++i) {
      if (img.valid.values()[i]) CHECK(img.depth.values()[i] > 0.0);
    }
  }

  TEST_CASE("a camera below the table is rejected") {
    CameraModel cam = default_table_camera();
    cam.camera_to_world(2, 3) = -0.5;
    CHECK_THROWS_AS(render_depth(WorldHeightMap::flat({}), cam, 0.0, 1), PoseError);
  }
}

TEST_SUITE("grip") {
  TEST_CASE("contact quality matches its formula") {
    for (double p : {0.0, 1.0, 5.0, 20.0}) {
      for (double m : {0.0, 30.0, 60.0, 90.0}) {
        const double expected = 1.0 / (1.0 + std::exp(-p / 5.0)) * std::pow(std::cos(testing::deg(m)), 2);
        CHECK(contact_quality(p, m) == doctest::Approx(expected).epsilon(1e-12));
      }
      CHECK(contact_quality(p, 0.0) > contact_quality(p, 90.0));
    }
    // A perpendicular grip below twice the prominence scale never reaches 0.5.
    for (double p = 0.1; p < 10.0; p += 0.7) CHECK(contact_quality(p, 90.0) < 0.5);
  }

  TEST_CASE("bare-table grip is invalid and nearly blank") {
    const ClothItem item = item_with(labels_with(2));
    const WorldHeightMap table = WorldHeightMap::flat({});
    GripCandidate cand;
    cand.col = 300;
    cand.row = 300;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const TactileSequence seq = simulate_grip(item, table, cand, 0.0, seed);
      CHECK_FALSE(seq.valid_contact);
      double peak = 0.0;
      for (const TactileFrame& f : seq.frames)
        peak = std::max(peak, *std::max_element(f.deformation.values().begin(), f.deformation.values().end()));
      CHECK(peak <= 0.05);
      CHECK_FALSE(detect_contact(seq));
    }
  }

  TEST_CASE("aligned grip on a tall wrinkle makes contact") {
    PropertyLabels l = labels_with(2);
    const ClothItem item = item_with(l, 0, 5);
    const WorldHeightMap hm = synth_cloth(item);
    const GripCandidate cand = crest_candidate(hm);
    const TactileSequence seq = simulate_grip(item, hm, cand, 0.0, 9);
    CHECK(seq.prominence_mm > 0.0);
    CHECK(seq.valid_contact);
    CHECK(detect_contact(seq));
  }

  TEST_CASE("sequence invariants hold for random grips") {
    int thin_early = 0, thin_total = 0;
    for (int k = 0; k < 40; ++k) {
      const ClothItem item = item_with(labels_with(k % 5, k % 5, k % 20), k, 900 + k);
      const WorldHeightMap hm = synth_cloth(item);
      const GripCandidate cand = crest_candidate(hm);
      const TactileSequence seq = simulate_grip(item, hm, cand, (k * 7) % 40, 1234 + k, k % kNumSensors);
      const int n = static_cast<int>(seq.frames.size());
      CHECK(n >= kMinFrames);
      CHECK(n <= kMaxFrames);
      for (int i = 1; i < n; ++i) CHECK(seq.frames[i].force_proxy >= seq.frames[i - 1].force_proxy);
      double best = -1.0;
      int first_best = 0;
      for (int i = 0; i < n; ++i) {
        const RasterD& d = seq.frames[i].deformation;
        CHECK(d.width() == kTactileWidth);
        CHECK(d.height() == kTactileHeight);
        for (double v : d.values()) {
          CHECK(v >= 0.0);
          CHECK(v <= kGelThicknessMm);
        }
        const double m = mean_of(d);
        if (m > best) {
          best = m;
          first_best = i;
        }
      }
      CHECK(mean_of(seq.frames.back().deformation) == best);
      CHECK(max_contact_frame(seq) == n - 1);
      if (item.labels[Property::kThickness] == 0) {
        ++thin_total;
        thin_early += first_best <= n / 2;
      }
    }
    REQUIRE(thin_total > 0);
    CHECK(thin_early >= 0.9 * thin_total);
  }

  TEST_CASE("thin cloth saturates by mid-sequence") {
    int early = 0;
    const int total = 60;
    for (int k = 0; k < total; ++k) {
      const ClothItem item = item_with(labels_with(0, k % 5, k % 20), k, 500 + k);
      const WorldHeightMap hm = synth_cloth(item);
      const TactileSequence seq = simulate_grip(item, hm, crest_candidate(hm), 0.0, 77 + k);
      double best = -1.0;
      int first = 0;
      for (int i = 0; i < static_cast<int>(seq.frames.size()); ++i) {
        const double m = mean_of(seq.frames[i].deformation);
        if (m > best) {
          best = m;
          first = i;
        }
      }
      early += 2 * first <= static_cast<int>(seq.frames.size());
    }
    CHECK(early >= 0.9 * total);
  }

  TEST_CASE("grips are reproducible from the seed") {
    const ClothItem item = item_with(labels_with(1), 3, 8);
    const WorldHeightMap hm = synth_cloth(item);
    const GripCandidate cand = crest_candidate(hm);
    CHECK(simulate_grip(item, hm, cand, 12.0, 5, 2) == simulate_grip(item, hm, cand, 12.0, 5, 2));
  }

  TEST_CASE("simulator validity agrees with contact detection") {
    const auto items = generate_corpus(20, 41);
    int agree = 0, total = 0;
    for (const ClothItem& item : items) {
      const Scene scene = make_scene(item, derive_seed({item.item_seed, 3}));
      auto cands = extract_candidates(laplacian_pyramid_responses(scene.observed), scene.observed,
                                      kDefaultThreshold, 1);
      Rng rng(item.item_seed);
      for (std::size_t i = 0; i < cands.size() && i < 25; ++i) {
        const double mis = grip_misalignment(scene.truth, cands[i], rng);
        const TactileSequence seq = simulate_grip(scene.placed, scene.truth, cands[i], mis, i, static_cast<int>(i % 5));
        agree += detect_contact(seq) == seq.valid_contact;
        ++total;
      }
    }
    REQUIRE(total >= 450);
    CHECK(agree >= 0.95 * total);
  }

  TEST_CASE("items differing only in textile are separable by their features") {
    PropertyLabels a = labels_with(2, 2, 3);
    PropertyLabels b = a;
    b[Property::kTextile] = 11;
    auto features_of = [](const PropertyLabels& l) {
      const ClothItem item = ClothItem::make(0, l, 4242, 99);
      const WorldHeightMap hm = synth_cloth(item);
      const GripCandidate cand = crest_candidate(hm);
      std::vector<FeatureVector> out;
      for (std::uint64_t g = 0; g < 10; ++g) {
        const TactileSequence seq = simulate_grip(item, hm, cand, 0.0, 600 + g, 0);
        out.push_back(extract_features(seq.frames[static_cast<std::size_t>(max_contact_frame(seq))]));
      }
      return out;
    };
    const auto fa = features_of(a);
    const auto fb = features_of(b);
    const std::size_t dims = fa.front().size();
    auto mean_abs_diff = [dims](const std::vector<FeatureVector>& x,
                                const std::vector<FeatureVector>& y, bool same) {
      double sum = 0.0;
      int pairs = 0;
      for (std::size_t g = 0; g < x.size(); ++g) {
        for (std::size_t h = same ? g + 1 : 0; h < y.size(); ++h, ++pairs) {
          for (std::size_t j = 0; j < dims; ++j) sum += std::abs(x[g][j] - y[h][j]) / dims;
        }
      }
      return sum / pairs;
    };
    double within_sd = 0.0;
    for (const auto* f : {&fa, &fb}) {
      for (std::size_t j = 0; j < dims; ++j) {
        double m = 0.0, v = 0.0;
        for (const auto& x : *f) m += x[j] / f->size();
        for (const auto& x : *f) v += (x[j] - m) * (x[j] - m) / (f->size() - 1);
        within_sd += std::sqrt(v) / (2.0 * dims);
      }
    }
    const double across = mean_abs_diff(fa, fb, false);
    CHECK(across > within_sd);
    // grips of the same item are closer to each other than to the other item
    CHECK(across > mean_abs_diff(fa, fa, true));
    CHECK(across > mean_abs_diff(fb, fb, true));
  }
}
