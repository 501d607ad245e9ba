#include "clothsense/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include <spdlog/spdlog.h>

#include "clothsense/error.hpp"
#include "clothsense/formats.hpp"
#include "clothsense/tactile.hpp"

namespace clothsense {
namespace {

using nlohmann::json;

enum Textile : int {
  kCotton, kSatin, kPolyester, kDenim, kGabardine, kBroadcloth, kParka, kLeather, kCrepe,
  kCorduroy, kVelvet, kFlannel, kFleece, kHairy, kWool, kKnit, kNet, kSuit, kWoven, kOther,
};

// thickness, smoothness, fuzziness, softness, stretchiness, durability, woolen, windproof
constexpr std::array<std::array<int, 8>, 20> kPrototypes{{
    {1, 2, 1, 1, 0, 1, 0, 0},  // cotton
    {0, 0, 0, 1, 0, 0, 0, 0},  // satin
    {1, 1, 0, 1, 1, 1, 0, 1},  // polyester
    {2, 3, 0, 0, 0, 1, 0, 1},  // denim
    {2, 1, 0, 0, 0, 1, 0, 1},  // gabardine
    {1, 1, 0, 1, 0, 1, 0, 0},  // broadcloth
    {4, 1, 0, 0, 0, 1, 0, 1},  // parka
    {3, 0, 0, 0, 0, 1, 0, 1},  // leather
    {0, 3, 0, 1, 0, 0, 0, 0},  // crepe
    {2, 4, 1, 1, 0, 1, 0, 1},  // corduroy
    {2, 2, 2, 1, 0, 0, 0, 0},  // velvet
    {2, 2, 2, 1, 0, 1, 0, 0},  // flannel
    {3, 3, 3, 1, 1, 1, 0, 0},  // fleece
    {3, 4, 3, 1, 0, 0, 1, 0},  // hairy
    {3, 3, 2, 0, 0, 1, 1, 1},  // wool
    {2, 4, 1, 1, 1, 0, 1, 0},  // knit
    {0, 4, 0, 0, 1, 0, 0, 0},  // net
    {2, 1, 0, 0, 0, 1, 1, 1},  // suit
    {1, 4, 0, 0, 0, 1, 0, 0},  // woven
    {1, 2, 1, 1, 1, 1, 0, 0},  // other
}};

constexpr double kPrototypeKeep = 0.85;
constexpr double kCareRuleNoise = 0.15;

int season_rule(const PropertyLabels& l) {
  const int t = l[Property::kThickness];
  if (l[Property::kWoolen] && t >= 2) return 3;
  if (t == 0) return 1;
  if (t == 1) return 0;
  if (t == 2) return 2;
  return 3;
}

int wash_rule(const PropertyLabels& l) {
  const int textile = l[Property::kTextile];
  if (l[Property::kWoolen] || textile == kSuit || textile == kLeather || textile == kWool) return 5;
  if (textile == kSatin || textile == kCrepe || textile == kVelvet || textile == kNet) return 4;
  if (textile == kFleece || textile == kKnit || textile == kHairy) return 3;
  if (!l[Property::kDurability]) return 2;
  if (l[Property::kThickness] >= 3) return 1;
  return 0;
}

json candidate_to_json(const GripCandidate& c) {
  return {{"x", c.position.x}, {"y", c.position.y}, {"z", c.position.z},
          {"direction", c.direction}, {"level", c.pyramid_level}, {"response", c.response},
          {"col", c.col}, {"row", c.row}};
}

GripCandidate candidate_from_json(const json& j) {
  GripCandidate c;
  c.position = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>()};
  c.direction = j.at("direction").get<double>();
  c.pyramid_level = j.at("level").get<int>();
  c.response = j.at("response").get<double>();
  c.col = j.at("col").get<int>();
  c.row = j.at("row").get<int>();
  return c;
}

json labels_to_json(const PropertyLabels& l) {
  json j = json::object();
  for (std::size_t k = 0; k < kNumProperties; ++k) j[std::string(kPropertyTable[k].name)] = l.value[k];
  return j;
}

PropertyLabels labels_from_json(const json& j) {
  PropertyLabels l;
  for (std::size_t k = 0; k < kNumProperties; ++k) {
    l.value[k] = j.at(std::string(kPropertyTable[k].name)).get<int>();
  }
  l.validate();
  return l;
}

template <typename T, typename Fn>
std::vector<T> read_jsonl(const std::filesystem::path& path, Fn&& parse) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<T> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

PropertyLabels generate_labels(int textile, Rng& rng) {
  if (textile < 0 || textile >= 20) throw ShapeError("textile index out of range");
  PropertyLabels l;
  const auto& proto = kPrototypes[static_cast<std::size_t>(textile)];
  for (std::size_t k = 0; k < proto.size(); ++k) {
    int v = proto[k];
    if (!bernoulli(rng, kPrototypeKeep)) {
      const int classes = kPropertyTable[k].classes;
      if (classes == 2) {
        v = 1 - v;
      } else {
        const int step = bernoulli(rng, 0.5) ? 1 : -1;
        v = (v + step < 0 || v + step >= classes) ? v - step : v + step;
      }
    }
    l.value[k] = v;
  }
  l[Property::kTextile] = textile;
  l[Property::kSeason] = bernoulli(rng, kCareRuleNoise) ? uniform_int(rng, 0, 3) : season_rule(l);
  l[Property::kWashMethod] = bernoulli(rng, kCareRuleNoise) ? uniform_int(rng, 0, 5) : wash_rule(l);
  l.validate();
  return l;
}

std::vector<ClothItem> generate_corpus(int n_items, std::uint64_t seed) {
  if (n_items < 1) throw EmptyInputError("corpus needs at least one item");
  Rng rng(derive_seed({seed, 0x636f7270ull}));
  std::vector<int> textiles;
  while (static_cast<int>(textiles.size()) < n_items) {
    std::vector<int> block(20);
    std::iota(block.begin(), block.end(), 0);
    std::shuffle(block.begin(), block.end(), rng);
    textiles.insert(textiles.end(), block.begin(), block.end());
  }
  std::vector<ClothItem> items;
  for (int i = 0; i < n_items; ++i) {
    const PropertyLabels labels = generate_labels(textiles[static_cast<std::size_t>(i)], rng);
    const auto id = static_cast<std::uint64_t>(i);
    items.push_back(ClothItem::make(i, labels, derive_seed({seed, id, 1}), derive_seed({seed, id, 2})));
  }
  return items;
}

Collected collect_grip(const ClothItem& item, int iteration, const CollectConfig& config) {
  for (int attempt = 0; attempt < config.max_arrangement_attempts; ++attempt) {
    const std::uint64_t arrangement =
        derive_seed({config.seed, static_cast<std::uint64_t>(item.item_id),
                     static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(attempt)});
    const Scene scene = make_scene(item, arrangement, config.depth_noise);
    const auto candidates =
        extract_candidates(laplacian_pyramid_responses(scene.observed), scene.observed,
                           config.threshold, derive_seed({arrangement, 1}));
    if (candidates.empty()) continue;

    Rng rng(derive_seed({arrangement, 2}));
    const GripCandidate& cand =
        candidates[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(candidates.size()) - 1))];
    Collected out;
    GripRecord& r = out.record;
    r.item_id = item.item_id;
    r.iteration = iteration;
    r.arrangement_seed = arrangement;
    r.candidate = cand;
    r.misalign_deg = grip_misalignment(scene.truth, cand, rng, config.execution_noise_deg);
    r.sensor_id = uniform_int(rng, 0, kNumSensors - 1);
    out.sequence = simulate_grip(scene.placed, scene.truth, cand, r.misalign_deg,
                                 derive_seed({arrangement, 3}), r.sensor_id);
    round_to_float(out.sequence);
    r.frame_count = static_cast<int>(out.sequence.frames.size());
    r.max_contact_frame = max_contact_frame(out.sequence);
    r.contact_quality = out.sequence.contact_quality;
    r.prominence_mm = out.sequence.prominence_mm;
    r.sim_valid = out.sequence.valid_contact;
    r.detected = detect_contact(out.sequence);
    r.tactile_path = "tactile/" + std::to_string(item.item_id) + "/" + std::to_string(iteration) + ".tseq";
    r.depth_path = "depth/" + std::to_string(item.item_id) + "/" + std::to_string(iteration) + ".hmap";
    out.crop = crop_grip_window(scene.observed, cand.position.x, cand.position.y);
    round_to_float(out.crop);
    return out;
  }
  throw UnexplorableItemError("item " + std::to_string(item.item_id) +
                              " produced no grip candidates");
}

std::vector<Collected> collect(const std::vector<ClothItem>& items, const CollectConfig& config) {
  std::vector<const ClothItem*> sorted;
  for (const ClothItem& it : items) sorted.push_back(&it);
  std::sort(sorted.begin(), sorted.end(),
            [](const ClothItem* a, const ClothItem* b) { return a->item_id < b->item_id; });
  std::vector<Collected> out;
  for (const ClothItem* item : sorted) {
    for (int g = 0; g < config.grips_per_item; ++g) out.push_back(collect_grip(*item, g, config));
    spdlog::debug("collected item {}", item->item_id);
  }
  return out;
}

std::vector<GripRecord> filter_valid(const std::vector<GripRecord>& records) {
  std::vector<GripRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [](const GripRecord& r) { return r.valid(); });
  return out;
}

std::vector<Collected> filter_valid(const std::vector<Collected>& records) {
  std::vector<Collected> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [](const Collected& r) { return r.record.valid(); });
  return out;
}

bool SplitSpec::is_test(int item_id) const {
  return std::binary_search(test_items.begin(), test_items.end(), item_id);
}

SplitSpec build_split(const std::vector<ClothItem>& items, double ratio_test, std::uint64_t seed) {
  if (!(ratio_test >= 0.0 && ratio_test < 1.0)) throw ShapeError("test ratio must be in [0, 1)");
  SplitSpec split;
  split.test_ratio = ratio_test;
  split.seed = seed;
  const std::size_t n = items.size();
  const auto n_test = static_cast<std::size_t>(std::lround(ratio_test * static_cast<double>(n)));

  Rng rng(derive_seed({seed, 0x73706c74ull}));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> taken(n, false);

  if (n < 4) {
    const std::string msg = "too few items for a stratified split; choosing test items at random";
    spdlog::warn(msg);
    split.warnings.push_back(msg);
    for (std::size_t i = 0; i < n_test; ++i) taken[order[i]] = true;
  } else {
    std::array<std::vector<int>, kNumProperties> pool_count;
    std::array<std::vector<bool>, kNumProperties> covered;
    for (std::size_t k = 0; k < kNumProperties; ++k) {
      pool_count[k].assign(static_cast<std::size_t>(kPropertyTable[k].classes), 0);
      covered[k].assign(static_cast<std::size_t>(kPropertyTable[k].classes), false);
    }
    for (const ClothItem& it : items) {
      for (std::size_t k = 0; k < kNumProperties; ++k) {
        ++pool_count[k][static_cast<std::size_t>(it.labels.value[k])];
      }
    }
    auto spare = [&](std::size_t i, std::size_t k) {
      return pool_count[k][static_cast<std::size_t>(items[i].labels.value[k])] >= 2;
    };
    auto all_spare = [&](std::size_t i) {
      for (std::size_t k = 0; k < kNumProperties; ++k) {
        if (!spare(i, k)) return false;
      }
      return true;
    };
    auto gain = [&](std::size_t i) {
      int g = 0;
      for (std::size_t k = 0; k < kNumProperties; ++k) {
        g += !covered[k][static_cast<std::size_t>(items[i].labels.value[k])];
      }
      return g;
    };
    std::size_t chosen = 0;
    auto take = [&](std::size_t i) {
      taken[i] = true;
      ++chosen;
      for (std::size_t k = 0; k < kNumProperties; ++k) {
        const auto c = static_cast<std::size_t>(items[i].labels.value[k]);
        --pool_count[k][c];
        covered[k][c] = true;
      }
    };
    // Best untaken item passing `ok`, ties broken by the shuffled order.
    auto best = [&](auto&& ok) -> std::optional<std::size_t> {
      std::optional<std::size_t> pick;
      int best_gain = -1;
      for (std::size_t i : order) {
        if (taken[i] || !ok(i)) continue;
        const int g = gain(i);
        if (g > best_gain) {
          best_gain = g;
          pick = i;
        }
      }
      return pick;
    };

    const std::size_t wash = index(Property::kWashMethod);
    for (int c = 0; c < kPropertyTable[wash].classes && chosen < n_test; ++c) {
      if (covered[wash][static_cast<std::size_t>(c)]) continue;
      auto has_class = [&](std::size_t i) { return items[i].labels.value[wash] == c; };
      auto pick = best([&](std::size_t i) { return has_class(i) && all_spare(i); });
      if (!pick) pick = best([&](std::size_t i) { return has_class(i) && spare(i, wash); });
      if (pick) take(*pick);
    }
    while (chosen < n_test) {
      auto pick = best(all_spare);
      if (!pick) pick = best([](std::size_t) { return true; });
      take(*pick);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    (taken[i] ? split.test_items : split.pool_items).push_back(items[i].item_id);
  }
  std::sort(split.test_items.begin(), split.test_items.end());
  std::sort(split.pool_items.begin(), split.pool_items.end());
  return split;
}

IterationSplit split_iterations(const SplitSpec& split, std::vector<IterationKey> keys) {
  std::erase_if(keys, [&](const IterationKey& k) { return split.is_test(k.item_id); });
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  Rng rng(derive_seed({split.seed, 0x69746572ull}));
  std::shuffle(keys.begin(), keys.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::lround(split.val_ratio * static_cast<double>(keys.size())));
  IterationSplit out;
  out.val.assign(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.train.assign(keys.begin() + static_cast<std::ptrdiff_t>(n_val), keys.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.train.begin(), out.train.end());
  check_no_leakage(split, out);
  return out;
}

void check_no_leakage(const SplitSpec& split, const IterationSplit& iterations) {
  for (const auto* part : {&iterations.train, &iterations.val}) {
    for (const IterationKey& k : *part) {
      if (split.is_test(k.item_id)) {
        throw Error("test item " + std::to_string(k.item_id) + " leaked into training data");
      }
    }
  }
}

void save_items(const std::filesystem::path& path, const std::vector<ClothItem>& items) {
  std::ostringstream out;
  for (const ClothItem& it : items) {
    json j = {{"item_id", it.item_id},
              {"textile", std::string(kTextileNames[static_cast<std::size_t>(it.labels[Property::kTextile])])},
              {"item_seed", it.item_seed},
              {"layout_seed", it.layout_seed},
              {"labels", labels_to_json(it.labels)}};
    out << j.dump() << '\n';
  }
  write_text(path, out.str());
}

std::vector<ClothItem> load_items(const std::filesystem::path& path) {
  return read_jsonl<ClothItem>(path, [](const json& j) {
    return ClothItem::make(j.at("item_id").get<int>(), labels_from_json(j.at("labels")),
                           j.at("item_seed").get<std::uint64_t>(),
                           j.at("layout_seed").get<std::uint64_t>());
  });
}

void save_records(const std::filesystem::path& path, const std::vector<GripRecord>& records) {
  std::ostringstream out;
  for (const GripRecord& r : records) {
    json j = {{"item_id", r.item_id},
              {"iteration", r.iteration},
              {"arrangement_seed", r.arrangement_seed},
              {"candidate", candidate_to_json(r.candidate)},
              {"misalign_deg", r.misalign_deg},
              {"sensor_id", r.sensor_id},
              {"frame_count", r.frame_count},
              {"max_contact_frame", r.max_contact_frame},
              {"contact_quality", r.contact_quality},
              {"prominence_mm", r.prominence_mm},
              {"sim_valid", r.sim_valid},
              {"detected", r.detected},
              {"valid", r.valid()},
              {"tactile", r.tactile_path},
              {"depth", r.depth_path}};
    out << j.dump() << '\n';
  }
  write_text(path, out.str());
}

std::vector<GripRecord> load_records(const std::filesystem::path& path) {
  return read_jsonl<GripRecord>(path, [](const json& j) {
    GripRecord r;
    r.item_id = j.at("item_id").get<int>();
    r.iteration = j.at("iteration").get<int>();
    r.arrangement_seed = j.at("arrangement_seed").get<std::uint64_t>();
    r.candidate = candidate_from_json(j.at("candidate"));
    r.misalign_deg = j.at("misalign_deg").get<double>();
    r.sensor_id = j.at("sensor_id").get<int>();
    r.frame_count = j.at("frame_count").get<int>();
    r.max_contact_frame = j.at("max_contact_frame").get<int>();
    r.contact_quality = j.at("contact_quality").get<double>();
    r.prominence_mm = j.at("prominence_mm").get<double>();
    r.sim_valid = j.at("sim_valid").get<bool>();
    r.detected = j.at("detected").get<bool>();
    r.tactile_path = j.at("tactile").get<std::string>();
    r.depth_path = j.at("depth").get<std::string>();
    return r;
  });
}

void save_split(const std::filesystem::path& path, const SplitSpec& split) {
  json j = {{"test_items", split.test_items}, {"pool_items", split.pool_items},
            {"test_ratio", split.test_ratio}, {"val_ratio", split.val_ratio},
            {"seed", split.seed}};
  write_text(path, j.dump(2) + "\n");
}

SplitSpec load_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    const json j = json::parse(in);
    SplitSpec s;
    s.test_items = j.at("test_items").get<std::vector<int>>();
    s.pool_items = j.at("pool_items").get<std::vector<int>>();
    s.test_ratio = j.at("test_ratio").get<double>();
    s.val_ratio = j.at("val_ratio").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_collection(const std::filesystem::path& root, const std::vector<Collected>& data) {
  std::vector<GripRecord> records;
  for (const Collected& c : data) {
    const auto tactile = root / c.record.tactile_path;
    const auto depth = root / c.record.depth_path;
    std::filesystem::create_directories(tactile.parent_path());
    std::filesystem::create_directories(depth.parent_path());
    write_tseq(tactile, c.sequence.frames);
    write_hmap(depth, {c.crop, kGripWindowSide / kGripWindowPixels, FrameTag::kWorld});
    records.push_back(c.record);
  }
  save_records(root / "records.jsonl", records);
}

std::vector<Collected> load_collection(const std::filesystem::path& root) {
  std::vector<Collected> out;
  for (const GripRecord& r : load_records(root / "records.jsonl")) {
    Collected c;
    c.record = r;
    c.sequence.frames = read_tseq(root / r.tactile_path);
    c.sequence.valid_contact = r.sim_valid;
    c.sequence.item_id = r.item_id;
    c.sequence.candidate = r.candidate;
    c.sequence.sensor_id = r.sensor_id;
    c.sequence.contact_quality = r.contact_quality;
    c.sequence.prominence_mm = r.prominence_mm;
    c.crop = read_hmap(root / r.depth_path).values;
    out.push_back(std::move(c));
  }
  return out;
}

std::string labels_to_string(const PropertyLabels& labels) { return labels_to_json(labels).dump(); }

}  // namespace clothsense
