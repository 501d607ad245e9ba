// Command-line driver: gen, collect, train, eval, explore, report.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "clothsense/classifier.hpp"
#include "clothsense/dataset.hpp"
#include "clothsense/error.hpp"
#include "clothsense/explorer.hpp"
#include "clothsense/pipeline.hpp"

namespace fs = std::filesystem;
using namespace clothsense;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct Options {
  fs::path corpus;
  std::uint64_t seed = 0;
  int items = kDefaultItems;
  int grips = -1;  // per-subcommand default
  double threshold = 0.75;
  int max_retries = 5;
  int frames = 9;
  bool frames_given = false;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing " + path.string());
}

fs::path model_path(const fs::path& corpus, int frames) {
  return corpus / "models" / (frames == 1 ? "image.tmdl" : "video.tmdl");
}

SplitSpec load_or_build_split(const Options& o, const std::vector<ClothItem>& items) {
  const fs::path path = o.corpus / "splits" / "default.json";
  if (fs::exists(path)) return load_split(path);
  SplitSpec split = build_split(items, kDefaultTestRatio, o.seed);
  for (const std::string& w : split.warnings) spdlog::warn("{}", w);
  fs::create_directories(path.parent_path());
  save_split(path, split);
  return split;
}

void cmd_gen(const Options& o) {
  const auto items = generate_corpus(o.items, o.seed);
  fs::create_directories(o.corpus);
  save_items(o.corpus / "items.jsonl", items);
  spdlog::info("wrote {} items to {}", items.size(), (o.corpus / "items.jsonl").string());
}

void cmd_collect(const Options& o) {
  require(o.corpus / "items.jsonl");
  const auto items = load_items(o.corpus / "items.jsonl");
  CollectConfig config;
  config.seed = o.seed;
  if (o.grips > 0) config.grips_per_item = o.grips;
  const auto data = collect(items, config);
  save_collection(o.corpus, data);
  std::size_t valid = 0;
  for (const Collected& c : data) valid += c.record.valid();
  spdlog::info("collected {} grips, {} valid ({:.3f})", data.size(), valid,
               data.empty() ? 0.0 : static_cast<double>(valid) / data.size());
}

void cmd_train(const Options& o) {
  require(o.corpus / "items.jsonl");
  require(o.corpus / "records.jsonl");
  const auto items = load_items(o.corpus / "items.jsonl");
  const auto data = load_collection(o.corpus);
  const SplitSpec split = load_or_build_split(o, items);
  const IterationSplit iterations = valid_iteration_split(data, split);
  const FilterBankConfig bank;
  fs::create_directories(o.corpus / "models");

  std::string summary = "model,best_epoch,best_val_accuracy\n";
  std::vector<int> variants{1, 9};
  if (o.frames_given) variants = {o.frames};
  for (int frames : variants) {
    const FeatureSets sets = build_feature_sets(data, items, split, iterations, frames, bank);
    TrainConfig config;
    config.seed = derive_seed({o.seed, static_cast<std::uint64_t>(frames)});
    TrainReport report;
    const MultiHeadModel model = train_property_model(sets.train, sets.val, config, bank.hash(), &report);
    model.save(model_path(o.corpus, frames));
    const char* name = frames == 1 ? "image" : "video";
    summary += fmt::format("{},{},{:.4f}\n", name, report.best_epoch, report.best_val_accuracy);
    spdlog::info("{} model: best epoch {}, val accuracy {:.4f}", name, report.best_epoch,
                 report.best_val_accuracy);
  }

  const GripSet grips = balanced_grip_set(data, split.pool_items, derive_seed({o.seed, 0x67726970ull}));
  GripTrainConfig grip_config;
  grip_config.seed = derive_seed({o.seed, 0x67726970ull, 1});
  const GripModel grip = train_grip_model_features(grips.features, grips.success, grip_config);
  grip.save(o.corpus / "models" / "grip.tmdl");
  summary += fmt::format("grip,,{:.4f}\n", grip_accuracy(grip, grips));
  write_text(o.corpus / "train.csv", summary);
}

void cmd_eval(const Options& o) {
  for (const char* f : {"items.jsonl", "records.jsonl", "splits/default.json"}) require(o.corpus / f);
  require(model_path(o.corpus, 1));
  require(model_path(o.corpus, 9));
  require(o.corpus / "models" / "grip.tmdl");
  const auto items = load_items(o.corpus / "items.jsonl");
  const auto data = load_collection(o.corpus);
  const SplitSpec split = load_split(o.corpus / "splits" / "default.json");
  const IterationSplit iterations = valid_iteration_split(data, split);

  PropertyEval results[2];
  for (int i = 0; i < 2; ++i) {
    const int frames = i == 0 ? 1 : 9;
    const MultiHeadModel model = MultiHeadModel::load(model_path(o.corpus, frames), FilterBankConfig{}.hash());
    const FeatureSets sets = build_feature_sets(data, items, split, iterations, frames);
    results[i] = evaluate_property_model(model, sets);
  }
  const std::string table = eval_csv(results[0], results[1]);
  write_text(o.corpus / "eval.csv", table);

  const GripModel grip = GripModel::load(o.corpus / "models" / "grip.tmdl");
  const GripSet held_out = balanced_grip_set(data, split.test_items, derive_seed({o.seed, 0x74657374ull}));
  if (held_out.features.empty()) {
    spdlog::warn("test grips are all one outcome; grip accuracy left empty");
    write_text(o.corpus / "grip_eval.csv", "metric,value\nsamples,0\naccuracy,\n");
  } else {
    write_text(o.corpus / "grip_eval.csv",
               fmt::format("metric,value\nsamples,{}\naccuracy,{:.4f}\n", held_out.features.size(),
                           grip_accuracy(grip, held_out)));
  }
  std::cout << table;
}

void cmd_explore(const Options& o) {
  for (const char* f : {"items.jsonl", "splits/default.json", "models/grip.tmdl"}) require(o.corpus / f);
  require(model_path(o.corpus, o.frames));
  const auto items = load_items(o.corpus / "items.jsonl");
  const SplitSpec split = load_split(o.corpus / "splits" / "default.json");
  std::vector<ClothItem> test;
  for (const ClothItem& it : items) {
    if (split.is_test(it.item_id)) test.push_back(it);
  }
  const MultiHeadModel model = MultiHeadModel::load(model_path(o.corpus, o.frames), FilterBankConfig{}.hash());
  const GripModel grip = GripModel::load(o.corpus / "models" / "grip.tmdl");
  ExplorePolicy policy;
  policy.threshold = o.threshold;
  policy.max_retries = o.max_retries;
  policy.validate();

  const GripModelScorer scorer(grip);
  const ModelPredictor predictor(model, o.frames);
  const PolicyReport report =
      evaluate_policy(test, scorer, predictor, policy, o.grips > 0 ? o.grips : 5, o.seed);
  write_text(o.corpus / "explore.csv", policy_csv(report));
  write_text(o.corpus / "explore_summary.csv", policy_summary_csv(report));
  write_text(o.corpus / "episodes.jsonl", episodes_jsonl(report, items));
  std::cout << policy_csv(report) << policy_summary_csv(report);
}

using Table = std::vector<std::vector<std::string>>;

Table parse_csv(const std::string& text) {
  Table rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

void cmd_report(const Options& o) {
  const Table eval = parse_csv(read_text(o.corpus / "eval.csv"));
  const Table explore = parse_csv(read_text(o.corpus / "explore.csv"));
  if (eval.empty() || explore.empty()) throw FormatError("empty report input");
  std::map<std::string, std::vector<std::string>> by_property;
  for (std::size_t r = 1; r < explore.size(); ++r) by_property[explore[r][0]] = explore[r];

  std::string out;
  for (std::size_t r = 0; r < eval.size(); ++r) {
    std::vector<std::string> row = eval[r];
    const std::vector<std::string>& extra = r == 0 ? explore[0] : by_property[row[0]];
    if (extra.size() < 5) throw FormatError("explore.csv has no row for " + row[0]);
    row.insert(row.end(), extra.begin() + 2, extra.end());
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + row[c];
    out += "\n";
  }
  write_text(o.corpus / "report.csv", out);
  std::cout << out;
  if (fs::exists(o.corpus / "explore_summary.csv")) std::cout << read_text(o.corpus / "explore_summary.csv");
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("clothsense");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("TE_LOG")) spdlog::cfg::helpers::load_levels(level);
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Tactile cloth-property exploration pipeline"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--corpus", o.corpus, "Corpus directory")->required();
    sub->add_option("--seed", o.seed, "Random seed");
  };
  CLI::App* gen = app.add_subcommand("gen", "Synthesize a corpus manifest");
  add_common(gen);
  gen->add_option("--items", o.items, "Number of items")->check(CLI::PositiveNumber);

  CLI::App* collect_cmd = app.add_subcommand("collect", "Grip random candidates of every item");
  add_common(collect_cmd);
  collect_cmd->add_option("--grips", o.grips, "Grips per item")->check(CLI::PositiveNumber);

  CLI::App* train = app.add_subcommand("train", "Train property and grip models");
  add_common(train);
  train->add_option("--frames", o.frames, "Train only this variant")->check(CLI::IsMember({1, 9}));

  CLI::App* eval = app.add_subcommand("eval", "Per-property accuracy table");
  add_common(eval);

  CLI::App* explore = app.add_subcommand("explore", "Closed-loop exploration of test items");
  add_common(explore);
  explore->add_option("--grips", o.grips, "Episodes per item")->check(CLI::PositiveNumber);
  explore->add_option("--threshold", o.threshold, "Confidence needed to stop")
      ->check(CLI::Range(0.0, 1.0));
  explore->add_option("--max-retries", o.max_retries, "Grip budget per episode")
      ->check(CLI::PositiveNumber);
  explore->add_option("--frames", o.frames, "Property model variant")->check(CLI::IsMember({1, 9}));

  CLI::App* report = app.add_subcommand("report", "Merge eval and explore tables");
  add_common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  o.frames_given = train->count("--frames") > 0;

  try {
    if (*gen) cmd_gen(o);
    else if (*collect_cmd) cmd_collect(o);
    else if (*train) cmd_train(o);
    else if (*eval) cmd_eval(o);
    else if (*explore) cmd_explore(o);
    else if (*report) cmd_report(o);
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return 0;
}
