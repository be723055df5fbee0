// Acceptance suite. One PASS/FAIL line per criterion; exits nonzero if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "decoyforge/audit.hpp"
#include "decoyforge/decoygen.hpp"
#include "decoyforge/model.hpp"
#include "decoyforge/util.hpp"
#include "decoyforge/wordnet.hpp"
#include "support/synth.hpp"

namespace fs = std::filesystem;
using namespace decoyforge;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void run(int id, const char* name, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s [%d] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExampleBatch random_batch(std::size_t dim, std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ExampleBatch b;
  b.X.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
  b.y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index c = 0; c < b.X.cols(); ++c) {
    for (Eigen::Index r = 0; r < b.X.rows(); ++r) b.X(r, c) = normal(rng);
    b.y[c] = c % 4 == 0 ? 1.0 : 0.0;
  }
  return b;
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    auto params = MlpParams::glorot(40, 24, seed);
    params.b = 0.1 * static_cast<double>(seed);
    const auto batch = random_batch(40, 64, rng);
    const auto res = grad_check(params, batch, 1e-5, 400, seed);
    worst = std::max(worst, res.max_relative_error);
  }
  const double secs = elapsed_since(t0);
  return {worst < 1e-4 && secs < 10.0, "max relative error " + fmt("%.3g", worst) + " over 5 seeds in " +
                                           fmt("%.2f", secs) + "s"};
}

std::string wordnet_dir() {
  if (const char* env = std::getenv("DECOYFORGE_WORDNET_DIR"); env && *env) return env;
  return DECOYFORGE_WORDNET_DIR;
}

Outcome wup_anchors() {
  const auto dir = wordnet_dir();
  if (!fs::exists(fs::path(dir) / "data.noun")) return {false, "no WordNet database at '" + dir + "'"};
  const Taxonomy tax = load_wordnet_db(dir);
  const double cat_dog = wup_word("cat", "dog", tax);
  const double lady_woman = wup_word("lady", "woman", tax);
  const std::vector<std::string> a{"a", "cute", "cat"}, b{"cat"};
  const double seq = wup_sequence(a, b, tax);
  const bool ok = std::abs(cat_dog - 0.857) <= 0.005 && std::abs(lady_woman - 0.632) <= 0.05 && seq == 1.0;
  return {ok, "cat/dog " + fmt("%.4f", cat_dog) + ", lady/woman " + fmt("%.4f", lady_woman) +
                  ", 'a cute cat'/'cat' " + fmt("%.4f", seq)};
}

// Shared by the bias and shortcut criteria.
struct BiasedRun {
  synth::World world;
  std::vector<CandidateSet> orig;
  std::vector<CandidateSet> remediated;
};

const BiasedRun& biased_run() {
  static const BiasedRun run = [] {
    BiasedRun r;
    r.world = synth::biased_world({});
    DecoyGenConfig cfg;
    cfg.k = 3;
    cfg.seed = 11;
    DecoyGenerator gen(r.world.corpus, r.world.table, r.world.taxonomy, cfg);
    auto res = gen.remediate(std::vector<CandidateMode>{CandidateMode::orig, CandidateMode::iou_qou});
    r.orig = std::move(res[0].items);
    r.remediated = std::move(res[1].items);
    return r;
  }();
  return run;
}

Outcome bias_detection() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& run = biased_run();
  const auto rule = [](const std::vector<CandidateSet>& items) {
    const auto table = build_bias_table(synth::split_items(items, Split::train), std::nullopt);
    return bias_rule_accuracy(synth::split_items(items, Split::test), table);
  };
  const double before = rule(run.orig);
  const double after = rule(run.remediated);
  const double chance = 1.0 / 7.0;
  const double secs = elapsed_since(t0);
  const bool ok = run.world.corpus.size() == 5000 && before >= 0.95 && std::abs(after - chance) <= 0.05 &&
                  secs < 120.0;
  return {ok, std::to_string(run.world.corpus.size()) + " triplets; rule accuracy " + fmt("%.3f", before) +
                  " before, " + fmt("%.3f", after) + " after (chance " + fmt("%.3f", chance) + ")"};
}

TrainConfig small_config(InputMode mode, std::size_t iters, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.hidden_dim = 64;
  cfg.max_iters = iters;
  cfg.lr0 = 0.05;
  cfg.step_size = iters * 2 / 3;
  cfg.dropout_rate = 0.0;
  cfg.seed = seed;
  return cfg;
}

double train_eval(const std::vector<CandidateSet>& items, const synth::World& w, const TrainConfig& cfg) {
  const FeatureSources src{&w.images, &w.table};
  const auto train_items = synth::split_items(items, Split::train);
  const auto test_items = synth::split_items(items, Split::test);
  const auto res = train(train_items, cfg, src);
  return evaluate(res.params, test_items, cfg.mode, Metric::plain, src).accuracy;
}

Outcome shortcut_collapse() {
  const auto& run = biased_run();
  const auto cfg = small_config(InputMode::A, 1500, 5);
  const double biased = train_eval(run.orig, run.world, cfg);
  const double remediated = train_eval(run.remediated, run.world, cfg);
  const double chance = 1.0 / 7.0;
  return {biased >= 0.45 && remediated <= chance + 0.07,
          "MLP-A " + fmt("%.3f", biased) + " on original decoys, " + fmt("%.3f", remediated) +
              " after remediation (limit " + fmt("%.3f", chance + 0.07) + ")"};
}

Outcome ablation_ordering() {
  const auto world = synth::planted_world({});
  DecoyGenConfig gcfg;
  gcfg.seed = 21;
  DecoyGenerator gen(world.corpus, world.table, world.taxonomy, gcfg);
  const auto res =
      gen.remediate(std::vector<CandidateMode>{CandidateMode::iou, CandidateMode::qou, CandidateMode::iou_qou});
  auto acc = [&](const std::vector<CandidateSet>& items, InputMode mode) {
    auto cfg = small_config(mode, 3000, 9);
    cfg.hidden_dim = 128;
    return train_eval(items, world, cfg);
  };
  const double iou_qa = acc(res[0].items, InputMode::QA), iou_ia = acc(res[0].items, InputMode::IA);
  const double qou_qa = acc(res[1].items, InputMode::QA), qou_ia = acc(res[1].items, InputMode::IA);
  const double both_qa = acc(res[2].items, InputMode::QA), both_ia = acc(res[2].items, InputMode::IA);
  const double both_iqa = acc(res[2].items, InputMode::IQA);
  const bool ok = iou_qa - iou_ia >= 0.15 && qou_ia - qou_qa >= 0.15 && both_iqa >= std::max(both_qa, both_ia);
  return {ok, "IoU QA " + fmt("%.3f", iou_qa) + " IA " + fmt("%.3f", iou_ia) + "; QoU QA " + fmt("%.3f", qou_qa) +
                  " IA " + fmt("%.3f", qou_ia) + "; IoU+QoU QA " + fmt("%.3f", both_qa) + " IA " +
                  fmt("%.3f", both_ia) + " IQA " + fmt("%.3f", both_iqa)};
}

Outcome chance_rates() {
  synth::BiasedOptions opt;
  opt.images = 400;
  opt.seed = 3;
  const auto world = synth::biased_world(opt);
  DecoyGenConfig cfg;
  cfg.seed = 31;
  DecoyGenerator gen(world.corpus, world.table, world.taxonomy, cfg);
  const auto res =
      gen.remediate(std::vector<CandidateMode>{CandidateMode::orig, CandidateMode::iou_qou, CandidateMode::all});
  const double expected[] = {25.0, 100.0 / 7.0, 10.0};
  const char* names[] = {"orig", "iou+qou", "all"};
  std::mt19937_64 rng(99);
  constexpr std::size_t kGuesses = 100000;
  bool ok = true;
  std::string detail;
  for (int m = 0; m < 3; ++m) {
    const auto& items = res[static_cast<std::size_t>(m)].items;
    std::size_t hits = 0;
    for (std::size_t g = 0; g < kGuesses; ++g) {
      const auto& item = items[g % items.size()];
      if (uniform_index(rng, item.candidates.size()) == item.target_index) ++hits;
    }
    const double pct = 100.0 * static_cast<double>(hits) / kGuesses;
    ok = ok && std::abs(pct - expected[m]) <= 1.0;
    detail += std::string(m ? ", " : "") + names[m] + " " + fmt("%.2f%%", pct);
  }
  return {ok, detail + " over " + std::to_string(kGuesses) + " guesses each"};
}

Outcome decoy_invariants() {
  std::size_t sets = 0, decoys = 0;
  bool ok = true;
  std::string bad;
  auto check = [&](const std::vector<CandidateSet>& items, const synth::World& w, const char* label) {
    const auto rep = synth::check_invariants(items, w.corpus, w.taxonomy, 0.9);
    sets += rep.sets;
    decoys += rep.decoys;
    if (!rep.ok()) {
      ok = false;
      bad += std::string(" ") + label + "{neutral " + std::to_string(rep.non_neutral) + ", iou " +
             std::to_string(rep.iou_foreign) + ", wup " + std::to_string(rep.wup_violations) + ", contain " +
             std::to_string(rep.containment_violations) + ", dup " + std::to_string(rep.duplicate_entries) + "}";
    }
  };
  const auto& run = biased_run();
  check(run.remediated, run.world, "biased");

  const auto planted = synth::planted_world({});
  DecoyGenConfig cfg;
  cfg.seed = 21;
  DecoyGenerator gen(planted.corpus, planted.table, planted.taxonomy, cfg);
  for (const auto& r : gen.remediate(std::vector<CandidateMode>{CandidateMode::iou, CandidateMode::qou,
                                                                CandidateMode::iou_qou})) {
    check(r.items, planted, to_string(r.items.front().mode).data());
  }

  // Frequent-target fallback on a corpus where every image has one question.
  synth::BiasedOptions opt;
  opt.images = 300;
  opt.per_image = 1;
  const auto sparse = synth::biased_world(opt);
  DecoyGenConfig fcfg;
  fcfg.fallback = FallbackPool::frequent_targets;
  DecoyGenerator fgen(sparse.corpus, sparse.table, sparse.taxonomy, fcfg);
  check(fgen.remediate(CandidateMode::all).items, sparse, "sparse");

  return {ok, std::to_string(sets) + " candidate sets, " + std::to_string(decoys) + " generated decoys" +
                  (ok ? "; no violations" : ";" + bad)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DECOYFORGE_CLI) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

bool same_files(const fs::path& a, const fs::path& b, std::string& diff) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
  std::size_t count_b = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++count_b;
  if (names.size() != count_b) {
    diff = "file counts differ";
    return false;
  }
  for (const auto& n : names) {
    if (!fs::exists(b / n) || read_file((a / n).string()) != read_file((b / n).string())) {
      diff = n;
      return false;
    }
  }
  return true;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("decoyforge_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  synth::PlantedOptions opt;
  opt.images = 200;
  const auto w = synth::planted_world(opt);
  write_corpus((root / "corpus.jsonl").string(), w.corpus);
  w.table.save_binary((root / "words.bin").string());
  w.images.save((root / "images.dffs").string());
  {
    std::ofstream tax(root / "taxonomy.tsv");
    tax << "root.n\tn\tentity\n";
    for (std::size_t c = 0; c < w.categories.size(); ++c) {
      const auto g = synth::word("grp", c);
      tax << g << ".n\tn\t" << g << "\troot.n\n";
      for (const auto& a : w.categories[c]) tax << a << ".n\tn\t" << a << "\t" << g << ".n\n";
    }
  }
  const std::string common = " --embeddings " + (root / "words.bin").string();
  std::string failed;
  for (const char* run : {"a", "b"}) {
    const auto out = root / run;
    fs::create_directories(out / "gen");
    fs::create_directories(out / "model");
    int rc = run_cli("gen --corpus " + (root / "corpus.jsonl").string() + " --taxonomy " +
                     (root / "taxonomy.tsv").string() + common + " --mode iou+qou --mode qou --seed 7 --out-dir " +
                     (out / "gen").string());
    if (rc != 0) failed = "gen exited " + std::to_string(rc);
    rc = run_cli("train --candidates " + (root / "a" / "gen" / "candidates.iou+qou.jsonl").string() + common +
                 " --features " + (root / "images.dffs").string() +
                 " --mode IQA --hidden 32 --iters 200 --dropout 0.5 --seed 7 --out " +
                 (out / "model" / "model.bin").string());
    if (rc != 0 && failed.empty()) failed = "train exited " + std::to_string(rc);
  }
  if (!failed.empty()) return {false, failed};
  std::string diff;
  const bool gen_same = same_files(root / "a" / "gen", root / "b" / "gen", diff);
  if (!gen_same) return {false, "gen artifact differs: " + diff};
  const bool train_same = same_files(root / "a" / "model", root / "b" / "model", diff);
  if (!train_same) return {false, "train artifact differs: " + diff};
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::recursive_directory_iterator(root / "a")) ++files;
  fs::remove_all(root);
  return {true, "two runs of gen and train gave byte-identical artifacts (" + std::to_string(files) + " entries)"};
}

Outcome prior_points() {
  // "cat" is the target of 3 items and a decoy in 6; "sun" only ever a target.
  std::vector<CandidateSet> items;
  CandidateSet a;
  a.candidates = {"cat", "dog", "car", "red"};
  CandidateSet b;
  b.candidates = {"sun", "cat", "sky", "sea"};
  for (int i = 0; i < 3; ++i) items.push_back(a);
  for (int i = 0; i < 6; ++i) items.push_back(b);
  const auto table = build_bias_table(items, 3);
  const double unseen = answer_prior("purple dinosaur", table);
  const double point = answer_prior("cat", table);
  const double only_target = answer_prior("sun", table);
  const bool ok = unseen == 0.5 && std::abs(point - 0.6) < 1e-12 && only_target == 1.0;
  return {ok, "unseen " + fmt("%.3f", unseen) + ", (3,6,k=3) " + fmt("%.6f", point) + ", (6,0) " +
                  fmt("%.3f", only_target)};
}

Outcome knn_oracle() {
  std::size_t mismatches = 0, queries = 0;
  for (std::uint64_t seed : {41u, 42u}) {
    synth::BiasedOptions opt;
    opt.images = 200;
    opt.seed = seed;
    const auto w = synth::biased_world(opt);
    QuestionIndex index(w.corpus, w.table);
    std::mt19937_64 rng(seed);
    for (int q = 0; q < 20; ++q) {
      const std::size_t query = uniform_index(rng, w.corpus.size());
      for (std::size_t n : {std::size_t{10}, std::size_t{2000}}) {
        ++queries;
        if (index.topn(query, n) != synth::brute_force_topn(w.corpus, query, n, w.table)) ++mismatches;
        if (topn_similar_questions(w.corpus, w.corpus[query], n, w.table) !=
            synth::brute_force_topn(w.corpus, query, n, w.table)) {
          ++mismatches;
        }
      }
    }
  }
  return {mismatches == 0, std::to_string(queries) + " ranked queries on 1000-record corpora, " +
                               std::to_string(mismatches) + " mismatches"};
}

}  // namespace

int main() {
  run(1, "gradient correctness", gradient_check);
  run(2, "WUP anchors", wup_anchors);
  run(3, "bias detection and remediation", bias_detection);
  run(4, "shortcut collapse", shortcut_collapse);
  run(5, "ablation ordering", ablation_ordering);
  run(6, "structural chance rates", chance_rates);
  run(7, "decoy invariants", decoy_invariants);
  run(8, "determinism", determinism);
  run(9, "answer prior point values", prior_points);
  run(10, "kNN oracle", knn_oracle);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
