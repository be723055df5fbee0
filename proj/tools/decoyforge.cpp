// decoyforge: corpus ingestion, bias audit, decoy generation and the
// answer-scoring baselines behind one command.

#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "decoyforge/audit.hpp"
#include "decoyforge/corpus.hpp"
#include "decoyforge/decoygen.hpp"
#include "decoyforge/feature_store.hpp"
#include "decoyforge/model.hpp"
#include "decoyforge/pipeline.hpp"
#include "decoyforge/text.hpp"
#include "decoyforge/util.hpp"
#include "decoyforge/wordnet.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace decoyforge;

namespace {

void print_error(const std::string& code, const std::string& field, const std::string& message) {
  nlohmann::json j = {{"error", {{"code", code}, {"field", field}, {"message", message}}}};
  std::cerr << j.dump() << std::endl;
}

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

std::string fmt_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

void require(const std::string& value, const char* field) {
  if (value.empty()) throw Error("config.missing", std::string("--") + field + " is required", field);
}

struct Options {
  PipelineConfig cfg;
  std::string input;
  std::string out;
  bool strict = false;
  bool drop_yes_no = false;
  std::vector<std::string> gen_modes{"iou+qou"};
  std::string fallback = "orig-decoys";
  std::vector<std::string> candidate_files;
  std::size_t top = 20;
  std::string candidates;
  std::string model_mode = "IQA";
  std::string eval_mode;
  std::string decoy_set;
  std::string metric = "plain";
  std::string init;
  std::string model;
  std::string split = "test";
  std::vector<std::string> results;
  std::string json_out;
  std::string text_out;
};

Corpus load_input_corpus(const PipelineConfig& cfg) {
  require(cfg.corpus, "corpus");
  return load_corpus(cfg.corpus, parse_corpus_format(cfg.corpus_format));
}

std::string validation_json(const Corpus& corpus, const ValidationReport& report) {
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : report.violations) {
    violations.push_back({{"kind", to_string(v.kind)}, {"id", v.triplet_id}, {"detail", v.detail}});
  }
  nlohmann::json j = {{"schema_version", kSchemaVersion},
                      {"records", corpus.size()},
                      {"splits",
                       {{"train", corpus.split_count(Split::train)},
                        {"val", corpus.split_count(Split::val)},
                        {"test", corpus.split_count(Split::test)}}},
                      {"images", corpus.image_index().size()},
                      {"violations", violations}};
  return j.dump(2) + "\n";
}

int run_ingest(const Options& o) {
  require(o.input, "input");
  require(o.out, "out");
  Corpus corpus = load_corpus(o.input, parse_corpus_format(o.cfg.corpus_format));
  if (o.drop_yes_no) corpus = filter_yes_no(corpus);
  std::optional<FeatureStore> features;
  if (!o.cfg.features.empty()) features = FeatureStore::load(o.cfg.features);
  const auto report = validate(corpus, features ? &*features : nullptr);
  std::cout << validation_json(corpus, report);
  if (o.strict && !report.clean()) {
    throw Error("corpus.invalid", std::to_string(report.violations.size()) + " validation violations", "input");
  }
  write_corpus(o.out, corpus);
  Manifest m("ingest", 0);
  m.set("format", o.cfg.corpus_format);
  m.set("drop_yes_no", o.drop_yes_no ? "true" : "false");
  m.add_input("input", o.input);
  if (!o.cfg.features.empty()) m.add_input("features", o.cfg.features);
  m.add_output(o.out);
  m.write(o.out + ".manifest.json");
  return 0;
}

int run_validate(const Options& o) {
  const Corpus corpus = load_input_corpus(o.cfg);
  std::optional<FeatureStore> features;
  if (!o.cfg.features.empty()) features = FeatureStore::load(o.cfg.features);
  const auto report = validate(corpus, features ? &*features : nullptr);
  std::cout << validation_json(corpus, report);
  if (!report.clean()) {
    throw Error("corpus.invalid", std::to_string(report.violations.size()) + " validation violations", "corpus");
  }
  return 0;
}

int run_audit_cmd(const Options& o) {
  std::vector<std::pair<std::string, std::vector<CandidateSet>>> sets;
  if (!o.cfg.corpus.empty()) sets.emplace_back("orig", orig_candidate_sets(load_input_corpus(o.cfg), o.cfg.seed));
  for (const auto& path : o.candidate_files) {
    auto items = read_candidates(path);
    const std::string name = items.empty() ? path : std::string(to_string(items.front().mode));
    sets.emplace_back(name, std::move(items));
  }
  if (sets.empty()) throw Error("config.missing", "give --corpus and/or --candidates", "corpus");
  const std::string text = audit_json(run_audit(sets, o.top));
  if (o.out.empty()) {
    std::cout << text;
  } else {
    write_file(o.out, text);
  }
  return 0;
}

int run_gen(Options o) {
  auto& cfg = o.cfg;
  cfg.gen.fallback = parse_fallback_pool(o.fallback);
  cfg.gen.validate();
  std::vector<CandidateMode> modes;
  for (const auto& m : o.gen_modes) modes.push_back(parse_candidate_mode(m));
  require(cfg.taxonomy, "taxonomy");
  const Corpus corpus = load_input_corpus(cfg);
  const Taxonomy tax = load_taxonomy(cfg.taxonomy, parse_taxonomy_format(cfg.taxonomy_format));
  const bool need_qou = std::any_of(modes.begin(), modes.end(), [](CandidateMode m) {
    return m == CandidateMode::qou || m == CandidateMode::iou_qou || m == CandidateMode::all;
  });
  std::optional<EmbeddingTable> table;
  if (need_qou) {
    require(cfg.embeddings, "embeddings");
    table = EmbeddingTable::load(cfg.embeddings);
  } else if (!cfg.embeddings.empty()) {
    table = EmbeddingTable::load(cfg.embeddings);
  }
  const auto gen = table ? DecoyGenerator(corpus, *table, tax, cfg.gen) : DecoyGenerator(corpus, tax, cfg.gen);
  const auto results = gen.remediate(modes);

  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  Manifest m("gen", cfg.gen.seed);
  m.set("k", std::to_string(cfg.gen.k));
  m.set("topn", std::to_string(cfg.gen.topn));
  m.set("threshold", fmt_double(cfg.gen.wup_threshold));
  m.set("fallback", std::string(to_string(cfg.gen.fallback)));
  std::string mode_list;
  for (auto mode : modes) mode_list += (mode_list.empty() ? "" : ",") + std::string(to_string(mode));
  m.set("modes", mode_list);
  m.set("corpus_format", cfg.corpus_format);
  m.set("taxonomy_format", cfg.taxonomy_format);
  m.add_input("corpus", cfg.corpus);
  m.add_input("taxonomy", cfg.taxonomy);
  if (!cfg.embeddings.empty()) m.add_input("embeddings", cfg.embeddings);
  nlohmann::json summary = nlohmann::json::array();
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const std::string name(to_string(modes[i]));
    const auto cand_path = join(dir, "candidates." + name + ".jsonl");
    const auto report_path = join(dir, "report." + name + ".json");
    write_candidates(cand_path, results[i].items);
    write_file(report_path, report_json(results[i].report, modes[i], cfg.gen) + "\n");
    m.add_output(cand_path);
    m.add_output(report_path);
    summary.push_back({{"mode", name}, {"candidates", cand_path}, {"items", results[i].items.size()}});
  }
  m.write(join(dir, "gen.manifest.json"));
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

FeatureSources open_sources(const PipelineConfig& cfg, InputMode mode, std::optional<FeatureStore>& images,
                            std::optional<EmbeddingTable>& table) {
  require(cfg.embeddings, "embeddings");
  table = EmbeddingTable::load(cfg.embeddings);
  if (uses_image(mode)) {
    require(cfg.features, "features");
    images = FeatureStore::load(cfg.features);
  }
  return FeatureSources{images ? &*images : nullptr, &*table};
}

std::vector<CandidateSet> of_split(const std::vector<CandidateSet>& items, Split split) {
  std::vector<CandidateSet> out;
  std::copy_if(items.begin(), items.end(), std::back_inserter(out),
               [&](const CandidateSet& c) { return c.split == split; });
  return out;
}

std::string decoy_set_of(const Options& o, const std::vector<CandidateSet>& items) {
  if (!o.decoy_set.empty()) return std::string(to_string(parse_candidate_mode(o.decoy_set)));
  return items.empty() ? "orig" : std::string(to_string(items.front().mode));
}

int run_train(Options o) {
  auto& tc = o.cfg.train;
  tc.mode = parse_input_mode(o.model_mode);
  tc.seed = o.cfg.seed;
  tc.validate();
  require(o.candidates, "candidates");
  require(o.out, "out");
  const auto items = read_candidates(o.candidates);
  const std::string decoy_set = decoy_set_of(o, items);
  std::optional<FeatureStore> images;
  std::optional<EmbeddingTable> table;
  const auto sources = open_sources(o.cfg, tc.mode, images, table);
  const std::size_t d_img = images ? images->dim() : 0;
  if (!o.init.empty()) {
    auto ckpt = load_checkpoint(o.init);
    if (ckpt.mode != tc.mode) {
      throw Error("config.invalid", "warm-start model was trained in mode " + std::string(to_string(ckpt.mode)),
                  "init");
    }
    tc.init = std::move(ckpt.params);
  }
  const auto train_items = of_split(items, Split::train);
  if (train_items.empty()) throw Error("model.no_data", "no train-split items in '" + o.candidates + "'", "candidates");
  const auto val_items = of_split(items, Split::val);
  const auto result = train(train_items, tc, sources, val_items);

  save_checkpoint(o.out, Checkpoint{tc.mode, d_img, table->dim(), result.params});
  std::ostringstream log;
  write_training_log(log, result.log);
  write_file(o.out + ".log.jsonl", log.str());

  Manifest m("train", tc.seed);
  m.set("mode", std::string(to_string(tc.mode)));
  m.set("decoy_set", decoy_set);
  m.set("lr", fmt_double(tc.lr0));
  m.set("momentum", fmt_double(tc.momentum));
  m.set("batch", std::to_string(tc.batch_triplets));
  m.set("iters", std::to_string(tc.max_iters));
  m.set("step_size", std::to_string(tc.step_size));
  m.set("dropout", fmt_double(tc.dropout_rate));
  m.set("hidden", std::to_string(tc.init ? tc.init->hidden_dim() : tc.hidden_dim));
  m.add_input("candidates", o.candidates);
  m.add_input("embeddings", o.cfg.embeddings);
  if (images) m.add_input("features", o.cfg.features);
  if (!o.init.empty()) m.add_input("init", o.init);
  m.add_output(o.out);
  m.add_output(o.out + ".log.jsonl");
  m.write(o.out + ".manifest.json");
  nlohmann::json j = {{"model", o.out}, {"iterations", result.log.iterations}, {"train_items", train_items.size()}};
  if (!result.log.epochs.empty()) j["final_loss"] = result.log.epochs.back().mean_loss;
  std::cout << j.dump(2) << std::endl;
  return 0;
}

int run_eval(const Options& o) {
  require(o.model, "model");
  require(o.candidates, "candidates");
  const auto ckpt = load_checkpoint(o.model);
  if (!o.eval_mode.empty() && parse_input_mode(o.eval_mode) != ckpt.mode) {
    throw Error("config.invalid", "model was trained in mode " + std::string(to_string(ckpt.mode)), "mode");
  }
  const Metric metric = parse_metric(o.metric);
  const auto items = read_candidates(o.candidates);
  const Split split = parse_split(o.split);
  std::optional<FeatureStore> images;
  std::optional<EmbeddingTable> table;
  const auto sources = open_sources(o.cfg, ckpt.mode, images, table);
  const auto subset = of_split(items, split);
  if (subset.empty()) throw Error("model.no_data", "no " + o.split + "-split items to evaluate", "split");
  const auto res = evaluate(ckpt.params, subset, ckpt.mode, metric, sources);

  EvalRecord rec{ckpt.mode, decoy_set_of(o, items), metric, std::string(to_string(split)), res.accuracy, res.items};
  const std::string text = eval_json(rec);
  if (!o.out.empty()) write_file(o.out, text);
  std::cout << text;
  return 0;
}

int run_report(const Options& o) {
  if (o.results.empty()) throw Error("config.missing", "no evaluation records given", "results");
  std::vector<EvalRecord> records;
  for (const auto& path : o.results) records.push_back(parse_eval_json(read_file(path)));
  const ReportGrid grid = build_grid(records);
  if (!o.json_out.empty()) write_file(o.json_out, grid_json(grid));
  if (!o.text_out.empty()) write_file(o.text_out, grid_text(grid));
  std::cout << grid_text(grid);
  return 0;
}

void add_corpus_opts(CLI::App* sub, Options& o) {
  sub->add_option("--corpus", o.cfg.corpus, "Corpus file");
  sub->add_option("--format", o.cfg.corpus_format, "canonical-jsonl, vqa-style or v7w-style")->capture_default_str();
}

void add_train_opts(CLI::App* sub, Options& o) {
  auto& tc = o.cfg.train;
  sub->add_option("--lr", tc.lr0, "Initial learning rate")->capture_default_str();
  sub->add_option("--momentum", tc.momentum, "SGD momentum")->capture_default_str();
  sub->add_option("--batch", tc.batch_triplets, "Triplets per mini-batch")->capture_default_str();
  sub->add_option("--iters", tc.max_iters, "Training iterations")->capture_default_str();
  sub->add_option("--step-size", tc.step_size, "Iterations between /10 learning-rate drops (0: none)")
      ->capture_default_str();
  sub->add_option("--dropout", tc.dropout_rate, "Hidden-layer dropout rate")->capture_default_str();
  sub->add_option("--hidden", tc.hidden_dim, "Hidden units")->capture_default_str();
  sub->add_option("--init", o.init, "Warm-start checkpoint");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decoy generation, bias audit and answer-scoring baselines for multiple-choice visual QA"};
  app.set_config("--config", "", "TOML-style config file; command-line flags take precedence");
  app.require_subcommand(1);
  Options o;

  auto* ingest = app.add_subcommand("ingest", "Convert a dataset to canonical JSONL and validate it");
  ingest->add_option("--input", o.input, "Source dataset file")->required();
  ingest->add_option("--format", o.cfg.corpus_format, "canonical-jsonl, vqa-style or v7w-style")
      ->capture_default_str();
  ingest->add_option("--features", o.cfg.features, "Image feature store for the image check");
  ingest->add_option("--out", o.out, "Output JSONL")->required();
  ingest->add_flag("--drop-yes-no", o.drop_yes_no, "Drop yes/no questions");
  ingest->add_flag("--strict", o.strict, "Fail on validation violations");

  auto* validate_cmd = app.add_subcommand("validate", "Check a corpus for structural violations");
  add_corpus_opts(validate_cmd, o);
  validate_cmd->add_option("--features", o.cfg.features, "Image feature store");

  auto* audit = app.add_subcommand("audit", "Answer-prior bias audit");
  add_corpus_opts(audit, o);
  audit->add_option("--candidates", o.candidate_files, "Generated candidate files (repeatable)");
  audit->add_option("--seed", o.cfg.seed, "Seed for target placement in the original sets")->capture_default_str();
  audit->add_option("--top", o.top, "Most biased answers to list")->capture_default_str();
  audit->add_option("--out", o.out, "Write the report here instead of stdout");

  auto* gen = app.add_subcommand("gen", "Generate IoU/QoU decoys and assemble candidate sets");
  add_corpus_opts(gen, o);
  gen->add_option("--mode", o.gen_modes, "orig, iou, qou, iou+qou or all (repeatable)")->capture_default_str();
  gen->add_option("--k", o.cfg.gen.k, "Decoys per procedure")->capture_default_str();
  gen->add_option("--topn", o.cfg.gen.topn, "Similar questions to consider")->capture_default_str();
  gen->add_option("--threshold", o.cfg.gen.wup_threshold, "WUP ambiguity threshold")->capture_default_str();
  gen->add_option("--seed", o.cfg.gen.seed, "Random seed")->capture_default_str();
  gen->add_option("--fallback", o.fallback, "orig-decoys or frequent-targets")->capture_default_str();
  gen->add_option("--embeddings", o.cfg.embeddings, "Word vectors (text or binary cache)");
  gen->add_option("--taxonomy", o.cfg.taxonomy, "Taxonomy file or WordNet database directory");
  gen->add_option("--taxonomy-format", o.cfg.taxonomy_format, "edge-list or wordnet-db")->capture_default_str();
  gen->add_option("--out-dir", o.cfg.out_dir, "Output directory")->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "Train an answer-scoring MLP");
  train_cmd->add_option("--candidates", o.candidates, "Candidate sets (train split used, val for logging)");
  train_cmd->add_option("--mode", o.model_mode, "A, QA, IA or IQA")->capture_default_str();
  train_cmd->add_option("--decoy-set", o.decoy_set, "Decoy-set label (default: from the candidate file)");
  train_cmd->add_option("--seed", o.cfg.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--embeddings", o.cfg.embeddings, "Word vectors");
  train_cmd->add_option("--features", o.cfg.features, "Image feature store");
  train_cmd->add_option("--out", o.out, "Checkpoint path");
  add_train_opts(train_cmd, o);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on candidate sets");
  eval->add_option("--model", o.model, "Checkpoint");
  eval->add_option("--candidates", o.candidates, "Candidate sets");
  eval->add_option("--mode", o.eval_mode, "Expected model mode");
  eval->add_option("--decoy-set", o.decoy_set, "Decoy-set label (default: from the candidate file)");
  eval->add_option("--metric", o.metric, "plain or vqa-clipped")->capture_default_str();
  eval->add_option("--split", o.split, "Split to evaluate")->capture_default_str();
  eval->add_option("--seed", o.cfg.seed, "Unused; accepted for sweep scripts");
  eval->add_option("--embeddings", o.cfg.embeddings, "Word vectors");
  eval->add_option("--features", o.cfg.features, "Image feature store");
  eval->add_option("--out", o.out, "Write the evaluation record here");

  auto* report = app.add_subcommand("report", "Aggregate evaluation records into the ablation grid");
  report->add_option("results", o.results, "Evaluation JSON files");
  report->add_option("--json", o.json_out, "Grid as JSON");
  report->add_option("--text", o.text_out, "Grid as aligned text");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("cli.usage", "", e.what());
    return 2;
  }

  try {
    if (*ingest) return run_ingest(o);
    if (*validate_cmd) return run_validate(o);
    if (*audit) return run_audit_cmd(o);
    if (*gen) return run_gen(o);
    if (*train_cmd) return run_train(o);
    if (*eval) return run_eval(o);
    if (*report) return run_report(o);
  } catch (const Error& e) {
    print_error(e.code(), e.field(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", "", e.what());
    return 1;
  }
  return 0;
}
