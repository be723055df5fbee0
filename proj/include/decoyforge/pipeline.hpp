#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "decoyforge/audit.hpp"
#include "decoyforge/decoygen.hpp"
#include "decoyforge/model.hpp"

namespace decoyforge {

inline constexpr int kSchemaVersion = 1;

// Paths and settings shared by the CLI stages.
struct PipelineConfig {
  std::string corpus;
  std::string corpus_format = "canonical-jsonl";
  std::string embeddings;
  std::string taxonomy;
  std::string taxonomy_format = "edge-list";
  std::string features;
  std::string out_dir = ".";
  DecoyGenConfig gen;
  TrainConfig train;
  Metric metric = Metric::plain;
  std::uint64_t seed = 0;
};

// Run record written next to every artifact. Holds no timestamps or
// absolute output paths, so identical runs give identical manifests.
class Manifest {
 public:
  Manifest(std::string command, std::uint64_t seed);

  void set(const std::string& key, const std::string& value);
  /// Records the SHA-256 of an input file.
  void add_input(const std::string& role, const std::string& path);
  /// Records an output by file name with the digest of its contents.
  void add_output(const std::string& path);

  /// SHA-256 over the sorted "key=value" lines.
  std::string config_hash() const;
  std::string json() const;
  void write(const std::string& path) const;

 private:
  std::string command_;
  std::uint64_t seed_;
  std::map<std::string, std::string> config_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::pair<std::string, std::string>> outputs_;
};

struct AuditSection {
  std::string mode;
  BiasRuleResult rule;
  FrequencyStats stats;
  std::size_t fit_items = 0;
};

// Bias audit of one or more candidate collections. The answer prior is fit
// on the train split and scored on test (falling back to all items when a
// split is empty).
struct AuditReport {
  std::vector<AuditSection> sections;
  std::vector<BiasedAnswer> most_biased;
};

AuditReport run_audit(const std::vector<std::pair<std::string, std::vector<CandidateSet>>>& sets,
                      std::size_t top = 20);
std::string audit_json(const AuditReport& report);

struct EvalRecord {
  InputMode mode = InputMode::IQA;
  std::string decoy_set;
  Metric metric = Metric::plain;
  std::string split;
  double accuracy = 0.0;
  std::size_t items = 0;
};

std::string eval_json(const EvalRecord& rec);
/// Throws Error("report.malformed") on a bad record.
EvalRecord parse_eval_json(const std::string& text);

// Accuracy grid, rows = model modes A/QA/IA/IQA, columns = decoy sets in
// orig/iou/qou/iou+qou/all order. Later records overwrite earlier ones.
struct ReportGrid {
  std::vector<InputMode> modes;
  std::vector<std::string> decoy_sets;
  std::map<std::pair<InputMode, std::string>, double> cells;

  std::optional<double> at(InputMode mode, const std::string& decoy_set) const;
};

ReportGrid build_grid(std::span<const EvalRecord> records);
std::string grid_json(const ReportGrid& grid);
std::string grid_text(const ReportGrid& grid);

/// Display label for a decoy-set name ("iou+qou" -> "IoU+QoU").
std::string decoy_set_label(const std::string& name);

}  // namespace decoyforge
