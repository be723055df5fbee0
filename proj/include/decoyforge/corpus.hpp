#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace decoyforge {

enum class Split { train, val, test };

std::string_view to_string(Split split);
/// Throws Error("corpus.unknown_split") for labels other than train/val/test.
Split parse_split(std::string_view label);

// One image-question-target sample plus the dataset's own decoys.
struct TripletRecord {
  std::string id;
  std::string image_id;
  Split split = Split::train;
  std::string question;
  std::string target;
  std::vector<std::string> orig_decoys;
  std::optional<std::string> question_type;
  // Free-form human answers; only the VQA clipped metric reads them.
  std::vector<std::string> human_answers;

  bool operator==(const TripletRecord&) const = default;
};

class Corpus {
 public:
  Corpus() = default;
  /// Throws Error("corpus.duplicate_id") if two records share an id.
  explicit Corpus(std::vector<TripletRecord> records);

  const std::vector<TripletRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const TripletRecord& operator[](std::size_t i) const { return records_[i]; }

  std::optional<std::size_t> find(std::string_view triplet_id) const;

  /// Record positions sharing `image_id`, in corpus order. Empty if unknown.
  std::span<const std::size_t> records_for_image(std::string_view image_id) const;

  /// image_id -> triplet ids, grouped in corpus order.
  const std::map<std::string, std::vector<std::string>>& image_index() const noexcept {
    return image_index_;
  }

  std::size_t split_count(Split split) const noexcept;

 private:
  std::vector<TripletRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::map<std::string, std::vector<std::string>> image_index_;
  std::unordered_map<std::string, std::vector<std::size_t>> image_positions_;
  std::size_t split_counts_[3] = {0, 0, 0};
};

enum class CorpusFormat { canonical_jsonl, vqa_style, v7w_style };

CorpusFormat parse_corpus_format(std::string_view name);

/// Reads a corpus. Malformed input raises Error with the line number
/// (JSONL) or byte offset (whole-file JSON formats) in the message.
Corpus load_corpus(const std::string& path, CorpusFormat format);
Corpus parse_canonical_jsonl(std::istream& in);
Corpus parse_v7w(std::string_view json_text);
Corpus parse_vqa(std::string_view json_text);

void write_corpus(std::ostream& out, const Corpus& corpus);
void write_corpus(const std::string& path, const Corpus& corpus);

class FeatureStore;

struct Violation {
  enum class Kind { empty_target, decoy_equals_target, unresolvable_image };
  Kind kind;
  std::string triplet_id;
  std::string detail;
};

std::string_view to_string(Violation::Kind kind);

struct ValidationReport {
  std::vector<Violation> violations;
  bool clean() const noexcept { return violations.empty(); }
};

ValidationReport validate(const Corpus& corpus, const FeatureStore* features = nullptr);

/// Drops records whose normalized target is "yes" or "no".
Corpus filter_yes_no(const Corpus& corpus);

std::vector<TripletRecord> split_view(const Corpus& corpus, Split split);

}  // namespace decoyforge
