#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "decoyforge/corpus.hpp"
#include "decoyforge/text.hpp"
#include "decoyforge/wordnet.hpp"

namespace decoyforge {

enum class FallbackPool { orig_decoys, frequent_targets };
enum class CandidateMode { orig, iou, qou, iou_qou, all };
enum class Provenance { target, orig, qou, iou, fallback };

std::string_view to_string(FallbackPool pool);
std::string_view to_string(CandidateMode mode);
std::string_view to_string(Provenance p);
FallbackPool parse_fallback_pool(std::string_view name);
CandidateMode parse_candidate_mode(std::string_view name);
Provenance parse_provenance(std::string_view name);

struct DecoyGenConfig {
  std::size_t k = 3;
  std::size_t topn = 10000;
  double wup_threshold = 0.9;
  std::uint64_t seed = 0;
  FallbackPool fallback = FallbackPool::orig_decoys;

  /// Throws Error("config.invalid") naming the offending field.
  void validate() const;
};

// A multiple-choice item. `slots` records which decoy source each entry
// fills (target/orig/iou/qou); it differs from `provenance` only for
// fallback entries, which stand in for a short source.
struct CandidateSet {
  std::string triplet_id;
  std::string image_id;
  std::string question;
  Split split = Split::train;
  CandidateMode mode = CandidateMode::orig;
  std::vector<std::string> candidates;
  std::size_t target_index = 0;
  std::vector<Provenance> provenance;
  std::vector<Provenance> slots;
  std::vector<std::string> human_answers;

  std::size_t decoy_count() const noexcept { return candidates.empty() ? 0 : candidates.size() - 1; }
  const std::string& target() const { return candidates.at(target_index); }
  bool operator==(const CandidateSet&) const = default;
};

/// True when, ignoring case, punctuation and whitespace, either string
/// contains the other.
bool string_filter(std::string_view target, std::string_view candidate);

bool is_ambiguous(std::string_view target, std::string_view candidate, const WupScorer& wup, double threshold);
bool is_ambiguous(std::string_view target, std::string_view candidate, const Taxonomy& tax, double threshold);

struct ProcedureStats {
  std::size_t examined = 0;
  std::size_t accepted = 0;
  std::size_t rejected_containment = 0;
  std::size_t rejected_wup = 0;
  std::size_t rejected_mutual = 0;
  std::size_t shortfall_records = 0;
  std::size_t fallback_slots = 0;

  std::size_t rejected() const noexcept { return rejected_containment + rejected_wup + rejected_mutual; }
  ProcedureStats& operator+=(const ProcedureStats& o);
};

struct GenerationReport {
  std::size_t records = 0;
  ProcedureStats qou;
  ProcedureStats iou;
  std::size_t fallback_orig = 0;
  std::size_t fallback_frequent = 0;
  std::size_t fallback_global = 0;
  std::size_t duplicates_removed = 0;

  GenerationReport& operator+=(const GenerationReport& o);
};

// Decoy generation over one corpus. Holds the question index, a memoized
// WUP scorer and the fallback pools; all methods are const and thread-safe.
class DecoyGenerator {
 public:
  DecoyGenerator(const Corpus& corpus, const EmbeddingTable& table, const Taxonomy& tax, DecoyGenConfig cfg);
  /// Without an embedding table; qou() then throws Error("decoygen.no_embeddings").
  DecoyGenerator(const Corpus& corpus, const Taxonomy& tax, DecoyGenConfig cfg);
  ~DecoyGenerator();

  const DecoyGenConfig& config() const noexcept { return cfg_; }
  const Corpus& corpus() const noexcept { return *corpus_; }
  const WupScorer& scorer() const noexcept { return *wup_; }

  /// Targets of the most similar questions elsewhere in the corpus, walked
  /// in rank order through both ambiguity checks, at most k.
  std::vector<std::string> qou(std::size_t record, ProcedureStats* stats = nullptr) const;

  /// Targets of other questions on the same image in seeded random order,
  /// same checks, at most k.
  std::vector<std::string> iou(std::size_t record, ProcedureStats* stats = nullptr) const;

  /// Tops `partial` up to `want` entries from the fallback pool, then the
  /// global target vocabulary. `taken` holds normalized answers already
  /// used in the candidate set. Throws Error("decoygen.exhausted") if the
  /// corpus cannot supply enough distinct unambiguous answers.
  std::vector<std::string> fill(std::size_t record, std::vector<std::string> partial, std::size_t want,
                                const std::vector<std::string>& taken, std::string_view purpose,
                                GenerationReport* report = nullptr) const;

  /// Candidate set for `mode`: duplicates across sources are dropped
  /// (priority target > orig > iou > qou), shortfalls refilled, and the
  /// target placed at a seeded random position.
  CandidateSet assemble(std::size_t record, const std::vector<std::string>& qou,
                        const std::vector<std::string>& iou, CandidateMode mode,
                        GenerationReport* report = nullptr) const;

  struct Result {
    std::vector<CandidateSet> items;
    GenerationReport report;
  };

  /// Generates decoys for every record and assembles each requested mode.
  /// Output order follows corpus order.
  std::vector<Result> remediate(const std::vector<CandidateMode>& modes) const;
  Result remediate(CandidateMode mode) const;

  const std::vector<std::string>& frequent_targets() const noexcept { return frequent_; }
  const std::vector<std::string>& target_vocabulary() const noexcept { return vocabulary_; }

 private:
  std::vector<std::string> filter_walk(std::size_t record, const std::vector<std::string>& pool,
                                       ProcedureStats* stats) const;

  const Corpus* corpus_;
  DecoyGenConfig cfg_;
  std::unique_ptr<QuestionIndex> index_;
  std::unique_ptr<WupScorer> wup_;
  std::vector<std::string> frequent_;
  std::vector<std::string> vocabulary_;
};

// Free-function forms over a transient generator.
std::vector<std::string> gen_qou_decoys(const TripletRecord& record, const Corpus& corpus,
                                        const EmbeddingTable& table, const Taxonomy& tax,
                                        const DecoyGenConfig& cfg);
std::vector<std::string> gen_iou_decoys(const TripletRecord& record, const Corpus& corpus, const Taxonomy& tax,
                                        const DecoyGenConfig& cfg);
std::vector<std::string> fill_fallback(const TripletRecord& record, const std::vector<std::string>& partial,
                                       const Corpus& corpus, const Taxonomy& tax, const DecoyGenConfig& cfg);
DecoyGenerator::Result remediate_corpus(const Corpus& corpus, const EmbeddingTable& table, const Taxonomy& tax,
                                        const DecoyGenConfig& cfg, CandidateMode mode);

/// The dataset's own candidate sets: original decoys (duplicates of the
/// target dropped) with the target placed exactly as assemble() would.
std::vector<CandidateSet> orig_candidate_sets(const Corpus& corpus, std::uint64_t seed);

void write_candidates(std::ostream& out, const std::vector<CandidateSet>& items);
void write_candidates(const std::string& path, const std::vector<CandidateSet>& items);
std::vector<CandidateSet> read_candidates(std::istream& in);
std::vector<CandidateSet> read_candidates(const std::string& path);

std::string report_json(const GenerationReport& report, CandidateMode mode, const DecoyGenConfig& cfg);

}  // namespace decoyforge
