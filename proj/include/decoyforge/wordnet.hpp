#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace decoyforge {

enum class PartOfSpeech { noun, adj, other };

struct Synset {
  std::string id;
  // Sort key used to break ties between equally deep subsumers. For WordNet
  // databases this is the "lemma.pos.NN" sense name; otherwise the id.
  std::string name;
  PartOfSpeech pos = PartOfSpeech::other;
  std::vector<std::string> lemmas;
  std::vector<std::size_t> hypernyms;
  // Shortest and longest hypernym path length; a synset without hypernyms
  // (a hierarchy root) has depth 1. The virtual root has depth 0.
  int depth = 0;
  int max_depth = 0;
};

// Input form of a synset before the graph is linked.
struct SynsetSpec {
  std::string id;
  PartOfSpeech pos = PartOfSpeech::other;
  std::vector<std::string> lemmas;
  std::vector<std::string> hypernym_ids;
  std::string name;  // defaults to id
};

// Hypernym DAG with a lemma index over NOUN and ADJ synsets.
//
// Synsets without hypernyms hang under an implicit virtual root (index 0,
// id "*ROOT*") that joins every sub-hierarchy, so any two synsets have a
// common subsumer.
class Taxonomy {
 public:
  static constexpr std::size_t kVirtualRoot = 0;

  /// Throws Error("taxonomy.dangling_parent"), ("taxonomy.cycle") or
  /// ("taxonomy.duplicate_id").
  static Taxonomy build(std::vector<SynsetSpec> specs);

  std::size_t size() const noexcept { return synsets_.size(); }
  const Synset& synset(std::size_t i) const { return synsets_[i]; }
  std::optional<std::size_t> find(std::string_view id) const;

  /// NOUN/ADJ synsets carrying `lemma` (lowercased), in insertion order.
  std::span<const std::size_t> lookup(std::string_view lemma) const;
  const std::unordered_map<std::string, std::vector<std::size_t>>& lemma_index() const noexcept {
    return lemma_index_;
  }

  /// Every ancestor of `s` including itself, with its shortest upward
  /// distance. The virtual root is not included.
  std::vector<std::pair<std::size_t, int>> ancestors(std::size_t s) const;

 private:
  std::vector<Synset> synsets_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::vector<std::size_t>> lemma_index_;
};

enum class TaxonomyFormat { edge_list, wordnet_db };

TaxonomyFormat parse_taxonomy_format(std::string_view name);

/// edge_list: a file of "id TAB pos TAB lemma,lemma TAB parent,parent" lines
/// ('#' comments allowed). wordnet_db: a directory with data.noun,
/// index.noun, data.adj and index.adj from a WordNet distribution.
Taxonomy load_taxonomy(const std::string& path, TaxonomyFormat format);
Taxonomy parse_edge_list(std::istream& in);
Taxonomy load_wordnet_db(const std::string& dir);

/// Wu-Palmer similarity of two synsets, in (0, 1].
double wup_synset(std::size_t a, std::size_t b, const Taxonomy& tax);

/// Max over NOUN/ADJ synset pairs; exact-match fallback when either word has none.
double wup_word(std::string_view w1, std::string_view w2, const Taxonomy& tax);

/// Max of the two directed products of per-word maxima; 0 for an empty side.
double wup_sequence(std::span<const std::string> s1, std::span<const std::string> s2, const Taxonomy& tax);

// Memoizing front end for wup_word / wup_sequence. Safe to share between
// threads; each shard is cleared when it reaches its share of `capacity`.
class WupScorer {
 public:
  explicit WupScorer(const Taxonomy& tax, std::size_t capacity = 1 << 20);

  double word(std::string_view w1, std::string_view w2) const;
  double sequence(std::span<const std::string> s1, std::span<const std::string> s2) const;

  const Taxonomy& taxonomy() const noexcept { return *tax_; }
  std::size_t hits() const;
  std::size_t misses() const;

 private:
  static constexpr std::size_t kShards = 16;
  struct Shard {
    mutable std::mutex mutex;
    std::unordered_map<std::string, double> values;
    std::size_t hits = 0;
    std::size_t misses = 0;
  };

  const Taxonomy* tax_;
  std::size_t shard_capacity_;
  mutable std::array<Shard, kShards> shards_;
};

}  // namespace decoyforge
