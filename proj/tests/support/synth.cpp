#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "decoyforge/util.hpp"

namespace synth {

using namespace decoyforge;

std::string word(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
  return buf;
}

Taxonomy category_taxonomy(const std::vector<std::vector<std::string>>& categories) {
  std::ostringstream edges;
  edges << "root.n\tn\tentity\n";
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const auto g = word("grp", c);
    edges << g << ".n\tn\t" << g << "\troot.n\n";
    for (const auto& w : categories[c]) edges << w << ".n\tn\t" << w << "\t" << g << ".n\n";
  }
  std::istringstream in(edges.str());
  return parse_edge_list(in);
}

namespace {

// Random Gaussian word vectors, one per word.
void add_words(EmbeddingTable& table, const std::vector<std::string>& words, std::mt19937_64& rng) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> v(table.dim());
  for (const auto& w : words) {
    for (auto& x : v) x = normal(rng);
    table.add(w, v);
  }
}

std::vector<std::string> fillers(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(word("f", i));
  return out;
}

std::string question_text(const std::string& group, const std::vector<std::string>& filler, std::mt19937_64& rng) {
  std::string q = "what " + group;
  for (int i = 0; i < 3; ++i) q += " " + filler[uniform_index(rng, filler.size())];
  return q + " is this?";
}

}  // namespace

World biased_world(const BiasedOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  World w;
  for (std::size_t c = 0; c < opt.categories; ++c) {
    std::vector<std::string> cat;
    for (std::size_t i = 0; i < opt.per_category; ++i) cat.push_back(word("a", c * opt.per_category + i));
    w.categories.push_back(cat);
  }
  for (std::size_t i = 0; i < opt.decoy_vocabulary; ++i) w.decoy_vocabulary.push_back(word("d", i));
  std::vector<std::string> all_targets;
  for (const auto& c : w.categories) all_targets.insert(all_targets.end(), c.begin(), c.end());

  w.table = EmbeddingTable(opt.d_txt);
  add_words(w.table, all_targets, rng);
  add_words(w.table, w.decoy_vocabulary, rng);
  std::vector<std::string> groups;
  for (std::size_t c = 0; c < opt.categories; ++c) groups.push_back(word("grp", c));
  add_words(w.table, groups, rng);
  const auto filler = fillers(200);
  add_words(w.table, filler, rng);
  add_words(w.table, {"what", "is", "this"}, rng);
  w.taxonomy = category_taxonomy(w.categories);

  std::vector<TripletRecord> records;
  for (std::size_t img = 0; img < opt.images; ++img) {
    const auto image_id = word("img", img);
    const Split split = static_cast<double>(img) < static_cast<double>(opt.images) * (1.0 - opt.test_fraction)
                            ? Split::train
                            : Split::test;
    std::vector<std::size_t> picks;
    while (picks.size() < opt.per_image) {
      const std::size_t t = uniform_index(rng, all_targets.size());
      if (std::find(picks.begin(), picks.end(), t) == picks.end()) picks.push_back(t);
    }
    for (std::size_t q = 0; q < opt.per_image; ++q) {
      TripletRecord r;
      r.id = image_id + "_q" + std::to_string(q);
      r.image_id = image_id;
      r.split = split;
      r.target = all_targets[picks[q]];
      r.question = question_text(groups[picks[q] / opt.per_category], filler, rng);
      while (r.orig_decoys.size() < opt.orig_decoys) {
        const auto& d = w.decoy_vocabulary[uniform_index(rng, w.decoy_vocabulary.size())];
        if (std::find(r.orig_decoys.begin(), r.orig_decoys.end(), d) == r.orig_decoys.end()) {
          r.orig_decoys.push_back(d);
        }
      }
      records.push_back(std::move(r));
    }
  }
  w.corpus = Corpus(std::move(records));
  return w;
}

World planted_world(const PlantedOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  World w;
  for (std::size_t c = 0; c < opt.categories; ++c) {
    std::vector<std::string> cat;
    for (std::size_t i = 0; i < opt.per_category; ++i) cat.push_back(word("a", c * opt.per_category + i));
    w.categories.push_back(cat);
  }
  std::vector<std::string> all_targets;
  for (const auto& c : w.categories) all_targets.insert(all_targets.end(), c.begin(), c.end());
  w.table = EmbeddingTable(opt.d_txt);
  add_words(w.table, all_targets, rng);
  std::vector<std::string> groups;
  for (std::size_t c = 0; c < opt.categories; ++c) groups.push_back(word("grp", c));
  add_words(w.table, groups, rng);
  const auto filler = fillers(100);
  add_words(w.table, filler, rng);
  add_words(w.table, {"what", "is", "this"}, rng);
  w.taxonomy = category_taxonomy(w.categories);
  w.images = FeatureStore(opt.d_txt);
  std::normal_distribution<float> noise(0.0f, static_cast<float>(opt.image_noise));

  std::vector<TripletRecord> records;
  for (std::size_t img = 0; img < opt.images; ++img) {
    const auto image_id = word("img", img);
    const Split split = static_cast<double>(img) < static_cast<double>(opt.images) * (1.0 - opt.test_fraction)
                            ? Split::train
                            : Split::test;
    std::vector<std::size_t> cats(opt.categories);
    for (std::size_t c = 0; c < cats.size(); ++c) cats[c] = c;
    stable_shuffle(cats, rng);
    cats.resize(opt.objects);
    std::vector<float> feature(opt.d_txt, 0.0f);
    for (std::size_t o = 0; o < opt.objects; ++o) {
      const auto& target = w.categories[cats[o]][uniform_index(rng, opt.per_category)];
      const auto v = *w.table.lookup(target);
      float norm = 0.0f;
      for (float x : v) norm += x * x;
      norm = std::sqrt(norm);
      for (std::size_t d = 0; d < opt.d_txt; ++d) feature[d] += v[d] / norm;
      TripletRecord r;
      r.id = image_id + "_q" + std::to_string(o);
      r.image_id = image_id;
      r.split = split;
      r.target = target;
      r.question = question_text(groups[cats[o]], filler, rng);
      records.push_back(std::move(r));
    }
    for (auto& x : feature) x += noise(rng);
    w.images.add(image_id, feature);
  }
  w.corpus = Corpus(std::move(records));
  return w;
}

std::vector<Neighbor> brute_force_topn(const Corpus& corpus, std::size_t query, std::size_t n,
                                       const EmbeddingTable& table) {
  const auto qv = embed_avg(normalize(corpus[query].question), table);
  std::vector<Neighbor> all;
  if (qv.in_vocab_count == 0) return all;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (i == query || corpus[i].image_id == corpus[query].image_id) continue;
    const auto v = embed_avg(normalize(corpus[i].question), table);
    all.push_back({corpus[i].id, cosine(qv.values, v.values)});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.triplet_id < b.triplet_id;
  });
  if (all.size() > n) all.resize(n);
  return all;
}

InvariantReport check_invariants(const std::vector<CandidateSet>& items, const Corpus& corpus, const Taxonomy& tax,
                                 double threshold) {
  std::unordered_set<std::string> targets;
  for (const auto& r : corpus.records()) targets.insert(normalize_answer(r.target));
  InvariantReport rep;
  for (const auto& item : items) {
    ++rep.sets;
    const auto pos = corpus.find(item.triplet_id);
    if (!pos || item.target() != corpus[*pos].target) {
      ++rep.target_mismatch;
      continue;
    }
    std::set<std::string> seen;
    for (const auto& c : item.candidates) {
      if (!seen.insert(normalize_answer(c)).second) ++rep.duplicate_entries;
    }
    const auto same_image = corpus.records_for_image(item.image_id);
    for (std::size_t i = 0; i < item.candidates.size(); ++i) {
      const auto p = item.provenance[i];
      if (p == Provenance::target || p == Provenance::orig) continue;
      ++rep.decoys;
      const auto& d = item.candidates[i];
      if (p != Provenance::fallback && !targets.count(normalize_answer(d))) ++rep.non_neutral;
      if (p == Provenance::iou) {
        const bool found = std::any_of(same_image.begin(), same_image.end(), [&](std::size_t j) {
          return corpus[j].id != item.triplet_id && normalize_answer(corpus[j].target) == normalize_answer(d);
        });
        if (!found) ++rep.iou_foreign;
      }
      if (string_filter(item.target(), d)) ++rep.containment_violations;
      const auto a = normalize(item.target()), b = normalize(d);
      if (wup_sequence(a, b, tax) >= threshold) ++rep.wup_violations;
    }
  }
  return rep;
}

std::vector<CandidateSet> split_items(const std::vector<CandidateSet>& items, Split split) {
  std::vector<CandidateSet> out;
  for (const auto& c : items) {
    if (c.split == split) out.push_back(c);
  }
  return out;
}

}  // namespace synth
