#include "decoyforge/corpus.hpp"

#include <fstream>
#include <sstream>

#include "decoyforge/feature_store.hpp"
#include "decoyforge/text.hpp"
#include "decoyforge/util.hpp"
#include "json.hpp"

namespace decoyforge {

using nlohmann::json;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view label) {
  if (label == "train") return Split::train;
  if (label == "val" || label == "validation") return Split::val;
  if (label == "test") return Split::test;
  throw Error("corpus.unknown_split", "unknown split label '" + std::string(label) + "'", "split");
}

Corpus::Corpus(std::vector<TripletRecord> records) : records_(std::move(records)) {
  by_id_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (!by_id_.emplace(r.id, i).second) {
      throw Error("corpus.duplicate_id", "duplicate triplet id '" + r.id + "'", r.id);
    }
    image_index_[r.image_id].push_back(r.id);
    image_positions_[r.image_id].push_back(i);
    ++split_counts_[static_cast<int>(r.split)];
  }
}

std::optional<std::size_t> Corpus::find(std::string_view triplet_id) const {
  auto it = by_id_.find(std::string(triplet_id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::span<const std::size_t> Corpus::records_for_image(std::string_view image_id) const {
  auto it = image_positions_.find(std::string(image_id));
  if (it == image_positions_.end()) return {};
  return it->second;
}

std::size_t Corpus::split_count(Split split) const noexcept {
  return split_counts_[static_cast<int>(split)];
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "canonical-jsonl" || name == "jsonl") return CorpusFormat::canonical_jsonl;
  if (name == "vqa-style" || name == "vqa") return CorpusFormat::vqa_style;
  if (name == "v7w-style" || name == "v7w") return CorpusFormat::v7w_style;
  throw Error("config.invalid", "unknown corpus format '" + std::string(name) + "'", "format");
}

namespace {

std::string id_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error("corpus.malformed", "id must be a string or integer");
}

std::vector<std::string> string_list(const json& v, const char* field) {
  if (v.is_null()) return {};
  if (!v.is_array()) throw Error("corpus.malformed", std::string(field) + " must be an array", field);
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_string()) throw Error("corpus.malformed", std::string(field) + " entries must be strings", field);
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::string required_string(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_string()) {
    throw Error("corpus.malformed", std::string("missing string field \"") + field + "\"", field);
  }
  return it->get<std::string>();
}

TripletRecord record_from_canonical(const json& j) {
  if (!j.is_object()) throw Error("corpus.malformed", "record must be a JSON object");
  TripletRecord r;
  if (!j.contains("id")) throw Error("corpus.malformed", "missing field \"id\"", "id");
  r.id = id_string(j.at("id"));
  if (!j.contains("image_id")) throw Error("corpus.malformed", "missing field \"image_id\"", "image_id");
  r.image_id = id_string(j.at("image_id"));
  r.split = parse_split(required_string(j, "split"));
  r.question = required_string(j, "question");
  r.target = required_string(j, "target");
  if (auto it = j.find("decoys"); it != j.end()) r.orig_decoys = string_list(*it, "decoys");
  if (auto it = j.find("qtype"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw Error("corpus.malformed", "qtype must be a string", "qtype");
    r.question_type = it->get<std::string>();
  }
  if (auto it = j.find("human_answers"); it != j.end()) {
    r.human_answers = string_list(*it, "human_answers");
  }
  return r;
}

json parse_whole(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("corpus.malformed", "JSON parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

// Drops decoys whose normalized form equals the target; the datasets list the
// target among "multiple_choices" in some releases and not in others.
std::vector<std::string> decoys_without_target(const std::vector<std::string>& choices,
                                               const std::string& target) {
  const std::string t = normalize_answer(target);
  std::vector<std::string> out;
  for (const auto& c : choices) {
    if (normalize_answer(c) != t) out.push_back(c);
  }
  return out;
}

}  // namespace

Corpus parse_canonical_jsonl(std::istream& in) {
  std::vector<TripletRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      records.push_back(record_from_canonical(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error("corpus.malformed", "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what(), e.field());
    }
  }
  return Corpus(std::move(records));
}

// Visual7W "telling" layout: {"images": [{"image_id", "split",
// "qa_pairs": [{"qa_id", "question", "answer", "multiple_choices", "type"}]}]}
Corpus parse_v7w(std::string_view json_text) {
  const json doc = parse_whole(json_text);
  if (!doc.contains("images") || !doc["images"].is_array()) {
    throw Error("corpus.malformed", "v7w-style input needs an \"images\" array", "images");
  }
  std::vector<TripletRecord> records;
  std::size_t image_no = 0;
  for (const auto& image : doc["images"]) {
    ++image_no;
    try {
      const std::string image_id = id_string(image.at("image_id"));
      const Split split = parse_split(required_string(image, "split"));
      for (const auto& qa : image.at("qa_pairs")) {
        TripletRecord r;
        r.id = id_string(qa.at("qa_id"));
        r.image_id = image_id;
        r.split = split;
        r.question = required_string(qa, "question");
        r.target = required_string(qa, "answer");
        r.orig_decoys = decoys_without_target(
            string_list(qa.value("multiple_choices", json::array()), "multiple_choices"), r.target);
        if (auto it = qa.find("type"); it != qa.end() && it->is_string()) r.question_type = it->get<std::string>();
        records.push_back(std::move(r));
      }
    } catch (const json::exception& e) {
      throw Error("corpus.malformed", "image entry " + std::to_string(image_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), "image entry " + std::to_string(image_no) + ": " + e.what(), e.field());
    }
  }
  return Corpus(std::move(records));
}

// VQA layout with the question and annotation files merged into one object:
// {"data_subtype": "train2014", "questions": [{"question_id", "image_id",
// "question", "multiple_choices"}], "annotations": [{"question_id",
// "multiple_choice_answer", "answers": [{"answer"}], "question_type"}]}.
// "split" may replace data_subtype.
Corpus parse_vqa(std::string_view json_text) {
  const json doc = parse_whole(json_text);
  if (!doc.contains("questions") || !doc.contains("annotations")) {
    throw Error("corpus.malformed", "vqa-style input needs \"questions\" and \"annotations\"");
  }
  Split split = Split::train;
  if (auto it = doc.find("split"); it != doc.end()) {
    split = parse_split(it->get<std::string>());
  } else if (auto st = doc.find("data_subtype"); st != doc.end()) {
    const std::string sub = st->get<std::string>();
    if (sub.rfind("train", 0) == 0) split = Split::train;
    else if (sub.rfind("val", 0) == 0) split = Split::val;
    else if (sub.rfind("test", 0) == 0) split = Split::test;
    else split = parse_split(sub);
  }

  std::unordered_map<std::string, const json*> annotations;
  for (const auto& a : doc["annotations"]) {
    annotations[id_string(a.at("question_id"))] = &a;
  }

  std::vector<TripletRecord> records;
  std::size_t q_no = 0;
  for (const auto& q : doc["questions"]) {
    ++q_no;
    try {
      TripletRecord r;
      r.id = id_string(q.at("question_id"));
      r.image_id = id_string(q.at("image_id"));
      r.split = split;
      r.question = required_string(q, "question");
      auto ann = annotations.find(r.id);
      if (ann == annotations.end()) {
        throw Error("corpus.malformed", "no annotation for question " + r.id, r.id);
      }
      const json& a = *ann->second;
      r.target = required_string(a, "multiple_choice_answer");
      if (auto it = a.find("answers"); it != a.end()) {
        for (const auto& h : *it) {
          r.human_answers.push_back(h.is_string() ? h.get<std::string>() : h.at("answer").get<std::string>());
        }
      }
      if (auto it = a.find("question_type"); it != a.end() && it->is_string()) {
        r.question_type = it->get<std::string>();
      }
      r.orig_decoys = decoys_without_target(
          string_list(q.value("multiple_choices", json::array()), "multiple_choices"), r.target);
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error("corpus.malformed", "question entry " + std::to_string(q_no) + ": " + e.what());
    }
  }
  return Corpus(std::move(records));
}

Corpus load_corpus(const std::string& path, CorpusFormat format) {
  switch (format) {
    case CorpusFormat::canonical_jsonl: {
      std::ifstream in(path);
      if (!in) throw Error("io.open", "cannot open '" + path + "'", path);
      return parse_canonical_jsonl(in);
    }
    case CorpusFormat::v7w_style: return parse_v7w(read_file(path));
    case CorpusFormat::vqa_style: return parse_vqa(read_file(path));
  }
  throw Error("config.invalid", "unknown corpus format", "format");
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& r : corpus.records()) {
    json j = {{"id", r.id},
              {"image_id", r.image_id},
              {"split", to_string(r.split)},
              {"question", r.question},
              {"target", r.target},
              {"decoys", r.orig_decoys}};
    if (r.question_type) j["qtype"] = *r.question_type;
    if (!r.human_answers.empty()) j["human_answers"] = r.human_answers;
    out << j.dump() << '\n';
  }
}

void write_corpus(const std::string& path, const Corpus& corpus) {
  std::ostringstream ss;
  write_corpus(ss, corpus);
  write_file(path, ss.str());
}

std::string_view to_string(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::empty_target: return "empty_target";
    case Violation::Kind::decoy_equals_target: return "decoy_equals_target";
    case Violation::Kind::unresolvable_image: return "unresolvable_image";
  }
  return "unknown";
}

ValidationReport validate(const Corpus& corpus, const FeatureStore* features) {
  ValidationReport report;
  for (const auto& r : corpus.records()) {
    const std::string target = normalize_answer(r.target);
    if (target.empty()) {
      report.violations.push_back({Violation::Kind::empty_target, r.id, "target normalizes to empty"});
    } else {
      for (const auto& d : r.orig_decoys) {
        if (normalize_answer(d) == target) {
          report.violations.push_back({Violation::Kind::decoy_equals_target, r.id, "decoy \"" + d + "\""});
        }
      }
    }
  }
  if (features) {
    for (const auto& [image_id, ids] : corpus.image_index()) {
      if (!features->contains(image_id)) {
        report.violations.push_back(
            {Violation::Kind::unresolvable_image, ids.front(), "image_id \"" + image_id + "\""});
      }
    }
  }
  return report;
}

Corpus filter_yes_no(const Corpus& corpus) {
  std::vector<TripletRecord> kept;
  for (const auto& r : corpus.records()) {
    const std::string t = normalize_answer(r.target);
    if (t != "yes" && t != "no") kept.push_back(r);
  }
  return Corpus(std::move(kept));
}

std::vector<TripletRecord> split_view(const Corpus& corpus, Split split) {
  std::vector<TripletRecord> out;
  for (const auto& r : corpus.records()) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

}  // namespace decoyforge
