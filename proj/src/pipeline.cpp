#include "decoyforge/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "decoyforge/util.hpp"
#include "json.hpp"

namespace decoyforge {

using nlohmann::json;

Manifest::Manifest(std::string command, std::uint64_t seed) : command_(std::move(command)), seed_(seed) {}

void Manifest::set(const std::string& key, const std::string& value) { config_[key] = value; }

void Manifest::add_input(const std::string& role, const std::string& path) {
  if (!std::filesystem::is_directory(path)) {
    inputs_.emplace_back(role + ":" + path, sha256_hex(read_file(path)));
    return;
  }
  // Directory inputs (a WordNet database): digest of the sorted per-file digests.
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(path)) {
    if (e.is_regular_file()) files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  std::string listing;
  for (const auto& f : files) {
    listing += std::filesystem::path(f).filename().string() + " " + sha256_hex(read_file(f)) + "\n";
  }
  inputs_.emplace_back(role + ":" + path, sha256_hex(listing));
}

void Manifest::add_output(const std::string& path) {
  outputs_.emplace_back(std::filesystem::path(path).filename().string(), sha256_hex(read_file(path)));
}

std::string Manifest::config_hash() const {
  std::string text;
  for (const auto& [k, v] : config_) text += k + "=" + v + "\n";
  return sha256_hex(text);
}

std::string Manifest::json() const {
  nlohmann::json inputs = nlohmann::json::array(), outputs = nlohmann::json::array();
  for (const auto& [role_path, digest] : inputs_) {
    const auto colon = role_path.find(':');
    inputs.push_back({{"role", role_path.substr(0, colon)}, {"path", role_path.substr(colon + 1)}, {"sha256", digest}});
  }
  for (const auto& [name, digest] : outputs_) outputs.push_back({{"file", name}, {"sha256", digest}});
  nlohmann::json j = {{"schema_version", kSchemaVersion},
                      {"command", command_},
                      {"seed", seed_},
                      {"config", config_},
                      {"config_hash", config_hash()},
                      {"inputs", inputs},
                      {"outputs", outputs}};
  return j.dump(2) + "\n";
}

void Manifest::write(const std::string& path) const { write_file(path, json()); }

namespace {

std::vector<CandidateSet> by_split(const std::vector<CandidateSet>& items, Split split) {
  std::vector<CandidateSet> out;
  for (const auto& c : items) {
    if (c.split == split) out.push_back(c);
  }
  return out;
}

}  // namespace

AuditReport run_audit(const std::vector<std::pair<std::string, std::vector<CandidateSet>>>& sets, std::size_t top) {
  AuditReport report;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const auto& [name, items] = sets[s];
    auto fit = by_split(items, Split::train);
    auto score = by_split(items, Split::test);
    if (fit.empty()) fit = items;
    if (score.empty()) score = items;
    const BiasTable table = build_bias_table(fit, std::nullopt);
    AuditSection section;
    section.mode = name;
    section.rule = evaluate_bias_rule(score, table);
    section.stats = frequency_stats(items);
    section.fit_items = fit.size();
    report.sections.push_back(section);
    if (s == 0) report.most_biased = most_biased(table, top);
  }
  return report;
}

std::string audit_json(const AuditReport& report) {
  json sections = json::array();
  for (const auto& s : report.sections) {
    sections.push_back({{"mode", s.mode},
                        {"fit_items", s.fit_items},
                        {"rule",
                         {{"accuracy", s.rule.accuracy},
                          {"correct", s.rule.correct},
                          {"total", s.rule.total},
                          {"tied", s.rule.tied}}},
                        {"stats",
                         {{"unique_targets", s.stats.unique_targets},
                          {"mean_target_count", s.stats.mean_target_count},
                          {"mean_decoy_count", s.stats.mean_decoy_count},
                          {"mean_decoy_count_of_targets", s.stats.mean_decoy_count_of_targets},
                          {"chance_decoy_count", s.stats.chance_decoy_count}}}});
  }
  json biased = json::array();
  for (const auto& b : report.most_biased) {
    biased.push_back({{"answer", b.answer},
                      {"prior", b.prior},
                      {"target_count", b.counts.target_count},
                      {"decoy_count", b.counts.decoy_count}});
  }
  json j = {{"schema_version", kSchemaVersion}, {"modes", sections}, {"most_biased", biased}};
  return j.dump(2) + "\n";
}

std::string eval_json(const EvalRecord& rec) {
  json j = {{"schema_version", kSchemaVersion},
            {"model_mode", to_string(rec.mode)},
            {"decoy_set", rec.decoy_set},
            {"metric", to_string(rec.metric)},
            {"split", rec.split},
            {"accuracy", rec.accuracy},
            {"items", rec.items}};
  return j.dump(2) + "\n";
}

EvalRecord parse_eval_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    EvalRecord r;
    r.mode = parse_input_mode(j.at("model_mode").get<std::string>());
    r.decoy_set = j.at("decoy_set").get<std::string>();
    r.metric = parse_metric(j.at("metric").get<std::string>());
    r.split = j.value("split", std::string());
    r.accuracy = j.at("accuracy").get<double>();
    r.items = j.value("items", std::size_t{0});
    return r;
  } catch (const json::exception& e) {
    throw Error("report.malformed", std::string("bad evaluation record: ") + e.what());
  }
}

std::optional<double> ReportGrid::at(InputMode mode, const std::string& decoy_set) const {
  auto it = cells.find({mode, decoy_set});
  if (it == cells.end()) return std::nullopt;
  return it->second;
}

namespace {

int decoy_set_rank(const std::string& name) {
  static const char* order[] = {"orig", "iou", "qou", "iou+qou", "all"};
  for (int i = 0; i < 5; ++i) {
    if (name == order[i]) return i;
  }
  return 5;
}

}  // namespace

std::string decoy_set_label(const std::string& name) {
  if (name == "orig") return "Orig";
  if (name == "iou") return "IoU";
  if (name == "qou") return "QoU";
  if (name == "iou+qou") return "IoU+QoU";
  if (name == "all") return "All";
  return name;
}

ReportGrid build_grid(std::span<const EvalRecord> records) {
  ReportGrid grid;
  for (const auto& r : records) {
    grid.cells[{r.mode, r.decoy_set}] = r.accuracy;
    if (std::find(grid.modes.begin(), grid.modes.end(), r.mode) == grid.modes.end()) grid.modes.push_back(r.mode);
    if (std::find(grid.decoy_sets.begin(), grid.decoy_sets.end(), r.decoy_set) == grid.decoy_sets.end()) {
      grid.decoy_sets.push_back(r.decoy_set);
    }
  }
  std::sort(grid.modes.begin(), grid.modes.end());
  std::sort(grid.decoy_sets.begin(), grid.decoy_sets.end(), [](const std::string& a, const std::string& b) {
    const int ra = decoy_set_rank(a), rb = decoy_set_rank(b);
    return ra != rb ? ra < rb : a < b;
  });
  return grid;
}

std::string grid_json(const ReportGrid& grid) {
  json rows = json::array();
  for (auto mode : grid.modes) {
    json cells = json::object();
    for (const auto& d : grid.decoy_sets) {
      const auto v = grid.at(mode, d);
      cells[d] = v ? json(*v) : json(nullptr);
    }
    rows.push_back({{"model", "MLP-" + std::string(to_string(mode))}, {"accuracy", cells}});
  }
  json j = {{"schema_version", kSchemaVersion}, {"decoy_sets", grid.decoy_sets}, {"rows", rows}};
  return j.dump(2) + "\n";
}

std::string grid_text(const ReportGrid& grid) {
  std::vector<std::string> header{"Method"};
  for (const auto& d : grid.decoy_sets) header.push_back(decoy_set_label(d));
  std::vector<std::vector<std::string>> table{header};
  for (auto mode : grid.modes) {
    std::vector<std::string> row{"MLP-" + std::string(to_string(mode))};
    for (const auto& d : grid.decoy_sets) {
      const auto v = grid.at(mode, d);
      if (!v) {
        row.push_back("-");
        continue;
      }
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(1) << *v * 100.0;
      row.push_back(cell.str());
    }
    table.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    for (std::size_t c = 0; c < table[r].size(); ++c) {
      if (c == 0) {
        out << std::left << std::setw(static_cast<int>(width[c])) << table[r][c];
      } else {
        out << "  " << std::right << std::setw(static_cast<int>(width[c])) << table[r][c];
      }
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
      out << std::string(total, '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace decoyforge
