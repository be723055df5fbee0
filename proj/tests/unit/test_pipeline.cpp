#include <fstream>

#include "decoyforge/pipeline.hpp"
#include "decoyforge/util.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/tmpdir.hpp"

using namespace decoyforge;
using nlohmann::json;

TEST_CASE("manifest hashes inputs and outputs and has no timestamps") {
  TempDir dir("manifest");
  write_file(dir.file("in.txt"), "abc");
  write_file(dir.file("out.txt"), "");
  std::filesystem::create_directories(dir.path / "db");
  write_file(dir.file("db/b"), "2");
  write_file(dir.file("db/a"), "1");

  Manifest m("gen", 7);
  m.set("k", "3");
  m.set("a", "x");
  m.add_input("corpus", dir.file("in.txt"));
  m.add_input("taxonomy", dir.file("db"));
  m.add_output(dir.file("out.txt"));
  const auto j = json::parse(m.json());
  CHECK(j["schema_version"] == kSchemaVersion);
  CHECK(j["command"] == "gen");
  CHECK(j["seed"] == 7);
  CHECK(j["inputs"][0]["sha256"] == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(j["inputs"][1]["sha256"] == sha256_hex("a " + sha256_hex("1") + "\nb " + sha256_hex("2") + "\n"));
  CHECK(j["outputs"][0]["file"] == "out.txt");
  CHECK(m.config_hash() == sha256_hex("a=x\nk=3\n"));
  CHECK(m.json().find("time") == std::string::npos);

  Manifest same("gen", 7);
  same.set("a", "x");
  same.set("k", "3");
  CHECK(same.config_hash() == m.config_hash());
  CHECK_THROWS_AS(m.add_input("x", dir.file("missing")), Error);
}

TEST_CASE("evaluation records round trip") {
  EvalRecord r{InputMode::IA, "iou+qou", Metric::vqa_clipped, "test", 0.625, 80};
  const auto back = parse_eval_json(eval_json(r));
  CHECK(back.mode == InputMode::IA);
  CHECK(back.decoy_set == "iou+qou");
  CHECK(back.metric == Metric::vqa_clipped);
  CHECK(back.accuracy == 0.625);
  CHECK(back.items == 80);
  try {
    parse_eval_json("{\"decoy_set\":\"orig\"}");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "report.malformed");
  }
}

TEST_CASE("report grid ordering, missing cells and text layout") {
  const std::vector<EvalRecord> recs{{InputMode::IQA, "all", Metric::plain, "test", 0.5, 10},
                                     {InputMode::A, "orig", Metric::plain, "test", 0.9, 10},
                                     {InputMode::A, "iou+qou", Metric::plain, "test", 0.25, 10},
                                     {InputMode::A, "orig", Metric::plain, "test", 0.875, 10}};
  const auto g = build_grid(recs);
  CHECK(g.modes == std::vector<InputMode>{InputMode::A, InputMode::IQA});
  CHECK(g.decoy_sets == std::vector<std::string>{"orig", "iou+qou", "all"});
  CHECK(g.at(InputMode::A, "orig") == std::optional<double>(0.875));
  CHECK_FALSE(g.at(InputMode::IQA, "orig"));

  const auto j = json::parse(grid_json(g));
  CHECK(j["rows"][0]["model"] == "MLP-A");
  CHECK(j["rows"][1]["accuracy"]["orig"].is_null());
  CHECK(j["rows"][1]["accuracy"]["all"] == 0.5);

  const auto text = grid_text(g);
  CHECK(text.find("Method") != std::string::npos);
  CHECK(text.find("IoU+QoU") != std::string::npos);
  CHECK(text.find("87.5") != std::string::npos);
  CHECK(text.find("MLP-IQA") != std::string::npos);
  CHECK(text.find(" -") != std::string::npos);
  CHECK(decoy_set_label("qou") == "QoU");
  CHECK(decoy_set_label("custom") == "custom");
}

TEST_CASE("audit fits on train and scores on test") {
  auto make = [](std::string id, Split split, std::vector<std::string> c, std::size_t t) {
    CandidateSet s;
    s.triplet_id = std::move(id);
    s.split = split;
    s.candidates = std::move(c);
    s.target_index = t;
    return s;
  };
  const std::vector<CandidateSet> items{make("1", Split::train, {"a", "b"}, 0), make("2", Split::train, {"a", "c"}, 0),
                                        make("3", Split::test, {"b", "a"}, 1), make("4", Split::test, {"c", "b"}, 0)};
  const auto rep = run_audit({{"orig", items}, {"other", items}}, 2);
  REQUIRE(rep.sections.size() == 2);
  CHECK(rep.sections[0].fit_items == 2);
  CHECK(rep.sections[0].rule.total == 2);
  // Item 3 picks "a" (prior 1); item 4 ties b and c at 0 and picks c.
  CHECK(rep.sections[0].rule.correct == 2);
  CHECK(rep.most_biased.size() == 2);
  const auto j = json::parse(audit_json(rep));
  CHECK(j["modes"].size() == 2);
  CHECK(j["modes"][0]["rule"]["accuracy"] == 1.0);
}
