#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "quantconn/experiments.hpp"

using namespace qc;

TEST_CASE("config parsing: schema versioning and fail-fast unknown keys") {
  auto cfg = parse_config(R"({"version":1,"experiment":"E7","seed":7,"walks":1000,
                              "thresholds":{"A":16.0,"lambda":0.05}})");
  CHECK(cfg.experiment == "E7");
  CHECK(cfg.seed == 7);
  CHECK(cfg.walks == 1000);
  CHECK(cfg.A == 16.0);
  CHECK(cfg.lambda == 0.05);
  CHECK(cfg.theta == 0.25);  // default preserved

  CHECK_THROWS_AS(parse_config(R"({"experiment":"E7","bogus":1})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"thresholds":{"zeta":1}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"version":9})"), std::invalid_argument);

  // round trip through the canonical form
  auto again = parse_config(config_to_json(cfg));
  CHECK(config_to_json(again) == config_to_json(cfg));
}

TEST_CASE("unknown experiment lists the valid names") {
  ExperimentConfig cfg;
  cfg.experiment = "E99";
  try {
    run_experiment(cfg);
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("E1") != std::string::npos);
    CHECK(msg.find("E7") != std::string::npos);
  }
}

TEST_CASE("E7 report: records, round trip, csv, reproducibility") {
  ExperimentConfig cfg;
  cfg.experiment = "E7";
  auto rep = run_experiment(cfg);
  CHECK(rep.all_pass);
  REQUIRE(!rep.records.empty());

  // json round trip is the identity on the canonical form
  auto text = report_to_json(rep);
  auto back = report_from_json(text);
  CHECK(report_to_json(back) == text);

  // csv row count equals the number of metric records
  auto csv = report_to_csv(rep);
  int rows = -1;  // exclude the header
  for (char ch : csv)
    if (ch == '\n') ++rows;
  CHECK(rows == static_cast<int>(rep.records.size()));

  // byte-identical reruns
  auto rep2 = run_experiment(cfg);
  CHECK(report_to_json(rep2) == text);

  // svg: one polyline per series (one per catalog pair here)
  auto svg = report_to_svg(rep);
  size_t count = 0, pos = 0;
  while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
    ++count;
    pos += 9;
  }
  CHECK(count == rep.series.size());
  CHECK(count == 5);
}
