#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include <json.hpp>

#include "peerol/config.hpp"
#include "peerol/io.hpp"

using namespace peerol;
using nlohmann::json;

namespace {

json full_doc() {
  return json::parse(R"({
    "world": {"kind": "iid_uniform", "lo": 0.0, "hi": 1.0},
    "horizon": 500,
    "experts": [
      {"kind": "oracle"},
      {"kind": "perturbed", "sigma": 0.2},
      {"kind": "constant_bias", "offset": 0.3},
      {"kind": "contrarian"},
      {"kind": "binary_skill", "accuracy": 0.8}
    ],
    "aggregation": {"kind": "channel"},
    "channel": {"kind": "symmetric", "eta": 0.2},
    "score": {
      "base_loss": "squared",
      "correction": {"kind": "symmetric", "eta": 0.2},
      "flips": {"kind": "none"}
    },
    "estimator": {"kind": "none"},
    "learner": {"learning_rate": null},
    "bounds": {"delta": 0.05, "alpha": 2.1, "delta_g": 0.0},
    "seed": 7,
    "output": {"trace": "t.csv", "summary": "s.json"}
  })");
}

}  // namespace

TEST_CASE("a complete document parses into a runnable spec") {
  const ConfigDocument cfg = parse_config(full_doc());
  CHECK(cfg.spec.horizon == 500);
  CHECK(cfg.spec.experts.size() == 5);
  CHECK(cfg.spec.seed == 7);
  CHECK(cfg.spec.channel.has_value());
  CHECK(cfg.spec.channel->eta == 0.2);
  CHECK(cfg.output.trace_path == "t.csv");
  CHECK(cfg.output.summary_path == "s.json");
  CHECK_NOTHROW(run_experiment(cfg.spec));
}

TEST_CASE("unknown keys are rejected with their path") {
  json doc = full_doc();
  doc["extra_key"] = 1;
  CHECK_THROWS_WITH(parse_config(doc),
                    Catch::Matchers::ContainsSubstring("extra_key"));

  doc = full_doc();
  doc["world"]["speed"] = 2;
  CHECK_THROWS_WITH(parse_config(doc),
                    Catch::Matchers::ContainsSubstring("/world"));

  doc = full_doc();
  doc["score"]["correction"]["etaX"] = 0.1;
  CHECK_THROWS_WITH(parse_config(doc),
                    Catch::Matchers::ContainsSubstring("/score/correction"));
}

TEST_CASE("invalid field values carry their location") {
  json doc = full_doc();
  doc["horizon"] = 0;
  CHECK_THROWS_AS(parse_config(doc), ConfigurationError);

  doc = full_doc();
  doc["channel"]["eta"] = 0.7;
  CHECK_THROWS_WITH(parse_config(doc),
                    Catch::Matchers::ContainsSubstring("/channel"));

  doc = full_doc();
  doc["experts"] = json::array();
  CHECK_THROWS_WITH(parse_config(doc),
                    Catch::Matchers::ContainsSubstring("/experts"));

  doc = full_doc();
  doc["score"]["correction"] = {{"kind", "estimated"}};
  CHECK_THROWS_AS(parse_config(doc), ConfigurationError);

  doc = full_doc();
  doc.erase("seed");
  CHECK_THROWS_WITH(parse_config(doc),
                    Catch::Matchers::ContainsSubstring("/seed"));
}

TEST_CASE("channel aggregation without a channel is rejected") {
  json doc = full_doc();
  doc["channel"] = nullptr;
  CHECK_THROWS_WITH(parse_config(doc),
                    Catch::Matchers::ContainsSubstring("/channel"));
}

TEST_CASE("all kinds round-trip through the parser") {
  json doc = full_doc();
  doc["world"] = {{"kind", "periodic"}, {"values", {1.0, 1.0, 1.0, 0.0, 0.0}},
                  {"period", 5}};
  doc["aggregation"] = {{"kind", "majority"}, {"threshold", 0.5}};
  doc["channel"] = {{"kind", "time_varying"}, {"values", {0.1, 0.35}},
                    {"period", 2}};
  doc["score"]["correction"] = {{"kind", "asymmetric"}, {"eta0", 0.3},
                                {"eta1", 0.1}};
  doc["score"]["flips"] = {{"kind", "homogenize"}, {"flip_prob", 0.3}};
  doc["estimator"] = {{"kind", "importance_weighted"}, {"p_star", 0.25}};
  const ConfigDocument cfg = parse_config(doc);
  CHECK(cfg.spec.world.kind == WorldModel::Kind::periodic);
  CHECK(cfg.spec.aggregation.kind == AggregationRule::Kind::majority);
  CHECK(cfg.spec.channel->kind == NoiseChannel::Kind::time_varying);
  CHECK(cfg.spec.score.correction.kind == NoiseCorrection::Kind::asymmetric);
  CHECK(cfg.spec.score.flips.kind == FlipPolicy::Kind::homogenize);
  CHECK(cfg.spec.estimator.kind == EstimatorChoice::Kind::importance_weighted);
}

TEST_CASE("config hash is stable and sensitive") {
  const std::uint64_t h1 = parse_config(full_doc()).hash;
  const std::uint64_t h2 = parse_config(full_doc()).hash;
  CHECK(h1 == h2);
  json doc = full_doc();
  doc["seed"] = 8;
  CHECK(parse_config(doc).hash != h1);
}

TEST_CASE("seventeen significant digits round-trip doubles") {
  for (double x : {1.0 / 3.0, 0.1, 2.2250738585072014e-308, 0.42,
                   1.7976931348623157e308, 6.02214076e23}) {
    const std::string s = format_g17(x);
    CHECK(std::stod(s) == x);
  }
}

TEST_CASE("trace CSV has the documented shape") {
  ExperimentSpec spec = parse_config(full_doc()).spec;
  spec.horizon = 3;
  std::vector<TraceRecord> trace;
  run_experiment(spec, &trace);
  const std::string csv = trace_to_csv(trace, 5, false, false, false,
                                       0x1234abcdULL, 7);
  CHECK(csv.rfind("# config_hash=000000000001234abcd", 0) == std::string::npos);
  CHECK(csv.rfind("# config_hash=", 0) == 0);
  const std::size_t header_start = csv.find('\n') + 1;
  const std::size_t header_end = csv.find('\n', header_start);
  const std::string header = csv.substr(header_start, header_end - header_start);
  CHECK(header ==
        "t,p_t,y,y_hat,y_scored,chosen,s_0,s_1,s_2,s_3,s_4,l_0,l_1,l_2,l_3,l_4,"
        "weights_digest");
  // One line per round after the comment and header.
  int lines = 0;
  for (char c : csv) {
    if (c == '\n') ++lines;
  }
  CHECK(lines == 2 + 3);
}

TEST_CASE("summary JSON carries everything needed to recompute the bounds") {
  const ConfigDocument cfg = parse_config(full_doc());
  const RunSummary r = run_experiment(cfg.spec);
  const json j = summary_to_json(r, cfg.hash);
  for (const char* key :
       {"config_hash", "seed", "horizon", "n_experts", "regret", "peer_regret",
        "algo_true_loss", "a_star", "a_star_peer", "a_star_f", "a_star_g",
        "per_expert", "terminal_weights", "bounds", "measured", "estimator",
        "g_gap", "delta_g_event", "sigma_g_empirical"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["bounds"].contains("known_rate"));
  CHECK(j["bounds"].contains("sigma_g_formula"));
  CHECK(j["bounds"].contains("e_mart_g"));
  CHECK(j["bounds"].contains("online_bound"));
  CHECK(j["per_expert"]["true_loss"].size() == 5);
  // The regret is recomputable from the stored pieces.
  const double best = j["per_expert"]["true_loss"][j["a_star"].get<int>()];
  CHECK(j["regret"].get<double>() ==
        Catch::Approx(j["algo_true_loss"].get<double>() - best).margin(1e-9));
}
