#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "peerol/sim.hpp"

namespace peerol {

// Structured configuration mirroring ExperimentSpec field for field.
// Parsing is strict: unknown keys are rejected with their JSON path, and
// every reported problem carries the offending path.

struct OutputConfig {
  std::string trace_path = "trace.csv";
  std::string summary_path = "summary.json";
};

struct ConfigDocument {
  ExperimentSpec spec;
  OutputConfig output;
  std::uint64_t hash = 0;  // FNV-1a over the canonical serialized form
};

namespace cfg_detail {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
  throw ConfigurationError(path + ": " + msg);
}

inline void require_keys(const json& obj, const std::string& path,
                         const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& item : obj.items()) {
    if (!allowed.contains(item.key())) {
      fail(path + "/" + item.key(), "unknown key");
    }
  }
}

inline double get_number(const json& obj, const std::string& path,
                         const std::string& key) {
  if (!obj.contains(key)) fail(path + "/" + key, "missing required number");
  const json& v = obj.at(key);
  if (!v.is_number()) fail(path + "/" + key, "expected a number");
  return v.get<double>();
}

inline double get_number_or(const json& obj, const std::string& path,
                            const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) fail(path + "/" + key, "expected a number");
  return v.get<double>();
}

inline std::string get_string(const json& obj, const std::string& path,
                              const std::string& key) {
  if (!obj.contains(key)) fail(path + "/" + key, "missing required string");
  const json& v = obj.at(key);
  if (!v.is_string()) fail(path + "/" + key, "expected a string");
  return v.get<std::string>();
}

inline std::vector<double> get_number_list(const json& obj,
                                           const std::string& path,
                                           const std::string& key) {
  if (!obj.contains(key)) fail(path + "/" + key, "missing required array");
  const json& v = obj.at(key);
  if (!v.is_array() || v.empty()) {
    fail(path + "/" + key, "expected a nonempty array of numbers");
  }
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) fail(path + "/" + key, "expected numbers only");
    out.push_back(x.get<double>());
  }
  return out;
}

template <typename Fn>
inline auto with_path(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigurationError& e) {
    std::string what = e.what();
    if (what.rfind('/', 0) == 0) throw;  // already carries a path
    fail(path, what);
  }
}

inline WorldModel parse_world(const json& obj, const std::string& path) {
  const std::string kind = get_string(obj, path, "kind");
  if (kind == "constant") {
    require_keys(obj, path, {"kind", "p"});
    return with_path(path, [&] {
      return WorldModel::constant(get_number(obj, path, "p"));
    });
  }
  if (kind == "iid_uniform") {
    require_keys(obj, path, {"kind", "lo", "hi"});
    return with_path(path, [&] {
      return WorldModel::iid_uniform(get_number_or(obj, path, "lo", 0.0),
                                     get_number_or(obj, path, "hi", 1.0));
    });
  }
  if (kind == "drift") {
    require_keys(obj, path, {"kind", "start", "end"});
    return with_path(path, [&] {
      return WorldModel::drift(get_number(obj, path, "start"),
                               get_number(obj, path, "end"));
    });
  }
  if (kind == "periodic") {
    require_keys(obj, path, {"kind", "values", "period"});
    return with_path(path, [&] {
      return WorldModel::periodic(
          get_number_list(obj, path, "values"),
          static_cast<std::size_t>(get_number_or(obj, path, "period", 0.0)));
    });
  }
  fail(path + "/kind", "unknown world kind '" + kind + "'");
}

inline ExpertModel parse_expert(const json& obj, const std::string& path) {
  const std::string kind = get_string(obj, path, "kind");
  if (kind == "oracle") {
    require_keys(obj, path, {"kind"});
    return ExpertModel::oracle();
  }
  if (kind == "perturbed") {
    require_keys(obj, path, {"kind", "sigma"});
    return with_path(path, [&] {
      return ExpertModel::perturbed(get_number(obj, path, "sigma"));
    });
  }
  if (kind == "constant_bias") {
    require_keys(obj, path, {"kind", "offset"});
    return with_path(path, [&] {
      return ExpertModel::constant_bias(get_number(obj, path, "offset"));
    });
  }
  if (kind == "contrarian") {
    require_keys(obj, path, {"kind"});
    return ExpertModel::contrarian();
  }
  if (kind == "binary_skill") {
    require_keys(obj, path, {"kind", "accuracy"});
    return with_path(path, [&] {
      return ExpertModel::binary_skill(get_number(obj, path, "accuracy"));
    });
  }
  fail(path + "/kind", "unknown expert kind '" + kind + "'");
}

inline NoiseChannel parse_channel(const json& obj, const std::string& path) {
  const std::string kind = get_string(obj, path, "kind");
  if (kind == "symmetric") {
    require_keys(obj, path, {"kind", "eta"});
    return with_path(path, [&] {
      return NoiseChannel::symmetric(get_number(obj, path, "eta"));
    });
  }
  if (kind == "asymmetric") {
    require_keys(obj, path, {"kind", "eta0", "eta1"});
    return with_path(path, [&] {
      return NoiseChannel::asymmetric(get_number(obj, path, "eta0"),
                                      get_number(obj, path, "eta1"));
    });
  }
  if (kind == "time_varying") {
    require_keys(obj, path, {"kind", "values", "period"});
    return with_path(path, [&] {
      return NoiseChannel::time_varying(
          get_number_list(obj, path, "values"),
          static_cast<std::size_t>(get_number_or(obj, path, "period", 0.0)));
    });
  }
  fail(path + "/kind", "unknown channel kind '" + kind + "'");
}

inline AggregationRule parse_aggregation(const json& obj,
                                         const std::string& path) {
  const std::string kind = get_string(obj, path, "kind");
  if (kind == "majority") {
    require_keys(obj, path, {"kind", "threshold"});
    return with_path(path, [&] {
      return AggregationRule::majority(
          get_number_or(obj, path, "threshold", 0.5));
    });
  }
  if (kind == "product_likelihood") {
    require_keys(obj, path, {"kind"});
    return AggregationRule::product_likelihood();
  }
  if (kind == "channel") {
    require_keys(obj, path, {"kind"});
    AggregationRule r;
    r.kind = AggregationRule::Kind::channel;  // noise filled from /channel
    return r;
  }
  fail(path + "/kind", "unknown aggregation kind '" + kind + "'");
}

inline PeerScoreSpec parse_score(const json& obj, const std::string& path) {
  require_keys(obj, path, {"base_loss", "correction", "flips"});
  PeerScoreSpec score;
  if (obj.contains("base_loss")) {
    const json& bl = obj.at("base_loss");
    if (!bl.is_string() || bl.get<std::string>() != "squared") {
      fail(path + "/base_loss",
           "only 'squared' is configurable; savage losses are library-level");
    }
  }
  if (!obj.contains("correction")) fail(path + "/correction", "missing");
  {
    const json& c = obj.at("correction");
    const std::string cpath = path + "/correction";
    const std::string kind = get_string(c, cpath, "kind");
    if (kind == "symmetric") {
      require_keys(c, cpath, {"kind", "eta"});
      score.correction = with_path(cpath, [&] {
        return NoiseCorrection::symmetric(get_number(c, cpath, "eta"));
      });
    } else if (kind == "asymmetric") {
      require_keys(c, cpath, {"kind", "eta0", "eta1"});
      score.correction = with_path(cpath, [&] {
        return NoiseCorrection::asymmetric(get_number(c, cpath, "eta0"),
                                           get_number(c, cpath, "eta1"));
      });
    } else if (kind == "estimated") {
      require_keys(c, cpath, {"kind"});
      score.correction = NoiseCorrection::estimated();
    } else {
      fail(cpath + "/kind", "unknown correction kind '" + kind + "'");
    }
  }
  if (obj.contains("flips")) {
    const json& f = obj.at("flips");
    const std::string fpath = path + "/flips";
    const std::string kind = get_string(f, fpath, "kind");
    if (kind == "none") {
      require_keys(f, fpath, {"kind"});
      score.flips = FlipPolicy::none();
    } else if (kind == "symmetrize") {
      require_keys(f, fpath, {"kind"});
      score.flips = FlipPolicy::symmetrize();
    } else if (kind == "homogenize") {
      require_keys(f, fpath, {"kind", "flip_prob"});
      score.flips = with_path(fpath, [&] {
        return FlipPolicy::homogenize(get_number(f, fpath, "flip_prob"));
      });
    } else {
      fail(fpath + "/kind", "unknown flips kind '" + kind + "'");
    }
  }
  return score;
}

inline EstimatorChoice parse_estimator(const json& obj,
                                       const std::string& path) {
  const std::string kind = get_string(obj, path, "kind");
  if (kind == "none") {
    require_keys(obj, path, {"kind"});
    return EstimatorChoice::none();
  }
  if (kind == "importance_weighted") {
    require_keys(obj, path, {"kind", "p_star"});
    return with_path(path, [&] {
      return EstimatorChoice::importance_weighted(
          get_number(obj, path, "p_star"));
    });
  }
  if (kind == "two_group") {
    require_keys(obj, path, {"kind"});
    return EstimatorChoice::two_group();
  }
  fail(path + "/kind", "unknown estimator kind '" + kind + "'");
}

}  // namespace cfg_detail

inline ConfigDocument parse_config(const nlohmann::json& doc) {
  using cfg_detail::fail;
  using cfg_detail::get_number;
  using cfg_detail::get_number_or;
  using cfg_detail::get_string;
  using cfg_detail::require_keys;

  require_keys(doc, "", {"world", "horizon", "experts", "aggregation",
                         "channel", "score", "estimator", "learner", "bounds",
                         "seed", "output"});

  ConfigDocument out;
  ExperimentSpec& spec = out.spec;

  if (!doc.contains("world")) fail("/world", "missing");
  spec.world = cfg_detail::parse_world(doc.at("world"), "/world");

  if (!doc.contains("horizon") || !doc.at("horizon").is_number_integer()) {
    fail("/horizon", "missing required integer");
  }
  spec.horizon = doc.at("horizon").get<long>();

  if (!doc.contains("experts") || !doc.at("experts").is_array() ||
      doc.at("experts").empty()) {
    fail("/experts", "expected a nonempty array");
  }
  int idx = 0;
  for (const auto& e : doc.at("experts")) {
    spec.experts.push_back(
        cfg_detail::parse_expert(e, "/experts/" + std::to_string(idx)));
    ++idx;
  }

  if (!doc.contains("aggregation")) fail("/aggregation", "missing");
  spec.aggregation =
      cfg_detail::parse_aggregation(doc.at("aggregation"), "/aggregation");

  if (doc.contains("channel") && !doc.at("channel").is_null()) {
    spec.channel = cfg_detail::parse_channel(doc.at("channel"), "/channel");
  }
  if (spec.aggregation.kind == AggregationRule::Kind::channel &&
      !spec.channel.has_value()) {
    fail("/channel", "required when aggregation kind is 'channel'");
  }

  if (!doc.contains("score")) fail("/score", "missing");
  spec.score = cfg_detail::parse_score(doc.at("score"), "/score");

  if (doc.contains("estimator")) {
    spec.estimator =
        cfg_detail::parse_estimator(doc.at("estimator"), "/estimator");
  }

  if (doc.contains("learner")) {
    const auto& l = doc.at("learner");
    require_keys(l, "/learner", {"learning_rate"});
    if (l.contains("learning_rate") && !l.at("learning_rate").is_null()) {
      spec.learner.learning_rate = get_number(l, "/learner", "learning_rate");
    }
  }

  if (doc.contains("bounds")) {
    const auto& b = doc.at("bounds");
    require_keys(b, "/bounds", {"delta", "alpha", "delta_g"});
    spec.bounds.delta = get_number_or(b, "/bounds", "delta", 0.05);
    spec.bounds.alpha = get_number_or(b, "/bounds", "alpha", 2.1);
    spec.bounds.delta_g = get_number_or(b, "/bounds", "delta_g", 0.0);
  }

  if (!doc.contains("seed") || !doc.at("seed").is_number_integer() ||
      (doc.at("seed").is_number_integer() &&
       !doc.at("seed").is_number_unsigned() &&
       doc.at("seed").get<long long>() < 0)) {
    fail("/seed", "missing required nonnegative integer");
  }
  spec.seed = doc.at("seed").get<std::uint64_t>();

  if (doc.contains("output")) {
    const auto& o = doc.at("output");
    require_keys(o, "/output", {"trace", "summary"});
    if (o.contains("trace")) out.output.trace_path = get_string(o, "/output", "trace");
    if (o.contains("summary")) {
      out.output.summary_path = get_string(o, "/output", "summary");
    }
  }

  cfg_detail::with_path("/", [&] {
    spec.validate();
    return 0;
  });

  // nlohmann::json orders object keys, so dump() is canonical.
  out.hash = fnv1a64(doc.dump());
  return out;
}

inline ConfigDocument parse_config_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigurationError(std::string("JSON parse error: ") + e.what());
  }
  return parse_config(doc);
}

}  // namespace peerol
