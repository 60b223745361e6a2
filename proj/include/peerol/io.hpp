#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "peerol/sim.hpp"

namespace peerol {

// 17 significant digits round-trip doubles exactly.
inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Trace CSV: a provenance comment line, a fixed header, one line per round.
// The eta_hat column appears only when an estimator is active; flip columns
// only when the corresponding transform is active.
inline std::string trace_to_csv(const std::vector<TraceRecord>& trace, int n,
                                bool has_estimator, bool has_sym_flip,
                                bool has_hom_flip, std::uint64_t config_hash,
                                std::uint64_t seed) {
  std::string out;
  char head[96];
  std::snprintf(head, sizeof(head), "# config_hash=%016" PRIx64 " seed=%" PRIu64 "\n",
                config_hash, seed);
  out += head;
  out += "t,p_t,y,y_hat,y_scored";
  if (has_sym_flip) out += ",sym_flip";
  if (has_hom_flip) out += ",hom_flip";
  out += ",chosen";
  if (has_estimator) out += ",eta_hat";
  for (int i = 0; i < n; ++i) out += ",s_" + std::to_string(i);
  for (int i = 0; i < n; ++i) out += ",l_" + std::to_string(i);
  out += ",weights_digest\n";

  for (const TraceRecord& r : trace) {
    out += std::to_string(r.t);
    out += ',';
    out += format_g17(r.p_t);
    out += ',';
    out += std::to_string(r.y);
    out += ',';
    out += std::to_string(r.y_hat);
    out += ',';
    out += std::to_string(r.y_scored);
    if (has_sym_flip) out += r.sym_flip ? ",1" : ",0";
    if (has_hom_flip) out += r.hom_flip ? ",1" : ",0";
    out += ',';
    out += std::to_string(r.chosen);
    if (has_estimator) {
      out += ',';
      out += format_g17(r.eta_hat);
    }
    for (double s : r.scores) {
      out += ',';
      out += format_g17(s);
    }
    for (double l : r.losses) {
      out += ',';
      out += format_g17(l);
    }
    char digest[24];
    std::snprintf(digest, sizeof(digest), ",%016" PRIx64 "\n", r.weights_digest);
    out += digest;
  }
  return out;
}

inline nlohmann::json summary_to_json(const RunSummary& s,
                                      std::uint64_t config_hash) {
  nlohmann::json j;
  char hash_hex[20];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016" PRIx64, config_hash);
  j["config_hash"] = hash_hex;
  j["seed"] = s.seed;
  j["horizon"] = s.T;
  j["n_experts"] = s.N;

  j["regret"] = s.ledger.regret;
  j["peer_regret"] = s.ledger.peer_regret;
  j["algo_true_loss"] = s.ledger.algo_true_loss;
  j["algo_true_loss_realized"] = s.ledger.algo_true_loss_realized;
  j["algo_peer_score"] = s.ledger.algo_peer_score;
  j["algo_peer_score_realized"] = s.ledger.algo_peer_score_realized;
  j["a_star"] = s.ledger.a_star;
  j["a_star_peer"] = s.ledger.a_star_peer;
  j["a_star_f"] = s.ledger.a_star_f;
  j["a_star_g"] = s.ledger.a_star_g;
  j["delta_g_event"] = s.ledger.delta_g_event;
  j["g_gap"] = s.ledger.g_gap;
  j["sigma_g_empirical"] = s.ledger.sigma_g_emp;
  j["per_expert"] = nlohmann::json::object();
  j["per_expert"]["true_loss"] = s.ledger.true_loss;
  j["per_expert"]["peer_score"] = s.ledger.peer_score;
  j["per_expert"]["f_sum"] = s.ledger.f_sum;
  j["per_expert"]["g_sum"] = s.ledger.g_sum;
  j["per_expert"]["gap"] = s.ledger.gap;
  j["per_expert"]["disagreements"] = s.ledger.disagreements;
  j["terminal_weights"] = s.terminal_weights;
  j["terminal_argmax"] = s.terminal_argmax;

  auto number_or_null = [](double x) {
    return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
  };
  nlohmann::json b;
  b["delta"] = s.delta;
  b["sigma_g_formula"] = number_or_null(s.sigma_g_formula_value);
  b["e_mart_g"] = number_or_null(s.e_mart_g);
  b["e_mart_f"] = number_or_null(s.e_mart_f);
  b["online_bound"] = number_or_null(s.online_bound_value);
  b["known_rate"] = number_or_null(s.bound_known_rate);
  b["estimated_rate"] = number_or_null(s.bound_estimated_rate);
  b["competitive"] = number_or_null(s.bound_competitive);
  b["c_comp"] = number_or_null(s.c_comp_value);
  b["max_eta_tilde"] = number_or_null(s.max_eta_tilde);
  b["score_range_max"] = s.score_range_max;
  j["bounds"] = b;

  nlohmann::json m;
  m["flip_rate"] = s.measured_flip_rate;
  m["flip_rate_y0"] = number_or_null(s.measured_flip_rate_y0);
  m["flip_rate_y1"] = number_or_null(s.measured_flip_rate_y1);
  m["scored_flip_rate"] = s.scored_flip_rate;
  m["scored_flip_rate_y0"] = number_or_null(s.scored_flip_rate_y0);
  m["scored_flip_rate_y1"] = number_or_null(s.scored_flip_rate_y1);
  m["aggregate_ties"] = s.aggregate_ties;
  m["cond_indep_gap"] = number_or_null(s.cond_indep_gap);
  j["measured"] = m;

  nlohmann::json e;
  e["eta_hat_final"] = number_or_null(s.eta_hat_final);
  switch (s.two_group_solution.status) {
    case NoiseSolution::Status::ok:
      e["two_group_status"] = "ok";
      break;
    case NoiseSolution::Status::degenerate_P0:
      e["two_group_status"] = "degenerate_P0";
      break;
    case NoiseSolution::Status::no_real_root:
      e["two_group_status"] = "no_real_root";
      break;
  }
  e["two_group_P0"] = number_or_null(s.two_group_solution.P0_hat);
  e["two_group_etaA"] = number_or_null(s.two_group_solution.etaA_hat);
  e["two_group_etaB"] = number_or_null(s.two_group_solution.etaB_hat);
  j["estimator"] = e;
  return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

}  // namespace peerol
