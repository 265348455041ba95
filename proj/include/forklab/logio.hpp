#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file logio.hpp
 * @brief Rollout-log JSONL ingestion and offline analysis: polarity
 * histograms, quadrant shares, proxy mutual information, and re-shaped
 * advantages under configurable (alpha, phi).
 *
 * Record schema, one JSON object per line:
 *   {"query_id": string, "traj": int, "t": int, "entropy": real,
 *    "reward": +1|-1, "logp_old": real (optional)}
 * (query_id, traj, t) must be unique; entropy must be non-negative.
 *
 * Analysis mirrors the trainer's conventions: groups are keyed by query_id,
 * entropy stats are group-scoped, and quadrant labels use the group mean
 * entropy. Shares, histograms, and proxy MI cover every ingested token;
 * shaped advantages exist only for groups with reward variance. Running
 * analyze() on the trainer's own dumps therefore reproduces the trainer's
 * logged shares and proxy MI.
 */

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include <forklab/credit.hpp>
#include <forklab/errors.hpp>
#include <forklab/infotheory.hpp>
#include <forklab/io.hpp>

namespace forklab::logio {

struct RolloutLogRecord {
  std::string query_id;
  std::size_t traj = 0;
  std::size_t t = 0;
  double entropy = 0.0;
  int reward = 0;
  bool has_logp_old = false;
  double logp_old = 0.0;
};

/// One query's records, with trajectory rewards split out.
struct GroupRecords {
  std::string query_id;
  /// Sorted by (traj, t).
  std::vector<RolloutLogRecord> records;
  /// Reward per trajectory, indexed by position in traj_ids.
  std::vector<std::size_t> traj_ids;
  std::vector<int> traj_rewards;
};

/// Render one record as a JSONL line (fixed field order, 17-digit floats).
inline std::string record_to_jsonl(const RolloutLogRecord& rec) {
  std::string out = "{\"query_id\": \"" + rec.query_id + "\"";
  out += ", \"traj\": " + std::to_string(rec.traj);
  out += ", \"t\": " + std::to_string(rec.t);
  out += ", \"entropy\": " + io::fmt_double(rec.entropy);
  out += ", \"reward\": " + std::to_string(rec.reward);
  if (rec.has_logp_old) out += ", \"logp_old\": " + io::fmt_double(rec.logp_old);
  out += "}\n";
  return out;
}

/**
 * Parse and group a rollout log. Groups keep first-appearance order; records
 * within a group are sorted by (traj, t). Malformed lines raise ParseError
 * with the 1-based line number; duplicate (query_id, traj, t) triples raise
 * DuplicateRecordError; an empty file raises EmptyInputError.
 */
inline std::vector<GroupRecords> ingest_rollout_log(const std::string& text) {
  std::vector<GroupRecords> groups;
  std::map<std::string, std::size_t> group_index;
  std::map<std::string, int> seen_triples;

  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t parsed = 0;
  while (std::getline(stream, line)) {
    line_no += 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string where = "line " + std::to_string(line_no);
    if (!doc.is_object()) throw ParseError(where + ": record must be an object");
    for (const auto& [key, value] : doc.items()) {
      if (key != "query_id" && key != "traj" && key != "t" &&
          key != "entropy" && key != "reward" && key != "logp_old") {
        throw ParseError(where + ": unknown field " + key);
      }
    }
    RolloutLogRecord rec;
    try {
      rec.query_id = doc.at("query_id").get<std::string>();
      rec.traj = doc.at("traj").get<std::size_t>();
      rec.t = doc.at("t").get<std::size_t>();
      rec.entropy = doc.at("entropy").get<double>();
      rec.reward = doc.at("reward").get<int>();
      if (doc.contains("logp_old")) {
        rec.has_logp_old = true;
        rec.logp_old = doc.at("logp_old").get<double>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!(rec.entropy >= 0.0)) throw ParseError(where + ": entropy must be >= 0");
    if (rec.reward != 1 && rec.reward != -1) {
      throw ParseError(where + ": reward must be +1 or -1");
    }

    const std::string triple = rec.query_id + "\x1f" + std::to_string(rec.traj) +
                               "\x1f" + std::to_string(rec.t);
    if (!seen_triples.emplace(triple, 1).second) {
      throw DuplicateRecordError("duplicate (query_id, traj, t): " + triple);
    }

    auto [it, inserted] = group_index.emplace(rec.query_id, groups.size());
    if (inserted) {
      groups.push_back(GroupRecords{rec.query_id, {}, {}, {}});
    }
    groups[it->second].records.push_back(std::move(rec));
    parsed += 1;
  }
  if (parsed == 0) throw EmptyInputError("rollout log has no records");

  for (auto& group : groups) {
    std::sort(group.records.begin(), group.records.end(),
              [](const RolloutLogRecord& a, const RolloutLogRecord& b) {
                return a.traj != b.traj ? a.traj < b.traj : a.t < b.t;
              });
    for (const auto& rec : group.records) {
      if (group.traj_ids.empty() || group.traj_ids.back() != rec.traj) {
        group.traj_ids.push_back(rec.traj);
        group.traj_rewards.push_back(rec.reward);
      } else if (group.traj_rewards.back() != rec.reward) {
        throw ParseError("trajectory " + group.query_id + "/" +
                         std::to_string(rec.traj) + " has inconsistent rewards");
      }
    }
  }
  return groups;
}

// ============================================================================
// Offline analysis
// ============================================================================

struct AnalyzeOptions {
  double alpha = 0.2;
  double phi = 2.0;
  std::size_t n_bins = 32;
  /// Upper edge of the entropy binning range; 0 = use the maximum observed
  /// entropy (external logs do not carry the vocabulary size).
  double h_max = 0.0;
};

struct ShapedDumpRecord {
  std::string query_id;
  std::size_t traj = 0;
  std::size_t t = 0;
  double entropy = 0.0;
  credit::ShapedAdvantage shaped;
};

struct AnalysisBundle {
  infotheory::EntropyHistogram histogram;
  /// Token shares over every ingested token, indexed by credit::Quadrant;
  /// sum to 1.
  std::array<double, 4> shares{0.0, 0.0, 0.0, 0.0};
  double proxy_cmi = 0.0;
  /// Fraction of groups without reward variance; those groups have no
  /// defined group advantage and therefore emit no shaped records.
  double dropped_group_fraction = 0.0;
  std::size_t token_count = 0;
  double h_max_used = 0.0;
  std::vector<ShapedDumpRecord> shaped;
  AnalyzeOptions options;
};

/**
 * Quadrant/proxy/histogram analysis over grouped records, with advantage
 * re-shaping under (alpha, phi). Shares, histograms, and proxy MI need only
 * (entropy, reward) and cover every token. Shaped advantages additionally
 * need a defined group advantage, so groups with fewer than two trajectories
 * or zero reward variance emit none, mirroring the trainer's dynamic
 * sampling. Trainer dumps contain only variance-bearing groups, so analysis
 * of a dump reproduces the trainer's own logged shares.
 */
inline AnalysisBundle analyze(const std::vector<GroupRecords>& groups,
                              const AnalyzeOptions& options) {
  if (groups.empty()) throw EmptyInputError("no groups to analyze");
  AnalysisBundle bundle;
  bundle.options = options;

  std::vector<double> entropies;
  std::vector<int> rewards;
  std::vector<std::pair<double, int>> hist_tokens;
  std::array<std::size_t, 4> counts{0, 0, 0, 0};

  std::size_t dropped = 0;
  for (const auto& group : groups) {
    bool degenerate = group.traj_rewards.size() < 2;
    if (!degenerate) {
      const int first = group.traj_rewards.front();
      degenerate = std::all_of(group.traj_rewards.begin(), group.traj_rewards.end(),
                               [&](int r) { return r == first; });
    }
    if (degenerate) dropped += 1;

    std::vector<double> group_entropies;
    group_entropies.reserve(group.records.size());
    for (const auto& rec : group.records) group_entropies.push_back(rec.entropy);
    const auto stats = credit::entropy_stats(group_entropies);

    std::vector<double> advantages;
    if (!degenerate) advantages = credit::group_advantage(group.traj_rewards);

    for (const auto& rec : group.records) {
      const auto quadrant = credit::quadrant_label(rec.entropy, stats.mu,
                                                   rec.reward);
      counts[static_cast<std::size_t>(quadrant)] += 1;
      entropies.push_back(rec.entropy);
      rewards.push_back(rec.reward);
      hist_tokens.emplace_back(rec.entropy, rec.reward);
      if (degenerate) continue;
      std::size_t traj_pos = 0;
      while (group.traj_ids[traj_pos] != rec.traj) traj_pos += 1;
      const double base = advantages[traj_pos];
      auto shaped = credit::shaped_advantage(rec.entropy, stats, base,
                                             options.alpha, options.phi, rec.reward);
      bundle.shaped.push_back({group.query_id, rec.traj, rec.t, rec.entropy, shaped});
    }
  }
  bundle.dropped_group_fraction =
      static_cast<double>(dropped) / static_cast<double>(groups.size());

  bundle.token_count = entropies.size();
  for (std::size_t q = 0; q < 4; ++q) {
    bundle.shares[q] = static_cast<double>(counts[q]) /
                       static_cast<double>(bundle.token_count);
  }
  double h_max = options.h_max;
  if (h_max <= 0.0) {
    for (double h : entropies) h_max = std::max(h_max, h);
    if (h_max <= 0.0) h_max = 1.0;
  }
  bundle.h_max_used = h_max;
  bundle.proxy_cmi = infotheory::proxy_cmi(entropies, rewards, options.n_bins, h_max);
  bundle.histogram = infotheory::entropy_histograms(hist_tokens, options.n_bins, h_max);
  return bundle;
}

// ============================================================================
// Serialization
// ============================================================================

inline std::string shaped_record_to_jsonl(const ShapedDumpRecord& rec) {
  std::string out = "{\"query_id\": \"" + rec.query_id + "\"";
  out += ", \"traj\": " + std::to_string(rec.traj);
  out += ", \"t\": " + std::to_string(rec.t);
  out += ", \"H\": " + io::fmt_double(rec.entropy);
  out += ", \"base\": " + io::fmt_double(rec.shaped.base);
  out += ", \"credit\": " + io::fmt_double(rec.shaped.credit);
  out += ", \"shaped\": " + io::fmt_double(rec.shaped.shaped);
  out += ", \"quadrant\": \"" + std::string(credit::quadrant_name(rec.shaped.quadrant)) + "\"";
  out += "}\n";
  return out;
}

/// Histogram CSV: exactly (bin_lo, bin_hi, count_pos, count_neg).
inline std::string histogram_to_csv(const infotheory::EntropyHistogram& hist) {
  std::string out = "bin_lo,bin_hi,count_pos,count_neg\n";
  for (std::size_t b = 0; b + 1 < hist.bin_edges.size(); ++b) {
    out += io::csv_row({io::fmt_double(hist.bin_edges[b]),
                        io::fmt_double(hist.bin_edges[b + 1]),
                        std::to_string(hist.counts_pos[b]),
                        std::to_string(hist.counts_neg[b])});
  }
  return out;
}

inline nlohmann::json bundle_to_json(const AnalysisBundle& bundle) {
  nlohmann::json doc;
  doc["options"] = {{"alpha", bundle.options.alpha},
                    {"phi", bundle.options.phi},
                    {"n_bins", bundle.options.n_bins},
                    {"h_max", bundle.h_max_used}};
  doc["quadrant_shares"] = {{"PHR", bundle.shares[0]},
                            {"PLR", bundle.shares[1]},
                            {"NLR", bundle.shares[2]},
                            {"NHR", bundle.shares[3]}};
  doc["proxy_cmi"] = bundle.proxy_cmi;
  doc["dropped_group_fraction"] = bundle.dropped_group_fraction;
  doc["token_count"] = bundle.token_count;
  doc["frac_above_mean_entropy"] = bundle.histogram.frac_above_mean;

  // Per-polarity normalized frequencies; presentation-layer material the
  // histogram CSV deliberately leaves out.
  std::uint64_t pos_total = 0, neg_total = 0;
  for (auto c : bundle.histogram.counts_pos) pos_total += c;
  for (auto c : bundle.histogram.counts_neg) neg_total += c;
  auto freq_pos = nlohmann::json::array();
  auto freq_neg = nlohmann::json::array();
  for (std::size_t b = 0; b < bundle.histogram.counts_pos.size(); ++b) {
    freq_pos.push_back(pos_total == 0
                           ? 0.0
                           : static_cast<double>(bundle.histogram.counts_pos[b]) /
                                 static_cast<double>(pos_total));
    freq_neg.push_back(neg_total == 0
                           ? 0.0
                           : static_cast<double>(bundle.histogram.counts_neg[b]) /
                                 static_cast<double>(neg_total));
  }
  doc["normalized_freq_pos"] = freq_pos;
  doc["normalized_freq_neg"] = freq_neg;
  return doc;
}

}  // namespace forklab::logio
