#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "collabnet/json_reader.hpp"
#include "collabnet/rng.hpp"

namespace collabnet::swarm {

enum class TopologyKind { full, star, tree, ring, custom };

inline std::string to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::full: return "full";
    case TopologyKind::star: return "star";
    case TopologyKind::tree: return "tree";
    case TopologyKind::ring: return "ring";
    case TopologyKind::custom: return "custom";
  }
  return "custom";
}

inline TopologyKind topology_kind_from_string(const std::string& s) {
  if (s == "full") return TopologyKind::full;
  if (s == "star") return TopologyKind::star;
  if (s == "tree") return TopologyKind::tree;
  if (s == "ring") return TopologyKind::ring;
  if (s == "custom") return TopologyKind::custom;
  throw std::invalid_argument("unknown topology kind: " + s);
}

struct Edge {
  int from = 0;
  int to = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Directed communication graph over agents 0..agents-1.
struct TopologySpec {
  TopologyKind kind = TopologyKind::full;
  int agents = 0;
  std::vector<Edge> edges;
  std::optional<int> hub;  // star hub or tree root

  int out_degree(int agent) const {
    return static_cast<int>(std::count_if(edges.begin(), edges.end(), [&](const Edge& e) { return e.from == agent; }));
  }
};

struct TopologyParams {
  int hub = 0;
  int branching = 2;        // tree fan-out
  std::vector<Edge> edges;  // custom adjacency
};

inline TopologySpec build_topology(TopologyKind kind, int agents, const TopologyParams& params = {}) {
  if (agents < 2) throw std::invalid_argument("topology needs at least 2 agents");
  TopologySpec t;
  t.kind = kind;
  t.agents = agents;
  switch (kind) {
    case TopologyKind::full:
      for (int u = 0; u < agents; ++u)
        for (int v = 0; v < agents; ++v)
          if (u != v) t.edges.push_back({u, v});
      break;
    case TopologyKind::star: {
      if (params.hub < 0 || params.hub >= agents) throw std::invalid_argument("star hub out of range");
      t.hub = params.hub;
      for (int v = 0; v < agents; ++v) {
        if (v == params.hub) continue;
        t.edges.push_back({v, params.hub});
        t.edges.push_back({params.hub, v});
      }
      break;
    }
    case TopologyKind::tree: {
      if (params.branching < 1) throw std::invalid_argument("tree branching must be >= 1");
      t.hub = 0;
      for (int v = 1; v < agents; ++v) {
        const int parent = (v - 1) / params.branching;
        t.edges.push_back({parent, v});
        t.edges.push_back({v, parent});
      }
      break;
    }
    case TopologyKind::ring:
      for (int u = 0; u < agents; ++u) t.edges.push_back({u, (u + 1) % agents});
      break;
    case TopologyKind::custom: {
      std::set<Edge> seen;
      for (const auto& e : params.edges) {
        if (e.from < 0 || e.from >= agents || e.to < 0 || e.to >= agents) {
          throw std::invalid_argument("custom edge references an unknown agent");
        }
        if (e.from == e.to) throw std::invalid_argument("custom adjacency contains a self-loop");
        if (!seen.insert(e).second) throw std::invalid_argument("custom adjacency contains a duplicate edge");
      }
      t.edges = params.edges;
      break;
    }
  }
  return t;
}

/// Message sizes in tokens. Debate messages in round t carry
/// base + growth·(t−1) tokens.
struct LengthModel {
  std::int64_t base = 1;
  std::int64_t growth = 0;
  std::int64_t supervisor = 1;
  std::int64_t log = 1;

  std::int64_t debate_length(int round) const { return base + growth * (round - 1); }
};

struct SwarmTiming {
  double generation_rate = 1.0;  // tokens/s, every agent
  double link_rate = 1.0;        // tokens/s, per sender
  double rtt = 0.0;
  bool sequential = false;       // hierarchical: workers served one at a time
};

struct RoundStats {
  int round = 0;
  int messages = 0;
  std::int64_t tokens = 0;
  double latency = 0.0;
};

struct TrafficReport {
  std::string pattern;
  TopologyKind topology = TopologyKind::full;
  int agents = 0;
  std::vector<RoundStats> rounds;
  std::int64_t total_tokens = 0;
  double total_latency = 0.0;

  int round_count() const { return static_cast<int>(rounds.size()); }

  void add(RoundStats r) {
    total_tokens += r.tokens;
    total_latency += r.latency;
    rounds.push_back(r);
  }
};

namespace detail {

inline void validate_lengths(const LengthModel& l) {
  if (l.base <= 0) throw std::invalid_argument("base message length must be > 0");
  if (l.growth < 0 || l.supervisor < 0 || l.log < 0) throw std::invalid_argument("message lengths must be >= 0");
}

inline double exchange_latency(const LengthModel& l, const SwarmTiming& timing) {
  const auto tokens = static_cast<double>(l.supervisor + l.log);
  return tokens / timing.generation_rate + tokens / timing.link_rate + 2.0 * timing.rtt;
}

inline int require_star_hub(const TopologySpec& t, const char* pattern) {
  if (t.kind != TopologyKind::star || !t.hub) throw std::invalid_argument(std::string(pattern) + " requires a star topology");
  return *t.hub;
}

}  // namespace detail

/// Broadcast-critique rounds: every agent sends one message on each
/// out-edge per round; same-round messages travel in parallel.
inline TrafficReport run_debate(const TopologySpec& topology, int rounds, const LengthModel& length,
                                const SwarmTiming& timing = {}) {
  if (rounds < 1) throw std::invalid_argument("debate needs at least one round");
  detail::validate_lengths(length);
  std::vector<int> degree(topology.agents, 0);
  for (const auto& e : topology.edges) ++degree[e.from];
  const int busiest = topology.edges.empty() ? 0 : *std::max_element(degree.begin(), degree.end());

  TrafficReport report{"debate", topology.kind, topology.agents, {}, 0, 0.0};
  const auto messages = static_cast<int>(topology.edges.size());
  for (int t = 1; t <= rounds; ++t) {
    const auto len = length.debate_length(t);
    const auto l = static_cast<double>(len);
    double latency = 0.0;
    if (busiest > 0) latency = l / timing.generation_rate + busiest * l / timing.link_rate + timing.rtt;
    report.add({t, messages, static_cast<std::int64_t>(messages) * len, latency});
  }
  return report;
}

/// One parallel round: the hub hands `subtasks` workers a task each and
/// collects one result from each.
inline TrafficReport run_division_of_labor(const TopologySpec& topology, int subtasks, const LengthModel& length,
                                           const SwarmTiming& timing = {}) {
  detail::require_star_hub(topology, "division of labor");
  if (subtasks < 1) throw std::invalid_argument("division of labor needs at least one subtask");
  if (subtasks > topology.agents - 1) throw std::invalid_argument("more subtasks than workers");
  TrafficReport report{"division_of_labor", topology.kind, topology.agents, {}, 0, 0.0};
  report.add({1, 2 * subtasks, subtasks * (length.supervisor + length.log), detail::exchange_latency(length, timing)});
  return report;
}

/// Supervisor loop: per round one instruction to, and one log from, every
/// worker.
inline TrafficReport run_hierarchical(const TopologySpec& topology, int rounds, const LengthModel& length,
                                      const SwarmTiming& timing = {}) {
  detail::require_star_hub(topology, "hierarchical collaboration");
  if (rounds < 1) throw std::invalid_argument("hierarchical collaboration needs at least one round");
  const int workers = topology.agents - 1;
  const double exchange = detail::exchange_latency(length, timing);
  TrafficReport report{"hierarchical", topology.kind, topology.agents, {}, 0, 0.0};
  for (int r = 1; r <= rounds; ++r) {
    report.add({r, 2 * workers, workers * (length.supervisor + length.log), timing.sequential ? workers * exchange : exchange});
  }
  return report;
}

/// OLS slope of log(y) on log(x).
inline double fit_growth_exponent(std::span<const std::pair<double, double>> series) {
  if (series.size() < 3) throw std::invalid_argument("growth fit needs at least 3 points");
  double sx = 0, sy = 0;
  for (const auto& [x, y] : series) {
    if (!(x > 0.0) || !(y > 0.0)) throw std::invalid_argument("growth fit needs positive values");
    sx += std::log(x);
    sy += std::log(y);
  }
  const double n = static_cast<double>(series.size());
  const double mx = sx / n, my = sy / n;
  double sxy = 0, sxx = 0;
  for (const auto& [x, y] : series) {
    const double dx = std::log(x) - mx;
    sxy += dx * (std::log(y) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw std::invalid_argument("growth fit needs distinct x values");
  return sxy / sxx;
}

/// Agents with a directed path of at most `rounds` hops to `answerer`,
/// the answerer included.
inline int reachable_contributors(const TopologySpec& topology, int rounds, int answerer = 0) {
  std::vector<bool> reached(topology.agents, false);
  reached[answerer] = true;
  for (int t = 0; t < rounds; ++t) {
    auto next = reached;
    for (const auto& e : topology.edges)
      if (reached[e.to]) next[e.from] = true;
    reached = std::move(next);
  }
  return static_cast<int>(std::count(reached.begin(), reached.end(), true));
}

struct InsightModel {
  int insights = 16;              // K, at most 64
  double hold_probability = 0.5;  // p
  double redundancy_penalty = 0.0;  // β
};

struct CollectiveOutcome {
  double quality = 0.0;
  double coverage = 0.0;
  double duplicate_fraction = 0.0;  // duplicate tokens / total tokens
};

/// One trial of the insight-propagation model. Each agent independently
/// holds each insight with probability p; a round-t message u→v delivers
/// u's knowledge at the start of the round and counts as duplicate when v
/// already knew all of it. Agent 0 answers.
inline CollectiveOutcome collective_quality(const TopologySpec& topology, int rounds, const LengthModel& length,
                                            const InsightModel& model, Rng& rng) {
  if (model.insights < 1 || model.insights > 64) throw std::invalid_argument("insight count must be in [1, 64]");
  if (!(model.hold_probability >= 0.0 && model.hold_probability <= 1.0)) {
    throw std::invalid_argument("hold probability must be in [0, 1]");
  }
  if (!(model.redundancy_penalty >= 0.0)) throw std::invalid_argument("redundancy penalty must be >= 0");
  if (rounds < 1) throw std::invalid_argument("collective quality needs at least one round");

  std::vector<std::uint64_t> known(topology.agents, 0);
  for (auto& k : known)
    for (int i = 0; i < model.insights; ++i)
      if (rng.bernoulli(model.hold_probability)) k |= std::uint64_t{1} << i;

  std::int64_t total = 0, duplicate = 0;
  for (int t = 1; t <= rounds; ++t) {
    const auto len = length.debate_length(t);
    auto next = known;
    for (const auto& e : topology.edges) {
      total += len;
      if ((known[e.from] & ~known[e.to]) == 0) duplicate += len;
      next[e.to] |= known[e.from];
    }
    known = std::move(next);
  }

  CollectiveOutcome out;
  out.coverage = static_cast<double>(std::popcount(known[0])) / model.insights;
  out.duplicate_fraction = total > 0 ? static_cast<double>(duplicate) / static_cast<double>(total) : 0.0;
  out.quality = std::clamp(out.coverage - model.redundancy_penalty * out.duplicate_fraction, 0.0, 1.0);
  return out;
}

struct CollectiveSummary {
  double mean_quality = 0.0;
  double std_error = 0.0;
  double mean_coverage = 0.0;
  double mean_duplicate_fraction = 0.0;
  int trials = 0;
};

inline CollectiveSummary mean_collective_quality(const TopologySpec& topology, int rounds, const LengthModel& length,
                                                 const InsightModel& model, int trials, Rng& rng) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  double sum = 0, sum_sq = 0, cov = 0, dup = 0;
  for (int i = 0; i < trials; ++i) {
    const auto o = collective_quality(topology, rounds, length, model, rng);
    sum += o.quality;
    sum_sq += o.quality * o.quality;
    cov += o.coverage;
    dup += o.duplicate_fraction;
  }
  CollectiveSummary s;
  s.trials = trials;
  s.mean_quality = sum / trials;
  s.mean_coverage = cov / trials;
  s.mean_duplicate_fraction = dup / trials;
  if (trials > 1) {
    const double var = std::max(0.0, (sum_sq - trials * s.mean_quality * s.mean_quality) / (trials - 1));
    s.std_error = std::sqrt(var / trials);
  }
  return s;
}

/// Optional `swarm` section of a scenario file.
struct SwarmScenario {
  int agents = 4;
  int rounds = 3;
  int subtasks = 1;
  LengthModel length;
  SwarmTiming timing;
  InsightModel insights;
  int trials = 1000;
  std::vector<TopologyKind> topologies{TopologyKind::full, TopologyKind::star, TopologyKind::tree, TopologyKind::ring};
  TopologyParams params;
};

inline SwarmScenario load_swarm(const collabnet::detail::json& node, const std::string& path = "swarm") {
  collabnet::detail::ObjectReader r(node, path);
  SwarmScenario s;
  s.agents = r.get<int>("agents");
  s.rounds = r.get<int>("rounds");
  s.subtasks = r.get_or<int>("subtasks", 1);
  {
    collabnet::detail::ObjectReader l(r.node("length"), r.qualify("length"));
    s.length.base = l.get<std::int64_t>("base");
    s.length.growth = l.get_or<std::int64_t>("growth", 0);
    s.length.supervisor = l.get<std::int64_t>("supervisor");
    s.length.log = l.get<std::int64_t>("log");
    l.finish();
    if (s.length.base <= 0) throw config_error(l.qualify("base"), "base must be > 0");
    if (s.length.growth < 0) throw config_error(l.qualify("growth"), "growth must be >= 0");
    if (s.length.supervisor < 0) throw config_error(l.qualify("supervisor"), "supervisor must be >= 0");
    if (s.length.log < 0) throw config_error(l.qualify("log"), "log must be >= 0");
  }
  if (const auto* t = r.node_if("timing")) {
    collabnet::detail::ObjectReader tr(*t, r.qualify("timing"));
    s.timing.generation_rate = tr.get<double>("generation_rate");
    s.timing.link_rate = tr.get<double>("link_rate");
    s.timing.rtt = tr.get_or<double>("rtt", 0.0);
    s.timing.sequential = tr.get_or<bool>("sequential", false);
    tr.finish();
    if (!(s.timing.generation_rate > 0)) throw config_error(tr.qualify("generation_rate"), "generation_rate must be > 0");
    if (!(s.timing.link_rate > 0)) throw config_error(tr.qualify("link_rate"), "link_rate must be > 0");
    if (!(s.timing.rtt >= 0)) throw config_error(tr.qualify("rtt"), "rtt must be >= 0");
  }
  if (const auto* q = r.node_if("insights")) {
    collabnet::detail::ObjectReader ir(*q, r.qualify("insights"));
    s.insights.insights = ir.get<int>("count");
    s.insights.hold_probability = ir.get<double>("hold_probability");
    s.insights.redundancy_penalty = ir.get_or<double>("redundancy_penalty", 0.0);
    s.trials = ir.get_or<int>("trials", 1000);
    ir.finish();
    if (s.insights.insights < 1 || s.insights.insights > 64) throw config_error(ir.qualify("count"), "count must be in [1, 64]");
    if (!(s.insights.hold_probability >= 0 && s.insights.hold_probability <= 1)) {
      throw config_error(ir.qualify("hold_probability"), "hold_probability must be in [0, 1]");
    }
    if (!(s.insights.redundancy_penalty >= 0)) throw config_error(ir.qualify("redundancy_penalty"), "redundancy_penalty must be >= 0");
    if (s.trials < 1) throw config_error(ir.qualify("trials"), "trials must be >= 1");
  }
  if (const auto* tl = r.node_if("topologies")) {
    if (!tl->is_array() || tl->empty()) throw config_error(r.qualify("topologies"), "topologies must be a non-empty list");
    s.topologies.clear();
    for (const auto& k : *tl) {
      if (!k.is_string()) throw config_error(r.qualify("topologies"), "topologies entries must be strings");
      try {
        s.topologies.push_back(topology_kind_from_string(k.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw config_error(r.qualify("topologies"), e.what());
      }
    }
  }
  if (const auto* e = r.node_if("edges")) {
    if (!e->is_array()) throw config_error(r.qualify("edges"), "edges must be a list of [from, to] pairs");
    for (const auto& pair : *e) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() || !pair[1].is_number_integer()) {
        throw config_error(r.qualify("edges"), "edges must be a list of [from, to] pairs");
      }
      s.params.edges.push_back({pair[0].get<int>(), pair[1].get<int>()});
    }
  }
  s.params.branching = r.get_or<int>("branching", 2);
  r.finish();
  if (s.agents < 2) throw config_error(r.qualify("agents"), "agents must be >= 2");
  if (s.rounds < 1) throw config_error(r.qualify("rounds"), "rounds must be >= 1");
  if (s.subtasks < 1 || s.subtasks > s.agents - 1) throw config_error(r.qualify("subtasks"), "subtasks must be in [1, agents - 1]");
  return s;
}

}  // namespace collabnet::swarm
