#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "collabnet/csv.hpp"
#include "collabnet/episode.hpp"
#include "collabnet/policies.hpp"
#include "collabnet/qtable.hpp"
#include "collabnet/scenario.hpp"
#include "collabnet/swarm.hpp"

namespace collabnet {

struct EpisodeMetrics {
  std::string policy;
  std::uint64_t seed = 0;
  double total_quality = 0.0;
  double mean_quality = 0.0;
  double latency = 0.0;
  Money cost;
  double energy = 0.0;
  int violations = 0;
  int fallbacks = 0;
  double cloud_fraction = 0.0;
};

struct EpisodeResult {
  EpisodeMetrics metrics;
  std::vector<TurnRecord> trace;
};

inline constexpr std::array<const char*, 8> kMetricNames{"total_quality", "mean_quality", "latency_s", "cost",
                                                         "energy_j",      "violations",   "fallbacks", "cloud_fraction"};

inline std::array<double, 8> metric_values(const EpisodeMetrics& m) {
  return {m.total_quality, m.mean_quality, m.latency, m.cost.to_currency(),
          m.energy,        static_cast<double>(m.violations), static_cast<double>(m.fallbacks), m.cloud_fraction};
}

/// Mean and sample standard deviation over one policy's episodes.
struct AggregateMetrics {
  std::string policy;
  int episodes = 0;
  std::array<double, 8> mean{};
  std::array<double, 8> std_dev{};

  double quality() const { return mean[1]; }
  double latency() const { return mean[2]; }
  double cost() const { return mean[3]; }
};

struct MetricsTable {
  std::vector<EpisodeMetrics> rows;
  std::vector<AggregateMetrics> aggregates;
};

struct NamedPolicy {
  std::string id;
  Policy policy;
};

/// Runs one episode with seed derive_seed(config.seed, seed_index).
inline EpisodeResult run_episode(const ScenarioConfig& config, const Policy& policy, std::uint64_t seed_index,
                                 const std::string& policy_id = "policy") {
  const auto episode_seed = derive_seed(config.seed, seed_index);
  EpisodeDriver driver(config, episode_seed);
  Rng policy_rng(stream_seed(episode_seed, Stream::policy));
  const auto* self = std::get_if<SelfRoutePolicy>(&policy);
  while (!driver.done()) {
    if (self) {
      const auto target = full_cloud_action(config.deployment, driver.observe());
      driver.step_with_escalation(target, [&](const TurnOutcome& local) {
        const double confidence = self_confidence(local.quality, self->flip_probability, policy_rng);
        return collabnet::self_route(confidence, self->threshold) == SelfRouteDecision::escalate;
      });
    } else {
      const auto action = decide(policy, config.deployment, driver.observe(), driver.feasible(), policy_rng);
      driver.step(action);
    }
  }

  EpisodeResult result;
  result.trace = driver.trace();
  auto& m = result.metrics;
  m.policy = policy_id;
  m.seed = seed_index;
  int cloud_turns = 0;
  for (const auto& rec : result.trace) {
    m.total_quality += rec.outcome.quality;
    m.latency += rec.outcome.latency;
    m.cost += rec.outcome.cost;
    m.energy += rec.outcome.energy;
    m.violations += rec.violation ? 1 : 0;
    m.fallbacks += rec.outcome.fallback_occurred ? 1 : 0;
    if (config.deployment.endpoints[rec.outcome.served.endpoint].tier == Tier::cloud) ++cloud_turns;
  }
  const auto k = static_cast<double>(result.trace.size());
  m.mean_quality = m.total_quality / k;
  m.cloud_fraction = cloud_turns / k;
  return result;
}

inline AggregateMetrics aggregate(const std::string& policy, const std::vector<const EpisodeMetrics*>& rows) {
  AggregateMetrics a;
  a.policy = policy;
  a.episodes = static_cast<int>(rows.size());
  if (rows.empty()) return a;
  for (const auto* r : rows) {
    const auto v = metric_values(*r);
    for (std::size_t i = 0; i < v.size(); ++i) a.mean[i] += v[i];
  }
  for (auto& x : a.mean) x /= a.episodes;
  if (a.episodes > 1) {
    for (const auto* r : rows) {
      const auto v = metric_values(*r);
      for (std::size_t i = 0; i < v.size(); ++i) a.std_dev[i] += (v[i] - a.mean[i]) * (v[i] - a.mean[i]);
    }
    for (auto& x : a.std_dev) x = std::sqrt(x / (a.episodes - 1));
  }
  return a;
}

/// Cross product of policies and seed indices. Rows are sorted by
/// (policy id, seed) whatever the thread count; one aggregate per policy.
inline MetricsTable run_sweep(const ScenarioConfig& config, const std::vector<NamedPolicy>& policies,
                              const std::vector<std::uint64_t>& seeds, unsigned threads = 1) {
  if (policies.empty()) throw std::invalid_argument("sweep needs at least one policy");
  if (seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");
  const std::size_t tasks = policies.size() * seeds.size();
  std::vector<EpisodeMetrics> rows(tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks; i = next++) {
      const auto& p = policies[i / seeds.size()];
      rows[i] = run_episode(config, p.policy, seeds[i % seeds.size()], p.id).metrics;
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(tasks)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  MetricsTable table;
  table.rows = std::move(rows);
  std::stable_sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
    return a.policy != b.policy ? a.policy < b.policy : a.seed < b.seed;
  });
  for (std::size_t i = 0; i < table.rows.size();) {
    std::vector<const EpisodeMetrics*> group;
    std::size_t j = i;
    for (; j < table.rows.size() && table.rows[j].policy == table.rows[i].policy; ++j) group.push_back(&table.rows[j]);
    table.aggregates.push_back(aggregate(table.rows[i].policy, group));
    i = j;
  }
  return table;
}

// ---------------------------------------------------------------------------
// Policy specifications

struct PolicyBuildOptions {
  int train_episodes = 20000;
  int profile_samples = 200;
  std::optional<Bins> bins;
  QLearningParams learning;
};

inline constexpr std::uint64_t kTrainingStream = 0x7A11'0000'0000'0001ull;
inline constexpr std::uint64_t kProfilingStream = 0x7A11'0000'0000'0002ull;

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

inline double parse_double(const std::string& s, const std::string& spec) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw config_error("policy", "malformed number in policy spec " + spec);
  }
}

}  // namespace detail

/// Builds a policy from its spec string:
///   device | cloud | threshold:<θ>[:<σ>] | classifier[:<samples>] |
///   self_route:<τ>[:<flip>] | rl[:<episodes>] | qtable:<path>
inline NamedPolicy build_policy(const std::string& spec, const ScenarioConfig& config,
                                const PolicyBuildOptions& options = {}) {
  const auto parts = detail::split(spec, ':');
  const std::string kind = parts.empty() ? std::string{} : parts[0];
  const Bins bins = options.bins.value_or(config.bins);
  auto arg = [&](std::size_t i) { return detail::parse_double(parts.at(i), spec); };
  if (kind == "device" && parts.size() == 1) return {spec, DeviceOnlyPolicy{}};
  if (kind == "cloud" && parts.size() == 1) return {spec, CloudOnlyPolicy{}};
  if (kind == "threshold" && (parts.size() == 2 || parts.size() == 3)) {
    ThresholdPolicy p{arg(1), parts.size() == 3 ? arg(2) : 0.0};
    if (!(p.noise_sigma >= 0.0)) throw config_error("policy", "threshold noise must be >= 0");
    return {spec, p};
  }
  if (kind == "classifier" && parts.size() <= 2) {
    const int samples = parts.size() == 2 ? static_cast<int>(arg(1)) : options.profile_samples;
    Rng rng(derive_seed(config.seed, kProfilingStream));
    return {spec, make_classifier(config, profile_endpoints(config, samples, rng))};
  }
  if (kind == "self_route" && (parts.size() == 2 || parts.size() == 3)) {
    SelfRoutePolicy p{arg(1), parts.size() == 3 ? arg(2) : config.self_route_flip};
    if (!(p.flip_probability >= 0.0 && p.flip_probability <= 1.0)) {
      throw config_error("policy", "self_route flip probability must be in [0, 1]");
    }
    return {spec, p};
  }
  if (kind == "rl" && parts.size() <= 2) {
    const int episodes = parts.size() == 2 ? static_cast<int>(arg(1)) : options.train_episodes;
    auto params = options.learning;
    params.bins = bins;
    auto trained = train_q(config, params, episodes, derive_seed(config.seed, kTrainingStream));
    return {spec, QGreedyPolicy{std::make_shared<const QTable>(std::move(trained.table)), bins}};
  }
  if (kind == "qtable" && parts.size() >= 2) {
    const auto path = spec.substr(spec.find(':') + 1);
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open q-table file " + path);
    auto table = read_qtable(in);
    const auto expected = qtable_shape(config, {table.shape().latency_bins, table.shape().cost_bins});
    if (!(table.shape() == expected)) throw config_error("policy", "q-table shape does not match the scenario");
    const Bins tb{table.shape().latency_bins, table.shape().cost_bins};
    return {spec, QGreedyPolicy{std::make_shared<const QTable>(std::move(table)), tb}};
  }
  throw config_error("policy", "unknown policy spec " + spec);
}

/// Policy file: one spec per line; blank lines and '#' comments ignored.
inline std::vector<std::string> read_policy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open policy file " + path);
  std::vector<std::string> specs;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line.erase(0, line.find_first_not_of(" \t\r"));
    line.erase(line.find_last_not_of(" \t\r") + 1);
    if (!line.empty()) specs.push_back(line);
  }
  return specs;
}

// ---------------------------------------------------------------------------
// CSV tables

inline CsvTable metrics_csv(const MetricsTable& table) {
  CsvTable csv;
  csv.header = {"policy", "seed", "episodes"};
  for (const char* n : kMetricNames) csv.header.emplace_back(n);
  for (const char* n : kMetricNames) csv.header.push_back(std::string(n) + "_std");
  for (const auto& r : table.rows) {
    std::vector<std::string> row{r.policy, std::to_string(r.seed), "1"};
    const auto v = metric_values(r);
    for (std::size_t i = 0; i < v.size(); ++i) {
      row.push_back(i == 5 || i == 6 ? std::to_string(static_cast<int>(v[i])) : format_number(v[i]));
    }
    row.resize(csv.header.size());
    csv.rows.push_back(std::move(row));
  }
  for (const auto& a : table.aggregates) {
    std::vector<std::string> row{a.policy, "mean", std::to_string(a.episodes)};
    for (double x : a.mean) row.push_back(format_number(x));
    for (double x : a.std_dev) row.push_back(format_number(x));
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

inline CsvTable trace_csv(const ScenarioConfig& config, const std::vector<std::pair<std::uint64_t, EpisodeResult>>& episodes) {
  CsvTable csv;
  csv.header = {"seed",     "turn",      "category", "requested",  "served",  "modalities", "quality",
                "latency_s", "uplink_s", "prefill_s", "decode_s", "downlink_s", "retry_s", "cost",
                "billed_input_tokens", "output_tokens", "handoff_tokens", "fallback", "link_down", "escalated",
                "violation"};
  const auto& d = config.deployment;
  auto mods = [&](ModalityMask m) {
    std::string s;
    for (std::size_t i = 0; i < d.modalities.size(); ++i) {
      if (!m.contains(i)) continue;
      if (!s.empty()) s += '+';
      s += d.modalities[i].id;
    }
    return s;
  };
  for (const auto& [seed, ep] : episodes) {
    for (const auto& r : ep.trace) {
      const auto& o = r.outcome;
      csv.rows.push_back({std::to_string(seed), std::to_string(r.turn), d.categories[r.category].id,
                          d.endpoints[r.requested.endpoint].id, d.endpoints[o.served.endpoint].id, mods(o.served.modalities),
                          format_number(o.quality), format_number(o.latency), format_number(o.components.uplink),
                          format_number(o.components.prefill), format_number(o.components.decode),
                          format_number(o.components.downlink), format_number(o.components.retry),
                          format_number(o.cost.to_currency()), std::to_string(o.billed_input_tokens),
                          std::to_string(o.output_tokens), std::to_string(o.handoff_tokens),
                          o.fallback_occurred ? "1" : "0", o.link_was_down ? "1" : "0", r.escalated ? "1" : "0",
                          r.violation ? "1" : "0"});
    }
  }
  return csv;
}

inline CsvTable swarm_csv(const std::vector<swarm::TrafficReport>& reports) {
  CsvTable csv;
  csv.header = {"pattern", "topology", "N", "T", "round", "messages", "tokens", "latency_s"};
  for (const auto& rep : reports) {
    for (const auto& r : rep.rounds) {
      csv.rows.push_back({rep.pattern, swarm::to_string(rep.topology), std::to_string(rep.agents),
                          std::to_string(rep.round_count()), std::to_string(r.round), std::to_string(r.messages),
                          std::to_string(r.tokens), format_number(r.latency)});
    }
  }
  return csv;
}

/// Every applicable pattern over every configured topology.
inline std::vector<swarm::TrafficReport> run_swarm_scenario(const swarm::SwarmScenario& s) {
  using namespace swarm;
  std::vector<TrafficReport> reports;
  for (auto kind : s.topologies) {
    const auto topo = build_topology(kind, s.agents, s.params);
    reports.push_back(run_debate(topo, s.rounds, s.length, s.timing));
  }
  const auto star = build_topology(TopologyKind::star, s.agents, s.params);
  reports.push_back(run_division_of_labor(star, s.subtasks, s.length, s.timing));
  reports.push_back(run_hierarchical(star, s.rounds, s.length, s.timing));
  return reports;
}

}  // namespace collabnet
