#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "collabnet/episode.hpp"
#include "collabnet/qtable.hpp"
#include "collabnet/rng.hpp"
#include "collabnet/scenario.hpp"
#include "collabnet/session.hpp"

namespace collabnet {

// ---------------------------------------------------------------------------
// Action indexing

inline int action_index(const std::vector<RoutingAction>& actions, const RoutingAction& a) {
  auto it = std::find(actions.begin(), actions.end(), a);
  if (it == actions.end()) throw std::invalid_argument("action not in enumeration");
  return static_cast<int>(it - actions.begin());
}

/// The primary cloud endpoint with every modality it can take.
inline RoutingAction full_cloud_action(const Deployment& d, const Observation& obs, std::size_t endpoint = 1) {
  const auto& e = d.endpoints.at(endpoint);
  return {endpoint, e.accepts_vision ? obs.available : ModalityMask{}};
}

inline RoutingAction preferred_or_device(const RoutingAction& preferred, std::span<const RoutingAction> feasible) {
  return std::find(feasible.begin(), feasible.end(), preferred) != feasible.end() ? preferred : RoutingAction::device();
}

// ---------------------------------------------------------------------------
// Discretization

inline int budget_bin(double remaining, double budget, int bins) {
  if (!(remaining > 0.0) || !(budget > 0.0)) return 0;
  const auto b = static_cast<int>(std::floor(remaining / budget * bins));
  return std::clamp(b, 0, bins - 1);
}

inline MDPStateIndex discretize(const Observation& obs, int latency_bins, int cost_bins) {
  if (latency_bins < 1 || cost_bins < 1) throw std::invalid_argument("bins must be >= 1");
  MDPStateIndex s;
  s.turn = std::clamp(obs.turn_index, 0, obs.episode_length - 1);
  s.category = static_cast<int>(obs.category);
  s.latency_bin = budget_bin(obs.remaining_latency, obs.latency_budget, latency_bins);
  s.cost_bin = budget_bin(static_cast<double>(obs.remaining_cost.units()),
                          static_cast<double>(obs.cost_budget.units()), cost_bins);
  s.location = static_cast<int>(obs.context_location);
  s.vision = obs.requires_vision ? 1 : 0;
  return s;
}

inline QTableShape qtable_shape(const ScenarioConfig& c, Bins bins) {
  return {c.queries.episode_length,
          static_cast<int>(c.deployment.categories.size()),
          bins.latency,
          bins.cost,
          static_cast<int>(c.deployment.endpoints.size()),
          static_cast<int>(enumerate_actions(c.deployment).size())};
}

// ---------------------------------------------------------------------------
// Offline profiling

struct ProfileCell {
  double mean_quality = 0.0;
  double mean_latency = 0.0;
  double mean_cost = 0.0;  // currency
  int samples = 0;
};

/// Per (endpoint, category) Monte Carlo means.
struct ProfiledStats {
  std::vector<std::vector<ProfileCell>> cells;  // [endpoint][category]

  const ProfileCell& at(std::size_t endpoint, std::size_t category) const { return cells.at(endpoint).at(category); }
};

/// Runs `samples` fresh-context turns per (endpoint, category), cloud turns
/// carrying every modality.
inline ProfiledStats profile_endpoints(const ScenarioConfig& config, int samples, Rng& rng) {
  if (samples < 1) throw std::invalid_argument("profiling needs at least one sample per cell");
  const auto& d = config.deployment;
  ProfiledStats stats;
  stats.cells.assign(d.endpoints.size(), std::vector<ProfileCell>(d.categories.size()));
  for (std::size_t e = 0; e < d.endpoints.size(); ++e) {
    for (std::size_t c = 0; c < d.categories.size(); ++c) {
      const Query q = config.make_query(c);
      const RoutingAction a{e, d.endpoints[e].accepts_vision ? q.available : ModalityMask{}};
      double quality = 0.0, latency = 0.0;
      std::int64_t cost = 0;
      for (int m = 0; m < samples; ++m) {
        const auto r = execute_turn(d, ConversationState::initial(d), q, a, LinkState::up, rng);
        quality += r.outcome.quality;
        latency += r.outcome.latency;
        cost += r.outcome.cost.units();
      }
      auto& cell = stats.cells[e][c];
      cell.samples = samples;
      cell.mean_quality = quality / samples;
      cell.mean_latency = latency / samples;
      cell.mean_cost = static_cast<double>(cost) / samples / Money::kUnitsPerCurrency;
    }
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Stateless decision rules

/// LLM-as-router stand-in: cloud iff the (noisy) difficulty estimate clears θ.
inline bool stateless_threshold_decide(double threshold, double difficulty, double noise_sigma, Rng& rng) {
  const double noise = noise_sigma > 0.0 ? noise_sigma * rng.normal() : 0.0;
  return difficulty + noise >= threshold;
}

/// Highest profiled quality that fits the per-turn budgets; ties go to the
/// lower endpoint index (the device).
inline RoutingAction classifier_decide(const ProfiledStats& stats, const Deployment& d, const Observation& obs,
                                       double turn_latency_budget, double turn_cost_budget) {
  std::size_t best = Deployment::kDevice;
  double best_quality = -1.0;
  for (std::size_t e = 0; e < d.endpoints.size(); ++e) {
    const auto& cell = stats.at(e, obs.category);
    if (cell.samples <= 0) throw std::invalid_argument("profile has no samples for this category");
    const bool fits = e == Deployment::kDevice ||
                      (cell.mean_latency <= turn_latency_budget && cell.mean_cost <= turn_cost_budget);
    if (fits && cell.mean_quality > best_quality) {
      best = e;
      best_quality = cell.mean_quality;
    }
  }
  if (best == Deployment::kDevice) return RoutingAction::device();
  return full_cloud_action(d, obs, best);
}

enum class SelfRouteDecision { keep_local, escalate };

inline SelfRouteDecision self_route(double confidence, double threshold) {
  return confidence < threshold ? SelfRouteDecision::escalate : SelfRouteDecision::keep_local;
}

/// Noisy self-assessment: the true success indicator, flipped with
/// probability `flip`. Consumes two draws.
inline double self_confidence(double local_quality, double flip, Rng& rng) {
  const bool success = rng.bernoulli(local_quality);
  const bool flipped = rng.bernoulli(flip);
  return success != flipped ? 1.0 : 0.0;
}

// ---------------------------------------------------------------------------
// Policy zoo

struct DeviceOnlyPolicy {};
struct CloudOnlyPolicy {};

struct ThresholdPolicy {
  double threshold = 0.5;
  double noise_sigma = 0.0;
};

struct ClassifierPolicy {
  ProfiledStats stats;
  double turn_latency_budget = 0.0;
  double turn_cost_budget = 0.0;
};

/// Device attempts every turn; the runner handles escalation.
struct SelfRoutePolicy {
  double threshold = 0.6;
  double flip_probability = 0.2;
};

struct QGreedyPolicy {
  std::shared_ptr<const QTable> table;
  Bins bins;
};

using Policy = std::variant<DeviceOnlyPolicy, CloudOnlyPolicy, ThresholdPolicy, ClassifierPolicy, SelfRoutePolicy, QGreedyPolicy>;

/// Uniform per-turn split of the session budgets.
inline ClassifierPolicy make_classifier(const ScenarioConfig& c, ProfiledStats stats) {
  const double k = c.queries.episode_length;
  return {std::move(stats), c.latency_budget / k, c.cost_budget.to_currency() / k};
}

/// Greedy action over `feasible`; ties to the lowest action index.
inline RoutingAction greedy_action(const QTable& table, const MDPStateIndex& s, const std::vector<RoutingAction>& actions,
                                   std::span<const RoutingAction> feasible) {
  const RoutingAction* best = nullptr;
  int best_index = 0;
  double best_value = 0.0;
  for (const auto& a : feasible) {
    const int i = action_index(actions, a);
    const double v = table.at(s, i);
    if (!best || v > best_value || (v == best_value && i < best_index)) {
      best = &a;
      best_index = i;
      best_value = v;
    }
  }
  return best ? *best : RoutingAction::device();
}

/// Routing decision; the result always lies in `feasible`.
inline RoutingAction decide(const Policy& policy, const Deployment& d, const Observation& obs,
                            std::span<const RoutingAction> feasible, Rng& rng) {
  if (feasible.empty()) throw std::invalid_argument("feasible action set is empty");
  const auto chosen = std::visit(
      [&](const auto& p) -> RoutingAction {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, DeviceOnlyPolicy> || std::is_same_v<P, SelfRoutePolicy>) {
          return RoutingAction::device();
        } else if constexpr (std::is_same_v<P, CloudOnlyPolicy>) {
          return full_cloud_action(d, obs);
        } else if constexpr (std::is_same_v<P, ThresholdPolicy>) {
          return stateless_threshold_decide(p.threshold, obs.difficulty, p.noise_sigma, rng) ? full_cloud_action(d, obs)
                                                                                              : RoutingAction::device();
        } else if constexpr (std::is_same_v<P, ClassifierPolicy>) {
          return classifier_decide(p.stats, d, obs, p.turn_latency_budget, p.turn_cost_budget);
        } else {
          const auto s = discretize(obs, p.bins.latency, p.bins.cost);
          return greedy_action(*p.table, s, enumerate_actions(d), feasible);
        }
      },
      policy);
  return preferred_or_device(chosen, feasible);
}

// ---------------------------------------------------------------------------
// Tabular Q-learning

/// Q(s,a) += α (r + γ·max_a′ Q(s′,a′)·[¬terminal] − Q(s,a)). The max runs
/// over `next_actions` (indices) when given, over every action otherwise.
inline void q_update(QTable& table, const MDPStateIndex& s, int a, double reward, const MDPStateIndex& s_next,
                     bool terminal, double alpha, double gamma, std::span<const int> next_actions = {}) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in [0, 1]");
  double next = 0.0;
  if (!terminal) {
    bool first = true;
    auto consider = [&](int i) {
      const double v = table.at(s_next, i);
      if (first || v > next) next = v;
      first = false;
    };
    if (next_actions.empty()) {
      for (int i = 0; i < table.shape().actions; ++i) consider(i);
    } else {
      for (int i : next_actions) consider(i);
    }
  }
  double& q = table.at(s, a);
  q += alpha * (reward + gamma * next - q);
}

struct QLearningParams {
  double alpha = 0.1;
  double gamma = 1.0;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double anneal_fraction = 0.8;
  Bins bins;
};

struct TrainingResult {
  QTable table;
  std::vector<double> returns;  // per-episode sum of quality
  std::int64_t updates = 0;
};

inline double epsilon_at(const QLearningParams& p, int episode, int episodes) {
  const double horizon = p.anneal_fraction * episodes;
  if (horizon <= 0.0 || episode >= horizon) return p.epsilon_end;
  return p.epsilon_start + (p.epsilon_end - p.epsilon_start) * (episode / horizon);
}

/// ε-greedy training over masked feasible sets; reward is turn quality.
/// Episode e runs with seed derive_seed(seed, e).
inline TrainingResult train_q(const ScenarioConfig& config, const QLearningParams& params, int episodes,
                              std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("training needs at least one episode");
  const auto actions = enumerate_actions(config.deployment);
  TrainingResult result{QTable(qtable_shape(config, params.bins)), {}, 0};
  result.returns.reserve(episodes);
  std::vector<int> next_indices;
  for (int ep = 0; ep < episodes; ++ep) {
    const auto episode_seed = derive_seed(seed, static_cast<std::uint64_t>(ep));
    EpisodeDriver driver(config, episode_seed);
    Rng explore(stream_seed(episode_seed, Stream::policy));
    const double eps = epsilon_at(params, ep, episodes);
    double total = 0.0;
    while (!driver.done()) {
      const auto s = discretize(driver.observe(), params.bins.latency, params.bins.cost);
      const auto& feasible = driver.feasible();
      RoutingAction a;
      if (explore.uniform() < eps) {
        a = feasible[static_cast<std::size_t>(explore.uniform() * feasible.size()) % feasible.size()];
      } else {
        a = greedy_action(result.table, s, actions, feasible);
      }
      const auto rec = driver.step(a);
      total += rec.outcome.quality;
      const bool terminal = driver.done();
      MDPStateIndex s_next = s;
      next_indices.clear();
      if (!terminal) {
        s_next = discretize(driver.observe(), params.bins.latency, params.bins.cost);
        for (const auto& fa : driver.feasible()) next_indices.push_back(action_index(actions, fa));
      }
      q_update(result.table, s, action_index(actions, a), rec.outcome.quality, s_next, terminal, params.alpha,
               params.gamma, next_indices);
      ++result.updates;
    }
    result.returns.push_back(total);
  }
  return result;
}

}  // namespace collabnet
