#pragma once

#include <bit>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "collabnet/scenario.hpp"
#include "collabnet/session.hpp"

namespace collabnet {

/// Exact (undiscretized) state of a deterministic episode.
struct OracleState {
  int turn = 0;
  std::int64_t context_tokens = 0;
  std::size_t location = 0;
  std::vector<int> turns_served;
  std::uint64_t latency_bits = 0;  // bit pattern of latency used
  std::int64_t cost_units = 0;

  auto key() const { return std::tie(turn, context_tokens, location, turns_served, latency_bits, cost_units); }
  friend bool operator<(const OracleState& a, const OracleState& b) { return a.key() < b.key(); }
};

struct OracleResult {
  double value = 0.0;  // -inf when no action sequence fits the budgets
  bool feasible = false;
  std::vector<RoutingAction> plan;              // along the optimal path
  std::map<OracleState, RoutingAction> policy;  // every reachable state with a feasible continuation
  std::size_t states = 0;
};

/// Backward induction over exact ledgers maximizing total quality, every
/// prefix kept within both budgets. Exhaustive over valid actions per turn.
inline OracleResult dp_optimal(const ScenarioConfig& config, std::size_t max_states = 5'000'000) {
  if (!config.deterministic()) throw std::invalid_argument("oracle requires deterministic mode");
  const auto& d = config.deployment;
  const int horizon = config.queries.episode_length;
  std::vector<Query> queries;
  for (int t = 0; t < horizon; ++t) {
    queries.push_back(config.make_query(config.queries.sequence[t % config.queries.sequence.size()]));
  }
  const auto actions = enumerate_actions(d);
  constexpr double kInfeasible = -std::numeric_limits<double>::infinity();
  struct Entry {
    double value;
    RoutingAction best;
  };
  std::map<OracleState, Entry> memo;
  Rng unused(0);

  auto solve = [&](auto&& self, const OracleState& s, const ConversationState& conv, const BudgetLedger& ledger) -> double {
    if (s.turn == horizon) return 0.0;
    if (auto it = memo.find(s); it != memo.end()) return it->second.value;
    if (memo.size() >= max_states) throw std::runtime_error("oracle state space exceeds limit");
    Entry entry{kInfeasible, RoutingAction::device()};
    const Query& q = queries[s.turn];
    for (const auto& a : actions) {
      if (!a.modalities.subset_of(q.available)) continue;
      const auto& e = d.endpoints[a.endpoint];
      if (e.max_turns && conv.turns_served[a.endpoint] >= *e.max_turns) continue;
      const auto r = execute_turn(d, conv, q, a, LinkState::up, unused);
      const auto update = apply_outcome(ledger, r.outcome);
      if (update.violation) continue;
      OracleState next{s.turn + 1,
                       r.state.context_tokens,
                       r.state.context_location,
                       r.state.turns_served,
                       std::bit_cast<std::uint64_t>(update.ledger.latency_used),
                       update.ledger.cost_used.units()};
      const double v = r.outcome.quality + self(self, next, r.state, update.ledger);
      if (v > entry.value) entry = {v, a};
    }
    memo.emplace(s, entry);
    return entry.value;
  };

  const auto conv0 = ConversationState::initial(d);
  const OracleState s0{0, 0, conv0.context_location, conv0.turns_served, std::bit_cast<std::uint64_t>(0.0), 0};
  OracleResult result;
  result.value = solve(solve, s0, conv0, config.fresh_ledger());
  result.feasible = result.value != kInfeasible;
  result.states = memo.size();
  for (const auto& [state, entry] : memo)
    if (entry.value != kInfeasible) result.policy.emplace(state, entry.best);

  if (result.feasible) {
    auto conv = conv0;
    auto ledger = config.fresh_ledger();
    for (int t = 0; t < horizon; ++t) {
      const OracleState s{t, conv.context_tokens, conv.context_location, conv.turns_served,
                          std::bit_cast<std::uint64_t>(ledger.latency_used), ledger.cost_used.units()};
      const auto a = memo.at(s).best;
      result.plan.push_back(a);
      const auto r = execute_turn(d, conv, queries[t], a, LinkState::up, unused);
      ledger = apply_outcome(ledger, r.outcome).ledger;
      conv = r.state;
    }
  }
  return result;
}

}  // namespace collabnet
