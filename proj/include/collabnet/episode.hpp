#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "collabnet/rng.hpp"
#include "collabnet/scenario.hpp"
#include "collabnet/session.hpp"

namespace collabnet {

/// What a routing policy may see before choosing an action.
struct Observation {
  std::size_t category = 0;
  double difficulty = 0.0;
  bool requires_vision = false;
  ModalityMask available;
  int turn_index = 0;
  int episode_length = 1;
  double remaining_latency = 0.0;
  Money remaining_cost;
  double latency_budget = 0.0;
  Money cost_budget;
  std::size_t context_location = Deployment::kDevice;
  std::int64_t context_tokens = 0;
  bool link_up = true;
};

struct TurnRecord {
  int turn = 0;
  std::size_t category = 0;
  RoutingAction requested;
  TurnOutcome outcome;
  bool escalated = false;
  bool violation = false;
  BudgetLedger ledger_after;
};

/// Random streams carved from one episode seed.
enum class Stream : std::uint64_t { queries = 1, link = 2, session = 3, policy = 4 };

inline std::uint64_t stream_seed(std::uint64_t episode_seed, Stream s) {
  return derive_seed(episode_seed, static_cast<std::uint64_t>(s));
}

/// Steps one episode through the session model, maintaining the ledger and
/// the feasible action set.
class EpisodeDriver {
 public:
  EpisodeDriver(const ScenarioConfig& config, std::uint64_t episode_seed)
      : config_(config),
        link_rng_(stream_seed(episode_seed, Stream::link)),
        session_rng_(stream_seed(episode_seed, Stream::session)),
        state_(ConversationState::initial(config.deployment)),
        ledger_(config.fresh_ledger()),
        link_(config.deployment.link.initial_state) {
    if (!config.has_routing()) throw std::invalid_argument("scenario has no routing section");
    Rng query_rng(stream_seed(episode_seed, Stream::queries));
    const auto& gen = config.queries;
    queries_.reserve(gen.episode_length);
    for (int t = 0; t < gen.episode_length; ++t) {
      const auto cat = gen.fixed() ? gen.sequence[t % gen.sequence.size()] : query_rng.categorical(gen.weights);
      queries_.push_back(config.make_query(cat));
    }
    refresh_feasible();
  }

  bool done() const { return turn_ >= static_cast<int>(queries_.size()); }
  int turn() const { return turn_; }
  const Query& query() const { return queries_.at(turn_); }
  const std::vector<Query>& queries() const { return queries_; }
  const BudgetLedger& ledger() const { return ledger_; }
  const ConversationState& state() const { return state_; }
  LinkState link() const { return link_; }
  const std::vector<RoutingAction>& feasible() const { return feasible_; }
  const std::vector<TurnRecord>& trace() const { return trace_; }

  Observation observe() const {
    const auto& q = query();
    const auto& cat = config_.deployment.categories[q.category];
    Observation o;
    o.category = q.category;
    o.difficulty = cat.difficulty;
    o.requires_vision = cat.requires_vision;
    o.available = q.available;
    o.turn_index = turn_;
    o.episode_length = static_cast<int>(queries_.size());
    o.remaining_latency = ledger_.remaining_latency();
    o.remaining_cost = ledger_.remaining_cost();
    o.latency_budget = ledger_.latency_budget;
    o.cost_budget = ledger_.cost_budget;
    o.context_location = state_.context_location;
    o.context_tokens = state_.context_tokens;
    o.link_up = !config_.deployment.params.link_observable || link_ == LinkState::up;
    return o;
  }

  bool is_feasible(const RoutingAction& a) const {
    return std::find(feasible_.begin(), feasible_.end(), a) != feasible_.end();
  }

  TurnRecord step(const RoutingAction& action) {
    if (done()) throw std::logic_error("episode already finished");
    if (!is_feasible(action)) throw std::logic_error("action is not in the feasible set");
    auto r = execute_turn(config_.deployment, state_, query(), action, link_, session_rng_);
    TurnRecord rec = commit_start(action);
    rec.outcome = r.outcome;
    return commit_finish(std::move(rec), std::move(r.state));
  }

  /// Local device attempt, then an optional escalation to `escalation`
  /// when `escalate(local)` is true and the escalation fits the budget.
  TurnRecord step_with_escalation(const RoutingAction& escalation,
                                  const std::function<bool(const TurnOutcome&)>& escalate) {
    if (done()) throw std::logic_error("episode already finished");
    const auto& d = config_.deployment;
    auto local = execute_turn(d, state_, query(), RoutingAction::device(), link_, session_rng_);
    TurnRecord rec = commit_start(RoutingAction::device());
    rec.outcome = local.outcome;
    if (escalation == RoutingAction::device() || !escalate(local.outcome)) {
      return commit_finish(std::move(rec), std::move(local.state));
    }

    const auto after_local = apply_outcome(ledger_, local.outcome).ledger;
    bool fits = true;
    if (config_.enforcement == Enforcement::hard) {
      const auto bounds = estimate_action_bounds(d, state_, query(), remaining_after_current(), config_.max_input_tokens());
      auto it = std::find_if(bounds.begin(), bounds.end(), [&](const ActionBound& b) { return b.action == escalation; });
      fits = it != bounds.end() && after_local.latency_used + it->latency <= after_local.latency_budget &&
             after_local.cost_used + it->cost <= after_local.cost_budget;
    } else {
      const auto& e = d.endpoints.at(escalation.endpoint);
      fits = !e.max_turns || state_.turns_served.at(escalation.endpoint) < *e.max_turns;
    }
    if (!fits) return commit_finish(std::move(rec), std::move(local.state));

    auto remote = execute_turn(d, state_, query(), escalation, link_, session_rng_);
    rec.requested = escalation;
    rec.escalated = true;
    // token counts describe the delivered (cloud) answer; time, money and
    // energy include the discarded local attempt
    TurnOutcome combined = remote.outcome;
    combined.components += local.outcome.components;
    combined.latency = combined.components.total();
    combined.cost = local.outcome.cost + remote.outcome.cost;
    combined.energy = local.outcome.energy + remote.outcome.energy;
    rec.outcome = combined;
    // the discarded local attempt still occupied the device
    remote.state.turns_served[Deployment::kDevice] += 1;
    return commit_finish(std::move(rec), std::move(remote.state));
  }

 private:
  int remaining_after_current() const { return static_cast<int>(queries_.size()) - turn_ - 1; }

  TurnRecord commit_start(const RoutingAction& requested) const {
    TurnRecord rec;
    rec.turn = turn_;
    rec.category = query().category;
    rec.requested = requested;
    return rec;
  }

  TurnRecord commit_finish(TurnRecord rec, ConversationState next) {
    auto update = apply_outcome(ledger_, rec.outcome);
    ledger_ = update.ledger;
    rec.violation = update.violation;
    rec.ledger_after = ledger_;
    state_ = std::move(next);
    trace_.push_back(rec);
    ++turn_;
    if (!done()) {
      link_ = step_link(config_.deployment.link, link_, link_rng_);
      refresh_feasible();
    } else {
      feasible_.clear();
    }
    return rec;
  }

  void refresh_feasible() {
    if (done()) return;
    const auto bounds = estimate_action_bounds(config_.deployment, state_, query(), remaining_after_current(),
                                               config_.max_input_tokens());
    if (config_.enforcement == Enforcement::hard) {
      feasible_ = mask_actions(ledger_, bounds);
    } else {
      feasible_.clear();
      for (const auto& b : bounds) feasible_.push_back(b.action);
    }
  }

  const ScenarioConfig& config_;
  Rng link_rng_;
  Rng session_rng_;
  std::vector<Query> queries_;
  ConversationState state_;
  BudgetLedger ledger_;
  LinkState link_;
  int turn_ = 0;
  std::vector<RoutingAction> feasible_;
  std::vector<TurnRecord> trace_;
};

}  // namespace collabnet
