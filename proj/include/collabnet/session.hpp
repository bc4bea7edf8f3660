#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "collabnet/money.hpp"
#include "collabnet/profiles.hpp"
#include "collabnet/rng.hpp"

namespace collabnet {

struct CompressionSpec {
  double ratio = 1.0;            // fraction of context tokens transmitted
  double quality_penalty = 0.0;  // multiplicative discount when used
};

struct SessionParams {
  double vision_penalty = 0.5;
  double retry_penalty = 1.0;  // seconds added on outage fallback
  double output_noise = 0.0;   // relative std-dev of output length; 0 = deterministic
  bool link_observable = true;
};

/// Everything a turn needs to know about the world. Endpoint 0 is the
/// device; the remaining endpoints are cloud-tier.
struct Deployment {
  std::vector<TaskCategory> categories;
  std::vector<ModalityItem> modalities;
  std::vector<EndpointProfile> endpoints;
  LinkModel link;
  std::optional<CompressionSpec> compression;
  SessionParams params;

  static constexpr std::size_t kDevice = 0;

  bool deterministic() const { return params.output_noise == 0.0; }
};

struct Query {
  std::size_t category = 0;
  std::int64_t input_tokens = 1;
  ModalityMask available;
};

struct ConversationState {
  std::int64_t context_tokens = 0;
  std::size_t context_location = Deployment::kDevice;
  int turn_index = 0;
  std::vector<int> turns_served;  // per endpoint, for rate limits

  static ConversationState initial(const Deployment& d) {
    ConversationState s;
    s.turns_served.assign(d.endpoints.size(), 0);
    return s;
  }
};

struct RoutingAction {
  std::size_t endpoint = Deployment::kDevice;
  ModalityMask modalities;

  static constexpr RoutingAction device() { return {}; }
  friend constexpr bool operator==(const RoutingAction&, const RoutingAction&) = default;
};

struct LatencyBreakdown {
  double uplink = 0.0;
  double prefill = 0.0;
  double decode = 0.0;
  double downlink = 0.0;
  double retry = 0.0;

  double total() const { return uplink + prefill + decode + downlink + retry; }

  LatencyBreakdown& operator+=(const LatencyBreakdown& o) {
    uplink += o.uplink;
    prefill += o.prefill;
    decode += o.decode;
    downlink += o.downlink;
    retry += o.retry;
    return *this;
  }
};

struct TurnOutcome {
  RoutingAction served;  // differs from the request after a fallback
  double quality = 0.0;
  LatencyBreakdown components;
  double latency = 0.0;
  Money cost;
  double energy = 0.0;
  std::int64_t billed_input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::int64_t handoff_tokens = 0;
  bool compressed_context = false;
  bool fallback_occurred = false;
  bool link_was_down = false;
};

struct TurnResult {
  TurnOutcome outcome;
  ConversationState state;
};

/// Tokens of accumulated context that must travel to `target`.
inline std::int64_t handoff_tokens(const ConversationState& state, std::size_t target,
                                   const std::optional<CompressionSpec>& compression) {
  if (target == state.context_location) return 0;
  if (!compression) return state.context_tokens;
  const double scaled = static_cast<double>(state.context_tokens) * compression->ratio;
  // tolerance absorbs products like 10 × 0.3 = 3.0000000000000004
  return static_cast<std::int64_t>(std::ceil(scaled - 1e-9));
}

inline std::int64_t modality_tokens(const Deployment& d, ModalityMask subset) {
  std::int64_t total = 0;
  for (std::size_t i = 0; i < d.modalities.size(); ++i) {
    if (subset.contains(i)) total += d.modalities[i].token_size;
  }
  return total;
}

/// Largest number of output tokens an endpoint can emit in one turn.
inline std::int64_t max_output_tokens(const EndpointProfile& e, const SessionParams& p) {
  const auto mean = std::max<std::int64_t>(1, std::llround(e.response_length));
  if (p.output_noise == 0.0) return mean;
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(e.response_length * (1.0 + 3.0 * p.output_noise))));
}

namespace detail {

enum class OutputMode { sample, worst_case };

inline std::int64_t draw_output_tokens(const EndpointProfile& e, const SessionParams& p, Rng* rng,
                                       OutputMode mode) {
  if (p.output_noise == 0.0) return max_output_tokens(e, p);
  if (mode == OutputMode::worst_case) return max_output_tokens(e, p);
  const double z = rng->normal();
  const auto drawn = std::llround(e.response_length * (1.0 + p.output_noise * z));
  return std::clamp<std::int64_t>(drawn, 1, max_output_tokens(e, p));
}

inline void validate_action(const Deployment& d, const Query& q, const RoutingAction& a) {
  if (a.endpoint >= d.endpoints.size()) throw std::invalid_argument("routing action names an unknown endpoint");
  if (!a.modalities.subset_of(q.available)) {
    throw std::invalid_argument("routing action selects modalities the query does not carry");
  }
  if (!a.modalities.empty() && !d.endpoints[a.endpoint].accepts_vision) {
    throw std::invalid_argument("endpoint " + d.endpoints[a.endpoint].id + " is text-only and cannot take modalities");
  }
}

inline TurnResult run_turn(const Deployment& d, const ConversationState& state, const Query& query,
                           RoutingAction action, LinkState link, Rng* rng, OutputMode mode) {
  validate_action(d, query, action);
  TurnOutcome out;
  if (d.endpoints[action.endpoint].tier == Tier::cloud && link == LinkState::down) {
    action = RoutingAction::device();
    out.fallback_occurred = true;
    out.link_was_down = true;
    out.components.retry = d.params.retry_penalty;
  } else {
    out.link_was_down = link == LinkState::down;
  }
  out.served = action;
  const EndpointProfile& e = d.endpoints[action.endpoint];
  const TaskCategory& cat = d.categories.at(query.category);

  const std::int64_t media = modality_tokens(d, action.modalities);
  std::int64_t handoff = handoff_tokens(state, action.endpoint, d.compression);
  // context beyond the window is dropped oldest-first
  handoff = std::clamp<std::int64_t>(handoff, 0, std::max<std::int64_t>(0, e.context_window - query.input_tokens - media));
  const std::int64_t prompt = query.input_tokens + handoff + media;
  const std::int64_t output = draw_output_tokens(e, d.params, rng, mode);

  out.handoff_tokens = handoff;
  out.output_tokens = output;
  out.components.prefill = static_cast<double>(prompt) / e.prefill_rate;
  out.components.decode = static_cast<double>(output) / e.decode_rate;
  if (e.tier == Tier::cloud) {
    out.components.uplink = transfer_time(d.link, prompt, Direction::up);
    out.components.downlink = transfer_time(d.link, output, Direction::down);
    out.billed_input_tokens = prompt;
    out.cost = e.input_price * prompt + e.output_price * output;
  }
  out.latency = out.components.total();
  out.energy = e.energy_per_token * static_cast<double>(prompt + output);

  double quality = e.base_quality.at(query.category) + modality_gain(e, query.category, action.modalities, d.modalities);
  out.compressed_context = d.compression && handoff > 0 && d.compression->ratio < 1.0;
  if (out.compressed_context) quality *= 1.0 - d.compression->quality_penalty;
  if (cat.requires_vision && action.modalities.empty()) quality *= d.params.vision_penalty;
  out.quality = std::clamp(quality, 0.0, 1.0);

  TurnResult result{out, state};
  result.state.context_tokens += query.input_tokens + output;
  result.state.context_location = action.endpoint;
  result.state.turn_index += 1;
  if (result.state.turns_served.size() < d.endpoints.size()) result.state.turns_served.resize(d.endpoints.size(), 0);
  result.state.turns_served[action.endpoint] += 1;
  return result;
}

}  // namespace detail

/// Executes one conversational turn. A cloud action with the link down is
/// served on the device with the retry penalty added.
inline TurnResult execute_turn(const Deployment& d, const ConversationState& state, const Query& query,
                               const RoutingAction& action, LinkState link, Rng& rng) {
  return detail::run_turn(d, state, query, action, link, &rng, detail::OutputMode::sample);
}

struct BudgetLedger {
  double latency_budget = 0.0;
  Money cost_budget;
  double latency_used = 0.0;
  Money cost_used;
  double energy_used = 0.0;

  double remaining_latency() const { return std::max(0.0, latency_budget - latency_used); }
  Money remaining_cost() const { return cost_used > cost_budget ? Money{} : cost_budget - cost_used; }
  bool violated() const { return latency_used > latency_budget || cost_used > cost_budget; }
};

struct LedgerUpdate {
  BudgetLedger ledger;
  bool violation = false;
};

inline LedgerUpdate apply_outcome(BudgetLedger ledger, const TurnOutcome& outcome) {
  ledger.latency_used += outcome.latency;
  ledger.cost_used += outcome.cost;
  ledger.energy_used += outcome.energy;
  return {ledger, ledger.violated()};
}

/// Action enumeration order: endpoints in deployment order (device first);
/// within a vision-capable endpoint, subsets in ascending bitmask order.
inline std::vector<RoutingAction> enumerate_actions(const Deployment& d) {
  std::vector<RoutingAction> actions;
  const std::uint32_t subsets = 1u << d.modalities.size();
  for (std::size_t e = 0; e < d.endpoints.size(); ++e) {
    if (!d.endpoints[e].accepts_vision) {
      actions.push_back({e, ModalityMask{}});
      continue;
    }
    for (std::uint32_t m = 0; m < subsets; ++m) actions.push_back({e, ModalityMask(m)});
  }
  return actions;
}

/// Worst-case resource bound for taking `action` now, including the device
/// reserve needed to finish the episode afterwards.
struct ActionBound {
  RoutingAction action;
  double latency = 0.0;
  Money cost;
};

/// Latency of finishing `turns` more turns on the device, each with the
/// largest query the scenario can generate.
inline double device_completion_latency(const Deployment& d, ConversationState state, int turns,
                                        std::int64_t max_input_tokens) {
  double total = 0.0;
  const Query worst{0, max_input_tokens, ModalityMask{}};
  for (int i = 0; i < turns; ++i) {
    auto r = detail::run_turn(d, state, worst, RoutingAction::device(), LinkState::up, nullptr,
                              detail::OutputMode::worst_case);
    total += r.outcome.latency;
    state = std::move(r.state);
  }
  return total;
}

/// Bounds for every action valid for `query` in `state`. Rate-limited
/// endpoints and modality subsets the query lacks are left out.
inline std::vector<ActionBound> estimate_action_bounds(const Deployment& d, const ConversationState& state,
                                                       const Query& query, int turns_after,
                                                       std::int64_t max_input_tokens) {
  constexpr double kPad = 1.0 + 1e-12;
  std::vector<ActionBound> bounds;
  const bool link_may_fail = !d.link.always_up();
  for (const auto& a : enumerate_actions(d)) {
    if (!a.modalities.subset_of(query.available)) continue;
    const auto& e = d.endpoints[a.endpoint];
    if (e.max_turns && state.turns_served.at(a.endpoint) >= *e.max_turns) continue;
    auto r = detail::run_turn(d, state, query, a, LinkState::up, nullptr, detail::OutputMode::worst_case);
    double latency = r.outcome.latency + device_completion_latency(d, r.state, turns_after, max_input_tokens);
    if (link_may_fail && e.tier == Tier::cloud) {
      auto fb = detail::run_turn(d, state, query, a, LinkState::down, nullptr, detail::OutputMode::worst_case);
      latency = std::max(latency, fb.outcome.latency + device_completion_latency(d, fb.state, turns_after, max_input_tokens));
    }
    bounds.push_back({a, latency * kPad, r.outcome.cost});
  }
  return bounds;
}

/// Actions whose bound fits the remaining budget. The device action with no
/// modalities is always present, as the last resort.
inline std::vector<RoutingAction> mask_actions(const BudgetLedger& ledger, const std::vector<ActionBound>& bounds) {
  std::vector<RoutingAction> feasible;
  for (const auto& b : bounds) {
    if (ledger.latency_used + b.latency <= ledger.latency_budget && ledger.cost_used + b.cost <= ledger.cost_budget) {
      feasible.push_back(b.action);
    }
  }
  if (std::find(feasible.begin(), feasible.end(), RoutingAction::device()) == feasible.end()) {
    feasible.insert(feasible.begin(), RoutingAction::device());
  }
  return feasible;
}

}  // namespace collabnet
