#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "collabnet/error.hpp"
#include "collabnet/json_reader.hpp"
#include "collabnet/money.hpp"
#include "collabnet/profiles.hpp"
#include "collabnet/session.hpp"
#include "collabnet/swarm.hpp"

namespace collabnet {

enum class Enforcement { hard, soft };

/// Queries come either from a fixed category sequence or i.i.d. from a
/// categorical distribution over categories.
struct QueryGenerator {
  int episode_length = 1;
  std::vector<std::size_t> sequence;  // non-empty for fixed mode
  std::vector<double> weights;        // per category, for random mode
  ModalityMask available;

  bool fixed() const { return !sequence.empty(); }
};

struct Bins {
  int latency = 8;
  int cost = 8;
};

struct ScenarioConfig {
  std::string name;
  Deployment deployment;
  QueryGenerator queries;
  double latency_budget = 0.0;  // s
  Money cost_budget;
  Enforcement enforcement = Enforcement::hard;
  std::uint64_t seed = 0;
  Bins bins;
  double self_route_flip = 0.2;
  std::optional<swarm::SwarmScenario> swarm;

  bool has_routing() const { return !deployment.endpoints.empty(); }

  std::int64_t max_input_tokens() const {
    std::int64_t m = 1;
    for (const auto& c : deployment.categories) m = std::max(m, c.input_tokens);
    return m;
  }

  /// Deterministic outcomes: fixed queries, no output noise, link never drops.
  bool deterministic() const {
    return queries.fixed() && deployment.deterministic() && deployment.link.always_up();
  }

  /// The query a category produces; every query carries the same modalities.
  Query make_query(std::size_t category) const {
    return Query{category, deployment.categories.at(category).input_tokens, queries.available};
  }

  BudgetLedger fresh_ledger() const {
    BudgetLedger l;
    l.latency_budget = latency_budget;
    l.cost_budget = cost_budget;
    return l;
  }
};

namespace detail {

inline std::size_t category_index(const std::vector<TaskCategory>& cats, const std::string& id, const std::string& field) {
  for (std::size_t i = 0; i < cats.size(); ++i)
    if (cats[i].id == id) return i;
  throw config_error(field, "unknown category " + id);
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

inline void read_routing(ObjectReader& r, ScenarioConfig& s) {
  auto& d = s.deployment;

  const json& cats = r.node("categories");
  if (!cats.is_array() || cats.empty()) throw config_error("categories", "categories must be a non-empty list");
  for (std::size_t i = 0; i < cats.size(); ++i) d.categories.push_back(load_category(cats[i], "categories[" + std::to_string(i) + "]"));
  for (std::size_t i = 0; i < d.categories.size(); ++i)
    for (std::size_t j = i + 1; j < d.categories.size(); ++j)
      if (d.categories[i].id == d.categories[j].id) throw config_error("categories", "duplicate category id " + d.categories[i].id);

  if (const json* mods = r.node_if("modalities")) {
    if (!mods->is_array()) throw config_error("modalities", "modalities must be a list");
    if (mods->size() > 16) throw config_error("modalities", "at most 16 modalities are supported");
    for (std::size_t i = 0; i < mods->size(); ++i) {
      d.modalities.push_back(load_modality((*mods)[i], d.categories, "modalities[" + std::to_string(i) + "]"));
    }
  }

  const json& eps = r.node("endpoints");
  if (!eps.is_array()) throw config_error("endpoints", "endpoints must be a list");
  std::vector<EndpointProfile> loaded;
  for (std::size_t i = 0; i < eps.size(); ++i) loaded.push_back(load_profile(eps[i], d.categories, "endpoints[" + std::to_string(i) + "]"));
  const auto devices = std::count_if(loaded.begin(), loaded.end(), [](const auto& e) { return e.tier == Tier::device; });
  if (devices != 1) throw config_error("endpoints", "endpoints must contain exactly one device-tier endpoint");
  if (loaded.size() < 2) throw config_error("endpoints", "endpoints must contain at least one cloud-tier endpoint");
  std::stable_partition(loaded.begin(), loaded.end(), [](const auto& e) { return e.tier == Tier::device; });
  d.endpoints = std::move(loaded);

  d.link = load_link(r.node("link"));

  if (const json* c = r.node_if("compression")) {
    ObjectReader cr(*c, "compression");
    CompressionSpec spec;
    spec.ratio = cr.get<double>("ratio");
    spec.quality_penalty = cr.get_or<double>("quality_penalty", 0.0);
    cr.finish();
    if (!(spec.ratio > 0.0 && spec.ratio <= 1.0)) throw config_error("compression.ratio", "compression.ratio must be in (0, 1]");
    if (!(spec.quality_penalty >= 0.0 && spec.quality_penalty < 1.0)) {
      throw config_error("compression.quality_penalty", "compression.quality_penalty must be in [0, 1)");
    }
    d.compression = spec;
  }

  if (const json* p = r.node_if("session")) {
    ObjectReader pr(*p, "session");
    d.params.vision_penalty = pr.get_or<double>("vision_penalty", 0.5);
    d.params.retry_penalty = pr.get_or<double>("retry_penalty_s", 1.0);
    d.params.output_noise = pr.get_or<double>("output_noise", 0.0);
    d.params.link_observable = pr.get_or<bool>("link_observable", true);
    s.self_route_flip = pr.get_or<double>("self_route_flip", 0.2);
    pr.finish();
    require_unit_interval(d.params.vision_penalty, "session.vision_penalty", "session.vision_penalty");
    require_nonnegative(d.params.retry_penalty, "session.retry_penalty_s", "session.retry_penalty_s");
    if (!(d.params.output_noise >= 0.0 && d.params.output_noise <= 0.3)) {
      throw config_error("session.output_noise", "session.output_noise must be in [0, 0.3]");
    }
    require_unit_interval(s.self_route_flip, "session.self_route_flip", "session.self_route_flip");
  }

  {
    ObjectReader qr(r.node("queries"), "queries");
    s.queries.episode_length = qr.get<int>("episode_length");
    const json* seq = qr.node_if("sequence");
    const json* dist = qr.node_if("distribution");
    if ((seq == nullptr) == (dist == nullptr)) {
      throw config_error("queries", "queries needs exactly one of sequence or distribution");
    }
    if (seq) {
      if (!seq->is_array() || seq->empty()) throw config_error("queries.sequence", "queries.sequence must be a non-empty list");
      for (const auto& id : *seq) {
        if (!id.is_string()) throw config_error("queries.sequence", "queries.sequence entries must be category ids");
        s.queries.sequence.push_back(category_index(d.categories, id.get<std::string>(), "queries.sequence"));
      }
    } else {
      s.queries.weights = read_category_map(qr, "distribution", d.categories, false, 0.0);
      double total = 0.0;
      for (std::size_t c = 0; c < d.categories.size(); ++c) {
        require_nonnegative(s.queries.weights[c], "queries.distribution." + d.categories[c].id, "queries.distribution");
        total += s.queries.weights[c];
      }
      if (!(total > 0.0)) throw config_error("queries.distribution", "queries.distribution must have positive mass");
    }
    s.queries.available = ModalityMask::all(d.modalities.size());
    if (const json* av = qr.node_if("available_modalities")) {
      if (!av->is_array()) throw config_error("queries.available_modalities", "queries.available_modalities must be a list");
      ModalityMask mask;
      for (const auto& id : *av) {
        const auto name = id.is_string() ? id.get<std::string>() : std::string{};
        auto it = std::find_if(d.modalities.begin(), d.modalities.end(), [&](const auto& m) { return m.id == name; });
        if (it == d.modalities.end()) throw config_error("queries.available_modalities", "unknown modality " + name);
        mask = mask.with(static_cast<std::size_t>(it - d.modalities.begin()));
      }
      s.queries.available = mask;
    }
    qr.finish();
    if (s.queries.episode_length < 1) throw config_error("queries.episode_length", "queries.episode_length must be >= 1");
  }

  {
    ObjectReader br(r.node("budgets"), "budgets");
    s.latency_budget = br.get<double>("latency_s");
    const double cost = br.get<double>("cost");
    br.finish();
    require_positive(s.latency_budget, "budgets.latency_s", "budgets.latency_s");
    require_positive(cost, "budgets.cost", "budgets.cost");
    s.cost_budget = Money::from_currency(cost, "budgets.cost");
  }

  const auto mode = r.get_or<std::string>("enforcement", "hard");
  if (mode == "hard") {
    s.enforcement = Enforcement::hard;
  } else if (mode == "soft") {
    s.enforcement = Enforcement::soft;
  } else {
    throw config_error("enforcement", "enforcement must be hard or soft");
  }

  if (const json* b = r.node_if("bins")) {
    if (b->is_number_integer()) {
      s.bins.latency = s.bins.cost = b->get<int>();
    } else {
      ObjectReader bn(*b, "bins");
      s.bins.latency = bn.get_or<int>("latency", 8);
      s.bins.cost = bn.get_or<int>("cost", 8);
      bn.finish();
    }
    if (s.bins.latency < 1 || s.bins.cost < 1) throw config_error("bins", "bins must be ≥ 1");
  }
}

}  // namespace detail

/// Checks cross-field invariants a hand-built config must also satisfy.
inline void validate_scenario(const ScenarioConfig& s) {
  if (!s.has_routing()) return;
  if (s.enforcement == Enforcement::hard) {
    const double reserve = device_completion_latency(s.deployment, ConversationState::initial(s.deployment),
                                                     s.queries.episode_length, s.max_input_tokens());
    if (reserve > s.latency_budget) {
      throw config_error("budgets.latency_s", "budgets.latency_s cannot cover a device-only episode under hard enforcement");
    }
  }
}

/// Parses and validates a scenario document (JSON; schema in README).
inline ScenarioConfig parse_scenario(const std::string& text) {
  detail::json doc;
  try {
    doc = detail::json::parse(text);
  } catch (const detail::json::parse_error& e) {
    throw parse_error(detail::line_of(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
  }
  detail::ObjectReader r(doc, "");
  ScenarioConfig s;
  s.name = r.get_or<std::string>("name", "scenario");
  s.seed = r.get_or<std::uint64_t>("seed", 0);
  if (r.has("endpoints") || !r.has("swarm")) detail::read_routing(r, s);
  if (const auto* sw = r.node_if("swarm")) s.swarm = swarm::load_swarm(*sw);
  r.finish();
  validate_scenario(s);
  return s;
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace collabnet
