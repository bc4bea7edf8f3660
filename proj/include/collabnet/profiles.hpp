#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "collabnet/json_reader.hpp"
#include "collabnet/money.hpp"
#include "collabnet/rng.hpp"

namespace collabnet {

struct TaskCategory {
  std::string id;
  double difficulty = 0.0;  // [0, 1]
  bool requires_vision = false;
  std::int64_t input_tokens = 1;  // query size used by the generator
};

struct ModalityItem {
  std::string id;
  std::int64_t token_size = 0;
  std::vector<double> coverage;  // indexed by category
};

/// Bitmask over the scenario's modality list; bit i is modality i.
class ModalityMask {
 public:
  constexpr ModalityMask() = default;
  constexpr explicit ModalityMask(std::uint32_t bits) : bits_(bits) {}

  static constexpr ModalityMask all(std::size_t count) {
    return ModalityMask(count >= 32 ? ~0u : ((1u << count) - 1u));
  }

  constexpr std::uint32_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool contains(std::size_t i) const { return (bits_ >> i) & 1u; }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr bool subset_of(ModalityMask o) const { return (bits_ & ~o.bits_) == 0; }
  constexpr ModalityMask with(std::size_t i) const { return ModalityMask(bits_ | (1u << i)); }
  constexpr ModalityMask operator&(ModalityMask o) const { return ModalityMask(bits_ & o.bits_); }
  constexpr ModalityMask operator|(ModalityMask o) const { return ModalityMask(bits_ | o.bits_); }
  friend constexpr bool operator==(ModalityMask, ModalityMask) = default;

 private:
  std::uint32_t bits_ = 0;
};

enum class Tier { device, cloud };

struct EndpointProfile {
  std::string id;
  Tier tier = Tier::device;
  bool accepts_vision = false;
  double prefill_rate = 1.0;  // tokens/s
  double decode_rate = 1.0;   // tokens/s
  Money input_price;          // per token
  Money output_price;         // per token
  double energy_per_token = 0.0;  // J/token
  std::int64_t context_window = 1;
  std::vector<double> base_quality;     // indexed by category
  std::vector<double> vision_gain_cap;  // indexed by category
  double response_length = 1.0;         // mean output tokens
  std::optional<int> max_turns;         // per-episode rate limit
};

enum class LinkState { up, down };
enum class Direction { up, down };

/// Two-state (Gilbert) connectivity chain plus a rate/RTT transfer model.
struct LinkModel {
  double uplink_rate = 1.0;    // tokens/s
  double downlink_rate = 1.0;  // tokens/s
  double rtt = 0.0;            // s
  double p_up_to_down = 0.0;
  double p_down_to_up = 1.0;
  LinkState initial_state = LinkState::up;

  bool always_up() const { return initial_state == LinkState::up && p_up_to_down == 0.0; }

  double long_run_availability() const {
    const double sum = p_up_to_down + p_down_to_up;
    if (sum == 0.0) return initial_state == LinkState::up ? 1.0 : 0.0;
    return p_down_to_up / sum;
  }
};

/// One Markov transition using exactly one uniform draw.
inline LinkState step_link(const LinkModel& link, LinkState state, Rng& rng) {
  const double u = rng.uniform();
  if (state == LinkState::up) return u < link.p_up_to_down ? LinkState::down : LinkState::up;
  return u < link.p_down_to_up ? LinkState::up : LinkState::down;
}

inline double transfer_time(const LinkModel& link, std::int64_t tokens, Direction direction) {
  const double rate = direction == Direction::up ? link.uplink_rate : link.downlink_rate;
  return static_cast<double>(tokens) / rate + link.rtt;
}

/// Coverage-form quality gain: cap × (1 − Π(1 − coverage)). Submodular and
/// monotone in `subset`, bounded by the category's cap.
inline double modality_gain(const EndpointProfile& endpoint, std::size_t category,
                            ModalityMask subset, const std::vector<ModalityItem>& modalities) {
  if (subset.empty()) return 0.0;
  if (!endpoint.accepts_vision) {
    throw std::invalid_argument("endpoint " + endpoint.id + " is text-only and cannot take modalities");
  }
  double miss = 1.0;
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    if (subset.contains(i)) miss *= 1.0 - modalities[i].coverage.at(category);
  }
  return endpoint.vision_gain_cap.at(category) * (1.0 - miss);
}

namespace detail {

inline void require_unit_interval(double v, const std::string& field, const std::string& name) {
  if (!(v >= 0.0 && v <= 1.0)) throw config_error(field, name + " must be in [0, 1]");
}

inline void require_positive(double v, const std::string& field, const std::string& name) {
  if (!(v > 0.0)) throw config_error(field, name + " must be > 0");
}

inline void require_nonnegative(double v, const std::string& field, const std::string& name) {
  if (!(v >= 0.0)) throw config_error(field, name + " must be >= 0");
}

/// Reads {category_id: value} into a vector ordered like `categories`.
inline std::vector<double> read_category_map(ObjectReader& r, const std::string& key,
                                             const std::vector<TaskCategory>& categories,
                                             bool required, double fallback) {
  std::vector<double> out(categories.size(), fallback);
  const json* node = required ? &r.node(key) : r.node_if(key);
  if (!node) return out;
  ObjectReader m(*node, r.qualify(key));
  for (std::size_t c = 0; c < categories.size(); ++c) {
    if (required || m.has(categories[c].id)) out[c] = m.get<double>(categories[c].id);
  }
  m.finish();
  return out;
}

}  // namespace detail

inline TaskCategory load_category(const detail::json& record, const std::string& path = "category") {
  detail::ObjectReader r(record, path);
  TaskCategory c;
  c.id = r.get<std::string>("id");
  c.difficulty = r.get<double>("difficulty");
  c.requires_vision = r.get_or<bool>("requires_vision", false);
  c.input_tokens = r.get<std::int64_t>("input_tokens");
  r.finish();
  detail::require_unit_interval(c.difficulty, r.qualify("difficulty"), "difficulty");
  if (c.input_tokens <= 0) throw config_error(r.qualify("input_tokens"), "input_tokens must be > 0");
  return c;
}

inline ModalityItem load_modality(const detail::json& record, const std::vector<TaskCategory>& categories,
                                  const std::string& path = "modality") {
  detail::ObjectReader r(record, path);
  ModalityItem m;
  m.id = r.get<std::string>("id");
  m.token_size = r.get<std::int64_t>("token_size");
  m.coverage = detail::read_category_map(r, "coverage", categories, false, 0.0);
  r.finish();
  if (m.token_size < 0) throw config_error(r.qualify("token_size"), "token_size must be >= 0");
  for (std::size_t c = 0; c < categories.size(); ++c) {
    detail::require_unit_interval(m.coverage[c], r.qualify("coverage." + categories[c].id), "coverage");
  }
  return m;
}

/// Validates one endpoint record against the category list.
inline EndpointProfile load_profile(const detail::json& record, const std::vector<TaskCategory>& categories,
                                    const std::string& path = "endpoint") {
  detail::ObjectReader r(record, path);
  EndpointProfile e;
  e.id = r.get<std::string>("id");
  const auto tier = r.get<std::string>("tier");
  if (tier == "device") {
    e.tier = Tier::device;
  } else if (tier == "cloud") {
    e.tier = Tier::cloud;
  } else {
    throw config_error(r.qualify("tier"), "tier must be device or cloud");
  }
  e.accepts_vision = r.get_or<bool>("accepts_vision", false);
  e.prefill_rate = r.get<double>("prefill_rate");
  e.decode_rate = r.get<double>("decode_rate");
  const double input_price = r.get_or<double>("input_price", 0.0);
  const double output_price = r.get_or<double>("output_price", 0.0);
  e.energy_per_token = r.get_or<double>("energy_per_token", 0.0);
  e.context_window = r.get<std::int64_t>("context_window");
  e.base_quality = detail::read_category_map(r, "base_quality", categories, true, 0.0);
  e.vision_gain_cap = detail::read_category_map(r, "vision_gain_cap", categories, false, 0.0);
  e.response_length = r.get<double>("response_length");
  e.max_turns = r.get_optional<int>("max_turns");
  r.finish();

  detail::require_positive(e.prefill_rate, r.qualify("prefill_rate"), "prefill_rate");
  detail::require_positive(e.decode_rate, r.qualify("decode_rate"), "decode_rate");
  detail::require_nonnegative(input_price, r.qualify("input_price"), "input_price");
  detail::require_nonnegative(output_price, r.qualify("output_price"), "output_price");
  detail::require_nonnegative(e.energy_per_token, r.qualify("energy_per_token"), "energy_per_token");
  if (e.context_window <= 0) throw config_error(r.qualify("context_window"), "context_window must be > 0");
  detail::require_positive(e.response_length, r.qualify("response_length"), "response_length");
  if (e.max_turns && *e.max_turns < 0) throw config_error(r.qualify("max_turns"), "max_turns must be >= 0");
  e.input_price = Money::from_currency(input_price, r.qualify("input_price"));
  e.output_price = Money::from_currency(output_price, r.qualify("output_price"));

  for (std::size_t c = 0; c < categories.size(); ++c) {
    const auto& cat = categories[c].id;
    detail::require_unit_interval(e.base_quality[c], r.qualify("base_quality." + cat), "base_quality");
    detail::require_nonnegative(e.vision_gain_cap[c], r.qualify("vision_gain_cap." + cat), "vision_gain_cap");
    if (e.base_quality[c] + e.vision_gain_cap[c] > 1.0 + 1e-12) {
      throw config_error(r.qualify("vision_gain_cap." + cat), "base_quality + vision_gain_cap must be <= 1");
    }
  }
  if (e.tier == Tier::device) {
    if (e.input_price.units() != 0 || e.output_price.units() != 0) {
      throw config_error(r.qualify("input_price"), "device tier must be zero-price");
    }
    if (e.max_turns) throw config_error(r.qualify("max_turns"), "device tier cannot be rate limited");
  }
  return e;
}

inline LinkModel load_link(const detail::json& record, const std::string& path = "link") {
  detail::ObjectReader r(record, path);
  LinkModel l;
  l.uplink_rate = r.get<double>("uplink_rate");
  l.downlink_rate = r.get<double>("downlink_rate");
  l.rtt = r.get_or<double>("rtt", 0.0);
  l.p_up_to_down = r.get_or<double>("p_up_to_down", 0.0);
  l.p_down_to_up = r.get_or<double>("p_down_to_up", 1.0);
  const auto initial = r.get_or<std::string>("initial_state", "up");
  r.finish();
  detail::require_positive(l.uplink_rate, r.qualify("uplink_rate"), "uplink_rate");
  detail::require_positive(l.downlink_rate, r.qualify("downlink_rate"), "downlink_rate");
  detail::require_nonnegative(l.rtt, r.qualify("rtt"), "rtt");
  detail::require_unit_interval(l.p_up_to_down, r.qualify("p_up_to_down"), "p_up_to_down");
  detail::require_unit_interval(l.p_down_to_up, r.qualify("p_down_to_up"), "p_down_to_up");
  if (initial == "up") {
    l.initial_state = LinkState::up;
  } else if (initial == "down") {
    l.initial_state = LinkState::down;
  } else {
    throw config_error(r.qualify("initial_state"), "initial_state must be up or down");
  }
  return l;
}

}  // namespace collabnet
