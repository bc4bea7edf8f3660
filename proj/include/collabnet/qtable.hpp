#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "collabnet/error.hpp"

namespace collabnet {

/// Discretized routing state.
struct MDPStateIndex {
  int turn = 0;
  int category = 0;
  int latency_bin = 0;
  int cost_bin = 0;
  int location = 0;
  int vision = 0;
  friend bool operator==(const MDPStateIndex&, const MDPStateIndex&) = default;
};

struct QTableShape {
  int turns = 1;
  int categories = 1;
  int latency_bins = 1;
  int cost_bins = 1;
  int locations = 1;
  int actions = 1;
  static constexpr int kVision = 2;

  std::size_t state_count() const {
    return static_cast<std::size_t>(turns) * categories * latency_bins * cost_bins * locations * kVision;
  }
  friend bool operator==(const QTableShape&, const QTableShape&) = default;
};

/// Dense state × action value table.
class QTable {
 public:
  QTable() = default;
  explicit QTable(QTableShape shape, double init = 0.0)
      : shape_(shape), values_(shape.state_count() * static_cast<std::size_t>(shape.actions), init), init_(init) {
    if (shape.turns < 1 || shape.categories < 1 || shape.latency_bins < 1 || shape.cost_bins < 1 ||
        shape.locations < 1 || shape.actions < 1) {
      throw std::invalid_argument("q-table dimensions must be >= 1");
    }
  }

  const QTableShape& shape() const { return shape_; }
  double init_value() const { return init_; }

  bool in_bounds(const MDPStateIndex& s) const {
    return s.turn >= 0 && s.turn < shape_.turns && s.category >= 0 && s.category < shape_.categories &&
           s.latency_bin >= 0 && s.latency_bin < shape_.latency_bins && s.cost_bin >= 0 &&
           s.cost_bin < shape_.cost_bins && s.location >= 0 && s.location < shape_.locations && s.vision >= 0 &&
           s.vision < QTableShape::kVision;
  }

  std::size_t state_offset(const MDPStateIndex& s) const {
    if (!in_bounds(s)) throw std::out_of_range("state index outside q-table bounds");
    std::size_t i = static_cast<std::size_t>(s.turn);
    i = i * shape_.categories + s.category;
    i = i * shape_.latency_bins + s.latency_bin;
    i = i * shape_.cost_bins + s.cost_bin;
    i = i * shape_.locations + s.location;
    i = i * QTableShape::kVision + s.vision;
    return i;
  }

  MDPStateIndex state_at(std::size_t offset) const {
    MDPStateIndex s;
    s.vision = static_cast<int>(offset % QTableShape::kVision);
    offset /= QTableShape::kVision;
    s.location = static_cast<int>(offset % shape_.locations);
    offset /= shape_.locations;
    s.cost_bin = static_cast<int>(offset % shape_.cost_bins);
    offset /= shape_.cost_bins;
    s.latency_bin = static_cast<int>(offset % shape_.latency_bins);
    offset /= shape_.latency_bins;
    s.category = static_cast<int>(offset % shape_.categories);
    s.turn = static_cast<int>(offset / shape_.categories);
    return s;
  }

  double& at(const MDPStateIndex& s, int action) { return values_[slot(s, action)]; }
  double at(const MDPStateIndex& s, int action) const { return values_[slot(s, action)]; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  friend bool operator==(const QTable& a, const QTable& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_ && a.init_ == b.init_;
  }

 private:
  std::size_t slot(const MDPStateIndex& s, int action) const {
    if (action < 0 || action >= shape_.actions) throw std::out_of_range("action index outside q-table bounds");
    return state_offset(s) * static_cast<std::size_t>(shape_.actions) + static_cast<std::size_t>(action);
  }

  QTableShape shape_;
  std::vector<double> values_;
  double init_ = 0.0;
};

namespace detail {

inline std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("cannot format q-value");
  return std::string(buf, end);
}

}  // namespace detail

/// Text format, version 1:
///   qtable v1 turns=T categories=C latency_bins=L cost_bins=B locations=P vision=2 actions=A
///   turn,category,latency_bin,cost_bin,location,vision,action,value     (one per nonzero entry)
/// Values use shortest round-trip decimal form, so parsing restores the
/// table bit-for-bit. Entries absent from the file are 0.
inline void write_qtable(const QTable& table, std::ostream& out) {
  if (table.init_value() != 0.0) throw std::invalid_argument("only zero-initialized tables serialize");
  const auto& sh = table.shape();
  out << "qtable v1 turns=" << sh.turns << " categories=" << sh.categories << " latency_bins=" << sh.latency_bins
      << " cost_bins=" << sh.cost_bins << " locations=" << sh.locations << " vision=" << QTableShape::kVision
      << " actions=" << sh.actions << '\n';
  const auto& v = table.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == 0.0 && !std::signbit(v[i])) continue;
    const auto s = table.state_at(i / sh.actions);
    out << s.turn << ',' << s.category << ',' << s.latency_bin << ',' << s.cost_bin << ',' << s.location << ','
        << s.vision << ',' << (i % sh.actions) << ',' << detail::shortest(v[i]) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing q-table");
}

inline QTable read_qtable(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw parse_error(1, "empty q-table file");
  std::istringstream header(line);
  std::string magic, version;
  header >> magic >> version;
  if (magic != "qtable" || version != "v1") throw parse_error(1, "expected header 'qtable v1'");
  QTableShape sh;
  int vision = 0;
  std::string kv;
  int fields = 0;
  while (header >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw parse_error(1, "malformed header field " + kv);
    const auto key = kv.substr(0, eq);
    int value = 0;
    const auto* b = kv.data() + eq + 1;
    const auto* e = kv.data() + kv.size();
    if (auto [p, ec] = std::from_chars(b, e, value); ec != std::errc{} || p != e) {
      throw parse_error(1, "malformed header value " + kv);
    }
    if (key == "turns") sh.turns = value;
    else if (key == "categories") sh.categories = value;
    else if (key == "latency_bins") sh.latency_bins = value;
    else if (key == "cost_bins") sh.cost_bins = value;
    else if (key == "locations") sh.locations = value;
    else if (key == "vision") vision = value;
    else if (key == "actions") sh.actions = value;
    else throw parse_error(1, "unknown header field " + key);
    ++fields;
  }
  if (fields != 7 || vision != QTableShape::kVision) throw parse_error(1, "incomplete q-table header");
  QTable table(sh);

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    int ints[7];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int k = 0; k < 7; ++k) {
      auto [q, ec] = std::from_chars(p, end, ints[k]);
      if (ec != std::errc{} || q == end || *q != ',') throw parse_error(lineno, "malformed q-table entry");
      p = q + 1;
    }
    double value = 0.0;
    auto [q, ec] = std::from_chars(p, end, value);
    if (ec != std::errc{} || q != end || !std::isfinite(value)) throw parse_error(lineno, "malformed q-value");
    const MDPStateIndex s{ints[0], ints[1], ints[2], ints[3], ints[4], ints[5]};
    if (!table.in_bounds(s) || ints[6] < 0 || ints[6] >= sh.actions) throw parse_error(lineno, "q-table entry out of bounds");
    table.at(s, ints[6]) = value;
  }
  return table;
}

}  // namespace collabnet
