#pragma once

#include <span>
#include <vector>

namespace collabnet {

/// Quality is maximized; latency and cost are minimized.
struct TradeoffPoint {
  double quality = 0.0;
  double latency = 0.0;
  double cost = 0.0;
};

inline bool dominates(const TradeoffPoint& a, const TradeoffPoint& b) {
  const bool no_worse = a.quality >= b.quality && a.latency <= b.latency && a.cost <= b.cost;
  const bool better = a.quality > b.quality || a.latency < b.latency || a.cost < b.cost;
  return no_worse && better;
}

/// Indices of non-dominated points, in input order.
inline std::vector<std::size_t> pareto_front(std::span<const TradeoffPoint> points) {
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < points.size() && !dominated; ++j) dominated = j != i && dominates(points[j], points[i]);
    if (!dominated) front.push_back(i);
  }
  return front;
}

}  // namespace collabnet
