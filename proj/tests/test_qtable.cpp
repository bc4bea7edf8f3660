#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "test_support.hpp"

using namespace collabnet;

namespace {

QTable read_text(const std::string& text) {
  std::istringstream in(text);
  return read_qtable(in);
}

}  // namespace

TEST(QTableShape, OffsetsRoundTrip) {
  const QTable t(QTableShape{3, 4, 5, 2, 3, 9});
  for (std::size_t off = 0; off < t.values().size() / 9; ++off) EXPECT_EQ(t.state_offset(t.state_at(off)), off);
  EXPECT_THROW(t.state_offset(MDPStateIndex{3, 0, 0, 0, 0, 0}), std::out_of_range);
  EXPECT_THROW(t.at(MDPStateIndex{}, 9), std::out_of_range);
  EXPECT_THROW(QTable(QTableShape{0, 1, 1, 1, 1, 1}), std::invalid_argument);
}

TEST(QTableIo, RoundTripIsBitExact) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const QTableShape shape{1 + static_cast<int>(rng.uniform() * 4), 1 + static_cast<int>(rng.uniform() * 4),
                            1 + static_cast<int>(rng.uniform() * 8), 1 + static_cast<int>(rng.uniform() * 8),
                            1 + static_cast<int>(rng.uniform() * 3), 1 + static_cast<int>(rng.uniform() * 9)};
    QTable t(shape);
    for (auto& v : t.values()) {
      if (rng.bernoulli(0.3)) v = (rng.uniform() - 0.3) * std::pow(10.0, rng.uniform() * 10 - 5);
    }
    t.values().front() = std::numeric_limits<double>::denorm_min();
    t.values().back() = 0.1 + 0.2;
    std::ostringstream out;
    write_qtable(t, out);
    const auto back = read_text(out.str());
    EXPECT_EQ(back, t);
  }
}

TEST(QTableIo, TrainedTableRoundTrips) {
  const auto c = collabnet::testing::kitchen();
  const auto trained = train_q(c, QLearningParams{}, 200, 3);
  std::ostringstream out;
  write_qtable(trained.table, out);
  EXPECT_EQ(read_text(out.str()), trained.table);
  EXPECT_EQ(out.str().rfind("qtable v1 turns=10 categories=4 latency_bins=8 cost_bins=8 locations=2 vision=2 actions=9\n", 0), 0u);
}

TEST(QTableIo, OnlyNonzeroEntriesWritten) {
  QTable t(QTableShape{1, 1, 1, 1, 1, 3});
  t.at(MDPStateIndex{}, 1) = 0.25;
  std::ostringstream out;
  write_qtable(t, out);
  EXPECT_EQ(out.str(), "qtable v1 turns=1 categories=1 latency_bins=1 cost_bins=1 locations=1 vision=2 actions=3\n"
                       "0,0,0,0,0,0,1,0.25\n");
}

TEST(QTableIo, MalformedInputReportsLine) {
  const std::string header = "qtable v1 turns=1 categories=1 latency_bins=1 cost_bins=1 locations=1 vision=2 actions=3\n";
  auto line_of_error = [](const std::string& text) -> std::size_t {
    try {
      read_text(text);
    } catch (const parse_error& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of_error(""), 1u);
  EXPECT_EQ(line_of_error("qtable v2 turns=1\n"), 1u);
  EXPECT_EQ(line_of_error("qtable v1 turns=1 categories=1\n"), 1u);
  EXPECT_EQ(line_of_error(header + "0,0,0,0,0,0,1,0.5\n0,0,0,0,0,0,7,0.5\n"), 3u);
  EXPECT_EQ(line_of_error(header + "0,0,0,0,0,0,1,abc\n"), 2u);
  EXPECT_EQ(line_of_error(header + "0,0,0,0,0,0,1\n"), 2u);
  EXPECT_EQ(line_of_error(header + "0,0,0,0,0,0,1,inf\n"), 2u);
  EXPECT_NO_THROW(read_text(header + "0,0,0,0,0,1,2,-3.5\n"));
}
