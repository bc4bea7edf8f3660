#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "test_support.hpp"

using namespace collabnet;
using collabnet::testing::kitchen;
using collabnet::testing::micro;

namespace {

Observation obs_for(const ScenarioConfig& c, std::size_t category) {
  Observation o;
  o.category = category;
  o.difficulty = c.deployment.categories[category].difficulty;
  o.requires_vision = c.deployment.categories[category].requires_vision;
  o.available = c.queries.available;
  o.episode_length = c.queries.episode_length;
  o.latency_budget = c.latency_budget;
  o.cost_budget = c.cost_budget;
  o.remaining_latency = c.latency_budget;
  o.remaining_cost = c.cost_budget;
  return o;
}

ProfiledStats two_endpoint_stats(double device_q, double cloud_q, double cloud_cost) {
  ProfiledStats s;
  s.cells = {{{device_q, 5.0, 0.0, 10}}, {{cloud_q, 3.0, cloud_cost, 10}}};
  return s;
}

}  // namespace

TEST(Decide, DeviceOnlyAlwaysDevice) {
  const auto c = kitchen();
  const auto actions = enumerate_actions(c.deployment);
  Rng rng(1);
  for (std::size_t cat = 0; cat < c.deployment.categories.size(); ++cat) {
    EXPECT_EQ(decide(DeviceOnlyPolicy{}, c.deployment, obs_for(c, cat), actions, rng), RoutingAction::device());
  }
}

TEST(Decide, CloudOnlyMaskedToDevice) {
  const auto c = kitchen();
  Rng rng(1);
  const std::vector<RoutingAction> only_device{RoutingAction::device()};
  EXPECT_EQ(decide(CloudOnlyPolicy{}, c.deployment, obs_for(c, 0), only_device, rng), RoutingAction::device());
  const auto all = enumerate_actions(c.deployment);
  const auto chosen = decide(CloudOnlyPolicy{}, c.deployment, obs_for(c, 0), all, rng);
  EXPECT_EQ(chosen.endpoint, 1u);
  EXPECT_EQ(chosen.modalities, c.queries.available);
}

TEST(Decide, GreedyPicksArgmax) {
  const auto c = kitchen();
  const auto actions = enumerate_actions(c.deployment);
  auto table = std::make_shared<QTable>(qtable_shape(c, c.bins));
  const auto obs = obs_for(c, 1);
  const auto s = discretize(obs, c.bins.latency, c.bins.cost);
  table->at(s, 0) = 0.5;
  table->at(s, 1) = 0.7;
  Rng rng(1);
  const QGreedyPolicy p{table, c.bins};
  EXPECT_EQ(decide(p, c.deployment, obs, actions, rng), (RoutingAction{1, ModalityMask{}}));
}

TEST(Decide, EmptyFeasibleSetRejected) {
  const auto c = kitchen();
  Rng rng(1);
  EXPECT_THROW(decide(DeviceOnlyPolicy{}, c.deployment, obs_for(c, 0), std::vector<RoutingAction>{}, rng),
               std::invalid_argument);
}

TEST(Decide, ResultAlwaysFeasibleProperty) {
  const auto c = kitchen();
  auto table = std::make_shared<QTable>(qtable_shape(c, c.bins));
  Rng fill(8);
  for (std::size_t i = 0; i < table->values().size(); ++i) table->values()[i] = fill.uniform();
  const std::vector<Policy> zoo{DeviceOnlyPolicy{},
                                CloudOnlyPolicy{},
                                ThresholdPolicy{0.5, 0.2},
                                make_classifier(c, two_endpoint_stats(0.5, 0.9, 0.001)),
                                SelfRoutePolicy{},
                                QGreedyPolicy{table, c.bins}};
  const auto actions = enumerate_actions(c.deployment);
  Rng rng(9);
  for (int trial = 0; trial < 3000; ++trial) {
    std::vector<RoutingAction> feasible{RoutingAction::device()};
    for (std::size_t i = 1; i < actions.size(); ++i)
      if (rng.bernoulli(0.4)) feasible.push_back(actions[i]);
    auto obs = obs_for(c, 0);  // the two-cell classifier stats only cover category 0
    obs.remaining_latency = rng.uniform() * c.latency_budget;
    for (const auto& p : zoo) {
      const auto a = decide(p, c.deployment, obs, feasible, rng);
      EXPECT_NE(std::find(feasible.begin(), feasible.end(), a), feasible.end());
    }
  }
}

TEST(Threshold, Examples) {
  Rng rng(0);
  EXPECT_TRUE(stateless_threshold_decide(0.5, 0.7, 0.0, rng));
  EXPECT_FALSE(stateless_threshold_decide(0.5, 0.2, 0.0, rng));
  EXPECT_TRUE(stateless_threshold_decide(0.5, 0.5, 0.0, rng));
}

// Cost and cloud usage never grow with θ when the difficulty signal is exact.
TEST(Threshold, SweepMonotoneInTheta) {
  const auto c = kitchen();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Money prev_cost = Money::from_units(std::numeric_limits<std::int64_t>::max());
    double prev_cloud = 2.0;
    for (double theta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const auto r = run_episode(c, ThresholdPolicy{theta, 0.0}, seed);
      EXPECT_LE(r.metrics.cost, prev_cost) << "seed " << seed << " theta " << theta;
      EXPECT_LE(r.metrics.cloud_fraction, prev_cloud) << "seed " << seed << " theta " << theta;
      prev_cost = r.metrics.cost;
      prev_cloud = r.metrics.cloud_fraction;
    }
  }
}

TEST(Threshold, ThetaAboveOneMatchesDevice) {
  const auto c = kitchen();
  const auto t = run_episode(c, ThresholdPolicy{1.0, 0.0}, 3);
  const auto d = run_episode(c, DeviceOnlyPolicy{}, 3);
  EXPECT_EQ(t.metrics.cost, Money{});
  EXPECT_DOUBLE_EQ(t.metrics.total_quality, d.metrics.total_quality);
}

TEST(Profile, SingleSampleMatchesClosedForm) {
  const auto c = micro();
  Rng rng(4);
  const auto stats = profile_endpoints(c, 1, rng);
  const auto& d = c.deployment;
  for (std::size_t e = 0; e < d.endpoints.size(); ++e) {
    for (std::size_t cat = 0; cat < d.categories.size(); ++cat) {
      Rng unused_rng(0);
      const Query q = c.make_query(cat);
      const auto r = execute_turn(d, ConversationState::initial(d), q,
                                  {e, d.endpoints[e].accepts_vision ? q.available : ModalityMask{}}, LinkState::up,
                                  unused_rng);
      const auto& cell = stats.at(e, cat);
      EXPECT_EQ(cell.samples, 1);
      EXPECT_DOUBLE_EQ(cell.mean_quality, r.outcome.quality);
      EXPECT_DOUBLE_EQ(cell.mean_latency, r.outcome.latency);
      EXPECT_DOUBLE_EQ(cell.mean_cost, r.outcome.cost.to_currency());
    }
  }
  EXPECT_DOUBLE_EQ(stats.at(0, 0).mean_latency, 5.0);
  EXPECT_DOUBLE_EQ(stats.at(1, 0).mean_cost, 0.03);
}

TEST(Profile, NoisyMeansWithinThreeStandardErrors) {
  auto c = kitchen();
  c.deployment.params.output_noise = 0.2;
  constexpr int kSamples = 10'000;
  Rng rng(5);
  const auto stats = profile_endpoints(c, kSamples, rng);
  const auto& d = c.deployment;
  for (std::size_t e = 0; e < d.endpoints.size(); ++e) {
    const auto& ep = d.endpoints[e];
    for (std::size_t cat = 0; cat < d.categories.size(); ++cat) {
      // From a fresh context the only randomness is output length, which
      // enters latency linearly through decode (and downlink on the cloud).
      const double per_token = 1.0 / ep.decode_rate + (ep.tier == Tier::cloud ? 1.0 / d.link.downlink_rate : 0.0);
      const double sigma = per_token * ep.response_length * d.params.output_noise;
      Rng det(0);
      auto quiet = d;
      quiet.params.output_noise = 0.0;
      const Query q = c.make_query(cat);
      const auto ref = execute_turn(quiet, ConversationState::initial(quiet), q,
                                    {e, ep.accepts_vision ? q.available : ModalityMask{}}, LinkState::up, det);
      const auto& cell = stats.at(e, cat);
      EXPECT_NEAR(cell.mean_latency, ref.outcome.latency, 3.0 * sigma / std::sqrt(kSamples) + 1e-3 * sigma);
      EXPECT_NEAR(cell.mean_quality, ref.outcome.quality, 1e-9);
    }
  }
}

TEST(Profile, ZeroSamplesRejected) {
  Rng rng(0);
  EXPECT_THROW(profile_endpoints(micro(), 0, rng), std::invalid_argument);
}

TEST(Classifier, Examples) {
  const auto c = micro();
  const auto obs = obs_for(c, 0);
  EXPECT_EQ(classifier_decide(two_endpoint_stats(0.8, 0.9, 0.01), c.deployment, obs, 100, 0.005),
            RoutingAction::device());
  EXPECT_EQ(classifier_decide(two_endpoint_stats(0.8, 0.9, 0.01), c.deployment, obs, 100, 0.02).endpoint, 1u);
  EXPECT_EQ(classifier_decide(two_endpoint_stats(0.9, 0.9, 0.0), c.deployment, obs, 100, 0.02),
            RoutingAction::device());
}

TEST(Classifier, UniformPerTurnBudgets) {
  const auto c = kitchen();
  const auto p = make_classifier(c, two_endpoint_stats(0.5, 0.5, 0.0));
  EXPECT_DOUBLE_EQ(p.turn_latency_budget, 3.0);
  EXPECT_DOUBLE_EQ(p.turn_cost_budget, 0.005);
}

// Decisions depend only on the current query, so reordering the turns
// reorders the decisions the same way.
TEST(Classifier, StatelessUnderTurnPermutation) {
  const auto c = kitchen();
  Rng rng(6);
  const auto policy = make_classifier(c, profile_endpoints(c, 20, rng));
  std::vector<std::size_t> order{0, 1, 2, 3, 3, 2, 1, 0, 2, 1};
  auto decisions = [&](const std::vector<std::size_t>& cats) {
    std::vector<RoutingAction> out;
    Rng r(0);
    int t = 0;
    for (auto cat : cats) {
      auto o = obs_for(c, cat);
      o.turn_index = t++;
      o.remaining_cost = Money::from_units(c.cost_budget.units() / (t + 1));
      out.push_back(decide(policy, c.deployment, o, enumerate_actions(c.deployment), r));
    }
    return out;
  };
  const auto base = decisions(order);
  std::vector<std::size_t> perm(order.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng shuffle(7);
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
      std::swap(perm[i], perm[static_cast<std::size_t>(shuffle.uniform() * (i + 1))]);
    }
    std::vector<std::size_t> permuted;
    for (auto i : perm) permuted.push_back(order[i]);
    const auto got = decisions(permuted);
    for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(got[i], base[perm[i]]);
  }
}

TEST(SelfRoute, Examples) {
  EXPECT_EQ(self_route(0.9, 0.6), SelfRouteDecision::keep_local);
  EXPECT_EQ(self_route(0.3, 0.6), SelfRouteDecision::escalate);
  EXPECT_EQ(self_route(0.0, 0.0), SelfRouteDecision::keep_local);
}

TEST(SelfRoute, ZeroThresholdNeverEscalates) {
  const auto c = kitchen();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = run_episode(c, SelfRoutePolicy{0.0, 0.2}, seed);
    EXPECT_EQ(r.metrics.cost, Money{});
    for (const auto& rec : r.trace) EXPECT_FALSE(rec.escalated);
  }
}

TEST(SelfRoute, EscalationStacksLocalAttempt) {
  const auto c = kitchen();
  const auto r = run_episode(c, SelfRoutePolicy{1.1, 0.0}, 0);  // always escalates when feasible
  int escalated = 0;
  for (const auto& rec : r.trace) {
    if (!rec.escalated) continue;
    ++escalated;
    EXPECT_GT(rec.outcome.cost, Money{});
    EXPECT_GT(rec.outcome.components.decode, 0.0);
    EXPECT_EQ(rec.outcome.served.endpoint, 1u);
  }
  EXPECT_GT(escalated, 0);
  EXPECT_EQ(r.metrics.violations, 0);
}

TEST(SelfConfidence, FlipZeroIsTruth) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(self_confidence(1.0, 0.0, rng), 1.0);
    EXPECT_EQ(self_confidence(0.0, 0.0, rng), 0.0);
    EXPECT_EQ(self_confidence(1.0, 1.0, rng), 0.0);
  }
}

TEST(Discretize, Examples) {
  EXPECT_EQ(budget_bin(15, 30, 6), 3);
  EXPECT_EQ(budget_bin(30, 30, 6), 5);
  EXPECT_EQ(budget_bin(0, 30, 6), 0);
  EXPECT_EQ(budget_bin(-1, 30, 6), 0);
  const auto c = kitchen();
  auto o = obs_for(c, 3);
  o.remaining_latency = 15;
  o.remaining_cost = Money{};
  const auto s = discretize(o, 6, 4);
  EXPECT_EQ(s.latency_bin, 3);
  EXPECT_EQ(s.cost_bin, 0);
  EXPECT_EQ(s.vision, 1);
  EXPECT_THROW(discretize(o, 0, 4), std::invalid_argument);
}

TEST(QUpdate, Examples) {
  QTable t(QTableShape{2, 1, 1, 1, 1, 2});
  const MDPStateIndex s{0, 0, 0, 0, 0, 0}, s2{1, 0, 0, 0, 0, 0};
  q_update(t, s, 0, 1.0, s2, true, 0.1, 1.0);
  EXPECT_DOUBLE_EQ(t.at(s, 0), 0.1);
  t.at(s, 1) = 0.5;
  q_update(t, s, 1, 0.0, s2, false, 0.1, 1.0);
  EXPECT_DOUBLE_EQ(t.at(s, 1), 0.45);
  EXPECT_THROW(q_update(t, s, 0, 1.0, s2, true, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(q_update(t, s, 0, 1.0, s2, true, 0.1, 1.5), std::invalid_argument);
}

TEST(QUpdate, MaxRestrictedToGivenActions) {
  QTable t(QTableShape{2, 1, 1, 1, 1, 2});
  const MDPStateIndex s{0, 0, 0, 0, 0, 0}, s2{1, 0, 0, 0, 0, 0};
  t.at(s2, 0) = 0.2;
  t.at(s2, 1) = 0.9;
  const std::vector<int> only_device{0};
  q_update(t, s, 0, 0.0, s2, false, 1.0, 1.0, only_device);
  EXPECT_DOUBLE_EQ(t.at(s, 0), 0.2);
  q_update(t, s, 1, 0.0, s2, false, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(t.at(s, 1), 0.9);
}

TEST(TrainQ, OneEpisodeMakesKUpdates) {
  const auto c = kitchen();
  const auto r = train_q(c, QLearningParams{}, 1, 11);
  EXPECT_EQ(r.updates, c.queries.episode_length);
  EXPECT_EQ(r.returns.size(), 1u);
  EXPECT_THROW(train_q(c, QLearningParams{}, 0, 11), std::invalid_argument);
}

TEST(TrainQ, SameSeedBitIdentical) {
  const auto c = kitchen();
  const auto a = train_q(c, QLearningParams{}, 300, 21);
  const auto b = train_q(c, QLearningParams{}, 300, 21);
  EXPECT_EQ(a.table.values(), b.table.values());
  EXPECT_EQ(a.returns, b.returns);
  const auto other = train_q(c, QLearningParams{}, 300, 22);
  EXPECT_NE(a.table.values(), other.table.values());
}

TEST(TrainQ, EpsilonSchedule) {
  const QLearningParams p;
  EXPECT_DOUBLE_EQ(epsilon_at(p, 0, 100), 1.0);
  EXPECT_DOUBLE_EQ(epsilon_at(p, 40, 100), 1.0 + (0.05 - 1.0) * 0.5);
  EXPECT_DOUBLE_EQ(epsilon_at(p, 80, 100), 0.05);
  EXPECT_DOUBLE_EQ(epsilon_at(p, 99, 100), 0.05);
}

TEST(TrainQ, UntouchedEntriesKeepInitialization) {
  const auto c = kitchen();
  const auto r = train_q(c, QLearningParams{}, 50, 1);
  // State at the final turn with location 1 and full budgets is unreachable.
  const MDPStateIndex never{c.queries.episode_length - 1, 0, c.bins.latency - 1, c.bins.cost - 1, 1, 0};
  for (int a = 0; a < r.table.shape().actions; ++a) EXPECT_EQ(r.table.at(never, a), 0.0);
}

// Multiplying every Q-value by a positive constant changes no greedy choice.
TEST(Greedy, ScalingInvariance) {
  const auto c = kitchen();
  const auto actions = enumerate_actions(c.deployment);
  QTable t(qtable_shape(c, c.bins));
  Rng rng(12);
  for (auto& v : t.values()) v = std::floor(rng.uniform() * 4) / 4;  // plenty of ties
  Rng pick(13);
  for (double k : {0.5, 3.0, 1e6}) {
    QTable scaled = t;
    for (auto& v : scaled.values()) v *= k;
    for (std::size_t off = 0; off < t.values().size() / actions.size(); off += 7) {
      const auto s = t.state_at(off);
      std::vector<RoutingAction> feasible{RoutingAction::device()};
      for (std::size_t i = 1; i < actions.size(); ++i)
        if (pick.bernoulli(0.5)) feasible.push_back(actions[i]);
      EXPECT_EQ(greedy_action(t, s, actions, feasible), greedy_action(scaled, s, actions, feasible));
    }
  }
}

TEST(Greedy, TiesGoToLowestIndex) {
  const auto c = kitchen();
  const auto actions = enumerate_actions(c.deployment);
  QTable t(qtable_shape(c, c.bins));
  const MDPStateIndex s{};
  t.at(s, 3) = 0.4;
  t.at(s, 5) = 0.4;
  const std::vector<RoutingAction> feasible{actions[5], actions[3]};
  EXPECT_EQ(greedy_action(t, s, actions, feasible), actions[3]);
  EXPECT_EQ(greedy_action(QTable(qtable_shape(c, c.bins)), s, actions, actions), RoutingAction::device());
}
