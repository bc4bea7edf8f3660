#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace collabnet;
using collabnet::testing::endpoint_record;
using collabnet::testing::two_categories;

namespace {

std::string load_error(const detail::json& rec) {
  try {
    load_profile(rec, two_categories());
  } catch (const config_error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(LoadProfile, ValidRecordRoundTrips) {
  const auto e = load_profile(endpoint_record(), two_categories());
  EXPECT_EQ(e.id, "cloud");
  EXPECT_EQ(e.tier, Tier::cloud);
  EXPECT_TRUE(e.accepts_vision);
  EXPECT_EQ(e.prefill_rate, 10000);
  EXPECT_EQ(e.decode_rate, 100);
  EXPECT_EQ(e.input_price, Money::from_units(20'000));
  EXPECT_EQ(e.output_price, Money::from_units(60'000));
  EXPECT_EQ(e.context_window, 100000);
  EXPECT_EQ(e.base_quality, (std::vector<double>{0.6, 0.3}));
  EXPECT_EQ(e.vision_gain_cap, (std::vector<double>{0.0, 0.3}));
  EXPECT_FALSE(e.max_turns.has_value());
}

TEST(LoadProfile, ZeroDecodeRateRejected) {
  auto rec = endpoint_record();
  rec["decode_rate"] = 0;
  EXPECT_NE(load_error(rec).find("decode_rate must be > 0"), std::string::npos);
}

TEST(LoadProfile, PricedDeviceRejected) {
  auto rec = endpoint_record();
  rec["tier"] = "device";
  rec["accepts_vision"] = false;
  rec["output_price"] = 0.0;
  rec["input_price"] = 0.001;
  EXPECT_NE(load_error(rec).find("device tier must be zero-price"), std::string::npos);
}

TEST(LoadProfile, MissingFieldNamed) {
  auto rec = endpoint_record();
  rec.erase("prefill_rate");
  EXPECT_NE(load_error(rec).find("prefill_rate required"), std::string::npos);
}

TEST(LoadProfile, QualityCapOverflowRejected) {
  auto rec = endpoint_record();
  rec["vision_gain_cap"]["scene"] = 0.8;
  EXPECT_NE(load_error(rec).find("base_quality + vision_gain_cap"), std::string::npos);
}

TEST(LoadProfile, OutOfRangeQualityRejected) {
  auto rec = endpoint_record();
  rec["base_quality"]["easy"] = 1.2;
  EXPECT_NE(load_error(rec).find("base_quality must be in [0, 1]"), std::string::npos);
}

TEST(LoadProfile, UnknownKeyRejected) {
  auto rec = endpoint_record();
  rec["bogus"] = 1;
  EXPECT_NE(load_error(rec).find("unknown key"), std::string::npos);
}

TEST(StepLink, AbsorbingUpState) {
  LinkModel link;
  link.p_up_to_down = 0.0;
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(step_link(link, LinkState::up, rng), LinkState::up);
}

TEST(StepLink, ForcedRecovery) {
  LinkModel link;
  link.p_down_to_up = 1.0;
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(step_link(link, LinkState::down, rng), LinkState::up);
}

TEST(StepLink, LongRunAvailabilityMatchesClosedForm) {
  LinkModel link;
  link.p_up_to_down = 0.1;
  link.p_down_to_up = 0.3;
  const double expected = 0.3 / (0.3 + 0.1);
  EXPECT_DOUBLE_EQ(link.long_run_availability(), expected);
  Rng rng(12345);
  LinkState s = LinkState::up;
  int up = 0;
  constexpr int kSteps = 1'000'000;
  for (int i = 0; i < kSteps; ++i) {
    s = step_link(link, s, rng);
    up += s == LinkState::up;
  }
  EXPECT_NEAR(static_cast<double>(up) / kSteps, 0.75, 0.01);
}

TEST(TransferTime, Examples) {
  LinkModel link;
  link.uplink_rate = 1000;
  link.downlink_rate = 2000;
  link.rtt = 0.1;
  EXPECT_DOUBLE_EQ(transfer_time(link, 1000, Direction::up), 1.1);
  EXPECT_DOUBLE_EQ(transfer_time(link, 0, Direction::up), 0.1);
  link.rtt = 0.05;
  EXPECT_DOUBLE_EQ(transfer_time(link, 500, Direction::down), 0.3);
}

TEST(TransferTime, LinearWithRttIntercept) {
  LinkModel link;
  link.uplink_rate = 1024;  // power of two keeps the arithmetic exact
  link.rtt = 0.125;
  for (std::int64_t n = 0; n < 5000; n += 97) {
    EXPECT_EQ(transfer_time(link, n, Direction::up) - link.rtt, static_cast<double>(n) / 1024.0);
  }
}

namespace {

struct GainFixture {
  EndpointProfile endpoint;
  std::vector<ModalityItem> modalities;
};

GainFixture gain_fixture(double cap, std::vector<double> coverage) {
  GainFixture f;
  f.endpoint.accepts_vision = true;
  f.endpoint.vision_gain_cap = {cap};
  f.endpoint.base_quality = {0.0};
  for (std::size_t i = 0; i < coverage.size(); ++i) f.modalities.push_back({"m" + std::to_string(i), 100, {coverage[i]}});
  return f;
}

}  // namespace

TEST(ModalityGain, Examples) {
  auto f = gain_fixture(0.3, {0.5, 0.5});
  EXPECT_DOUBLE_EQ(modality_gain(f.endpoint, 0, ModalityMask(0b01), f.modalities), 0.15);
  EXPECT_DOUBLE_EQ(modality_gain(f.endpoint, 0, ModalityMask(0b11), f.modalities), 0.225);
  EXPECT_EQ(modality_gain(f.endpoint, 0, ModalityMask{}, f.modalities), 0.0);
}

TEST(ModalityGain, TextOnlyEndpointRejectsModalities) {
  auto f = gain_fixture(0.3, {0.5});
  f.endpoint.accepts_vision = false;
  EXPECT_THROW(modality_gain(f.endpoint, 0, ModalityMask(1), f.modalities), std::invalid_argument);
  EXPECT_EQ(modality_gain(f.endpoint, 0, ModalityMask{}, f.modalities), 0.0);
}

// Exhaustive over all (A ⊆ B, m ∉ B) triples for random coverage draws.
TEST(ModalityGain, SubmodularAndMonotoneProperty) {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 5);
    std::vector<double> cov;
    for (int i = 0; i < n; ++i) cov.push_back(rng.uniform());
    const double cap = rng.uniform();
    const auto f = gain_fixture(cap, cov);
    auto gain = [&](std::uint32_t m) { return modality_gain(f.endpoint, 0, ModalityMask(m), f.modalities); };
    const std::uint32_t full = (1u << n) - 1;
    for (std::uint32_t b = 0; b <= full; ++b) {
      EXPECT_LE(gain(b), cap + 1e-15);
      for (std::uint32_t a = b;; a = (a - 1) & b) {  // all subsets of b
        for (int m = 0; m < n; ++m) {
          if ((b >> m) & 1u) continue;
          const std::uint32_t bit = 1u << m;
          EXPECT_GE(gain(a | bit) - gain(a), gain(b | bit) - gain(b) - 1e-12);
          EXPECT_GE(gain(b | bit), gain(b) - 1e-15);
        }
        if (a == 0) break;
      }
    }
  }
}

TEST(Money, ExactPriceArithmetic) {
  const auto price = Money::from_currency(2.5e-6);
  EXPECT_EQ(price.units(), 2500);
  EXPECT_EQ((price * 1000).units(), 2'500'000);
  EXPECT_THROW(Money::from_currency(1e-12, "input_price"), config_error);
}
