#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>

#include "collabnet/error.hpp"

namespace collabnet {

/// Exact monetary amount in integer nano-currency units (1e-9 of the base
/// currency). Per-token prices and ledger totals share this unit, so
/// price × tokens sums are exact.
class Money {
 public:
  static constexpr std::int64_t kUnitsPerCurrency = 1'000'000'000;

  constexpr Money() = default;

  static constexpr Money from_units(std::int64_t units) { return Money(units); }

  /// Converts a decimal currency amount. Rejects values that are not a whole
  /// number of nano-units (after tolerating binary representation error).
  static Money from_currency(double amount, const std::string& field = {}) {
    if (!std::isfinite(amount)) throw config_error(field, field + " must be finite");
    const double scaled = amount * static_cast<double>(kUnitsPerCurrency);
    const double rounded = std::round(scaled);
    if (std::abs(scaled - rounded) > 1e-6 * std::max(1.0, std::abs(rounded))) {
      throw config_error(field, field + " must be a multiple of 1e-9 currency units");
    }
    return Money(static_cast<std::int64_t>(rounded));
  }

  constexpr std::int64_t units() const { return units_; }
  double to_currency() const { return static_cast<double>(units_) / kUnitsPerCurrency; }

  constexpr Money& operator+=(Money o) {
    units_ += o.units_;
    return *this;
  }
  constexpr Money& operator-=(Money o) {
    units_ -= o.units_;
    return *this;
  }
  friend constexpr Money operator+(Money a, Money b) { return Money(a.units_ + b.units_); }
  friend constexpr Money operator-(Money a, Money b) { return Money(a.units_ - b.units_); }
  friend constexpr Money operator*(Money a, std::int64_t n) { return Money(a.units_ * n); }
  friend constexpr Money operator*(std::int64_t n, Money a) { return Money(a.units_ * n); }
  friend constexpr auto operator<=>(Money, Money) = default;

 private:
  constexpr explicit Money(std::int64_t units) : units_(units) {}
  std::int64_t units_ = 0;
};

}  // namespace collabnet
