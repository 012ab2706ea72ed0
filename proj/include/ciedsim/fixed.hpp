#pragma once

#include <cmath>
#include <cstdint>

namespace ciedsim {

// Log-odds in signed fixed point (2^-40 resolution). Integer addition is
// associative, so accumulated evidence does not depend on arrival order.
struct LogOdds {
  static constexpr double kScale = 1099511627776.0;  // 2^40

  std::int64_t raw = 0;

  static LogOdds from_double(double v) noexcept {
    return LogOdds{static_cast<std::int64_t>(std::llround(v * kScale))};
  }
  double value() const noexcept { return static_cast<double>(raw) / kScale; }

  LogOdds& operator+=(LogOdds o) noexcept {
    raw += o.raw;
    return *this;
  }
  LogOdds& operator-=(LogOdds o) noexcept {
    raw -= o.raw;
    return *this;
  }
  friend LogOdds operator+(LogOdds a, LogOdds b) noexcept { return LogOdds{a.raw + b.raw}; }
  friend LogOdds operator-(LogOdds a, LogOdds b) noexcept { return LogOdds{a.raw - b.raw}; }
  friend bool operator==(LogOdds a, LogOdds b) noexcept = default;
};

inline double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) noexcept { return std::log(p / (1.0 - p)); }

}  // namespace ciedsim
