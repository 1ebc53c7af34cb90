#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace rwre {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum_i exp(args[i])); -inf for an empty range.
inline double log_sum_exp(std::span<const double> args) {
  double m = kNegInf;
  for (double a : args) m = a > m ? a : m;
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double a : args) s += std::exp(a - m);
  return m + std::log(s);
}

/// Streaming log-domain sum. Terms are rescaled whenever a larger exponent
/// arrives and accumulated with Neumaier compensation, so long sums of
/// tiny probabilities neither underflow nor lose low-order mass.
class LogAccumulator {
 public:
  void add_log(double log_term) {
    if (log_term == kNegInf) return;
    if (log_term > shift_) {
      if (shift_ != kNegInf) {
        const double r = std::exp(shift_ - log_term);
        sum_ *= r;
        comp_ *= r;
      }
      shift_ = log_term;
    }
    add_scaled(std::exp(log_term - shift_));
  }

  void add(double term) { add_log(term > 0.0 ? std::log(term) : kNegInf); }

  double log_value() const {
    const double total = sum_ + comp_;
    return total > 0.0 ? shift_ + std::log(total) : kNegInf;
  }

  double value() const { return std::exp(log_value()); }

 private:
  void add_scaled(double t) {
    const double s = sum_ + t;
    if (std::abs(sum_) >= std::abs(t)) {
      comp_ += (sum_ - s) + t;
    } else {
      comp_ += (t - s) + sum_;
    }
    sum_ = s;
  }

  double shift_ = kNegInf;
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace rwre
