#pragma once

#include <cmath>

namespace ropo {

/// Numerically stable logistic sigmoid 1 / (1 + exp(-x)).
///
/// Split into the positive and negative branch so that exp() is only ever
/// evaluated at non-positive arguments; no overflow for any finite x.
inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Stable softplus log(1 + exp(x)).  For large positive x this is x plus a
/// vanishing correction; evaluating it as x + log1p(exp(-x)) keeps the
/// correction term well conditioned.
inline double softplus(double x) {
  if (x > 0.0) {
    return x + std::log1p(std::exp(-x));
  }
  return std::log1p(std::exp(x));
}

/// log sigmoid(x) = -softplus(-x).  Exact for margins far into either tail
/// where a naive log(sigmoid(x)) would round to log(0) or log(1).
inline double log_sigmoid(double x) { return -softplus(-x); }

/// sigmoid'(x) = sigmoid(x) * sigmoid(-x).  The direct product is stable:
/// one factor saturates to 1 while the other decays like exp(-|x|).
inline double sigmoid_deriv(double x) { return sigmoid(x) * sigmoid(-x); }

}  // namespace ropo
