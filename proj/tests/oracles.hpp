// Test-side oracles, independent of the library implementation paths they
// check: central finite differences, a naive quadruple-loop convolution and
// norm-based gradient comparison.
#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "periq/tensor.hpp"

namespace oracles {

// Central finite difference of a scalar function over a parameter vector held
// in f32 storage (perturbations round-trip through float like the layer under
// test does).
inline std::vector<double> central_diff_f32(const std::function<double()>& loss, float* params,
                                            std::size_t count, double h) {
  std::vector<double> grad(count);
  for (std::size_t i = 0; i < count; ++i) {
    const float saved = params[i];
    params[i] = static_cast<float>(static_cast<double>(saved) + h);
    const double up = loss();
    params[i] = static_cast<float>(static_cast<double>(saved) - h);
    const double down = loss();
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Central finite difference over f64 parameters, for the regularizer checks.
inline std::vector<double> central_diff_f64(const std::function<double()>& loss, double* params,
                                            std::size_t count, double h) {
  std::vector<double> grad(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = loss();
    params[i] = saved - h;
    const double down = loss();
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// ||a - b|| / (||a|| + ||b||); both-near-zero vectors compare equal so that
// saturated layers (true gradient ~ 0 against finite-difference noise) do not
// report a spurious mismatch.
inline double norm_rel_err(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nb);
  if (std::sqrt(diff) < 1e-6 || denom < 1e-6) return 0.0;
  return std::sqrt(diff) / denom;
}

inline std::vector<double> to_doubles(std::span<const float> v) {
  return std::vector<double>(v.begin(), v.end());
}

// Naive valid cross-correlation, summed channel-major then filter row then
// filter column with a double accumulator.
inline periq::Tensor conv2d_naive(const periq::Tensor& x, const periq::Tensor& f, int s1,
                                  int s2) {
  const std::size_t h = x.extent(0), w = x.extent(1), c = x.extent(2);
  const std::size_t m = f.extent(0), n = f.extent(1), c_out = f.extent(3);
  const std::size_t ho = (h - m) / static_cast<std::size_t>(s1) + 1;
  const std::size_t wo = (w - n) / static_cast<std::size_t>(s2) + 1;
  periq::Tensor y({ho, wo, c_out});
  for (std::size_t oc = 0; oc < c_out; ++oc)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double acc = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
              acc += static_cast<double>(x(oy * s1 + i, ox * s2 + j, ch)) *
                     static_cast<double>(f(i, j, ch, oc));
        y(oy, ox, oc) = static_cast<float>(acc);
      }
  return y;
}

}  // namespace oracles
