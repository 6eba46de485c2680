/*
 * Copyright 2026 The ecmsoh Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Closed-form ECM parameter extraction from four impedance measurements.
//
// Each measurement frequency sits in one regime where the circuit collapses
// to a sub-network (see `reduced_impedance`). Writing each measurement as
// R + jX with X = -Im(Z) (positive for capacitive behaviour):
//
//   R0 = R_high
//   Aw = X_low * sqrt(2 w_low)
//   C1 = X_mid1 / (w_mid1 (R_mid1 - R0) (R_low - R0 - X_low))
//   R2 = (R_mid2 - R0) (1 + (X_mid2 / (R_mid2 - R0))^2)
//   C2 = X_mid2 / (w_mid2 (R_mid2 - R0)^2 (1 + (X_mid2 / (R_mid2 - R0))^2))
//   R1 = R_low - R0 - X_low - R2
//
// R0, Aw, R2, C2 and R1 are exact inverses of their reduced circuits. The C1
// expression treats the mid1 real part as if R2 were absent, so it is exact
// only when R2 << R1; it is kept as-is.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ecmsoh/ecm.hpp"
#include "ecmsoh/errors.hpp"
#include "ecmsoh/spectrum.hpp"

namespace ecmsoh {

/// Four measurements with w_high > w_mid2 > w_mid1 > w_low.
struct FourPointSet {
  ImpedanceSample high;
  ImpedanceSample mid2;
  ImpedanceSample mid1;
  ImpedanceSample low;

  std::array<double, 4> omegas() const {
    return {high.omega_rad_s, mid2.omega_rad_s, mid1.omega_rad_s, low.omega_rad_s};
  }

  friend bool operator==(const FourPointSet&, const FourPointSet&) = default;
};

/// Builds a FourPointSet by evaluating `reduced_impedance` at each regime.
inline FourPointSet four_points_from_reduced(const EcmParams& p, double w_high,
                                             double w_mid2, double w_mid1,
                                             double w_low) {
  return {{w_high, reduced_impedance(p, w_high, Regime::kHigh)},
          {w_mid2, reduced_impedance(p, w_mid2, Regime::kMid2)},
          {w_mid1, reduced_impedance(p, w_mid1, Regime::kMid1)},
          {w_low, reduced_impedance(p, w_low, Regime::kLow)}};
}

inline FourPointSet four_points_from_model(const EcmParams& p, double w_high,
                                           double w_mid2, double w_mid1,
                                           double w_low) {
  return {{w_high, ecm_impedance(p, w_high)},
          {w_mid2, ecm_impedance(p, w_mid2)},
          {w_mid1, ecm_impedance(p, w_mid1)},
          {w_low, ecm_impedance(p, w_low)}};
}

inline void validate(const FourPointSet& fp) {
  const std::array<const ImpedanceSample*, 4> pts = {&fp.high, &fp.mid2, &fp.mid1, &fp.low};
  constexpr std::array<const char*, 4> names = {"high", "mid2", "mid1", "low"};
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double w = pts[k]->omega_rad_s;
    if (!(std::isfinite(w) && w > 0.0) || !is_finite(pts[k]->z)) {
      throw DomainError(std::string(names[k]) + " point is not finite or has non-positive frequency");
    }
    if (k > 0 && !(pts[k - 1]->omega_rad_s > w)) {
      throw DomainError(std::string("frequency ordering violated: need ") + names[k - 1] +
                        " > " + names[k]);
    }
    if (k > 0 && pts[k]->z.imag() > 0.0) {
      throw DomainError(std::string(names[k]) + " point is inductive (Im Z > 0)");
    }
  }
}

inline EcmParams extract_params(const FourPointSet& fp) {
  validate(fp);

  const double r_high = fp.high.z.real();
  const double r_mid2 = fp.mid2.z.real();
  const double x_mid2 = -fp.mid2.z.imag();
  const double r_mid1 = fp.mid1.z.real();
  const double x_mid1 = -fp.mid1.z.imag();
  const double r_low = fp.low.z.real();
  const double x_low = -fp.low.z.imag();

  auto require_positive = [](const char* which, double v, const char* reason) {
    if (!(std::isfinite(v) && v > 0.0)) throw ExtractionError(which, reason);
  };

  const double r0 = r_high;
  require_positive("R0", r0, "high-frequency resistance is not positive");

  const double aw = x_low * std::sqrt(2.0 * fp.low.omega_rad_s);
  require_positive("Aw", aw, "low-frequency reactance is not positive");

  const double d2 = r_mid2 - r0;
  require_positive("R2", d2, "mid2 resistance does not exceed R0");
  const double ratio2 = x_mid2 / d2;
  const double k2 = 1.0 + ratio2 * ratio2;
  const double r2 = d2 * k2;
  require_positive("R2", r2, "non-positive result");
  const double c2 = x_mid2 / (fp.mid2.omega_rad_s * d2 * d2 * k2);
  require_positive("C2", c2, "mid2 reactance is not positive");

  const double d1 = r_mid1 - r0;
  require_positive("C1", d1, "mid1 resistance does not exceed R0");
  const double dlow = r_low - r0 - x_low;
  require_positive("C1", dlow, "low-frequency resistance minus R0 and Warburg is not positive");
  const double c1 = x_mid1 / (fp.mid1.omega_rad_s * d1 * dlow);
  require_positive("C1", c1, "mid1 reactance is not positive");

  const double r1 = dlow - r2;
  require_positive("R1", r1, "low-frequency resistance does not exceed R0 + R2 + Warburg");

  return {r0, r1, r2, aw, c1, c2};
}

/// Target angular frequencies for automatic point selection.
struct FrequencyTargets {
  double low = omega_from_hz(0.01);
  double mid1 = omega_from_hz(1.0);
  double mid2 = omega_from_hz(100.0);
  double high = omega_from_hz(1000.0);

  std::array<double, 4> ascending() const { return {low, mid1, mid2, high}; }

  friend bool operator==(const FrequencyTargets&, const FrequencyTargets&) = default;
};

inline constexpr double kMinSelectionSpanDecades = 3.0;
inline constexpr double kMinPointSeparation = 10.0;

/// Picks four measured points closest (in log frequency) to `targets`, with
/// consecutive picks at least a decade apart and mid/low points capacitive.
inline FourPointSet select_four_frequencies(const Spectrum& spec,
                                            const FrequencyTargets& targets = {}) {
  std::vector<ImpedanceSample> pts = mask_inductive_tail(spec.samples);
  if (pts.empty()) {
    throw SelectionError("spectrum '" + spec.cell_id +
                         "' has no capacitive point near the high-frequency end");
  }
  if (pts.size() < 4) {
    throw SelectionError("spectrum '" + spec.cell_id + "' has fewer than 4 usable points");
  }
  const double w_min = pts.front().omega_rad_s;
  const double w_max = pts.back().omega_rad_s;
  constexpr double kSlack = 1.0 - 1e-9;
  if (w_max / w_min < std::pow(10.0, kMinSelectionSpanDecades) * kSlack) {
    throw SelectionError("spectrum '" + spec.cell_id + "' spans fewer than 3 decades");
  }

  const auto raw = targets.ascending();
  std::array<double, 4> log_target{};
  for (std::size_t k = 0; k < 4; ++k) {
    if (!(raw[k] > 0.0)) throw DomainError("selection targets must be positive");
    log_target[k] = std::log(std::clamp(raw[k], w_min, w_max));
  }

  // Chain DP over slots low, mid1, mid2, high.
  const std::size_t n = pts.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::array<std::vector<double>, 4> cost;
  std::array<std::vector<std::size_t>, 4> prev;
  for (std::size_t s = 0; s < 4; ++s) {
    cost[s].assign(n, kInf);
    prev[s].assign(n, kNone);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (pts[i].z.imag() > 0.0) continue;
    const double c = std::abs(std::log(pts[i].omega_rad_s) - log_target[0]);
    cost[0][i] = c;
  }
  for (std::size_t s = 1; s < 4; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      if (pts[i].z.imag() > 0.0) continue;
      const double c = std::abs(std::log(pts[i].omega_rad_s) - log_target[s]);
      for (std::size_t j = 0; j < i; ++j) {
        if (cost[s - 1][j] == kInf) continue;
        if (pts[i].omega_rad_s < kMinPointSeparation * kSlack * pts[j].omega_rad_s) continue;
        const double total = cost[s - 1][j] + c;
        if (total < cost[s][i]) {
          cost[s][i] = total;
          prev[s][i] = j;
        }
      }
    }
  }
  std::size_t best = kNone;
  for (std::size_t i = 0; i < n; ++i) {
    if (cost[3][i] < kInf && (best == kNone || cost[3][i] < cost[3][best])) best = i;
  }
  if (best == kNone) {
    throw SelectionError("spectrum '" + spec.cell_id +
                         "' has no four capacitive points a decade apart");
  }
  std::array<std::size_t, 4> idx{};
  idx[3] = best;
  for (std::size_t s = 3; s > 0; --s) idx[s - 1] = prev[s][idx[s]];
  return {pts[idx[3]], pts[idx[2]], pts[idx[1]], pts[idx[0]]};
}

struct FitReport {
  double rmse_pct = 0.0;
  double max_err_pct = 0.0;
  std::size_t n_points = 0;
};

/// Model-vs-measurement error. rmse_pct normalizes the RMS complex error by
/// the mean measured |Z|; max_err_pct is the worst per-point relative error.
inline FitReport fit_rmse(const EcmParams& p, std::span<const ImpedanceSample> measured) {
  if (measured.empty()) throw DomainError("fit_rmse needs at least one point");
  require_valid(p);
  double sum_sq = 0.0;
  double sum_abs = 0.0;
  double worst = 0.0;
  for (const auto& m : measured) {
    const double err = std::abs(ecm_impedance(p, m.omega_rad_s) - m.z);
    const double mag = std::abs(m.z);
    sum_sq += err * err;
    sum_abs += mag;
    worst = std::max(worst, mag > 0.0 ? err / mag : std::numeric_limits<double>::infinity());
  }
  const double n = static_cast<double>(measured.size());
  const double mean_abs = sum_abs / n;
  if (!(mean_abs > 0.0)) throw DomainError("measured spectrum has zero magnitude");
  return {100.0 * std::sqrt(sum_sq / n) / mean_abs, 100.0 * worst, measured.size()};
}

inline FitReport fit_rmse(const EcmParams& p, const Spectrum& spec) {
  return fit_rmse(p, std::span<const ImpedanceSample>(spec.samples));
}

}  // namespace ecmsoh
