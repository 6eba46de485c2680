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

// Synthetic aging data with known ground truth. ECM parameters follow a
// per-parameter log-linear trend between SoH anchors, perturbed by seeded
// lognormal noise. The data is synthetic and makes no claim of
// electrochemical fidelity.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecmsoh/dataset.hpp"
#include "ecmsoh/ecm.hpp"
#include "ecmsoh/errors.hpp"
#include "ecmsoh/regression.hpp"
#include "ecmsoh/spectrum.hpp"

namespace ecmsoh {

struct AgingAnchor {
  double soh_frac = 1.0;
  EcmParams params;
};

struct AgingTrend {
  std::vector<AgingAnchor> anchors;  // strictly decreasing SoH
  double noise_rel = 0.0;
  std::uint64_t seed = 0;
};

inline void validate(const AgingTrend& trend) {
  if (trend.anchors.size() < 2) throw DomainError("aging trend needs at least 2 anchors");
  for (std::size_t k = 0; k < trend.anchors.size(); ++k) {
    require_valid(trend.anchors[k].params);
    if (k > 0 && !(trend.anchors[k].soh_frac < trend.anchors[k - 1].soh_frac)) {
      throw DomainError("aging anchors must have strictly decreasing SoH");
    }
  }
  if (!(trend.noise_rel >= 0.0 && trend.noise_rel <= 0.2)) {
    throw DomainError("noise_rel must lie in [0, 0.2]");
  }
}

/// Anchors from three measured cells at 35 % SoC (SoH 94.6, 85.6, 76.8 %).
inline AgingTrend default_trend(double noise_rel = 0.02, std::uint64_t seed = 0) {
  AgingTrend t;
  t.anchors = {
      {0.946, {14.7e-3, 1.9e-3, 2.1e-3, 2.5e-3, 1.2, 0.24}},
      {0.856, {15.9e-3, 4.7e-3, 1.8e-3, 2.7e-3, 1.7, 0.27}},
      {0.768, {17.9e-3, 11.5e-3, 3.7e-3, 4.1e-3, 5.2, 0.34}},
  };
  t.noise_rel = noise_rel;
  t.seed = seed;
  return t;
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t state = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  return splitmix64(state);
}

// Standard normal pairs by Box-Muller on splitmix64 uniforms.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : state_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  double uniform_open() {
    return (static_cast<double>(splitmix64(state_) >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace detail

/// Trend parameters at `soh_frac`, with noise drawn deterministically from
/// (trend.seed, soh_frac).
inline EcmParams params_at(const AgingTrend& trend, double soh_frac) {
  validate(trend);
  const auto& a = trend.anchors;
  const double hi = a.front().soh_frac;
  const double lo = a.back().soh_frac;
  if (!(soh_frac >= lo && soh_frac <= hi)) {
    throw RangeError("SoH " + std::to_string(soh_frac) + " outside anchor span [" +
                     std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }

  std::array<double, EcmParams::kSize> base{};
  bool at_anchor = false;
  for (const auto& anchor : a) {
    if (anchor.soh_frac == soh_frac) {
      base = anchor.params.to_array();
      at_anchor = true;
      break;
    }
  }
  if (!at_anchor) {
    std::size_t seg = 0;
    while (!(soh_frac <= a[seg].soh_frac && soh_frac >= a[seg + 1].soh_frac)) ++seg;
    const double t = (a[seg].soh_frac - soh_frac) / (a[seg].soh_frac - a[seg + 1].soh_frac);
    const auto p0 = a[seg].params.to_array();
    const auto p1 = a[seg + 1].params.to_array();
    for (std::size_t k = 0; k < base.size(); ++k) base[k] = p0[k] * std::pow(p1[k] / p0[k], t);
  }

  if (trend.noise_rel > 0.0) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &soh_frac, sizeof bits);
    detail::NormalStream normal(detail::mix_seed(trend.seed, bits));
    for (double& v : base) v *= std::exp(trend.noise_rel * normal.next());
  }
  return EcmParams::from_array(base);
}

/// 60-point default grid: angular frequencies 1e-2 .. 1e4 rad/s, stored in Hz.
inline std::vector<double> default_freq_grid_hz(std::size_t n = 60) {
  return logspace(1e-2 / kTwoPi, 1e4 / kTwoPi, n);
}

struct SyntheticDataset {
  std::vector<Spectrum> spectra;
  FeatureTable truth;
};

inline constexpr double kSyntheticSocPct = 35.0;
inline constexpr double kSyntheticTempC = 23.0;

/// One spectrum per (cell, SoH point). SoH points are evenly spaced over the
/// anchor span; each cell draws its own noise from a seed derived from the
/// trend seed and the cell index.
inline SyntheticDataset gen_dataset(const AgingTrend& trend, std::size_t n_cells,
                                    std::size_t soh_points, std::span<const double> freq_grid_hz) {
  validate(trend);
  if (n_cells < 1) throw DomainError("need at least one cell");
  if (soh_points < 3) throw DomainError("need at least 3 SoH points");
  if (freq_grid_hz.size() < Spectrum::kMinSamples) throw DomainError("frequency grid needs at least 4 points");

  std::vector<double> omegas;
  omegas.reserve(freq_grid_hz.size());
  for (double f : freq_grid_hz) omegas.push_back(omega_from_hz(f));

  const double hi = trend.anchors.front().soh_frac;
  const double lo = trend.anchors.back().soh_frac;
  const double hi_pct = detail::exact_scaled(hi, 100.0);
  const double lo_pct = detail::exact_scaled(lo, 100.0);

  SyntheticDataset out;
  out.truth.sources = {"synthetic"};
  for (std::size_t c = 0; c < n_cells; ++c) {
    AgingTrend cell_trend = trend;
    cell_trend.seed = detail::mix_seed(trend.seed, c);
    char id[24];
    std::snprintf(id, sizeof id, "S%02zu", c + 1);
    for (std::size_t k = 0; k < soh_points; ++k) {
      double soh = 0.0;
      if (k == 0) {
        soh = hi;
      } else if (k + 1 == soh_points) {
        soh = lo;
      } else {
        const double pct = hi_pct + (lo_pct - hi_pct) * static_cast<double>(k) /
                                        static_cast<double>(soh_points - 1);
        soh = pct / 100.0;
      }
      const EcmParams p = params_at(cell_trend, soh);
      Spectrum s;
      s.samples = sweep(p, omegas);
      s.cell_id = id;
      s.soh_frac = soh;
      s.soc_frac = kSyntheticSocPct / 100.0;
      s.temp_c = kSyntheticTempC;
      out.truth.rows.push_back({p, soh, s.soc_frac, s.temp_c, s.cell_id});
      out.spectra.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace ecmsoh
