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

#pragma once

#include <cmath>
#include <charconv>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ecmsoh/ecm.hpp"
#include "ecmsoh/errors.hpp"

namespace ecmsoh {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double omega_from_hz(double f_hz) { return kTwoPi * f_hz; }

/// Inverse of `omega_from_hz`. When `omega` was itself produced by
/// `omega_from_hz`, the returned frequency maps back to `omega` bit-exactly;
/// among such frequencies the one with the shortest decimal form wins.
inline double hz_from_omega(double omega) {
  const double f = omega / kTwoPi;
  auto digits = [](double x) {
    char buf[32];
    return std::to_chars(buf, buf + sizeof buf, x).ptr - buf;
  };
  double best = f;
  bool found = false;
  double lo = f;
  double hi = f;
  for (int k = 0; k <= 4; ++k) {
    for (double c : {lo, hi}) {
      if (omega_from_hz(c) == omega && (!found || digits(c) < digits(best))) {
        best = c;
        found = true;
      }
    }
    lo = std::nextafter(lo, 0.0);
    hi = std::nextafter(hi, HUGE_VAL);
  }
  return best;
}

/// One EIS sweep with its cell labels. Samples ascend in frequency.
struct Spectrum {
  std::vector<ImpedanceSample> samples;
  std::string cell_id;
  double soh_frac = 1.0;
  std::optional<double> soc_frac;
  std::optional<double> temp_c;

  static constexpr std::size_t kMinSamples = 4;
  static constexpr double kMaxSoh = 1.2;

  double omega_min() const { return samples.front().omega_rad_s; }
  double omega_max() const { return samples.back().omega_rad_s; }

  friend bool operator==(const Spectrum&, const Spectrum&) = default;
};

inline void validate(const Spectrum& s) {
  if (s.samples.size() < Spectrum::kMinSamples) {
    throw DomainError("spectrum '" + s.cell_id + "' has " +
                      std::to_string(s.samples.size()) + " samples, need at least 4");
  }
  if (!(s.soh_frac > 0.0 && s.soh_frac <= Spectrum::kMaxSoh)) {
    throw DomainError("spectrum '" + s.cell_id + "' SoH out of (0, 1.2]");
  }
  if (s.soc_frac && !(*s.soc_frac >= 0.0 && *s.soc_frac <= 1.0)) {
    throw DomainError("spectrum '" + s.cell_id + "' SoC out of [0, 1]");
  }
  for (std::size_t k = 0; k < s.samples.size(); ++k) {
    const auto& smp = s.samples[k];
    if (!(std::isfinite(smp.omega_rad_s) && smp.omega_rad_s > 0.0) || !is_finite(smp.z)) {
      throw DomainError("spectrum '" + s.cell_id + "' sample " + std::to_string(k) +
                        " is not finite");
    }
    if (k > 0 && !(smp.omega_rad_s > s.samples[k - 1].omega_rad_s)) {
      throw DomainError("spectrum '" + s.cell_id +
                        "' frequencies are not strictly increasing");
    }
  }
}

/// Drops the inductive tail: trailing (highest-frequency) samples with
/// positive reactance. Input must be sorted ascending by frequency.
inline std::vector<ImpedanceSample> mask_inductive_tail(std::vector<ImpedanceSample> samples) {
  while (!samples.empty() && samples.back().z.imag() > 0.0) samples.pop_back();
  return samples;
}

}  // namespace ecmsoh
