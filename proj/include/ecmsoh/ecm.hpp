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

// Forward model of the cell equivalent circuit:
//
//   R0 --+-- [ (R1 + W) || C1 ] --+-- [ R2 || C2 ] --
//
// where W = Aw / sqrt(j*omega) is the Warburg diffusion element. All
// quantities are SI (ohm, farad, rad/s). Impedances use the mathematical sign
// convention: capacitive reactance is negative.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecmsoh/errors.hpp"

namespace ecmsoh {

using ComplexZ = std::complex<double>;

inline bool is_finite(const ComplexZ& z) {
  return std::isfinite(z.real()) && std::isfinite(z.imag());
}

/// Six ECM parameters. The member order is also the regression feature order.
struct EcmParams {
  double r0_ohm = 0.0;
  double r1_ohm = 0.0;
  double r2_ohm = 0.0;
  double aw_ohm_sqrt_rad_s = 0.0;
  double c1_f = 0.0;
  double c2_f = 0.0;

  static constexpr std::size_t kSize = 6;
  static constexpr std::array<std::string_view, kSize> kNames = {
      "R0", "R1", "R2", "Aw", "C1", "C2"};

  std::array<double, kSize> to_array() const {
    return {r0_ohm, r1_ohm, r2_ohm, aw_ohm_sqrt_rad_s, c1_f, c2_f};
  }

  static EcmParams from_array(const std::array<double, kSize>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }

  bool valid() const {
    for (double v : to_array()) {
      if (!(std::isfinite(v) && v > 0.0)) return false;
    }
    return true;
  }

  friend bool operator==(const EcmParams&, const EcmParams&) = default;
};

inline void require_valid(const EcmParams& p) {
  const auto a = p.to_array();
  for (std::size_t k = 0; k < EcmParams::kSize; ++k) {
    if (!(std::isfinite(a[k]) && a[k] > 0.0)) {
      throw DomainError("ECM parameter " + std::string(EcmParams::kNames[k]) +
                        " must be finite and positive, got " +
                        std::to_string(a[k]));
    }
  }
}

struct ImpedanceSample {
  double omega_rad_s = 0.0;
  ComplexZ z;

  friend bool operator==(const ImpedanceSample&,
                         const ImpedanceSample&) = default;
};

/// Frequency regimes in which the circuit collapses to a simpler network.
/// Declared in ascending frequency order.
enum class Regime { kLow, kMid1, kMid2, kHigh };

namespace detail {

inline void require_omega(double omega) {
  if (!(std::isfinite(omega) && omega > 0.0)) {
    throw DomainError("angular frequency must be finite and positive, got " +
                      std::to_string(omega));
  }
}

// Z of R || C at omega.
inline ComplexZ parallel_rc(double r, double c, double omega) {
  return r / ComplexZ(1.0, omega * r * c);
}

}  // namespace detail

/// Warburg element Aw / sqrt(j*omega) = Aw / sqrt(2*omega) * (1 - j).
inline ComplexZ warburg_impedance(double aw, double omega) {
  if (!(std::isfinite(aw) && aw > 0.0)) {
    throw DomainError("Warburg gain must be finite and positive");
  }
  detail::require_omega(omega);
  const double m = aw / std::sqrt(2.0 * omega);
  return {m, -m};
}

inline ComplexZ ecm_impedance(const EcmParams& p, double omega) {
  require_valid(p);
  detail::require_omega(omega);
  const ComplexZ randles_series = p.r1_ohm + warburg_impedance(p.aw_ohm_sqrt_rad_s, omega);
  // Admittance form keeps the omega -> infinity limit finite.
  const ComplexZ randles = 1.0 / (1.0 / randles_series + ComplexZ(0.0, omega * p.c1_f));
  return p.r0_ohm + randles + detail::parallel_rc(p.r2_ohm, p.c2_f, omega);
}

/// Asymptotic sub-circuit of `ecm_impedance` for one regime.
inline ComplexZ reduced_impedance(const EcmParams& p, double omega, Regime regime) {
  require_valid(p);
  detail::require_omega(omega);
  switch (regime) {
    case Regime::kHigh:
      return {p.r0_ohm, 0.0};
    case Regime::kLow: {
      const ComplexZ w = warburg_impedance(p.aw_ohm_sqrt_rad_s, omega);
      return p.r0_ohm + p.r1_ohm + p.r2_ohm + w;
    }
    case Regime::kMid1:
      // C2 still open, Warburg negligible.
      return p.r0_ohm + p.r2_ohm + detail::parallel_rc(p.r1_ohm, p.c1_f, omega);
    case Regime::kMid2:
      return p.r0_ohm + detail::parallel_rc(p.r2_ohm, p.c2_f, omega);
  }
  throw DomainError("unknown regime");
}

/// Capacity-based state of health, Q_max / Q_rated. Not clamped.
inline double soh_from_capacity(double q_max_ah, double q_rated_ah) {
  if (!(std::isfinite(q_max_ah) && q_max_ah > 0.0) ||
      !(std::isfinite(q_rated_ah) && q_rated_ah > 0.0)) {
    throw DomainError("capacities must be finite and positive");
  }
  return q_max_ah / q_rated_ah;
}

inline std::vector<ImpedanceSample> sweep(const EcmParams& p,
                                          std::span<const double> omegas) {
  require_valid(p);
  std::vector<ImpedanceSample> out;
  out.reserve(omegas.size());
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    const double w = omegas[k];
    if (!(std::isfinite(w) && w > 0.0)) {
      throw DomainError("sweep frequency at index " + std::to_string(k) +
                        " must be finite and positive, got " + std::to_string(w));
    }
    out.push_back({w, ecm_impedance(p, w)});
  }
  return out;
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
inline std::vector<double> logspace(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && hi > 0.0)) throw DomainError("logspace bounds must be positive");
  std::vector<double> out;
  out.reserve(n);
  if (n == 1) {
    out.push_back(lo);
    return out;
  }
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t k = 0; k < n; ++k) {
    if (k == 0) {
      out.push_back(lo);
    } else if (k + 1 == n) {
      out.push_back(hi);
    } else {
      out.push_back(std::pow(10.0, a + (b - a) * static_cast<double>(k) /
                                           static_cast<double>(n - 1)));
    }
  }
  return out;
}

}  // namespace ecmsoh
