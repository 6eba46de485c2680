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

// Online impedance estimation from sampled cell voltage and current:
// pulsed excitation -> second-order bandpass on both channels -> synchronous
// demodulation at the excitation frequency -> Z = V / I.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ecmsoh/ecm.hpp"
#include "ecmsoh/errors.hpp"
#include "ecmsoh/spectrum.hpp"

namespace ecmsoh {

struct SignalFrame {
  std::vector<double> v;
  std::vector<double> i;
  double fs_hz = 0.0;
};

inline void validate(const SignalFrame& frame) {
  if (frame.v.empty() || frame.v.size() != frame.i.size()) {
    throw DomainError("signal frame needs equal, non-zero channel lengths");
  }
  if (!(std::isfinite(frame.fs_hz) && frame.fs_hz > 0.0)) {
    throw DomainError("sample rate must be positive");
  }
}

struct Phasor {
  double amplitude = 0.0;
  double phase_rad = 0.0;  // (-pi, pi]
};

struct BandpassSpec {
  double f_center_hz = 0.0;
  double q = 10.0;
  double fs_hz = 0.0;
};

inline void validate(const BandpassSpec& spec) {
  if (!(spec.fs_hz > 0.0 && spec.f_center_hz > 0.0 && spec.f_center_hz < spec.fs_hz / 2.0)) {
    throw DomainError("bandpass centre must lie in (0, fs/2)");
  }
  if (!(spec.q > 0.0 && std::isfinite(spec.q))) throw DomainError("bandpass Q must be positive");
}

/// Second-order IIR section, transposed direct form II.
class Biquad {
 public:
  Biquad(double b0, double b1, double b2, double a1, double a2)
      : b0_(b0), b1_(b1), b2_(b2), a1_(a1), a2_(a2) {}

  /// Bilinear-transform bandpass, pre-warped at the centre frequency and
  /// normalized to unit gain there.
  static Biquad bandpass(const BandpassSpec& spec) {
    validate(spec);
    const double w0 = kTwoPi * spec.f_center_hz / spec.fs_hz;
    const double alpha = std::sin(w0) / (2.0 * spec.q);
    const double a0 = 1.0 + alpha;
    return Biquad(alpha / a0, 0.0, -alpha / a0, -2.0 * std::cos(w0) / a0, (1.0 - alpha) / a0);
  }

  double process(double x) {
    const double y = b0_ * x + s1_;
    s1_ = b1_ * x - a1_ * y + s2_;
    s2_ = b2_ * x - a2_ * y;
    return y;
  }

  void reset() { s1_ = s2_ = 0.0; }

  /// Frequency response at `f_hz` for sample rate `fs_hz`.
  std::complex<double> response(double f_hz, double fs_hz) const {
    const std::complex<double> z1 = std::polar(1.0, -kTwoPi * f_hz / fs_hz);
    const std::complex<double> z2 = z1 * z1;
    return (b0_ + b1_ * z1 + b2_ * z2) / (1.0 + a1_ * z1 + a2_ * z2);
  }

 private:
  double b0_, b1_, b2_, a1_, a2_;
  double s1_ = 0.0;
  double s2_ = 0.0;
};

inline std::vector<double> bandpass(std::span<const double> x, const BandpassSpec& spec) {
  Biquad filter = Biquad::bandpass(spec);
  std::vector<double> y;
  y.reserve(x.size());
  for (double s : x) y.push_back(filter.process(s));
  return y;
}

inline constexpr double kMinSamplesPerCycle = 20.0;
inline constexpr std::size_t kMinExcitationCycles = 8;

/// Zero-mean pulsed (square) current of +/-amp_a. Each sample takes the sign
/// of the ideal square wave at the sample's midpoint, so the mean is exactly
/// zero whenever fs/f is an even integer.
inline std::vector<double> make_excitation(double f_hz, double amp_a, std::size_t n_cycles,
                                           double fs_hz) {
  if (!(f_hz > 0.0 && fs_hz > 0.0)) throw DomainError("frequencies must be positive");
  if (!(amp_a > 0.0 && std::isfinite(amp_a))) throw DomainError("amplitude must be positive");
  if (fs_hz < kMinSamplesPerCycle * f_hz) {
    throw RateError("sample rate " + std::to_string(fs_hz) + " Hz is below 20x the " +
                    std::to_string(f_hz) + " Hz excitation");
  }
  if (n_cycles < kMinExcitationCycles) throw DomainError("excitation needs at least 8 cycles");
  const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(n_cycles) * fs_hz / f_hz));
  const double step = f_hz / fs_hz;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double phase = std::fmod((static_cast<double>(k) + 0.5) * step, 1.0);
    out[k] = phase < 0.5 ? amp_a : (phase > 0.5 ? -amp_a : 0.0);
  }
  return out;
}

inline constexpr std::size_t kMinDemodCycles = 4;

/// Quadrature demodulation at `f_hz` over the largest whole number of cycles
/// from the start of `x`. Phase is referenced to the first sample.
inline Phasor demodulate(std::span<const double> x, double f_hz, double fs_hz) {
  if (!(f_hz > 0.0 && fs_hz > 0.0)) throw DomainError("frequencies must be positive");
  const double step = f_hz / fs_hz;
  const auto cycles = static_cast<std::size_t>(std::floor(static_cast<double>(x.size()) * step + 1e-9));
  if (cycles < kMinDemodCycles) {
    throw LengthError("demodulation needs at least 4 whole cycles, have " + std::to_string(cycles));
  }
  std::size_t m = static_cast<std::size_t>(std::llround(static_cast<double>(cycles) / step));
  if (m > x.size()) m = x.size();
  double acc_i = 0.0;
  double acc_q = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double theta = kTwoPi * std::fmod(static_cast<double>(k) * step, 1.0);
    acc_i += x[k] * std::cos(theta);
    acc_q += x[k] * std::sin(theta);
  }
  acc_i /= static_cast<double>(m);
  acc_q /= static_cast<double>(m);
  double phase = std::atan2(-acc_q, acc_i);
  if (phase <= -std::numbers::pi) phase += kTwoPi;
  return {2.0 * std::hypot(acc_i, acc_q), phase};
}

inline constexpr double kDefaultBandpassQ = 10.0;
inline constexpr double kMinCurrentAmplitude = 1e-9;
inline constexpr std::size_t kMinMeasurementCycles = 8;

/// Filter settling time discarded before demodulation.
inline double settling_seconds(double f_hz, double q) { return 10.0 * q / f_hz; }

inline ImpedanceSample estimate_impedance(const SignalFrame& frame, double f_hz,
                                          double q = kDefaultBandpassQ) {
  validate(frame);
  const BandpassSpec spec{f_hz, q, frame.fs_hz};
  validate(spec);

  const auto settle = static_cast<std::size_t>(std::ceil(settling_seconds(f_hz, q) * frame.fs_hz));
  const double available_cycles =
      frame.v.size() > settle
          ? static_cast<double>(frame.v.size() - settle) * f_hz / frame.fs_hz
          : 0.0;
  if (available_cycles + 1e-9 < static_cast<double>(kMinMeasurementCycles)) {
    throw SettlingError("frame of " + std::to_string(frame.v.size()) + " samples is too short: " +
                        std::to_string(settle) + " settling samples plus 8 cycles at " +
                        std::to_string(f_hz) + " Hz required");
  }

  const std::vector<double> v = bandpass(frame.v, spec);
  const std::vector<double> i = bandpass(frame.i, spec);
  const Phasor pv = demodulate(std::span(v).subspan(settle), f_hz, frame.fs_hz);
  const Phasor pi = demodulate(std::span(i).subspan(settle), f_hz, frame.fs_hz);
  if (pi.amplitude < kMinCurrentAmplitude) {
    throw SignalError("current fundamental at " + std::to_string(f_hz) +
                      " Hz is below 1e-9 A");
  }
  return {omega_from_hz(f_hz), std::polar(pv.amplitude / pi.amplitude, pv.phase_rad - pi.phase_rad)};
}

}  // namespace ecmsoh
