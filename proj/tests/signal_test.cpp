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

#include "ecmsoh/signal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "ecmsoh/extract.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"
#include "waveform_util.hpp"

namespace ecmsoh {
namespace {

using ::ecmsoh::testing::rel_err;

constexpr double kDeg = std::numbers::pi / 180.0;

double wrap(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

// Plain single-bin DFT over the whole sequence; amplitude of the cosine at f.
double dft_amplitude(const std::vector<double>& x, double f_hz, double fs_hz) {
  std::complex<double> acc(0.0, 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    acc += x[k] * std::polar(1.0, -kTwoPi * f_hz * static_cast<double>(k) / fs_hz);
  }
  return 2.0 * std::abs(acc) / static_cast<double>(x.size());
}

std::vector<double> cosine(double amp, double f_hz, double phase, double fs_hz, std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = amp * std::cos(kTwoPi * std::fmod(static_cast<double>(k) * f_hz / fs_hz, 1.0) + phase);
  }
  return x;
}

TEST(MakeExcitationTest, SquareWaveShape) {
  const auto x = make_excitation(1.0, 1.0, 8, 1000.0);
  ASSERT_EQ(x.size(), 8000u);
  for (std::size_t k = 0; k < x.size(); ++k) {
    EXPECT_EQ(x[k], (k % 1000) < 500 ? 1.0 : -1.0) << k;
  }
}

TEST(MakeExcitationTest, ZeroMean) {
  for (double f : {0.5, 1.0, 37.0}) {
    const auto x = make_excitation(f, 2.5, 12, 200.0 * f);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    EXPECT_LT(std::abs(mean), 1e-12);
  }
}

TEST(MakeExcitationTest, FundamentalIsFourOverPi) {
  const double amp = 0.7;
  const auto x = make_excitation(5.0, amp, 16, 1000.0);
  EXPECT_LT(rel_err(dft_amplitude(x, 5.0, 1000.0), 4.0 / std::numbers::pi * amp), 0.01);
}

TEST(MakeExcitationTest, Guards) {
  EXPECT_THROW(make_excitation(100.0, 1.0, 8, 1000.0), RateError);
  EXPECT_THROW(make_excitation(1.0, 1.0, 7, 1000.0), DomainError);
  EXPECT_THROW(make_excitation(1.0, 0.0, 8, 1000.0), DomainError);
}

TEST(BandpassTest, UnitGainAtCentre) {
  for (double f : {0.01, 1.0, 100.0}) {
    const double fs = 200.0 * f;
    const double q = 10.0;
    const auto x = cosine(1.3, f, 0.2, fs, static_cast<std::size_t>(200.0 * fs / f));
    const auto y = bandpass(x, {f, q, fs});
    const auto settle = static_cast<std::size_t>(std::ceil(10.0 * q / f * fs));
    const Phasor in = demodulate(std::span(x).subspan(settle), f, fs);
    const Phasor out = demodulate(std::span(y).subspan(settle), f, fs);
    EXPECT_NEAR(out.amplitude / in.amplitude, 1.0, 0.01);
    EXPECT_LT(std::abs(wrap(out.phase_rad - in.phase_rad)), 1e-3);
  }
}

TEST(BandpassTest, BlocksDc) {
  const double fs = 1000.0;
  const std::vector<double> x(20000, 3.0);
  const auto y = bandpass(x, {10.0, 10.0, fs});
  for (std::size_t k = 15000; k < y.size(); ++k) EXPECT_LT(std::abs(y[k]), 1e-6 * 3.0);
}

TEST(BandpassTest, AttenuatesDecadeAwayTone) {
  const double f = 10.0;
  const double fs = 2000.0;
  const auto x = cosine(1.0, 10.0 * f, 0.0, fs, 40000);
  const auto y = bandpass(x, {f, 10.0, fs});
  const Phasor out = demodulate(std::span(y).subspan(20000), 10.0 * f, fs);
  EXPECT_LT(out.amplitude, 1.0 / 20.0);
  EXPECT_LT(std::abs(Biquad::bandpass({f, 10.0, fs}).response(10.0 * f, fs)), 1.0 / 20.0);
  EXPECT_LT(std::abs(Biquad::bandpass({f, 10.0, fs}).response(f / 10.0, fs)), 1.0 / 20.0);
}

TEST(BandpassTest, ImpulseResponseDecays) {
  for (double q : {1.0, 10.0, 30.0}) {
    const double f = 5.0;
    const double fs = 500.0;
    std::vector<double> x(static_cast<std::size_t>(30.0 * q * fs / f), 0.0);
    x[0] = 1.0;
    const auto y = bandpass(x, {f, q, fs});
    double peak = 0.0;
    for (double v : y) peak = std::max(peak, std::abs(v));
    const auto tail = static_cast<std::size_t>(20.0 * q * fs / f);
    for (std::size_t k = tail; k < y.size(); ++k) EXPECT_LT(std::abs(y[k]), 1e-6 * peak);
  }
}

TEST(BandpassTest, RejectsBadSpec) {
  const std::vector<double> x(10, 1.0);
  EXPECT_THROW(bandpass(x, {600.0, 10.0, 1000.0}), DomainError);
  EXPECT_THROW(bandpass(x, {10.0, 0.0, 1000.0}), DomainError);
}

TEST(DemodulateTest, RecoversCosinePhasor) {
  const auto x = cosine(3.0, 2.0, 0.5, 100.0, 1000);
  const Phasor p = demodulate(x, 2.0, 100.0);
  EXPECT_NEAR(p.amplitude, 3.0, 1e-6);
  EXPECT_NEAR(p.phase_rad, 0.5, 1e-6);
}

TEST(DemodulateTest, PhaseRangeIsHalfOpen) {
  const auto x = cosine(1.0, 1.0, std::numbers::pi, 64.0, 64 * 8);
  const Phasor p = demodulate(x, 1.0, 64.0);
  EXPECT_GT(p.phase_rad, -std::numbers::pi);
  EXPECT_LE(p.phase_rad, std::numbers::pi);
  EXPECT_NEAR(std::abs(p.phase_rad), std::numbers::pi, 1e-9);
}

TEST(DemodulateTest, ConstantHasNoFundamental) {
  const std::vector<double> x(2000, -4.0);
  EXPECT_LT(demodulate(x, 1.0, 100.0).amplitude, 1e-9 * 4.0);
}

TEST(DemodulateTest, NoisyToneWithinOnePercent) {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (int trial = 0; trial < 200; ++trial) {
    auto x = cosine(1.0, 1.0, 0.3, 100.0, 6400);
    for (double& v : x) v += noise(rng);
    EXPECT_LT(std::abs(demodulate(x, 1.0, 100.0).amplitude - 1.0), 0.01);
  }
}

TEST(DemodulateTest, NeedsFourCycles) {
  const auto x = cosine(1.0, 1.0, 0.0, 100.0, 399);
  EXPECT_THROW(demodulate(x, 1.0, 100.0), LengthError);
  EXPECT_NO_THROW(demodulate(cosine(1.0, 1.0, 0.0, 100.0, 400), 1.0, 100.0));
}

TEST(EstimateImpedanceTest, SingleToneMatchesForwardModel) {
  const EcmParams p = testing::reference_cell_856();
  for (double f : {0.01, 1.0, 100.0, 1000.0}) {
    const SignalFrame frame = testing::tone_frame(p, f, 200.0 * f, 120);
    const ImpedanceSample s = estimate_impedance(frame, f);
    const ComplexZ want = ecm_impedance(p, omega_from_hz(f));
    EXPECT_DOUBLE_EQ(s.omega_rad_s, omega_from_hz(f));
    EXPECT_LT(rel_err(std::abs(s.z), std::abs(want)), 0.01);
    EXPECT_LT(std::abs(wrap(std::arg(s.z) - std::arg(want))), 1.0 * kDeg);
  }
}

TEST(EstimateImpedanceTest, IdenticalChannelsGiveUnity) {
  SignalFrame frame;
  frame.fs_hz = 500.0;
  frame.i = make_excitation(5.0, 1.0, 150, 500.0);
  frame.v = frame.i;
  const ImpedanceSample s = estimate_impedance(frame, 5.0);
  EXPECT_NEAR(s.z.real(), 1.0, 1e-6);
  EXPECT_NEAR(s.z.imag(), 0.0, 1e-6);
}

TEST(EstimateImpedanceTest, LinearInVoltage) {
  const SignalFrame frame = testing::square_frame(testing::reference_cell_946(), 1.0, 200.0, 120);
  const ImpedanceSample base = estimate_impedance(frame, 1.0);
  for (double k : {1e-3, 0.5, 7.0}) {
    SignalFrame scaled = frame;
    for (double& v : scaled.v) v *= k;
    const ImpedanceSample s = estimate_impedance(scaled, 1.0);
    EXPECT_LT(rel_err(s.z.real(), k * base.z.real()), 1e-9);
    EXPECT_LT(rel_err(s.z.imag(), k * base.z.imag()), 1e-9);
  }
}

TEST(EstimateImpedanceTest, DoesNotMutateInput) {
  const SignalFrame frame = testing::tone_frame(testing::reference_cell_946(), 1.0, 200.0, 120);
  const SignalFrame copy = frame;
  estimate_impedance(frame, 1.0);
  EXPECT_EQ(frame.v, copy.v);
  EXPECT_EQ(frame.i, copy.i);
}

TEST(EstimateImpedanceTest, Guards) {
  SignalFrame zero;
  zero.fs_hz = 200.0;
  zero.i.assign(200 * 120, 0.0);
  zero.v.assign(200 * 120, 1.0);
  EXPECT_THROW(estimate_impedance(zero, 1.0), SignalError);

  const SignalFrame short_frame = testing::tone_frame(testing::reference_cell_946(), 1.0, 200.0, 107);
  EXPECT_THROW(estimate_impedance(short_frame, 1.0), SettlingError);
  const SignalFrame just_enough = testing::tone_frame(testing::reference_cell_946(), 1.0, 200.0, 108);
  EXPECT_NO_THROW(estimate_impedance(just_enough, 1.0));

  SignalFrame mismatched = just_enough;
  mismatched.v.pop_back();
  EXPECT_THROW(estimate_impedance(mismatched, 1.0), DomainError);
}

TEST(EstimateImpedanceTest, FourFrequencyEstimatesFeedExtraction) {
  const EcmParams p = testing::reference_cell_946();
  const FrequencyTargets t;
  auto estimate = [&](double omega) {
    const double f = hz_from_omega(omega);
    return estimate_impedance(testing::square_frame(p, f, 200.0 * f, 120), f);
  };
  const FourPointSet measured{estimate(t.high), estimate(t.mid2), estimate(t.mid1), estimate(t.low)};
  const EcmParams from_waveforms = extract_params(measured);
  const EcmParams from_model = extract_params(four_points_from_model(p, t.high, t.mid2, t.mid1, t.low));
  const auto a = from_waveforms.to_array();
  const auto b = from_model.to_array();
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_LT(rel_err(a[k], b[k]), 0.05) << EcmParams::kNames[k];
  EXPECT_LT(fit_rmse(from_waveforms, sweep(p, logspace(1e-2, 1e4, 60))).rmse_pct, 2.0);
}

}  // namespace
}  // namespace ecmsoh
