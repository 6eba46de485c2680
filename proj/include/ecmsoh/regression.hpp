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

// Linear SoH model over ECM-parameter features:
//
//   SoH = beta . ((x - mean) / std) + beta0
//
// Features are z-scored with training statistics (raw features span several
// orders of magnitude) and the coefficients come from a column-pivoted QR
// least-squares solve.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ecmsoh/ecm.hpp"
#include "ecmsoh/errors.hpp"

namespace ecmsoh {

inline constexpr std::size_t kNumFeatures = EcmParams::kSize;
using FeatureVector = std::array<double, kNumFeatures>;

struct FeatureRow {
  EcmParams params;
  double soh_frac = 1.0;
  std::optional<double> soc_frac;
  std::optional<double> temp_c;
  std::string cell_id;

  friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

inline void validate(const FeatureRow& row) {
  if (!(row.soh_frac > 0.0 && row.soh_frac <= 1.2)) {
    throw DomainError("row '" + row.cell_id + "' SoH out of (0, 1.2]");
  }
  if (row.soc_frac && !(*row.soc_frac >= 0.0 && *row.soc_frac <= 1.0)) {
    throw DomainError("row '" + row.cell_id + "' SoC out of [0, 1]");
  }
  require_valid(row.params);
}

/// Regression metrics. MAE and RMSE are in SoH percentage points; r2 is NaN
/// when the labels are constant.
struct Metrics {
  double r2 = 0.0;
  double mae_pct = 0.0;
  double rmse_pct = 0.0;
  std::size_t n = 0;
};

struct SohModel {
  FeatureVector beta{};
  double beta0 = 0.0;
  FeatureVector feat_mean{};
  FeatureVector feat_std{};
  Metrics train_metrics;

  /// Coefficients and intercept in raw (unstandardized) feature units.
  std::pair<FeatureVector, double> raw_coefficients() const {
    FeatureVector raw{};
    double intercept = beta0;
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      raw[j] = beta[j] / feat_std[j];
      intercept -= raw[j] * feat_mean[j];
    }
    return {raw, intercept};
  }
};

inline double predict(const SohModel& m, const EcmParams& p) {
  const FeatureVector x = p.to_array();
  double y = m.beta0;
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    y += m.beta[j] * ((x[j] - m.feat_mean[j]) / m.feat_std[j]);
  }
  return y;
}

inline Metrics evaluate(const SohModel& m, std::span<const FeatureRow> rows) {
  if (rows.empty()) throw SizeError("evaluate needs at least one row");
  const double n = static_cast<double>(rows.size());
  double mean_y = 0.0;
  bool constant = true;
  for (const auto& r : rows) {
    mean_y += r.soh_frac;
    constant = constant && r.soh_frac == rows.front().soh_frac;
  }
  mean_y /= n;
  double abs_sum = 0.0;
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (const auto& r : rows) {
    const double e = predict(m, r.params) - r.soh_frac;
    abs_sum += std::abs(e);
    ss_res += e * e;
    ss_tot += (r.soh_frac - mean_y) * (r.soh_frac - mean_y);
  }
  Metrics out;
  out.n = rows.size();
  out.mae_pct = 100.0 * abs_sum / n;
  out.rmse_pct = 100.0 * std::sqrt(ss_res / n);
  out.r2 = !constant && ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : std::numeric_limits<double>::quiet_NaN();
  return out;
}

inline constexpr std::size_t kMinTrainingRows = kNumFeatures + 1;

inline SohModel train(std::span<const FeatureRow> rows) {
  if (rows.size() < kMinTrainingRows) {
    throw SizeError("training needs at least 7 rows, got " + std::to_string(rows.size()));
  }
  for (const auto& r : rows) validate(r);

  const auto n = static_cast<Eigen::Index>(rows.size());
  constexpr auto p = static_cast<Eigen::Index>(kNumFeatures);
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto f = rows[static_cast<std::size_t>(i)].params.to_array();
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = f[static_cast<std::size_t>(j)];
    y(i) = rows[static_cast<std::size_t>(i)].soh_frac;
  }

  SohModel model;
  Eigen::MatrixXd design(n, p + 1);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double mean = x.col(j).mean();
    const double var = (x.col(j).array() - mean).square().sum() / static_cast<double>(n - 1);
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(std::abs(mean), std::numeric_limits<double>::min()))) {
      throw RankError("feature " + std::string(EcmParams::kNames[static_cast<std::size_t>(j)]) +
                      " is constant across the training rows");
    }
    model.feat_mean[static_cast<std::size_t>(j)] = mean;
    model.feat_std[static_cast<std::size_t>(j)] = sd;
    design.col(j) = (x.col(j).array() - mean) / sd;
  }
  design.col(p).setOnes();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < p + 1) {
    throw RankError("standardized design matrix is rank deficient (rank " +
                    std::to_string(qr.rank()) + " of 7)");
  }
  const Eigen::VectorXd coef = qr.solve(y);
  for (Eigen::Index j = 0; j < p; ++j) model.beta[static_cast<std::size_t>(j)] = coef(j);
  model.beta0 = coef(p);
  model.train_metrics = evaluate(model, rows);
  return model;
}

namespace detail {

// splitmix64; portable, unlike the std distributions.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

using RowSplit = std::pair<std::vector<FeatureRow>, std::vector<FeatureRow>>;

/// Seeded shuffle split. The training part takes round(train_frac * n) rows.
inline RowSplit split(std::span<const FeatureRow> rows, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw DomainError("train_frac must lie in (0, 1)");
  if (rows.size() < 2) throw SizeError("split needs at least 2 rows");
  const std::size_t n = rows.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw SizeError("split of " + std::to_string(n) + " rows at " + std::to_string(train_frac) +
                    " leaves an empty part");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::uint64_t state = seed;
  for (std::size_t k = n - 1; k > 0; --k) {
    const std::size_t j = detail::splitmix64(state) % (k + 1);
    std::swap(order[k], order[j]);
  }
  RowSplit out;
  out.first.reserve(n_train);
  out.second.reserve(n - n_train);
  for (std::size_t k = 0; k < n; ++k) {
    (k < n_train ? out.first : out.second).push_back(rows[order[k]]);
  }
  return out;
}

/// Holds out every row whose cell_id is listed. Order within each part is
/// preserved.
inline RowSplit split_by_cell(std::span<const FeatureRow> rows,
                              std::span<const std::string> test_cell_ids) {
  if (test_cell_ids.empty()) throw DomainError("no test cells given");
  const std::set<std::string> test(test_cell_ids.begin(), test_cell_ids.end());
  std::set<std::string> present;
  for (const auto& r : rows) present.insert(r.cell_id);
  for (const auto& id : test) {
    if (!present.contains(id)) throw UnknownCellError("cell '" + id + "' not present in rows");
  }
  RowSplit out;
  for (const auto& r : rows) (test.contains(r.cell_id) ? out.second : out.first).push_back(r);
  if (out.first.empty() || out.second.empty()) {
    throw SizeError("cell split leaves an empty part");
  }
  return out;
}

}  // namespace ecmsoh
