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

// File formats.
//
// Spectrum CSV (one row per frequency, grouped by cell/SoH/SoC/temperature):
//   cell_id,soh_pct,soc_pct,temp_c,freq_hz,re_ohm,im_ohm
// soc_pct and temp_c may be empty. im_ohm is signed (capacitive < 0).
//
// Waveform CSV (uniformly sampled):
//   t_s,i_a,v_v
//
// JSON artifacts (feature tables, models, ECM parameters, run reports) all
// carry "schema_version": 1 and a "kind" tag.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecmsoh/ecm.hpp"
#include "ecmsoh/errors.hpp"
#include "ecmsoh/extract.hpp"
#include "ecmsoh/regression.hpp"
#include "ecmsoh/signal.hpp"
#include "ecmsoh/spectrum.hpp"

namespace ecmsoh {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kSpectrumCsvHeader =
    "cell_id,soh_pct,soc_pct,temp_c,freq_hz,re_ohm,im_ohm";
inline constexpr std::string_view kWaveformCsvHeader = "t_s,i_a,v_v";
inline constexpr std::string_view kNyquistCsvHeader = "freq_hz,re_ohm,im_ohm";
inline constexpr std::string_view kPredictionCsvHeader =
    "cell_id,soh_true_pct,soh_pred_pct,abs_err_pct";

namespace csv {

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Header name -> column index; throws SchemaError on missing names.
inline std::map<std::string, std::size_t, std::less<>> columns(
    std::string_view header, std::span<const std::string_view> required) {
  std::map<std::string, std::size_t, std::less<>> idx;
  const auto fields = split(header);
  for (std::size_t k = 0; k < fields.size(); ++k) idx.emplace(std::string(fields[k]), k);
  std::vector<std::string> missing;
  for (auto name : required) {
    if (!idx.contains(name)) missing.emplace_back(name);
  }
  if (!missing.empty()) throw SchemaError(std::move(missing));
  return idx;
}

}  // namespace csv

namespace detail {

// Value y near x*scale with y / scale == x, so a scaled text field reads back
// bit-exactly when x itself came from a division by `scale`.
inline double exact_scaled(double x, double scale) {
  const double y = x * scale;
  if (y / scale == x) return y;
  double lo = y;
  double hi = y;
  for (int k = 0; k < 8; ++k) {
    lo = std::nextafter(lo, -HUGE_VAL);
    hi = std::nextafter(hi, HUGE_VAL);
    if (lo / scale == x) return lo;
    if (hi / scale == x) return hi;
  }
  return y;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  return in;
}

}  // namespace detail

/// Reads spectra, grouping rows by (cell_id, soh, soc, temp) in order of
/// first appearance. Each group is sorted by frequency and stripped of its
/// inductive high-frequency tail.
inline std::vector<Spectrum> read_spectrum_csv(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line != "\r") {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw ParseError(source, line_no, "empty file");
  constexpr std::string_view required[] = {"cell_id", "soh_pct", "soc_pct", "temp_c",
                                           "freq_hz", "re_ohm",  "im_ohm"};
  const auto col = csv::columns(line, required);
  const std::size_t c_cell = col.find("cell_id")->second;
  const std::size_t c_soh = col.find("soh_pct")->second;
  const std::size_t c_soc = col.find("soc_pct")->second;
  const std::size_t c_temp = col.find("temp_c")->second;
  const std::size_t c_f = col.find("freq_hz")->second;
  const std::size_t c_re = col.find("re_ohm")->second;
  const std::size_t c_im = col.find("im_ohm")->second;
  std::size_t width = 0;
  for (const auto& [name, k] : col) width = std::max(width, k + 1);

  using Key = std::tuple<std::string, double, std::optional<double>, std::optional<double>>;
  struct Group {
    std::size_t first_line;
    Spectrum spec;
    std::vector<std::size_t> lines;
  };
  std::map<Key, std::size_t> index;
  std::vector<Group> groups;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split(line);
    if (f.size() < width) throw ParseError(source, line_no, "expected " + std::to_string(width) + " fields");
    auto number = [&](std::size_t c, const char* name) {
      const auto v = csv::parse_double(f[c]);
      if (!v) throw ParseError(source, line_no, std::string("bad ") + name + " '" + std::string(f[c]) + "'");
      return *v;
    };
    auto optional_number = [&](std::size_t c, const char* name) -> std::optional<double> {
      if (f[c].empty()) return std::nullopt;
      return number(c, name);
    };
    if (f[c_cell].empty()) throw ParseError(source, line_no, "empty cell_id");
    const double soh_pct = number(c_soh, "soh_pct");
    const auto soc_pct = optional_number(c_soc, "soc_pct");
    const auto temp = optional_number(c_temp, "temp_c");
    const double f_hz = number(c_f, "freq_hz");
    const double re = number(c_re, "re_ohm");
    const double im = number(c_im, "im_ohm");
    if (!(soh_pct > 0.0 && soh_pct <= 120.0)) throw ParseError(source, line_no, "soh_pct out of (0, 120]");
    if (soc_pct && !(*soc_pct >= 0.0 && *soc_pct <= 100.0)) {
      throw ParseError(source, line_no, "soc_pct out of [0, 100]");
    }
    if (!(f_hz > 0.0)) throw ParseError(source, line_no, "freq_hz must be positive");

    Key key{std::string(f[c_cell]), soh_pct, soc_pct, temp};
    auto [it, inserted] = index.emplace(key, groups.size());
    if (inserted) {
      Group g{line_no, {}, {}};
      g.spec.cell_id = std::get<0>(key);
      g.spec.soh_frac = soh_pct / 100.0;
      if (soc_pct) g.spec.soc_frac = *soc_pct / 100.0;
      g.spec.temp_c = temp;
      groups.push_back(std::move(g));
    }
    Group& g = groups[it->second];
    g.spec.samples.push_back({omega_from_hz(f_hz), {re, im}});
    g.lines.push_back(line_no);
  }

  std::vector<Spectrum> out;
  out.reserve(groups.size());
  for (auto& g : groups) {
    std::vector<std::size_t> order(g.spec.samples.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return g.spec.samples[a].omega_rad_s < g.spec.samples[b].omega_rad_s;
    });
    std::vector<ImpedanceSample> sorted;
    sorted.reserve(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (k > 0 && g.spec.samples[order[k]].omega_rad_s == g.spec.samples[order[k - 1]].omega_rad_s) {
        const std::size_t dup = std::max(g.lines[order[k]], g.lines[order[k - 1]]);
        throw ParseError(source, dup, "duplicate frequency in group '" + g.spec.cell_id + "'");
      }
      sorted.push_back(g.spec.samples[order[k]]);
    }
    g.spec.samples = mask_inductive_tail(std::move(sorted));
    if (g.spec.samples.size() < Spectrum::kMinSamples) {
      throw ParseError(source, g.first_line,
                       "group '" + g.spec.cell_id + "' has fewer than 4 capacitive samples");
    }
    out.push_back(std::move(g.spec));
  }
  return out;
}

inline std::vector<Spectrum> load_spectrum_csv(const std::string& path) {
  auto in = detail::open_input(path);
  return read_spectrum_csv(in, path);
}

inline void write_spectrum_csv(std::ostream& out, std::span<const Spectrum> spectra) {
  out << kSpectrumCsvHeader << '\n';
  for (const auto& s : spectra) {
    const std::string soh = csv::format_double(detail::exact_scaled(s.soh_frac, 100.0));
    const std::string soc = s.soc_frac ? csv::format_double(detail::exact_scaled(*s.soc_frac, 100.0)) : "";
    const std::string temp = s.temp_c ? csv::format_double(*s.temp_c) : "";
    for (const auto& smp : s.samples) {
      out << s.cell_id << ',' << soh << ',' << soc << ',' << temp << ','
          << csv::format_double(hz_from_omega(smp.omega_rad_s)) << ','
          << csv::format_double(smp.z.real()) << ',' << csv::format_double(smp.z.imag()) << '\n';
    }
  }
}

inline void save_spectrum_csv(const std::string& path, std::span<const Spectrum> spectra) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_spectrum_csv(out, spectra);
}

/// Reads `t_s,i_a,v_v`; the sample rate comes from the time column, which
/// must be uniformly spaced.
inline SignalFrame read_waveform_csv(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(source, 0, "empty file");
  ++line_no;
  constexpr std::string_view required[] = {"t_s", "i_a", "v_v"};
  const auto col = csv::columns(line, required);
  const std::size_t c_t = col.find("t_s")->second;
  const std::size_t c_i = col.find("i_a")->second;
  const std::size_t c_v = col.find("v_v")->second;
  const std::size_t width = std::max({c_t, c_i, c_v}) + 1;

  std::vector<double> t;
  SignalFrame frame;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split(line);
    if (f.size() < width) throw ParseError(source, line_no, "expected " + std::to_string(width) + " fields");
    const auto tv = csv::parse_double(f[c_t]);
    const auto iv = csv::parse_double(f[c_i]);
    const auto vv = csv::parse_double(f[c_v]);
    if (!tv || !iv || !vv) throw ParseError(source, line_no, "non-numeric field");
    if (!t.empty() && !(*tv > t.back())) throw ParseError(source, line_no, "time is not increasing");
    t.push_back(*tv);
    frame.i.push_back(*iv);
    frame.v.push_back(*vv);
  }
  if (t.size() < 2) throw ParseError(source, line_no, "need at least two samples");
  const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (std::abs(t[k] - t.front() - static_cast<double>(k) * dt) > 1e-3 * dt) {
      throw ParseError(source, k + 2, "time column is not uniformly sampled");
    }
  }
  frame.fs_hz = 1.0 / dt;
  return frame;
}

inline SignalFrame load_waveform_csv(const std::string& path) {
  auto in = detail::open_input(path);
  return read_waveform_csv(in, path);
}

inline void write_waveform_csv(std::ostream& out, const SignalFrame& frame) {
  validate(frame);
  out << kWaveformCsvHeader << '\n';
  for (std::size_t k = 0; k < frame.v.size(); ++k) {
    out << csv::format_double(static_cast<double>(k) / frame.fs_hz) << ','
        << csv::format_double(frame.i[k]) << ',' << csv::format_double(frame.v[k]) << '\n';
  }
}

// --- Feature tables ----------------------------------------------------------

struct SkippedSpectrum {
  std::string cell_id;
  double soh_frac = 0.0;
  std::string reason;
};

struct FeatureTable {
  std::vector<FeatureRow> rows;
  std::vector<std::string> sources;
  std::optional<FrequencyTargets> targets;
  /// Selected angular frequencies per row, ordered high, mid2, mid1, low.
  std::vector<std::array<double, 4>> selections;
  std::vector<SkippedSpectrum> skipped;
};

/// Selects four points and extracts parameters for every spectrum. Spectra
/// whose selection or extraction fails are recorded in `skipped`.
inline FeatureTable build_feature_table(std::span<const Spectrum> specs,
                                        const std::optional<FrequencyTargets>& targets = std::nullopt,
                                        std::vector<std::string> sources = {}) {
  FeatureTable table;
  table.sources = std::move(sources);
  table.targets = targets;
  const FrequencyTargets t = targets.value_or(FrequencyTargets{});
  for (const auto& s : specs) {
    try {
      validate(s);
      const FourPointSet fp = select_four_frequencies(s, t);
      FeatureRow row{extract_params(fp), s.soh_frac, s.soc_frac, s.temp_c, s.cell_id};
      table.rows.push_back(std::move(row));
      table.selections.push_back(fp.omegas());
    } catch (const ExtractionError& e) {
      table.skipped.push_back({s.cell_id, s.soh_frac, e.what()});
    } catch (const SelectionError& e) {
      table.skipped.push_back({s.cell_id, s.soh_frac, e.what()});
    } catch (const DomainError& e) {
      table.skipped.push_back({s.cell_id, s.soh_frac, e.what()});
    }
  }
  if (table.rows.empty()) {
    throw EmptyTableError("no spectrum produced a feature row (" + std::to_string(table.skipped.size()) +
                          " skipped)");
  }
  return table;
}

// --- JSON artifacts ----------------------------------------------------------

using Json = nlohmann::json;

namespace detail {

inline Json optional_to_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline std::optional<double> optional_from_json(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline Json feature_order_json() {
  Json order = Json::array();
  for (auto name : EcmParams::kNames) order.push_back(std::string(name));
  return order;
}

inline void check_header(const Json& j, std::string_view kind) {
  if (!j.is_object() || !j.contains("schema_version")) throw VersionError("artifact has no schema_version");
  const Json& v = j.at("schema_version");
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion) {
    throw VersionError("unsupported schema_version " + v.dump() + " (expected 1)");
  }
  if (j.contains("kind") && j.at("kind") != kind) {
    throw SchemaError({"kind '" + std::string(kind) + "' (found " + j.at("kind").dump() + ")"});
  }
}

inline void check_feature_order(const Json& j) {
  if (!j.contains("feature_order") || j.at("feature_order") != feature_order_json()) {
    throw SchemaError({"feature_order [R0,R1,R2,Aw,C1,C2]"});
  }
}

inline double json_double(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

template <typename F>
auto convert(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw ParseError(what, 0, e.what());
  }
}

}  // namespace detail

inline Json to_json(const EcmParams& p) {
  Json j = {{"schema_version", kSchemaVersion}, {"kind", "ecm_params"}};
  const auto a = p.to_array();
  for (std::size_t k = 0; k < EcmParams::kSize; ++k) j[std::string(EcmParams::kNames[k])] = a[k];
  return j;
}

inline EcmParams ecm_params_from_json(const Json& j) {
  detail::check_header(j, "ecm_params");
  return detail::convert("ecm_params", [&] {
    std::array<double, EcmParams::kSize> a{};
    for (std::size_t k = 0; k < EcmParams::kSize; ++k) a[k] = j.at(std::string(EcmParams::kNames[k])).get<double>();
    EcmParams p = EcmParams::from_array(a);
    require_valid(p);
    return p;
  });
}

inline Json to_json(const Metrics& m) {
  return {{"r2", std::isfinite(m.r2) ? Json(m.r2) : Json(nullptr)},
          {"mae_pct", m.mae_pct},
          {"rmse_pct", m.rmse_pct},
          {"n", m.n}};
}

inline Metrics metrics_from_json(const Json& j) {
  return detail::convert("metrics", [&] {
    return Metrics{detail::json_double(j.at("r2")), j.at("mae_pct").get<double>(),
                   j.at("rmse_pct").get<double>(), j.at("n").get<std::size_t>()};
  });
}

inline Json to_json(const FitReport& r) {
  return {{"rmse_pct", r.rmse_pct}, {"max_err_pct", r.max_err_pct}, {"n_points", r.n_points}};
}

inline Json to_json(const SohModel& m) {
  return {{"schema_version", kSchemaVersion},
          {"kind", "soh_model"},
          {"beta", m.beta},
          {"beta0", m.beta0},
          {"feat_mean", m.feat_mean},
          {"feat_std", m.feat_std},
          {"feature_order", detail::feature_order_json()},
          {"train_metrics", to_json(m.train_metrics)}};
}

inline SohModel soh_model_from_json(const Json& j) {
  detail::check_header(j, "soh_model");
  detail::check_feature_order(j);
  return detail::convert("soh_model", [&] {
    SohModel m;
    m.beta = j.at("beta").get<FeatureVector>();
    m.beta0 = j.at("beta0").get<double>();
    m.feat_mean = j.at("feat_mean").get<FeatureVector>();
    m.feat_std = j.at("feat_std").get<FeatureVector>();
    for (double s : m.feat_std) {
      if (!(s > 0.0)) throw SchemaError({"feat_std (all components > 0)"});
    }
    m.train_metrics = metrics_from_json(j.at("train_metrics"));
    return m;
  });
}

inline Json to_json(const FeatureTable& t) {
  if (t.rows.empty()) throw EmptyTableError("refusing to save an empty feature table");
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"cell_id", r.cell_id},
                    {"soh_frac", r.soh_frac},
                    {"soc_frac", detail::optional_to_json(r.soc_frac)},
                    {"temp_c", detail::optional_to_json(r.temp_c)},
                    {"features", r.params.to_array()}});
  }
  Json skipped = Json::array();
  for (const auto& s : t.skipped) {
    skipped.push_back({{"cell_id", s.cell_id}, {"soh_frac", s.soh_frac}, {"reason", s.reason}});
  }
  Json targets = nullptr;
  if (t.targets) {
    targets = {{"low", t.targets->low}, {"mid1", t.targets->mid1}, {"mid2", t.targets->mid2}, {"high", t.targets->high}};
  }
  return {{"schema_version", kSchemaVersion},
          {"kind", "feature_table"},
          {"feature_order", detail::feature_order_json()},
          {"rows", rows},
          {"provenance",
           {{"sources", t.sources},
            {"freq_targets_rad_s", targets},
            {"selections_rad_s", t.selections},
            {"skipped", skipped}}}};
}

inline FeatureTable feature_table_from_json(const Json& j) {
  detail::check_header(j, "feature_table");
  detail::check_feature_order(j);
  FeatureTable t = detail::convert("feature_table", [&] {
    FeatureTable t;
    for (const auto& r : j.at("rows")) {
      FeatureRow row;
      row.cell_id = r.at("cell_id").get<std::string>();
      row.soh_frac = r.at("soh_frac").get<double>();
      row.soc_frac = detail::optional_from_json(r.at("soc_frac"));
      row.temp_c = detail::optional_from_json(r.at("temp_c"));
      row.params = EcmParams::from_array(r.at("features").get<FeatureVector>());
      validate(row);
      t.rows.push_back(std::move(row));
    }
    const Json& prov = j.at("provenance");
    t.sources = prov.at("sources").get<std::vector<std::string>>();
    if (!prov.at("freq_targets_rad_s").is_null()) {
      const Json& ft = prov.at("freq_targets_rad_s");
      t.targets = FrequencyTargets{ft.at("low").get<double>(), ft.at("mid1").get<double>(),
                                   ft.at("mid2").get<double>(), ft.at("high").get<double>()};
    }
    t.selections = prov.at("selections_rad_s").get<std::vector<std::array<double, 4>>>();
    for (const auto& s : prov.at("skipped")) {
      t.skipped.push_back({s.at("cell_id").get<std::string>(), s.at("soh_frac").get<double>(),
                           s.at("reason").get<std::string>()});
    }
    return t;
  });
  if (t.rows.empty()) throw EmptyTableError("feature table has no rows");
  return t;
}

inline Json load_json(const std::string& path) {
  auto in = detail::open_input(path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path, 0, e.what());
  }
}

inline void save_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

inline void save_feature_table(const std::string& path, const FeatureTable& t) { save_json(path, to_json(t)); }
inline FeatureTable load_feature_table(const std::string& path) { return feature_table_from_json(load_json(path)); }
inline void save_model(const std::string& path, const SohModel& m) { save_json(path, to_json(m)); }
inline SohModel load_model(const std::string& path) { return soh_model_from_json(load_json(path)); }
inline void save_params(const std::string& path, const EcmParams& p) { save_json(path, to_json(p)); }
inline EcmParams load_params(const std::string& path) { return ecm_params_from_json(load_json(path)); }

}  // namespace ecmsoh
