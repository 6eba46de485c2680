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

// Command-line front end. `run` is the whole program; main() only forwards
// argv and the standard streams so tests can drive it in-process.
//
// Exit codes: 0 ok, 2 usage/validation, 3 extraction, 4 signal,
// 5 artifact/schema, 1 unexpected.

#pragma once

#include <chrono>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ecmsoh/ecmsoh.hpp"

namespace ecmsoh::cli {

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kUsage = 2,
  kExtraction = 3,
  kSignal = 4,
  kArtifact = 5,
};

/// Machine-readable record of one command invocation.
struct RunReport {
  std::string command;
  Json inputs = Json::object();
  Json outputs = Json::object();
  Json metrics = nullptr;
  Json details = Json::object();
  std::size_t skipped = 0;
  std::optional<std::uint64_t> seed;
  double wall_time_s = 0.0;

  Json to_json() const {
    return {{"schema_version", kSchemaVersion},
            {"kind", "run_report"},
            {"command", command},
            {"inputs", inputs},
            {"outputs", outputs},
            {"metrics", metrics},
            {"details", details},
            {"skipped", skipped},
            {"seed", seed ? Json(*seed) : Json(nullptr)},
            {"wall_time_s", wall_time_s}};
  }
};

namespace detail {

class UsageError : public Error {
 public:
  using Error::Error;
};

// "-" means the caller's output stream.
class OutputTarget {
 public:
  OutputTarget(const std::string& path, std::ostream& fallback) {
    if (path == "-" || path.empty()) {
      stream_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw Error("cannot write " + path);
      stream_ = file_.get();
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_ = nullptr;
};

inline std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  for (auto field : csv::split(text)) {
    const auto v = csv::parse_double(field);
    if (!v) throw UsageError(std::string("bad number in ") + what + ": '" + std::string(field) + "'");
    out.push_back(*v);
  }
  return out;
}

inline ImpedanceSample parse_point(const std::string& text, const char* which) {
  const auto v = parse_list(text, which);
  if (v.size() != 3) throw UsageError(std::string("--") + which + " expects FREQ_HZ,RE_OHM,IM_OHM");
  return {omega_from_hz(v[0]), {v[1], v[2]}};
}

inline std::optional<FrequencyTargets> parse_targets(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto v = parse_list(text, "--targets-hz");
  if (v.size() != 4) throw UsageError("--targets-hz expects LOW,MID1,MID2,HIGH in Hz");
  return FrequencyTargets{omega_from_hz(v[0]), omega_from_hz(v[1]), omega_from_hz(v[2]), omega_from_hz(v[3])};
}

inline Json targets_json(const FrequencyTargets& t) {
  return {{"low_hz", hz_from_omega(t.low)},
          {"mid1_hz", hz_from_omega(t.mid1)},
          {"mid2_hz", hz_from_omega(t.mid2)},
          {"high_hz", hz_from_omega(t.high)}};
}

inline Json selection_json(const FourPointSet& fp) {
  return {{"high_hz", hz_from_omega(fp.high.omega_rad_s)},
          {"mid2_hz", hz_from_omega(fp.mid2.omega_rad_s)},
          {"mid1_hz", hz_from_omega(fp.mid1.omega_rad_s)},
          {"low_hz", hz_from_omega(fp.low.omega_rad_s)}};
}


inline void print_metrics(std::ostream& out, const char* label, const Metrics& m) {
  out << label << ": n=" << m.n << " r2=";
  if (std::isfinite(m.r2)) {
    out << std::setprecision(6) << m.r2;
  } else {
    out << "nan";
  }
  out << " mae_pct=" << std::setprecision(6) << m.mae_pct << " rmse_pct=" << m.rmse_pct << '\n';
}

inline std::vector<std::string> split_ids(const std::string& text) {
  std::vector<std::string> out;
  for (auto f : csv::split(text)) {
    if (!f.empty()) out.emplace_back(f);
  }
  return out;
}

}  // namespace detail

/// Runs the CLI on `args` (args[0] is the program name).
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();

  CLI::App app{"Battery state-of-health estimation from four-point ECM impedance features", "ecmsoh"};
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();
  std::string report_path;
  app.add_option("--report", report_path, "Write the JSON run report here (default: one line on stderr)");

  // ecm
  auto* ecm = app.add_subcommand("ecm", "Equivalent-circuit forward model and parameter extraction");
  ecm->require_subcommand(1);

  auto* sweep_cmd = ecm->add_subcommand("sweep", "Emit a Nyquist CSV (freq_hz,re_ohm,im_ohm), high frequency first");
  std::string sweep_params_path;
  std::optional<double> r0, r1, r2, aw, c1, c2;
  double fmin_hz = 1e-2 / kTwoPi;
  double fmax_hz = 1e4 / kTwoPi;
  std::size_t points = 60;
  std::string sweep_out = "-";
  sweep_cmd->add_option("--params", sweep_params_path, "ECM parameter JSON");
  sweep_cmd->add_option("--r0", r0, "R0 [ohm]");
  sweep_cmd->add_option("--r1", r1, "R1 [ohm]");
  sweep_cmd->add_option("--r2", r2, "R2 [ohm]");
  sweep_cmd->add_option("--aw", aw, "Warburg gain Aw [ohm*(rad/s)^0.5]");
  sweep_cmd->add_option("--c1", c1, "C1 [F]");
  sweep_cmd->add_option("--c2", c2, "C2 [F]");
  sweep_cmd->add_option("--fmin-hz", fmin_hz, "Lowest frequency [Hz]")->capture_default_str();
  sweep_cmd->add_option("--fmax-hz", fmax_hz, "Highest frequency [Hz]")->capture_default_str();
  sweep_cmd->add_option("--points", points, "Number of log-spaced points")->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out, "Output CSV path or '-'")->capture_default_str();

  auto* extract_cmd = ecm->add_subcommand("extract", "Closed-form ECM parameters from four impedances");
  std::string p_high, p_mid2, p_mid1, p_low, extract_spectrum, extract_cell, extract_targets;
  std::size_t extract_group = 0;
  std::string extract_out = "-";
  std::string extract_fit_out;
  extract_cmd->add_option("--high", p_high, "FREQ_HZ,RE_OHM,IM_OHM of the high-frequency point");
  extract_cmd->add_option("--mid2", p_mid2, "FREQ_HZ,RE_OHM,IM_OHM of the upper mid point");
  extract_cmd->add_option("--mid1", p_mid1, "FREQ_HZ,RE_OHM,IM_OHM of the lower mid point");
  extract_cmd->add_option("--low", p_low, "FREQ_HZ,RE_OHM,IM_OHM of the low-frequency point");
  extract_cmd->add_option("--spectrum", extract_spectrum, "Spectrum CSV; points are selected automatically");
  extract_cmd->add_option("--group", extract_group, "Index of the spectrum group to use")->capture_default_str();
  extract_cmd->add_option("--cell", extract_cell, "Use the first group with this cell_id");
  extract_cmd->add_option("--targets-hz", extract_targets, "Selection targets LOW,MID1,MID2,HIGH [Hz]");
  extract_cmd->add_option("--out", extract_out, "Parameter JSON path or '-'")->capture_default_str();
  extract_cmd->add_option("--fit-out", extract_fit_out, "Write the fit report JSON here");

  // signal
  auto* signal = app.add_subcommand("signal", "Online impedance estimation from waveforms");
  signal->require_subcommand(1);
  auto* estimate_cmd = signal->add_subcommand("estimate-z", "Impedance at given frequencies from a t_s,i_a,v_v CSV");
  std::string waveform_path, freqs_text;
  double q = kDefaultBandpassQ;
  std::string estimate_out = "-";
  estimate_cmd->add_option("--waveform", waveform_path, "Waveform CSV")->required();
  estimate_cmd->add_option("--freqs-hz", freqs_text, "Comma-separated excitation frequencies [Hz]")->required();
  estimate_cmd->add_option("--q", q, "Bandpass quality factor")->capture_default_str();
  estimate_cmd->add_option("--out", estimate_out, "Output CSV path or '-'")->capture_default_str();

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Synthetic data, feature tables and the SoH regression");
  dataset->require_subcommand(1);

  auto* synth_cmd = dataset->add_subcommand("synth", "Generate a synthetic aging dataset");
  std::size_t cells = 5, soh_points = 12, grid_points = 60;
  double noise = 0.02;
  std::uint64_t synth_seed = 0;
  std::string emit_eis, truth_out;
  synth_cmd->add_option("--cells", cells, "Number of cells")->capture_default_str();
  synth_cmd->add_option("--soh-points", soh_points, "SoH points per cell")->capture_default_str();
  synth_cmd->add_option("--noise", noise, "Relative lognormal parameter noise")->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--grid-points", grid_points, "Frequencies per spectrum")->capture_default_str();
  synth_cmd->add_option("--emit-eis", emit_eis, "Spectrum CSV output")->required();
  synth_cmd->add_option("--truth", truth_out, "Ground-truth feature table JSON output");

  auto* build_cmd = dataset->add_subcommand("build", "Spectrum CSV -> feature table JSON");
  std::string build_eis, build_targets, build_out;
  build_cmd->add_option("--eis", build_eis, "Spectrum CSV")->required();
  build_cmd->add_option("--targets-hz", build_targets, "Selection targets LOW,MID1,MID2,HIGH [Hz]");
  build_cmd->add_option("--out", build_out, "Feature table JSON output")->required();

  auto* train_cmd = dataset->add_subcommand("train", "Fit the linear SoH model");
  std::string train_table, model_out, test_cells, test_out, train_out;
  double train_frac = 0.6;
  std::uint64_t split_seed = 42;
  train_cmd->add_option("--table", train_table, "Feature table JSON")->required();
  train_cmd->add_option("--model", model_out, "Model JSON output")->required();
  train_cmd->add_option("--train-frac", train_frac, "Training fraction for the shuffled split")->capture_default_str();
  train_cmd->add_option("--seed", split_seed, "Split seed")->capture_default_str();
  train_cmd->add_option("--test-cells", test_cells, "Comma-separated cell ids held out (replaces the shuffled split)");
  train_cmd->add_option("--test-out", test_out, "Write the held-out rows as a feature table");
  train_cmd->add_option("--train-out", train_out, "Write the training rows as a feature table");
  bool train_all = false;
  train_cmd->add_flag("--all", train_all, "Train on every row (no split)");

  auto* predict_cmd = dataset->add_subcommand("predict", "SoH percent for one parameter set");
  std::string predict_model, predict_params;
  predict_cmd->add_option("--model", predict_model, "Model JSON")->required();
  predict_cmd->add_option("--params", predict_params, "ECM parameter JSON")->required();

  auto* eval_cmd = dataset->add_subcommand("eval", "Metrics and per-row predictions on a feature table");
  std::string eval_model, eval_table, eval_out;
  eval_cmd->add_option("--model", eval_model, "Model JSON")->required();
  eval_cmd->add_option("--table", eval_table, "Feature table JSON")->required();
  eval_cmd->add_option("--out", eval_out, "Prediction CSV output");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kUsage;
  }

  RunReport report;
  auto finish = [&]() {
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const Json j = report.to_json();
    if (report_path.empty()) {
      err << j.dump() << '\n';
    } else {
      save_json(report_path, j);
    }
    return kOk;
  };

  try {
    if (*sweep_cmd) {
      report.command = "ecm sweep";
      EcmParams p;
      if (!sweep_params_path.empty()) {
        p = load_params(sweep_params_path);
        report.inputs["params"] = sweep_params_path;
      } else {
        if (!(r0 && r1 && r2 && aw && c1 && c2)) {
          throw detail::UsageError("ecm sweep needs --params or all of --r0 --r1 --r2 --aw --c1 --c2\n" +
                                   sweep_cmd->help());
        }
        p = {*r0, *r1, *r2, *aw, *c1, *c2};
      }
      require_valid(p);
      if (points < 1 || !(fmin_hz > 0.0) || !(fmax_hz >= fmin_hz)) {
        throw DomainError("need points >= 1 and 0 < fmin-hz <= fmax-hz");
      }
      const auto grid = logspace(fmin_hz, fmax_hz, points);
      detail::OutputTarget target(sweep_out, out);
      auto& os = target.get();
      os << kNyquistCsvHeader << '\n';
      for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
        const ComplexZ z = ecm_impedance(p, omega_from_hz(*it));
        os << csv::format_double(*it) << ',' << csv::format_double(z.real()) << ','
           << csv::format_double(z.imag()) << '\n';
      }
      report.inputs["params"] = to_json(p);
      report.outputs["nyquist_csv"] = sweep_out;
      report.details["points"] = points;
      return finish();
    }

    if (*extract_cmd) {
      report.command = "ecm extract";
      FourPointSet fp;
      std::vector<ImpedanceSample> fit_points;
      const bool manual = !p_high.empty() || !p_mid2.empty() || !p_mid1.empty() || !p_low.empty();
      if (manual == !extract_spectrum.empty()) {
        throw detail::UsageError("ecm extract needs either all of --high --mid2 --mid1 --low or --spectrum");
      }
      if (manual) {
        if (p_high.empty() || p_mid2.empty() || p_mid1.empty() || p_low.empty()) {
          throw detail::UsageError("ecm extract needs all four of --high --mid2 --mid1 --low");
        }
        fp = {detail::parse_point(p_high, "high"), detail::parse_point(p_mid2, "mid2"),
              detail::parse_point(p_mid1, "mid1"), detail::parse_point(p_low, "low")};
        validate(fp);
        fit_points = {fp.low, fp.mid1, fp.mid2, fp.high};
      } else {
        const auto spectra = load_spectrum_csv(extract_spectrum);
        std::size_t g = extract_group;
        if (!extract_cell.empty()) {
          g = spectra.size();
          for (std::size_t k = 0; k < spectra.size(); ++k) {
            if (spectra[k].cell_id == extract_cell) {
              g = k;
              break;
            }
          }
          if (g == spectra.size()) throw detail::UsageError("no spectrum with cell_id '" + extract_cell + "'");
        }
        if (g >= spectra.size()) throw detail::UsageError("--group out of range");
        const auto targets = detail::parse_targets(extract_targets).value_or(FrequencyTargets{});
        fp = select_four_frequencies(spectra[g], targets);
        fit_points = spectra[g].samples;
        report.inputs["spectrum"] = extract_spectrum;
        report.inputs["group"] = g;
        report.details["targets"] = detail::targets_json(targets);
      }
      report.details["selected"] = detail::selection_json(fp);
      const EcmParams p = extract_params(fp);
      const FitReport fit = fit_rmse(p, fit_points);
      {
        detail::OutputTarget target(extract_out, out);
        target.get() << to_json(p).dump(2) << '\n';
      }
      if (!extract_fit_out.empty()) save_json(extract_fit_out, to_json(fit));
      report.outputs["params"] = extract_out;
      report.metrics = {{"fit", to_json(fit)}};
      return finish();
    }

    if (*estimate_cmd) {
      report.command = "signal estimate-z";
      const SignalFrame frame = load_waveform_csv(waveform_path);
      const auto freqs = detail::parse_list(freqs_text, "--freqs-hz");
      if (freqs.empty()) throw detail::UsageError("--freqs-hz is empty");
      detail::OutputTarget target(estimate_out, out);
      auto& os = target.get();
      os << kNyquistCsvHeader << '\n';
      for (double f : freqs) {
        const ImpedanceSample s = estimate_impedance(frame, f, q);
        os << csv::format_double(f) << ',' << csv::format_double(s.z.real()) << ','
           << csv::format_double(s.z.imag()) << '\n';
      }
      report.inputs["waveform"] = waveform_path;
      report.inputs["freqs_hz"] = freqs;
      report.details["fs_hz"] = frame.fs_hz;
      report.details["q"] = q;
      report.outputs["impedance_csv"] = estimate_out;
      return finish();
    }

    if (*synth_cmd) {
      report.command = "dataset synth";
      report.seed = synth_seed;
      const AgingTrend trend = default_trend(noise, synth_seed);
      const auto grid = default_freq_grid_hz(grid_points);
      const SyntheticDataset ds = gen_dataset(trend, cells, soh_points, grid);
      save_spectrum_csv(emit_eis, ds.spectra);
      if (!truth_out.empty()) save_feature_table(truth_out, ds.truth);
      report.inputs = {{"cells", cells}, {"soh_points", soh_points}, {"noise", noise}, {"grid_points", grid_points}};
      report.outputs["eis_csv"] = emit_eis;
      if (!truth_out.empty()) report.outputs["truth"] = truth_out;
      report.details["spectra"] = ds.spectra.size();
      out << "wrote " << ds.spectra.size() << " spectra to " << emit_eis << '\n';
      return finish();
    }

    if (*build_cmd) {
      report.command = "dataset build";
      const auto spectra = load_spectrum_csv(build_eis);
      const auto targets = detail::parse_targets(build_targets);
      const FeatureTable table = build_feature_table(spectra, targets, {build_eis});
      save_feature_table(build_out, table);
      report.inputs["eis_csv"] = build_eis;
      report.outputs["table"] = build_out;
      report.skipped = table.skipped.size();
      report.details["rows"] = table.rows.size();
      report.details["targets"] = detail::targets_json(targets.value_or(FrequencyTargets{}));
      out << "rows=" << table.rows.size() << " skipped=" << table.skipped.size() << '\n';
      for (const auto& s : table.skipped) err << "skipped " << s.cell_id << " soh=" << s.soh_frac << ": " << s.reason << '\n';
      return finish();
    }

    if (*train_cmd) {
      report.command = "dataset train";
      const FeatureTable table = load_feature_table(train_table);
      std::vector<FeatureRow> train_rows;
      std::vector<FeatureRow> test_rows;
      if (train_all) {
        train_rows = table.rows;
      } else if (!test_cells.empty()) {
        const auto ids = detail::split_ids(test_cells);
        auto parts = split_by_cell(table.rows, ids);
        train_rows = std::move(parts.first);
        test_rows = std::move(parts.second);
        report.details["test_cells"] = ids;
      } else {
        auto parts = split(table.rows, train_frac, split_seed);
        train_rows = std::move(parts.first);
        test_rows = std::move(parts.second);
        report.seed = split_seed;
        report.details["train_frac"] = train_frac;
      }
      const SohModel model = train(train_rows);
      save_model(model_out, model);
      auto save_part = [&](const std::string& path, std::vector<FeatureRow> rows) {
        if (path.empty()) return;
        FeatureTable part;
        part.rows = std::move(rows);
        part.sources = {train_table};
        part.targets = table.targets;
        save_feature_table(path, part);
      };
      save_part(test_out, test_rows);
      save_part(train_out, train_rows);
      detail::print_metrics(out, "train", model.train_metrics);
      report.inputs["table"] = train_table;
      report.outputs["model"] = model_out;
      if (!test_out.empty()) report.outputs["test_table"] = test_out;
      if (!train_out.empty()) report.outputs["train_table"] = train_out;
      report.metrics = {{"train", to_json(model.train_metrics)}};
      report.details["n_train"] = train_rows.size();
      report.details["n_test"] = test_rows.size();
      return finish();
    }

    if (*predict_cmd) {
      report.command = "dataset predict";
      const SohModel model = load_model(predict_model);
      const EcmParams p = load_params(predict_params);
      const double soh_pct = 100.0 * predict(model, p);
      out << std::setprecision(10) << soh_pct << '\n';
      report.inputs = {{"model", predict_model}, {"params", predict_params}};
      report.details["soh_pct"] = soh_pct;
      return finish();
    }

    if (*eval_cmd) {
      report.command = "dataset eval";
      const SohModel model = load_model(eval_model);
      const FeatureTable table = load_feature_table(eval_table);
      const Metrics m = evaluate(model, table.rows);
      if (!eval_out.empty()) {
        std::ofstream csv_out(eval_out);
        if (!csv_out) throw Error("cannot write " + eval_out);
        csv_out << kPredictionCsvHeader << '\n';
        for (const auto& r : table.rows) {
          const double truth = 100.0 * r.soh_frac;
          const double pred = 100.0 * predict(model, r.params);
          csv_out << r.cell_id << ',' << csv::format_double(truth) << ',' << csv::format_double(pred) << ','
                  << csv::format_double(std::abs(pred - truth)) << '\n';
        }
        report.outputs["predictions_csv"] = eval_out;
      }
      detail::print_metrics(out, "eval", m);
      report.inputs = {{"model", eval_model}, {"table", eval_table}};
      report.metrics = {{"eval", to_json(m)}};
      return finish();
    }
  } catch (const detail::UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ExtractionError& e) {
    err << "error: " << e.what() << '\n';
    return kExtraction;
  } catch (const SelectionError& e) {
    err << "error: " << e.what() << '\n';
    return kExtraction;
  } catch (const SettlingError& e) {
    err << "error: " << e.what() << '\n';
    return kSignal;
  } catch (const SignalError& e) {
    err << "error: " << e.what() << '\n';
    return kSignal;
  } catch (const RateError& e) {
    err << "error: " << e.what() << '\n';
    return kSignal;
  } catch (const LengthError& e) {
    err << "error: " << e.what() << '\n';
    return kSignal;
  } catch (const VersionError& e) {
    err << "error: " << e.what() << '\n';
    return kArtifact;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << '\n';
    return kArtifact;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kArtifact;
  } catch (const EmptyTableError& e) {
    err << "error: " << e.what() << '\n';
    return kArtifact;
  } catch (const Error& e) {
    // Domain, range, size, rank and unknown-cell errors are input validation.
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "unexpected error: " << e.what() << '\n';
    return kUnexpected;
  }
  err << app.help();
  return kUsage;
}

}  // namespace ecmsoh::cli
