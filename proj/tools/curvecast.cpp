/*
 * Copyright 2026 The curvecast Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

// curvecast: fit, forecast, evaluate, bands and synth subcommands.
//
// Every option can also come from a TOML/INI file given with --config;
// subcommand options live in a section named after the subcommand, e.g.
//
//   [evaluate]
//   data = ["arrivals.csv"]
//   cuts = ["10:00", "12:00"]
//
// Flags on the command line override the file. Exit codes: 0 success,
// 1 usage error, 2 data error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "curvecast/curvecast.hpp"

namespace cc = curvecast;

namespace {

struct DataOptions {
  std::vector<std::string> files;
  std::string exclude;
};

void add_data_options(CLI::App* app, DataOptions& d, bool required) {
  auto* o = app->add_option("--data", d.files, "Input CSV file(s): date,HH:MM,...");
  if (required) o->required();
  app->add_option("--exclude", d.exclude, "File of ISO dates to leave out");
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << '\n';
}

cc::CurvePanel load_panel(const DataOptions& d, bool partial = false) {
  cc::CsvOptions opt;
  if (!d.exclude.empty()) opt.excluded_dates = cc::read_exclusions(d.exclude);
  opt.keep_partial_rows = partial;
  std::vector<std::string> warnings;
  cc::CurvePanel p = cc::ingest_csv(d.files, opt, &warnings);
  print_warnings(warnings);
  return p;
}

// A malformed clock on the command line is a usage error, not a data error.
double clock_arg(const std::string& flag, const std::string& value) {
  try {
    return cc::parse_clock(value);
  } catch (const cc::Error& e) {
    cc::fail(cc::ErrorKind::usage, flag + ": " + e.what());
  }
}

/// Opens --out or falls back to stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) cc::fail(cc::ErrorKind::io, "cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
  void finish(const std::string& path) {
    stream().flush();
    if (!stream()) cc::fail(cc::ErrorKind::io, "write failed for " + (path.empty() ? "stdout" : path));
  }

 private:
  std::ofstream file_;
};

const std::map<std::string, cc::Method> method_names{
    {"blup", cc::Method::blup}, {"ridge", cc::Method::ridge}, {"mean", cc::Method::mean}};

const std::map<std::string, cc::BandChoice> band_names{{"none", cc::BandChoice::none},
                                                       {"global", cc::BandChoice::global},
                                                       {"local", cc::BandChoice::local},
                                                       {"cv_global", cc::BandChoice::cv_global},
                                                       {"cv_local", cc::BandChoice::cv_local}};

/// Options shared by forecast and evaluate.
struct ModelOptions {
  int order = 4;
  double knot_spacing = 60.0;
  std::optional<int> p, q;
  double threshold = 0.90;
  bool cv_dims = false;
  int cv_max_p = 4, cv_max_q = 2;
  std::string training = "same-weekday";
  int window = 100;
  double ridge_sigma2 = 0.0;
  std::string band = "cv_local";
  double delta = 0.05;
  int folds = 10;
  bool shuffle = false;
  std::string cv_target = "observations";
  std::size_t sims = 4000;
  std::uint64_t seed = 1;
};

void add_model_options(CLI::App* app, ModelOptions& m) {
  app->add_option("--order", m.order, "Spline order k")->capture_default_str();
  app->add_option("--knot-spacing", m.knot_spacing, "Minutes between breaks")->capture_default_str();
  app->add_option("-p,--factors", m.p, "Number of factors p (default: explained-variance rule)");
  app->add_option("-q,--noise-dims", m.q, "Number of noise components q");
  app->add_option("--threshold", m.threshold, "Explained-variance threshold for p")->capture_default_str();
  app->add_flag("--cv-dims", m.cv_dims, "Choose (p, q) by K-fold cross-validation");
  app->add_option("--cv-max-p", m.cv_max_p, "Largest p tried by --cv-dims")->capture_default_str();
  app->add_option("--cv-max-q", m.cv_max_q, "Largest q tried by --cv-dims")->capture_default_str();
  app->add_option("--training", m.training, "same-weekday or rolling-all")
      ->check(CLI::IsMember({"same-weekday", "rolling-all"}))
      ->capture_default_str();
  app->add_option("--window", m.window, "Preceding days searched for training data")->capture_default_str();
  app->add_option("--ridge-sigma2", m.ridge_sigma2, "Ridge noise variance (default: model sigma2)");
  app->add_option("--band", m.band, "none, global, local, cv_global or cv_local")
      ->check(CLI::IsMember({"none", "global", "local", "cv_global", "cv_local"}))
      ->capture_default_str();
  app->add_option("--delta", m.delta, "Band miscoverage level")->capture_default_str();
  app->add_option("--folds", m.folds, "Cross-validation folds")->capture_default_str();
  app->add_flag("--shuffle-folds", m.shuffle, "Shuffle days before assigning folds (seeded)");
  app->add_option("--cv-target", m.cv_target, "observations or grid")
      ->check(CLI::IsMember({"observations", "grid"}))
      ->capture_default_str();
  app->add_option("--sims", m.sims, "Monte Carlo draws for critical values")->capture_default_str();
  app->add_option("--seed", m.seed, "Random seed")->capture_default_str();
}

cc::ProtocolConfig protocol_from(const ModelOptions& m) {
  cc::ProtocolConfig c;
  c.order = m.order;
  c.knot_spacing = m.knot_spacing;
  if (m.p || m.q) {
    if (!m.p) cc::fail(cc::ErrorKind::usage, "-q needs -p");
    c.dims.fixed = cc::Dimensions{*m.p, m.q.value_or(0)};
  }
  c.dims.threshold = m.threshold;
  c.cv_dims = m.cv_dims;
  c.cv_max_p = m.cv_max_p;
  c.cv_max_q = m.cv_max_q;
  c.training = m.training == "rolling-all" ? cc::TrainingMode::rolling_all : cc::TrainingMode::same_weekday;
  c.window_days = m.window;
  c.ridge_sigma2 = m.ridge_sigma2;
  c.band = band_names.at(m.band);
  c.delta = m.delta;
  c.folds = m.folds;
  c.shuffle_folds = m.shuffle;
  c.cv_target = m.cv_target == "grid" ? cc::CvTarget::grid : cc::CvTarget::observations;
  c.n_sims = m.sims;
  c.seed = m.seed;
  return c;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  DataOptions data;
  ModelOptions model;
  std::string weekday;
  std::string out;
};

int run_fit(const FitArgs& a) {
  const cc::CurvePanel panel = load_panel(a.data);
  const cc::ProtocolConfig cfg = protocol_from(a.model);
  if (cfg.cv_dims) cc::fail(cc::ErrorKind::usage, "--cv-dims needs a cut; use evaluate or forecast");
  const cc::SplineSpace space = cc::day_space(panel, cfg);
  std::vector<cc::CurveSample> curves;
  for (const auto& d : panel.days) {
    if (!a.weekday.empty() && a.weekday != cc::weekday_name(d.weekday)) continue;
    if (d.sample.times.size() == panel.times.size()) curves.push_back(d.sample);
  }
  const cc::CurveModel model = cc::estimate_model(curves, space, cfg.dims);
  Output out(a.out);
  cc::write_model(model, out.stream());
  out.finish(a.out);
  std::cerr << "fitted " << curves.size() << " days: N=" << space.dimension() << " p=" << model.p()
            << " q=" << model.q() << " sigma2=" << model.sigma2 << '\n';
  return 0;
}

// ---------------------------------------------------------------- forecast

struct ForecastArgs {
  DataOptions data;
  std::string model_file;
  std::string today;
  std::string cut = "10:00";
  std::string method = "blup";
  ModelOptions model;
  std::string out;
};

void write_forecast(std::ostream& os, const cc::Prediction& pred, const std::optional<cc::Band>& band,
                    const std::vector<double>& times) {
  os << "time,forecast,sd,lower,upper\n";
  for (double t : times) {
    os << cc::format_clock(t) << ',' << cc::format_value(pred.mean(t)) << ','
       << cc::format_value(std::sqrt(pred.variance(t))) << ',';
    if (band) os << cc::format_value(band->lower(t)) << ',' << cc::format_value(band->upper(t));
    else os << ',';
    os << '\n';
  }
}

int run_forecast(const ForecastArgs& a) {
  cc::ProtocolConfig cfg = protocol_from(a.model);
  cfg.cut = clock_arg("--cut", a.cut);
  cfg.eval_start = cfg.cut;
  cfg.method = method_names.at(a.method);
  cc::CsvOptions partial;
  partial.keep_partial_rows = true;
  std::vector<std::string> warnings;
  const cc::CurvePanel today = cc::ingest_csv(a.today, partial, &warnings);
  print_warnings(warnings);
  if (today.days.size() != 1) cc::fail(cc::ErrorKind::schema, a.today + ": expected exactly one day");
  const cc::CurveSample& day = today.days.front().sample;
  std::vector<double> times;
  for (double t : today.times)
    if (t > cfg.cut) times.push_back(t);
  Output out(a.out);
  if (!a.model_file.empty()) {
    if (!a.data.files.empty()) cc::fail(cc::ErrorKind::usage, "give either --model or --data, not both");
    if (cfg.band == cc::BandChoice::cv_global || cfg.band == cc::BandChoice::cv_local)
      cc::fail(cc::ErrorKind::usage, "cross-validated bands need --data; use --band global or local");
    const cc::CurveModel model = cc::read_model(a.model_file);
    const cc::SegmentedModel seg = cc::segment(model, cfg.cut);
    cc::SplineFunction y1(seg.left_space, seg.mu1);
    if (cfg.method != cc::Method::mean) {
      bool coarsened = false;
      y1 = cc::fit_with_coarsening(day.window(model.space.lower(), cfg.cut), seg.left_space, &coarsened);
      if (coarsened) std::cerr << "warning: pre-cut data too short for the left knots; coarsened\n";
    }
    const cc::Prediction pred = cc::forecast(seg, y1, cfg.method, cfg.ridge_sigma2);
    std::optional<cc::Band> band;
    if (cfg.band != cc::BandChoice::none) {
      const cc::BandGrid grid = cc::build_grid(seg.right_space);
      const auto cov = cc::grid_covariance(seg.right_space, pred.cond_cov, grid);
      const auto z = cc::critical_values(cov, grid, cfg.delta, cfg.n_sims, cfg.seed);
      const bool global = cfg.band == cc::BandChoice::global;
      band = cc::envelope(grid, pred, global ? z.global : z.local,
                          global ? cc::BandKind::global : cc::BandKind::local, 1.0 - cfg.delta);
    }
    write_forecast(out.stream(), pred, band, times);
  } else {
    if (a.data.files.empty()) cc::fail(cc::ErrorKind::usage, "need --model or --data");
    const cc::CurvePanel hist = load_panel(a.data);
    if (hist.labels != today.labels) cc::fail(cc::ErrorKind::schema, "history and today use different intervals");
    cc::CurvePanel all = hist;
    all.days.push_back(today.days.front());
    const std::vector<cc::CurveSample> train = cc::training_days(all, all.days.size() - 1, cfg);
    const cc::SplineSpace space = cc::protocol_space(all, cfg);
    const cc::DayForecast f = cc::forecast_day(train, day, space, cfg, cfg.seed);
    if (f.coarsened) std::cerr << "warning: pre-cut data too short for the left knots; coarsened\n";
    std::cerr << "trained on " << train.size() << " days: p=" << f.model.p() << " q=" << f.model.q() << '\n';
    write_forecast(out.stream(), f.prediction, f.band, times);
  }
  out.finish(a.out);
  return 0;
}

// ---------------------------------------------------------------- bands

struct BandsArgs {
  std::string model_file;
  std::string cut;
  double delta = 0.05;
  std::size_t sims = 10000;
  std::uint64_t seed = 1;
  std::string out;
};

int run_bands(const BandsArgs& a) {
  const cc::CurveModel model = cc::read_model(a.model_file);
  const cc::SegmentedModel seg = cc::segment(model, clock_arg("--cut", a.cut));
  const cc::Prediction pred = cc::predict(seg, cc::SplineFunction(seg.left_space, seg.mu1));
  const cc::BandGrid grid = cc::build_grid(seg.right_space);
  const Eigen::MatrixXd cov = cc::grid_covariance(seg.right_space, pred.cond_cov, grid);
  const cc::CriticalValues z = cc::critical_values(cov, grid, a.delta, a.sims, a.seed);
  const double bound = cc::inequality_bound(cov, a.delta);
  std::cerr << "grid points " << grid.points.size() << ", excluded (zero variance) " << z.excluded.size() << '\n';
  Output out(a.out);
  auto& os = out.stream();
  os << "# z_global " << cc::format_value(z.global) << '\n';
  os << "# z_local " << cc::format_value(z.local) << '\n';
  os << "# inequality_bound " << cc::format_value(bound) << '\n';
  const cc::Band g = cc::envelope(grid, pred, z.global > 0 ? z.global : 1.0, cc::BandKind::global);
  os << "time,sd,half_width_global,half_width_local\n";
  for (double t : grid.points)
    os << cc::format_clock(t) << ',' << cc::format_value(std::sqrt(pred.variance(t))) << ','
       << cc::format_value(z.global * g.spread(t)) << ',' << cc::format_value(z.local * g.spread(t)) << '\n';
  out.finish(a.out);
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  DataOptions data;
  ModelOptions model;
  std::vector<std::string> cuts{"10:00", "12:00"};
  std::vector<std::string> methods{"mean", "blup"};
  std::string eval_start = "12:00";
  std::optional<int> first_test;
  std::string format = "table";
  std::string out;
};

int run_evaluate(const EvaluateArgs& a) {
  const cc::CurvePanel panel = load_panel(a.data);
  const cc::ProtocolConfig base = protocol_from(a.model);
  std::vector<cc::ProtocolConfig> configs;
  const double eval = clock_arg("--eval-start", a.eval_start);
  std::vector<double> cuts;
  for (const auto& c : a.cuts) cuts.push_back(clock_arg("--cuts", c));
  for (const auto& name : a.methods) {
    const cc::Method m = method_names.at(name);
    for (double cut : cuts) {
      cc::ProtocolConfig c = base;
      c.method = m;
      c.cut = cut;
      c.eval_start = eval;
      c.first_test_day = a.first_test;
      configs.push_back(c);
      if (m == cc::Method::mean) break;  // the baseline does not depend on the cut
    }
  }
  const cc::EvalReport report = cc::run_protocols(panel, configs);
  print_warnings(report.warnings);
  const cc::ReportFormat fmt = a.format == "csv"        ? cc::ReportFormat::csv
                               : a.format == "plotdata" ? cc::ReportFormat::plotdata
                                                        : cc::ReportFormat::table;
  Output out(a.out);
  cc::emit_report(report, fmt, out.stream());
  out.finish(a.out);
  return 0;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string preset;
  std::string model_file;
  int curves = 100;
  double noise_sd = 0.0;
  int interval = 5;
  std::string start_date = "2003-01-06";
  std::uint64_t seed = 1;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  cc::CurvePanel panel;
  if (!a.preset.empty()) {
    if (!a.model_file.empty()) cc::fail(cc::ErrorKind::usage, "give either --preset or --model");
    cc::CallCenterOptions opt;
    opt.days = a.curves;
    opt.start_date = a.start_date;
    opt.interval_minutes = a.interval;
    opt.seed = a.seed;
    panel = cc::call_center_panel(opt);
  } else {
    if (a.model_file.empty()) cc::fail(cc::ErrorKind::usage, "need --preset or --model");
    const cc::CurveModel model = cc::read_model(a.model_file);
    const cc::SyntheticSpec spec = cc::SyntheticSpec::from_model(model, a.noise_sd, a.seed);
    std::vector<double> times;
    for (double t = model.space.lower(); t <= model.space.upper() + 1e-9; t += a.interval) times.push_back(t);
    const cc::SyntheticSample s = cc::sample_curves(spec, a.curves, times);
    std::size_t clamped = 0;
    panel = cc::to_panel(s.observations, a.start_date, &clamped);
    if (clamped) std::cerr << "warning: " << clamped << " negative values clamped to zero\n";
  }
  Output out(a.out);
  cc::emit_csv(panel, out.stream());
  out.finish(a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forecasting the continuation of intraday curves"};
  app.set_config("--config", "", "TOML/INI file with option values (sections per subcommand)");
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Estimate a model from a panel and write a model file");
  fit_cmd->configurable();
  add_data_options(fit_cmd, fit.data, true);
  add_model_options(fit_cmd, fit.model);
  fit_cmd->add_option("--weekday", fit.weekday, "Only days on this weekday (Mon, Tue, ...)");
  fit_cmd->add_option("-o,--out", fit.out, "Model file (default stdout)");

  ForecastArgs fc;
  auto* fc_cmd = app.add_subcommand("forecast", "Forecast the rest of a partially observed day");
  fc_cmd->configurable();
  add_data_options(fc_cmd, fc.data, false);
  add_model_options(fc_cmd, fc.model);
  fc_cmd->add_option("--model", fc.model_file, "Model file instead of --data");
  fc_cmd->add_option("--today", fc.today, "CSV with the current day (trailing cells blank)")->required();
  fc_cmd->add_option("--cut", fc.cut, "Cut time HH:MM")->capture_default_str();
  fc_cmd->add_option("--method", fc.method, "blup, ridge or mean")
      ->check(CLI::IsMember({"blup", "ridge", "mean"}))
      ->capture_default_str();
  fc_cmd->add_option("-o,--out", fc.out, "Output CSV (default stdout)");

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Rolling out-of-sample evaluation over a panel");
  ev_cmd->configurable();
  add_data_options(ev_cmd, ev.data, true);
  add_model_options(ev_cmd, ev.model);
  ev_cmd->add_option("--cuts", ev.cuts, "Cut times HH:MM")->capture_default_str();
  ev_cmd->add_option("--methods", ev.methods, "Methods: blup, ridge, mean")
      ->check(CLI::IsMember({"blup", "ridge", "mean"}))
      ->capture_default_str();
  ev_cmd->add_option("--eval-start", ev.eval_start, "Score intervals ending after this time")->capture_default_str();
  ev_cmd->add_option("--first-test", ev.first_test, "Index of the first test day (default: --window)");
  ev_cmd->add_option("--format", ev.format, "table, csv or plotdata")
      ->check(CLI::IsMember({"table", "csv", "plotdata"}))
      ->capture_default_str();
  ev_cmd->add_option("-o,--out", ev.out, "Output file (default stdout)");

  BandsArgs bd;
  auto* bd_cmd = app.add_subcommand("bands", "Critical values and band half-widths for a model");
  bd_cmd->configurable();
  bd_cmd->add_option("--model", bd.model_file, "Model file")->required();
  bd_cmd->add_option("--cut", bd.cut, "Cut time HH:MM")->required();
  bd_cmd->add_option("--delta", bd.delta, "Miscoverage level")->capture_default_str();
  bd_cmd->add_option("--sims", bd.sims, "Monte Carlo draws")->capture_default_str();
  bd_cmd->add_option("--seed", bd.seed, "Random seed")->capture_default_str();
  bd_cmd->add_option("-o,--out", bd.out, "Output CSV (default stdout)");

  SynthArgs sy;
  auto* sy_cmd = app.add_subcommand("synth", "Write a synthetic panel CSV");
  sy_cmd->configurable();
  sy_cmd->add_option("--preset", sy.preset, "Built-in generator")->check(CLI::IsMember({"callcenter"}));
  sy_cmd->add_option("--model", sy.model_file, "Model file to sample from");
  sy_cmd->add_option("--curves", sy.curves, "Number of days")->capture_default_str();
  sy_cmd->add_option("--noise-sd", sy.noise_sd, "Observation noise sd (model sampling)")->capture_default_str();
  sy_cmd->add_option("--interval", sy.interval, "Minutes between observations")->capture_default_str();
  sy_cmd->add_option("--start-date", sy.start_date, "Date of the first day")->capture_default_str();
  sy_cmd->add_option("--seed", sy.seed, "Random seed")->capture_default_str();
  sy_cmd->add_option("-o,--out", sy.out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*fit_cmd) return run_fit(fit);
    if (*fc_cmd) return run_forecast(fc);
    if (*ev_cmd) return run_evaluate(ev);
    if (*bd_cmd) return run_bands(bd);
    if (*sy_cmd) return run_synth(sy);
  } catch (const cc::Error& e) {
    std::cerr << "error (" << cc::to_string(e.kind()) << "): " << e.what() << '\n';
    return cc::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
