#pragma once

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fluxharm/embedding.hpp"
#include "fluxharm/errors.hpp"
#include "fluxharm/ingest.hpp"
#include "fluxharm/metrics.hpp"
#include "fluxharm/nlsa.hpp"
#include "fluxharm/rng.hpp"
#include "fluxharm/series.hpp"
#include "fluxharm/spectral.hpp"
#include "fluxharm/ssa.hpp"

namespace fluxharm {

struct PipelineConfig {
  std::vector<std::string> inputs;
  ColumnSpec columns;
  std::optional<std::size_t> window;  // default: largest whole-year <= N/2
  int k = 16;
  std::vector<std::optional<double>> filters = {std::nullopt};  // nullopt = unfiltered
  bool run_ssa = true;
  bool run_nlsa = true;
  NlsaConfig nlsa;
  std::optional<double> epsilon;  // fixed kernel scale; skips estimation
  double eps_f = 0.15;
  double eps_p = 0.15;
  std::vector<int> harmonic_set = {1, 2, 3, 4, 5, 6};
  std::vector<int> regularity_set = {1, 2, 3, 4};
  std::string output_dir;  // empty: no files written
  std::uint64_t seed = 20070101;
  bool emit_plot_data = true;
};

inline std::string filter_name(const std::optional<double>& f) {
  if (!f) return "none";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", *f);
  return buf;
}

struct ComboRecord {
  std::string series_label;
  std::string input_path;
  std::optional<double> filter;
  Method method = Method::SSA;
  std::size_t window = 0;
  std::size_t n_samples = 0;
  Date start_date = make_date(2007, 1, 1);
  bool ok = false;
  std::string error;
  std::string error_code;
  double seconds = 0.0;  // wall clock; goes to the timings sidecar, never the report

  std::vector<double> filtered;  // analyzed signal, original units
  PowerSpectrum series_spectrum;
  HarmonicInventory inventory;
  std::vector<int> harmonics_used;
  CharacterizationReport metrics;
  std::optional<ModeSet> modeset;
  std::optional<EpsilonEstimate> eps;
  std::optional<SeasonalCycle> cycle;
};

struct RunReport {
  PipelineConfig config;
  std::vector<ComboRecord> combos;
  std::vector<std::pair<std::string, std::string>> input_errors;  // (path, message)
  std::vector<std::pair<std::string, double>> timings;            // (combo id, seconds); volatile
  std::size_t n_series = 0;
};

inline std::string combo_id(const ComboRecord& c) {
  return c.series_label + "__" + filter_name(c.filter) + "__" +
         (c.method == Method::SSA ? "ssa" : "nlsa");
}

inline bool all_failed(const RunReport& r) {
  for (const auto& c : r.combos)
    if (c.ok) return false;
  return true;
}

namespace detail {

inline std::string sanitize_label(std::string s) {
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '.' && ch != '-' && ch != '_')
      ch = '_';
  return s.empty() ? std::string("series") : s;
}

inline void split_site_variable(const std::string& stem, std::string& site, std::string& var) {
  const auto us = stem.find('_');
  if (us == std::string::npos || us == 0 || us + 1 == stem.size()) {
    site = stem;
    var = "";
  } else {
    site = stem.substr(0, us);
    var = stem.substr(us + 1);
  }
}

// One (series, filter) task: shared filtering, metrics, and embedding, then
// one record per requested method.
inline std::vector<ComboRecord> run_series_filter(const FluxSeries& s, const std::string& path,
                                                  const std::optional<double>& filter,
                                                  const PipelineConfig& cfg) {
  std::vector<Method> methods;
  if (cfg.run_ssa) methods.push_back(Method::SSA);
  if (cfg.run_nlsa) methods.push_back(Method::NLSA);

  std::vector<ComboRecord> records(methods.size());
  const std::string label =
      sanitize_label(s.site_id + (s.variable.empty() ? "" : "." + s.variable));
  for (std::size_t i = 0; i < methods.size(); ++i) {
    records[i].series_label = label;
    records[i].input_path = path;
    records[i].filter = filter;
    records[i].method = methods[i];
    records[i].n_samples = s.size();
    records[i].start_date = s.start_date;
  }
  auto fail_all = [&](const std::string& code, const std::string& what) {
    for (auto& r : records) {
      r.ok = false;
      r.error = what;
      r.error_code = code;
    }
    return records;
  };

  std::vector<double> filtered;
  PowerSpectrum ps;
  CharacterizationReport metrics;
  std::size_t W = 0;
  TrajectoryMatrix X;
  try {
    filtered = filter ? lowpass(s.values, *filter) : s.values;
    ps = fft_power(filtered);
    metrics = characterize(filtered, s.has_qf() ? &s.qf : nullptr, ps, cfg.regularity_set);
    W = cfg.window ? *cfg.window : default_window(s.size());
    X = standardize_rows(delay_embed(filtered, W));
  } catch (const Error& e) {
    return fail_all(error_code_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail_all("Unknown", e.what());
  }

  for (std::size_t i = 0; i < methods.size(); ++i) {
    ComboRecord& rec = records[i];
    rec.window = W;
    rec.filtered = filtered;
    rec.series_spectrum = ps;
    rec.metrics = metrics;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ModeSet ms;
      if (methods[i] == Method::SSA) {
        ms = ssa_decompose(X, cfg.k);
      } else {
        double eps_value;
        if (cfg.epsilon) {
          eps_value = *cfg.epsilon;
        } else {
          NlsaConfig ncfg = cfg.nlsa;
          ncfg.seed = derive_seed(derive_seed(cfg.seed, label), "eps-" + filter_name(filter));
          rec.eps = estimate_epsilon(X, ncfg);
          eps_value = rec.eps->epsilon;
        }
        DistanceMatrix D = pairwise_distances(X, cfg.nlsa.knn);
        TransitionMatrix T = build_transition(build_kernel(D, eps_value));
        ms = nlsa_decompose(T, X, cfg.k);
      }
      rec.inventory =
          pair_harmonics(classify_modes(ms, cfg.eps_f, cfg.eps_p, cfg.harmonic_set));
      if (!rec.inventory.pairs.empty()) {
        rec.cycle = build_seasonal_cycle(ms, rec.inventory, X.row_means, X.row_stds, s.size());
        rec.harmonics_used = rec.cycle->harmonics_used;
      }
      rec.modeset = std::move(ms);
      rec.ok = true;
    } catch (const Error& e) {
      rec.ok = false;
      rec.error = e.what();
      rec.error_code = error_code_name(e.code());
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
      rec.error_code = "Unknown";
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return records;
}

// Batch-relative 3-bin labels. HF variability is only meaningful on
// unfiltered series; regularity and entropy are binned over every
// (series, filter) cell, undefined entropies excluded.
inline void assign_bins(std::vector<ComboRecord>& combos) {
  struct Cell {
    std::vector<std::size_t> members;  // combo indices sharing (series, filter)
    double hf = 0.0, reg = 0.0, ent = 0.0;
    bool unfiltered = false, ent_ok = false;
  };
  std::vector<Cell> cells;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < combos.size(); ++i) {
    if (!combos[i].ok) continue;
    const std::string key = combos[i].series_label + "|" + filter_name(combos[i].filter);
    auto [it, fresh] = index.try_emplace(key, cells.size());
    if (fresh) {
      Cell c;
      c.hf = combos[i].metrics.hf_variability;
      c.reg = combos[i].metrics.regularity;
      c.ent = combos[i].metrics.sample_entropy;
      c.ent_ok = !combos[i].metrics.entropy_undefined;
      c.unfiltered = !combos[i].filter.has_value();
      cells.push_back(c);
    }
    cells[it->second].members.push_back(i);
  }
  if (cells.empty()) return;

  auto bin_subset = [&](auto value_of, auto include, auto assign) {
    std::vector<double> values;
    std::vector<std::size_t> which;
    for (std::size_t c = 0; c < cells.size(); ++c)
      if (include(cells[c])) {
        values.push_back(value_of(cells[c]));
        which.push_back(c);
      }
    if (values.empty()) return;
    BinResult br = bin_metrics(values);
    for (std::size_t n = 0; n < which.size(); ++n)
      for (std::size_t i : cells[which[n]].members) assign(combos[i], br.labels[n]);
  };
  bin_subset([](const Cell& c) { return c.hf; }, [](const Cell& c) { return c.unfiltered; },
             [](ComboRecord& r, BinLabel b) { r.metrics.hf_bin = b; });
  bin_subset([](const Cell& c) { return c.reg; }, [](const Cell&) { return true; },
             [](ComboRecord& r, BinLabel b) { r.metrics.regularity_bin = b; });
  bin_subset([](const Cell& c) { return c.ent; }, [](const Cell& c) { return c.ent_ok; },
             [](ComboRecord& r, BinLabel b) { r.metrics.entropy_bin = b; });
}

}  // namespace detail

inline RunReport run_pipeline(const PipelineConfig& cfg) {
  if (cfg.k < 1) fail(ErrorCode::ConfigError, "mode count must be positive");
  if (!cfg.run_ssa && !cfg.run_nlsa) fail(ErrorCode::ConfigError, "select at least one method");
  if (cfg.filters.empty()) fail(ErrorCode::ConfigError, "select at least one filter");

  RunReport report;
  report.config = cfg;

  struct Parsed {
    FluxSeries series;
    std::string path;
  };
  std::vector<Parsed> inputs;
  for (const std::string& path : cfg.inputs) {
    try {
      std::ifstream in(path);
      if (!in) fail(ErrorCode::EmptySeries, "cannot open " + path);
      std::string site, var;
      detail::split_site_variable(std::filesystem::path(path).stem().string(), site, var);
      FluxSeries s = parse_flux_csv(in, cfg.columns, site, var);
      inputs.push_back({validate_series(std::move(s), 4), path});
    } catch (const std::exception& e) {
      report.input_errors.emplace_back(path, e.what());
    }
  }
  report.n_series = inputs.size();
  if (cfg.inputs.empty()) report.input_errors.emplace_back("", "no input series given");

  // (series, filter) tasks are independent; results land in fixed slots so
  // the report order never depends on scheduling.
  std::vector<std::future<std::vector<ComboRecord>>> tasks;
  tasks.reserve(inputs.size() * cfg.filters.size());
  for (const auto& in : inputs)
    for (const auto& f : cfg.filters)
      tasks.push_back(std::async(std::launch::async, [&in, f, &cfg] {
        return detail::run_series_filter(in.series, in.path, f, cfg);
      }));
  for (auto& t : tasks)
    for (auto& rec : t.get()) report.combos.push_back(std::move(rec));

  detail::assign_bins(report.combos);
  for (const auto& c : report.combos) report.timings.emplace_back(combo_id(c), c.seconds);
  return report;
}

inline nlohmann::json to_json(const EpsilonEstimate& e) {
  nlohmann::json j;
  j["epsilon"] = e.epsilon;
  j["turning_point"] = e.turning_point;
  j["runs"] = e.runs;
  j["subset_size"] = e.subset_size;
  j["fit_fallback"] = e.fit_fallback;
  auto& curve = j["curve"] = nlohmann::json::array();
  for (const auto& [u, z] : e.curve) curve.push_back({u, z});
  return j;
}

inline nlohmann::json to_json(const CharacterizationReport& m) {
  nlohmann::json j;
  j["hf_variability"] = m.hf_variability;
  j["regularity"] = m.regularity;
  j["sample_entropy"] = m.entropy_undefined ? nlohmann::json() : nlohmann::json(m.sample_entropy);
  j["entropy_undefined"] = m.entropy_undefined;
  j["has_qf"] = m.has_qf;
  if (m.has_qf) {
    j["qf_flagged"] = m.qf_flagged;
    auto& w = j["qf_windows"] = nlohmann::json::array();
    for (const auto& [a, b] : m.qf_windows) w.push_back({a, b});
  }
  if (m.hf_bin) j["hf_bin"] = bin_label_name(*m.hf_bin);
  if (m.regularity_bin) j["regularity_bin"] = bin_label_name(*m.regularity_bin);
  if (m.entropy_bin) j["entropy_bin"] = bin_label_name(*m.entropy_bin);
  return j;
}

inline nlohmann::json to_json(const ComboRecord& c) {
  nlohmann::json j;
  j["series"] = c.series_label;
  j["input"] = c.input_path;
  j["filter"] = c.filter ? nlohmann::json(*c.filter) : nlohmann::json();
  j["method"] = method_name(c.method);
  j["window"] = c.window;
  j["n_samples"] = c.n_samples;
  j["ok"] = c.ok;
  if (!c.ok) {
    j["error"] = c.error;
    j["error_code"] = c.error_code;
    return j;
  }
  j["category"] = category_name(c.inventory.category);
  auto& pairs = j["pairs"] = nlohmann::json::array();
  for (const auto& p : c.inventory.pairs)
    pairs.push_back({{"mode_a", p.mode_a}, {"mode_b", p.mode_b}, {"f", p.f}});
  j["deficient_modes"] = c.inventory.deficient;
  auto& labels = j["labels"] = nlohmann::json::array();
  for (const auto& l : c.inventory.labels) {
    nlohmann::json lj;
    lj["mode"] = l.mode_index;
    lj["is_harmonic"] = l.is_harmonic;
    lj["mu_k"] = std::isfinite(l.mu_k) ? nlohmann::json(l.mu_k) : nlohmann::json();
    lj["sigma_g"] = std::isfinite(l.sigma_g) ? nlohmann::json(l.sigma_g) : nlohmann::json();
    lj["peak_height"] = l.peak_height;
    lj["residual_max"] = l.residual_max;
    lj["matched_f"] = l.matched_f ? nlohmann::json(*l.matched_f) : nlohmann::json();
    lj["fit_failed"] = l.fit_failed;
    labels.push_back(std::move(lj));
  }
  j["harmonics_used"] = c.harmonics_used;
  j["metrics"] = to_json(c.metrics);
  if (c.modeset) {
    j["spectrum"] = std::vector<double>(c.modeset->spectrum.begin(), c.modeset->spectrum.end());
    j["variance"] = std::vector<double>(c.modeset->variance.begin(), c.modeset->variance.end());
    if (c.method == Method::NLSA)
      j["eigenvalues"] =
          std::vector<double>(c.modeset->eigenvalues.begin(), c.modeset->eigenvalues.end());
  }
  if (c.eps) j["epsilon_estimate"] = to_json(*c.eps);
  return j;
}

inline nlohmann::json to_json(const RunReport& r) {
  const PipelineConfig& cfg = r.config;
  nlohmann::json j;
  nlohmann::json cj;
  cj["k"] = cfg.k;
  cj["window"] = cfg.window ? nlohmann::json(*cfg.window) : nlohmann::json();
  cj["eps_f"] = cfg.eps_f;
  cj["eps_p"] = cfg.eps_p;
  cj["harmonic_set"] = cfg.harmonic_set;
  cj["regularity_set"] = cfg.regularity_set;
  cj["seed"] = cfg.seed;
  cj["methods"] = nlohmann::json::array();
  if (cfg.run_ssa) cj["methods"].push_back("SSA");
  if (cfg.run_nlsa) cj["methods"].push_back("NLSA");
  auto& fj = cj["filters"] = nlohmann::json::array();
  for (const auto& f : cfg.filters) fj.push_back(f ? nlohmann::json(*f) : nlohmann::json());
  cj["epsilon_override"] = cfg.epsilon ? nlohmann::json(*cfg.epsilon) : nlohmann::json();
  cj["knn"] = cfg.nlsa.knn ? nlohmann::json(*cfg.nlsa.knn) : nlohmann::json();
  cj["eps_runs"] = cfg.nlsa.n_runs;
  cj["eps_subset"] = cfg.nlsa.subset_size;
  cj["inputs"] = cfg.inputs;
  j["config"] = std::move(cj);

  j["n_series"] = r.n_series;
  auto& errs = j["input_errors"] = nlohmann::json::array();
  for (const auto& [path, msg] : r.input_errors) errs.push_back({{"path", path}, {"error", msg}});
  auto& combos = j["combinations"] = nlohmann::json::array();
  for (const auto& c : r.combos) combos.push_back(to_json(c));
  return j;
}

inline std::string report_json(const RunReport& r) { return to_json(r).dump(2) + "\n"; }

struct SummaryRow {
  Method method = Method::SSA;
  std::optional<double> filter;
  std::size_t n = 0;
  std::size_t no_h = 0;  // none + deficient
  std::size_t h1 = 0;    // fundamental only
  std::size_t h2 = 0;    // fundamental + higher
};

struct SummaryTable {
  std::vector<SummaryRow> rows;
};

// Category counts per method × filter over the successful combinations.
// "deficient" folds into the no-detection column.
inline SummaryTable summarize(const std::vector<RunReport>& reports) {
  if (reports.empty()) fail(ErrorCode::ConfigError, "summarize needs at least one report");
  std::map<std::pair<int, double>, SummaryRow> rows;  // (method, filter key) -> row
  for (const auto& rep : reports)
    for (const auto& c : rep.combos) {
      if (!c.ok) continue;
      const double fkey = c.filter ? *c.filter : -1.0;
      auto& row = rows[{int(c.method), fkey}];
      row.method = c.method;
      row.filter = c.filter;
      ++row.n;
      switch (c.inventory.category) {
        case DetectionCategory::none:
        case DetectionCategory::deficient: ++row.no_h; break;
        case DetectionCategory::fundamental: ++row.h1; break;
        case DetectionCategory::multiple: ++row.h2; break;
      }
    }
  SummaryTable table;
  for (auto& [key, row] : rows) table.rows.push_back(row);
  std::sort(table.rows.begin(), table.rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
    if (a.method != b.method) return a.method == Method::SSA;
    const double fa = a.filter ? *a.filter : -1.0, fb = b.filter ? *b.filter : -1.0;
    return fa < fb;
  });
  return table;
}

inline std::string summary_tsv(const SummaryTable& table) {
  std::ostringstream os;
  os << "method\tfilter\tn\tno_H\tH1\tH2plus\tno_H_pct\tH1_pct\tH2plus_pct\n";
  for (const auto& row : table.rows) {
    const double n = row.n ? double(row.n) : 1.0;
    char pct[64];
    std::snprintf(pct, sizeof pct, "%.1f\t%.1f\t%.1f", 100.0 * double(row.no_h) / n,
                  100.0 * double(row.h1) / n, 100.0 * double(row.h2) / n);
    os << method_name(row.method) << '\t' << filter_name(row.filter) << '\t' << row.n << '\t'
       << row.no_h << '\t' << row.h1 << '\t' << row.h2 << '\t' << pct << '\n';
  }
  return os.str();
}

// Rebuilds the minimal report slice summarize() needs from a report.json.
inline RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  for (const auto& cj : j.at("combinations")) {
    ComboRecord c;
    c.series_label = cj.value("series", "");
    c.ok = cj.value("ok", false);
    if (!cj.at("filter").is_null()) c.filter = cj.at("filter").get<double>();
    c.method = cj.value("method", "SSA") == std::string("NLSA") ? Method::NLSA : Method::SSA;
    if (c.ok) {
      const std::string cat = cj.value("category", "none");
      c.inventory.category = cat == "multiple"     ? DetectionCategory::multiple
                             : cat == "fundamental" ? DetectionCategory::fundamental
                             : cat == "deficient"   ? DetectionCategory::deficient
                                                    : DetectionCategory::none;
    }
    r.combos.push_back(std::move(c));
  }
  return r;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::ConfigError, "cannot write " + path.string());
  out << content;
}

inline void emit_plot_data(const ComboRecord& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };

  {
    std::ostringstream os;
    os << "date\tvalue\n";
    for (std::size_t t = 0; t < c.filtered.size(); ++t)
      os << format_date(add_days(c.start_date, long(t))) << '\t' << num(c.filtered[t]) << '\n';
    write_text(dir / "signal.tsv", os.str());
  }
  if (c.cycle) {
    std::ostringstream os;
    os << "date\tvalue\n";
    for (std::size_t t = 0; t < c.cycle->values.size(); ++t)
      os << format_date(add_days(c.start_date, long(t))) << '\t' << num(c.cycle->values[t])
         << '\n';
    write_text(dir / "seasonal_cycle.tsv", os.str());
  }
  {
    std::ostringstream os;
    os << "freq\tpower\n";
    for (std::size_t i = 0; i < c.series_spectrum.freqs.size(); ++i)
      os << num(c.series_spectrum.freqs[i]) << '\t' << num(c.series_spectrum.power[i]) << '\n';
    write_text(dir / "fft_spectrum.tsv", os.str());
  }
  if (!c.modeset) return;
  const ModeSet& ms = *c.modeset;
  {
    std::ostringstream os;
    os << "mode\tspectrum\tvariance";
    if (c.method == Method::NLSA) os << "\teigenvalue";
    os << '\n';
    for (int i = 0; i < ms.k; ++i) {
      os << i << '\t' << num(ms.spectrum[i]) << '\t' << num(ms.variance[i]);
      if (c.method == Method::NLSA) os << '\t' << num(ms.eigenvalues[i]);
      os << '\n';
    }
    write_text(dir / "dimred_spectrum.tsv", os.str());
  }
  const int n_plot = std::min(ms.k, 12);
  {
    std::ostringstream os;
    os << "index";
    for (int i = 0; i < n_plot; ++i) os << "\tmode_" << i;
    os << '\n';
    for (Eigen::Index w = 0; w < ms.modes.rows(); ++w) {
      os << w;
      for (int i = 0; i < n_plot; ++i) os << '\t' << num(ms.modes(w, i));
      os << '\n';
    }
    write_text(dir / "modes.tsv", os.str());
  }
  {
    std::vector<PowerSpectrum> specs;
    for (int i = 0; i < n_plot; ++i) {
      std::vector<double> vals(ms.modes.col(i).data(), ms.modes.col(i).data() + ms.modes.rows());
      specs.push_back(fft_power(vals));
    }
    std::ostringstream os;
    os << "freq";
    for (int i = 0; i < n_plot; ++i) os << "\tmode_" << i;
    os << '\n';
    if (!specs.empty())
      for (std::size_t b = 0; b < specs[0].freqs.size(); ++b) {
        os << num(specs[0].freqs[b]);
        for (int i = 0; i < n_plot; ++i) os << '\t' << num(specs[std::size_t(i)].power[b]);
        os << '\n';
      }
    write_text(dir / "mode_spectra.tsv", os.str());
  }
}

}  // namespace detail

// Writes report.json, summary.tsv, the volatile timings.tsv sidecar, and the
// per-combination plot-data directories.
inline void write_outputs(const RunReport& report, const std::string& output_dir) {
  if (output_dir.empty()) fail(ErrorCode::ConfigError, "output directory not set");
  const std::filesystem::path root(output_dir);
  std::filesystem::create_directories(root);
  detail::write_text(root / "report.json", report_json(report));
  detail::write_text(root / "summary.tsv", summary_tsv(summarize({report})));
  {
    std::ostringstream os;
    os << "combination\tseconds\n";
    char buf[64];
    for (const auto& [id, sec] : report.timings) {
      std::snprintf(buf, sizeof buf, "%.3f", sec);
      os << id << '\t' << buf << '\n';
    }
    detail::write_text(root / "timings.tsv", os.str());
  }
  if (report.config.emit_plot_data)
    for (const auto& c : report.combos)
      if (c.ok) detail::emit_plot_data(c, root / "plots" / combo_id(c));
}

}  // namespace fluxharm
