// Command-line front end. Exit codes: 0 success, 1 run failure, 2 bad config.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fluxharm/pipeline.hpp"
#include "fluxharm/synth.hpp"

using namespace fluxharm;

namespace {

std::optional<double> parse_filter(const std::string& tok) {
  if (tok == "none" || tok == "raw") return std::nullopt;
  try {
    const double f = std::stod(tok);
    if (f > 0.0) return f;
  } catch (...) {
  }
  fail(ErrorCode::ConfigError, "bad filter '" + tok + "': expected 'none' or a cutoff in cycles/year");
}

ColumnRef parse_column(const std::string& tok) {
  if (!tok.empty() && tok.front() == '#') {
    try {
      return ColumnRef::by_index(std::stoul(tok.substr(1)));
    } catch (...) {
      fail(ErrorCode::ConfigError, "bad column index '" + tok + "'");
    }
  }
  return ColumnRef::by_name(tok);
}

HarmonicComponent parse_harmonic(const std::string& tok) {
  HarmonicComponent h;
  const auto a = tok.find(':');
  try {
    h.f = std::stoi(tok.substr(0, a));
    if (a != std::string::npos) {
      const auto b = tok.find(':', a + 1);
      h.amplitude = std::stod(tok.substr(a + 1, b - a - 1));
      if (b != std::string::npos) h.phase = std::stod(tok.substr(b + 1));
    }
  } catch (...) {
    fail(ErrorCode::ConfigError, "bad harmonic '" + tok + "': expected f[:amp[:phase]]");
  }
  return h;
}

int cmd_run(const PipelineConfig& cfg, const std::string& output_dir) {
  auto report = run_pipeline(cfg);
  for (const auto& [path, message] : report.input_errors)
    std::cerr << "error: " << path << ": " << message << "\n";

  if (output_dir.empty()) {
    std::cout << report_json(report);
  } else {
    write_outputs(report, output_dir);
    std::cout << summary_tsv(summarize({report}));
    std::cerr << "wrote " << output_dir << "/report.json\n";
  }
  return all_failed(report) ? 1 : 0;
}

int cmd_summarize(const std::vector<std::string>& paths, const std::string& out_path) {
  std::vector<RunReport> reports;
  for (const auto& path : paths) {
    std::ifstream is(path);
    if (!is) {
      std::cerr << "error: cannot open " << path << "\n";
      return 1;
    }
    reports.push_back(report_from_json(nlohmann::json::parse(is)));
  }
  const std::string tsv = summary_tsv(summarize(reports));
  if (out_path.empty()) {
    std::cout << tsv;
  } else {
    std::ofstream os(out_path);
    os << tsv;
    if (!os) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return 1;
    }
  }
  return 0;
}

int cmd_synth(const SignalRecipe& recipe, const std::string& out_path) {
  const auto out = generate(recipe);
  if (out_path.empty()) {
    write_flux_csv(std::cout, out.series);
  } else {
    std::ofstream os(out_path);
    write_flux_csv(os, out.series);
    if (!os) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return 1;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detect and compare harmonic structure in daily flux series"};
  app.require_subcommand(1);

  // --- run ---------------------------------------------------------------
  auto* run = app.add_subcommand("run", "Run the full detection pipeline");
  run->set_config("--config", "", "Read options from a key=value file");

  std::vector<std::string> inputs;
  std::string output_dir;
  std::vector<std::string> filter_tokens{"none"};
  std::string date_col = "date", value_col = "value", qf_col;
  std::string delimiter = ",", decimal_mark = ".";
  int max_gap_fill = 0;
  int window = 0, k = 16, knn = 0, eps_subset = 256, eps_runs = 10;
  double epsilon = 0.0, eps_f = 0.15, eps_p = 0.15;
  std::vector<int> harmonic_set{1, 2, 3, 4, 5, 6};
  std::vector<int> regularity_set{1, 2, 3, 4};
  std::uint64_t seed = 20070101ULL;
  bool no_ssa = false, no_nlsa = false, no_plot_data = false;

  run->add_option("-i,--input", inputs, "Input CSV path (repeatable)")->required();
  run->add_option("-o,--output-dir", output_dir,
                  "Directory for report.json, summary.tsv and plot data (default: report to stdout)");
  run->add_option("--filter", filter_tokens,
                  "Low-pass cutoff in cycles/year, or 'none' (repeatable or comma-separated)")
      ->delimiter(',');
  run->add_option("--window", window, "Embedding window in days (0 = half the series, capped at 3 years)");
  run->add_option("-k,--modes", k, "Modes per decomposition")->check(CLI::PositiveNumber);
  run->add_flag("--no-ssa", no_ssa, "Skip the covariance decomposition");
  run->add_flag("--no-nlsa", no_nlsa, "Skip the kernel decomposition");
  run->add_option("--epsilon", epsilon, "Fixed kernel scale (0 = select automatically)");
  run->add_option("--eps-f", eps_f, "Frequency tolerance for harmonic matching");
  run->add_option("--eps-p", eps_p, "Residual tolerance for harmonic matching");
  run->add_option("--harmonic-set", harmonic_set, "Candidate harmonics, comma separated")
      ->delimiter(',');
  run->add_option("--regularity-set", regularity_set, "Harmonics counted by the regularity score")
      ->delimiter(',');
  run->add_option("--knn", knn, "Neighbours kept in the distance graph (0 = dense)");
  run->add_option("--eps-subset", eps_subset, "Points per kernel-scale tuning run");
  run->add_option("--eps-runs", eps_runs, "Kernel-scale tuning repetitions");
  run->add_option("--seed", seed, "Base seed for every stochastic step");
  run->add_flag("--no-plot-data", no_plot_data, "Skip per-combination plot files");
  run->add_option("--date-column", date_col, "Date column name, or #index");
  run->add_option("--value-column", value_col, "Value column name, or #index");
  run->add_option("--qf-column", qf_col, "Quality-flag column name, or #index");
  run->add_option("--delimiter", delimiter, "Field delimiter");
  run->add_option("--decimal-mark", decimal_mark, "Decimal mark inside numbers");
  run->add_option("--max-gap-fill", max_gap_fill,
                  "Interpolate gaps up to this many days (hard cap 5)");

  // --- summarize -----------------------------------------------------------
  auto* summ = app.add_subcommand("summarize", "Merge detection reports into one table");
  std::vector<std::string> report_paths;
  std::string summ_out;
  summ->add_option("reports", report_paths, "report.json files")->required();
  summ->add_option("-o,--output", summ_out, "Write the table here instead of stdout");

  // --- synth --------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic daily series as CSV");
  double years = 4.0, sigma = 0.0, beta = 1.0;
  std::vector<std::string> harmonic_tokens{"1:1.0"};
  std::string noise = "none", amp_change, site = "synth", variable = "SYN", synth_out;
  std::uint64_t synth_seed = 0;
  synth->add_option("--years", years, "Series length in years")->check(CLI::PositiveNumber);
  synth->add_option("--harmonic", harmonic_tokens, "Component f[:amp[:phase]] (repeatable)");
  synth->add_option("--noise", noise, "none, white or broadband")
      ->check(CLI::IsMember({"none", "white", "broadband"}));
  synth->add_option("--sigma", sigma, "Noise standard deviation");
  synth->add_option("--beta", beta, "Spectral slope of broadband noise");
  synth->add_option("--amp-change", amp_change,
                    "Smooth amplitude step, as time_fraction:factor");
  synth->add_option("--seed", synth_seed, "Noise seed");
  synth->add_option("--site", site, "Site id written into the CSV metadata");
  synth->add_option("--variable", variable, "Variable name");
  synth->add_option("-o,--output", synth_out, "Output CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      PipelineConfig cfg;
      cfg.inputs = inputs;
      cfg.columns.date_column = parse_column(date_col);
      cfg.columns.value_column = parse_column(value_col);
      if (!qf_col.empty()) cfg.columns.qf_column = parse_column(qf_col);
      if (!delimiter.empty()) cfg.columns.delimiter = delimiter.front();
      if (!decimal_mark.empty()) cfg.columns.decimal_mark = decimal_mark.front();
      cfg.columns.max_gap_fill_days = std::size_t(std::max(0, max_gap_fill));
      if (window > 0) cfg.window = std::size_t(window);
      cfg.k = k;
      cfg.filters.clear();
      for (const auto& tok : filter_tokens) cfg.filters.push_back(parse_filter(tok));
      cfg.run_ssa = !no_ssa;
      cfg.run_nlsa = !no_nlsa;
      if (epsilon > 0.0) cfg.epsilon = epsilon;
      cfg.eps_f = eps_f;
      cfg.eps_p = eps_p;
      cfg.harmonic_set = harmonic_set;
      cfg.regularity_set = regularity_set;
      if (knn > 0) cfg.nlsa.knn = knn;
      cfg.nlsa.subset_size = std::size_t(std::max(2, eps_subset));
      cfg.nlsa.n_runs = std::size_t(std::max(1, eps_runs));
      cfg.seed = seed;
      cfg.output_dir = output_dir;
      cfg.emit_plot_data = !no_plot_data;
      return cmd_run(cfg, output_dir);
    }
    if (summ->parsed()) return cmd_summarize(report_paths, summ_out);
    if (synth->parsed()) {
      SignalRecipe recipe;
      recipe.n_years = years;
      recipe.harmonics.clear();
      for (const auto& tok : harmonic_tokens) recipe.harmonics.push_back(parse_harmonic(tok));
      if (noise == "white")
        recipe.noise = NoiseSpec{NoiseKind::white, sigma, 0.0};
      else if (noise == "broadband")
        recipe.noise = NoiseSpec{NoiseKind::broadband, sigma, beta};
      if (!amp_change.empty()) {
        const auto c = amp_change.find(':');
        if (c == std::string::npos)
          fail(ErrorCode::ConfigError, "bad --amp-change '" + amp_change + "'");
        recipe.amplitude_change =
            AmplitudeChange{std::stod(amp_change.substr(0, c)), std::stod(amp_change.substr(c + 1))};
      }
      recipe.seed = synth_seed;
      recipe.site_id = site;
      recipe.variable = variable;
      return cmd_synth(recipe, synth_out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigError ? 2 : 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: bad report file: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
