#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qplab/analysis.hpp"
#include "qplab/denselin.hpp"
#include "qplab/diophantine.hpp"
#include "qplab/errors.hpp"
#include "qplab/green.hpp"
#include "qplab/lab.hpp"
#include "qplab/model_io.hpp"
#include "qplab/operator.hpp"

namespace {

using namespace qplab;

struct ModelOptions {
  std::string file;
  double epsilon = -1.0;  // negative: keep the model's value

  OperatorModel load() const {
    OperatorModel model = file.empty() ? reference_model() : parse_model_file(file);
    if (epsilon >= 0.0) {
      model = model.with_epsilon(epsilon);
      model.validate();
    }
    return model;
  }
};

void add_model_options(CLI::App* cmd, ModelOptions& opts) {
  cmd->add_option("--model", opts.file, "model file (default: built-in reference model)");
  cmd->add_option("--epsilon", opts.epsilon, "override the model's perturbation strength");
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << text << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"numerical laboratory for quasi-periodic block operators with long-range hopping"};
  app.require_subcommand(1);

  // --- model validate
  auto* model_cmd = app.add_subcommand("model", "model file utilities");
  model_cmd->require_subcommand(1);
  auto* validate_cmd = model_cmd->add_subcommand("validate", "check a model file");
  std::string validate_path;
  validate_cmd->add_option("file", validate_path, "model file")->required();
  validate_cmd->callback([&]() {
    std::vector<std::string> warnings;
    parse_model_file(validate_path, &warnings);
    for (const auto& w : warnings) std::cout << "warning: " << w << "\n";
    std::cout << "ok: " << validate_path << "\n";
  });

  // --- spectrum
  auto* spectrum_cmd = app.add_subcommand("spectrum", "finite-volume eigenvalues");
  ModelOptions spectrum_model;
  add_model_options(spectrum_cmd, spectrum_model);
  std::int64_t spec_a = -20, spec_b = 20;
  double spec_x = 0.34;
  std::string spec_json;
  spectrum_cmd->add_option("--a", spec_a, "interval start");
  spectrum_cmd->add_option("--b", spec_b, "interval end");
  spectrum_cmd->add_option("--x", spec_x, "phase");
  spectrum_cmd->add_option("--json", spec_json, "write eigenvalues to a JSON file");
  spectrum_cmd->callback([&]() {
    const auto model = spectrum_model.load();
    const auto eig = denselin::eigensolve_hermitian(
        assemble_dirichlet(model, {spec_a, spec_b}, spec_x, 0.0));
    if (!spec_json.empty()) {
      std::ostringstream os;
      os << "[";
      for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", eig.eigenvalues(i));
        os << (i ? "," : "") << buf;
      }
      os << "]";
      write_text_file(spec_json, os.str());
    } else {
      for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
        std::printf("%.12g\n", eig.eigenvalues(i));
      }
    }
  });

  // --- green
  auto* green_cmd = app.add_subcommand("green", "restricted Green's function report");
  ModelOptions green_model;
  add_model_options(green_cmd, green_model);
  std::int64_t green_n = 100;
  double green_x = 0.34, green_e = 0.3;
  double green_slack = 0.1, green_frac = 0.01;
  std::string green_json, green_plot, green_svg;
  green_cmd->add_option("--N", green_n, "interval length");
  green_cmd->add_option("--x", green_x, "phase");
  green_cmd->add_option("--E", green_e, "energy");
  green_cmd->add_option("--rate-slack", green_slack, "goodness rate slack");
  green_cmd->add_option("--margin-fraction", green_frac, "goodness margin fraction");
  green_cmd->add_option("--json", green_json, "write the report as JSON");
  green_cmd->add_option("--plot-data", green_plot, "write |n-n'| vs block norm data");
  green_cmd->add_option("--svg", green_svg, "write an SVG decay plot");
  green_cmd->callback([&]() {
    const auto model = green_model.load();
    auto report = green::green_function(model, {1, green_n}, green_x, green_e);
    green::GoodnessParams params{green_frac, green_slack, model.hopping.decay_rate};
    green::apply_goodness(report, params);
    try {
      report.fitted_decay_rate = green::decay_rate_fit(report);
    } catch (const std::exception&) {
    }
    std::printf("good: %s\n", report.good ? "yes" : "no");
    std::printf("worst margin: %.6g at (%d, %d)\n", report.worst_margin,
                report.worst_pair.first, report.worst_pair.second);
    std::printf("dist to spectrum: %.6g\n", report.dist_to_spectrum);
    std::printf("residual: %.3g\n", report.residual);
    if (std::isfinite(report.fitted_decay_rate)) {
      std::printf("fitted decay rate: %.6g\n", report.fitted_decay_rate);
    }
    if (!green_json.empty()) write_text_file(green_json, report.to_json());
    if (!green_plot.empty() || !green_svg.empty()) {
      std::vector<std::pair<double, double>> pts;
      const auto sites = static_cast<int>(report.sites());
      for (int d = 0; d < sites; ++d) {
        double worst = 0.0;
        for (int i = 0; i + d < sites; ++i) worst = std::max(worst, report.block_norms(i, i + d));
        pts.emplace_back(d, worst);
      }
      if (!green_plot.empty()) lab::write_xy(green_plot, pts, "block distance  max ||G|| over pairs");
      if (!green_svg.empty()) lab::write_svg_curve(green_svg, pts, "Green block decay", true);
    }
  });

  // --- ldt
  auto* ldt_cmd = app.add_subcommand("ldt", "bad-set measure of the Birkhoff averages");
  ModelOptions ldt_model;
  add_model_options(ldt_cmd, ldt_model);
  std::int64_t ldt_n = 60;
  double ldt_e = 0.3, ldt_margin = 0.05;
  int ldt_samples = 2000;
  std::uint64_t ldt_seed = 1;
  std::vector<int> ldt_m = {10, 20, 40, 80};
  std::string ldt_json, ldt_plot, ldt_svg;
  ldt_cmd->add_option("--N", ldt_n, "interval length");
  ldt_cmd->add_option("--E", ldt_e, "energy");
  ldt_cmd->add_option("--margin", ldt_margin, "log-scale margin below the potential sum");
  ldt_cmd->add_option("--samples", ldt_samples, "phase samples");
  ldt_cmd->add_option("--seed", ldt_seed, "rng seed");
  ldt_cmd->add_option("--M", ldt_m, "Birkhoff lengths")->delimiter(',');
  ldt_cmd->add_option("--json", ldt_json, "write results as JSON");
  ldt_cmd->add_option("--plot-data", ldt_plot, "write M vs measure data");
  ldt_cmd->add_option("--svg", ldt_svg, "write an SVG measure plot");
  ldt_cmd->callback([&]() {
    const auto model = ldt_model.load();
    const auto r = lab::ldt_bad_set(model, ldt_e, ldt_n, ldt_m, ldt_margin, ldt_samples, ldt_seed);
    std::printf("potential sum: %.9g\n", r.potential_sum);
    std::vector<std::pair<double, double>> pts;
    for (const auto& [m, p] : r.measures) {
      std::printf("M = %4d   measure = %.4f\n", m, p);
      pts.emplace_back(m, p);
    }
    std::printf("fitted decay exponent: %.4g\n", r.decay_exponent);
    if (r.unreliable) std::printf("unreliable: %.2f%% evaluations clipped\n",
                                  100.0 * r.clipped_fraction);
    if (!ldt_json.empty()) {
      std::ostringstream os;
      os << "{\n  \"schema\": \"qplab.ldt/1\",\n  \"potential_sum\": " << r.potential_sum
         << ",\n  \"decay_exponent\": " << r.decay_exponent << ",\n  \"measures\": [";
      for (std::size_t i = 0; i < r.measures.size(); ++i) {
        os << (i ? ", " : "") << "[" << r.measures[i].first << ", " << r.measures[i].second << "]";
      }
      os << "]\n}";
      write_text_file(ldt_json, os.str());
    }
    if (!ldt_plot.empty()) lab::write_xy(ldt_plot, pts, "M  measure");
    if (!ldt_svg.empty()) lab::write_svg_curve(ldt_svg, pts, "bad-set measure vs M", true);
  });

  // --- lyap
  auto* lyap_cmd = app.add_subcommand("lyap", "torus mean of (1/N) log|det H_N|");
  ModelOptions lyap_model;
  add_model_options(lyap_cmd, lyap_model);
  std::int64_t lyap_n = 60;
  double lyap_e = 5.0;
  int lyap_nodes = 512;
  bool lyap_mc = false;
  std::uint64_t lyap_seed = 1;
  std::string lyap_json;
  lyap_cmd->add_option("--N", lyap_n, "interval length");
  lyap_cmd->add_option("--E", lyap_e, "energy");
  lyap_cmd->add_option("--nodes", lyap_nodes, "quadrature nodes");
  lyap_cmd->add_flag("--mc", lyap_mc, "monte-carlo nodes instead of the midpoint grid");
  lyap_cmd->add_option("--seed", lyap_seed, "monte-carlo seed");
  lyap_cmd->add_option("--json", lyap_json, "write the record as JSON");
  lyap_cmd->callback([&]() {
    const auto model = lyap_model.load();
    analysis::QuadratureSpec quad;
    quad.method = lyap_mc ? analysis::QuadratureSpec::Method::monte_carlo
                          : analysis::QuadratureSpec::Method::midpoint_grid;
    quad.nodes = lyap_nodes;
    quad.seed = lyap_seed;
    const auto r = analysis::mean_log_det(model, lyap_e, lyap_n, quad);
    std::printf("estimate:      %.9g\n", r.estimate);
    std::printf("potential sum: %.9g\n", r.potential_sum);
    std::printf("signed margin: %.3g\n", r.signed_margin);
    std::printf("upper bound:   %.9g (margin %.3g)\n", r.upper_bound, r.upper_margin);
    if (r.unreliable) std::printf("unreliable: %.2f%% nodes clipped\n",
                                  100.0 * r.clipped_fraction);
    if (!lyap_json.empty()) write_text_file(lyap_json, r.to_json());
  });

  // --- localize
  auto* loc_cmd = app.add_subcommand("localize", "eigenvector decay-rate experiment");
  ModelOptions loc_model;
  add_model_options(loc_cmd, loc_model);
  std::int64_t loc_n1 = 150;
  double loc_x = 0.34;
  std::string loc_json, loc_csv, loc_svg;
  loc_cmd->add_option("--n1", loc_n1, "half volume; H acts on [-n1, n1]");
  loc_cmd->add_option("--x", loc_x, "phase");
  loc_cmd->add_option("--json", loc_json, "write per-eigenvector rows as JSON");
  loc_cmd->add_option("--csv", loc_csv, "write per-eigenvector rows as CSV");
  loc_cmd->add_option("--svg", loc_svg, "write the decay profile of the worst mid-spectrum state");
  loc_cmd->callback([&]() {
    const auto model = loc_model.load();
    const auto r = lab::localization_experiment(model, loc_x, loc_n1);
    std::printf("eigenvectors: %zu, mid-spectrum range [%zu, %zu)\n", r.rows.size(), r.mid_lo,
                r.mid_hi);
    std::printf("fraction with decay rate >= rho/3: %.4f\n", r.mid_fraction_rate_ok);
    if (!loc_csv.empty()) {
      std::ofstream out(loc_csv);
      if (!out) throw ValidationError("cannot write " + loc_csv);
      out << "energy,center,decay_rate,participation,capped\n";
      char buf[160];
      for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%lld,%.17g,%.17g,%d\n", row.energy,
                      static_cast<long long>(row.center), row.decay_rate, row.participation,
                      row.capped ? 1 : 0);
        out << buf;
      }
    }
    if (!loc_json.empty()) {
      std::ostringstream os;
      os << "{\n  \"schema\": \"qplab.localize/1\",\n  \"mid_fraction_rate_ok\": "
         << r.mid_fraction_rate_ok << ",\n  \"rows\": [";
      for (std::size_t i = 0; i < r.rows.size(); ++i) {
        const auto& row = r.rows[i];
        os << (i ? ",\n    " : "\n    ") << "[" << row.energy << ", " << row.center << ", "
           << row.decay_rate << ", " << row.participation << ", " << (row.capped ? 1 : 0) << "]";
      }
      os << "\n  ]\n}";
      write_text_file(loc_json, os.str());
    }
  });

  // --- dioph
  auto* dioph_cmd = app.add_subcommand("dioph", "continued fraction and Diophantine margins");
  double dioph_omega = 0.6180339887498949;
  std::string dioph_digits;
  int dioph_depth = 30;
  std::vector<std::int64_t> dioph_ks = {10, 100, 1000, 10000, 100000, 1000000};
  std::string dioph_json;
  dioph_cmd->add_option("--omega", dioph_omega, "frequency in (0,1)");
  dioph_cmd->add_option("--digits", dioph_digits, "high-precision fractional digits of omega");
  dioph_cmd->add_option("--depth", dioph_depth, "continued fraction depth");
  dioph_cmd->add_option("--K", dioph_ks, "margin table cutoffs")->delimiter(',');
  dioph_cmd->add_option("--json", dioph_json, "write the profile as JSON");
  dioph_cmd->callback([&]() {
    const auto profile = dioph::frequency_profile(dioph_omega, dioph_depth, dioph_ks, dioph_digits);
    std::printf("omega = %.17g%s\n", profile.omega,
                profile.near_rational ? " (near rational: expansion stopped)" : "");
    std::printf("partial quotients:");
    for (auto a : profile.partial_quotients) std::printf(" %lld", static_cast<long long>(a));
    std::printf("\nconvergents (p/q):");
    for (const auto& [p, q] : profile.convergents) {
      std::printf(" %lld/%lld", static_cast<long long>(p), static_cast<long long>(q));
    }
    std::printf("\n%-12s %s\n", "K", "min k^2 ||k omega||");
    for (const auto& [K, margin] : profile.dc_margin_table) {
      std::printf("%-12lld %.9g\n", static_cast<long long>(K), margin);
    }
    if (!dioph_json.empty()) write_text_file(dioph_json, profile.to_json());
  });

  // --- minors
  auto* minors_cmd = app.add_subcommand("minors", "minor upper-bound diagnostic");
  ModelOptions minors_model;
  add_model_options(minors_cmd, minors_model);
  std::int64_t minors_n = 30;
  double minors_e = 5.0, minors_slack = 0.1;
  int minors_x = 20, minors_pairs = 500;
  std::uint64_t minors_seed = 1;
  std::string minors_json;
  minors_cmd->add_option("--N", minors_n, "interval length");
  minors_cmd->add_option("--E", minors_e, "energy");
  minors_cmd->add_option("--slack", minors_slack, "bound slack");
  minors_cmd->add_option("--x-samples", minors_x, "distinct phases");
  minors_cmd->add_option("--pairs", minors_pairs, "sampled index pairs");
  minors_cmd->add_option("--seed", minors_seed, "rng seed");
  minors_cmd->add_option("--json", minors_json, "write rows as JSON");
  minors_cmd->callback([&]() {
    const auto model = minors_model.load();
    const auto r = lab::minor_bound_diagnostic(model, minors_e, minors_n, minors_x, minors_pairs,
                                               minors_slack, minors_seed);
    std::printf("potential sum: %.9g\n", r.potential_sum);
    std::printf("worst margin:  %.6g (bound holds when <= 0)\n", r.worst_margin);
    std::printf("fitted decay rate: %.6g\n", r.fitted_rate);
    std::printf("singular minors: %d\n", r.singular_count);
    if (!minors_json.empty()) {
      lab::RunRecord rec;
      rec.task = "minors";
      rec.scalars["worst_margin"] = r.worst_margin;
      rec.scalars["fitted_rate"] = r.fitted_rate;
      rec.scalars["potential_sum"] = r.potential_sum;
      rec.scalars["singular_count"] = r.singular_count;
      rec.tables["samples"] = r.rows;
      write_text_file(minors_json, rec.to_json());
    }
  });

  // --- pave
  auto* pave_cmd = app.add_subcommand("pave", "paving: small-scale good Greens vs the big one");
  ModelOptions pave_model;
  add_model_options(pave_cmd, pave_model);
  std::int64_t pave_n = 200, pave_m = 40;
  double pave_x = 0.34, pave_e = 4.5;
  double pave_slack = 0.1, pave_frac = 0.01;
  pave_cmd->add_option("--N", pave_n, "big interval length");
  pave_cmd->add_option("--M", pave_m, "subinterval length");
  pave_cmd->add_option("--x", pave_x, "phase");
  pave_cmd->add_option("--E", pave_e, "energy");
  pave_cmd->add_option("--rate-slack", pave_slack, "goodness rate slack");
  pave_cmd->add_option("--margin-fraction", pave_frac, "goodness margin fraction");
  pave_cmd->callback([&]() {
    const auto model = pave_model.load();
    green::GoodnessParams params{pave_frac, pave_slack, model.hopping.decay_rate};
    const auto verdict = green::paving_verify(model, pave_x, pave_e, {1, pave_n}, pave_m, params);
    std::printf("coverage (hypothesis i): %s\n", verdict.coverage_ok ? "ok" : "violated");
    std::printf("subinterval Greens good (hypothesis ii): %s\n",
                verdict.all_subintervals_good ? "yes" : "no");
    for (auto a : verdict.bad_subinterval_starts) {
      std::printf("  bad subinterval at %lld\n", static_cast<long long>(a));
    }
    std::printf("big Green good: %s (worst margin %.4g)\n", verdict.conclusion_good ? "yes" : "no",
                verdict.big_worst_margin);
    if (!verdict.conclusive) {
      std::printf("verdict: inconclusive (hypotheses not met)\n");
    } else {
      std::printf("verdict: %s\n", verdict.conclusion_good ? "paving confirmed" : "PAVING FAILED");
    }
  });

  // --- sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "run a parameter sweep from a config file");
  std::string sweep_config;
  sweep_cmd->add_option("config", sweep_config, "sweep config file")->required();
  sweep_cmd->callback([&]() {
    const auto config = lab::SweepConfig::from_file(sweep_config);
    const auto outcome = lab::sweep(config);
    std::printf("points: %zu (computed %d, resumed %d)\n", outcome.records.size(),
                outcome.computed, outcome.resumed);
    for (const auto& f : outcome.failures) std::printf("failure: %s\n", f.c_str());
    std::printf("summary: %s\n", outcome.summary_csv.c_str());
  });

  // --- report
  auto* report_cmd = app.add_subcommand("report", "summarize RunRecords in a directory");
  std::string report_dir;
  report_cmd->add_option("dir", report_dir, "directory of point_*.json records")->required();
  report_cmd->callback([&]() {
    namespace fs = std::filesystem;
    if (!fs::is_directory(report_dir)) throw ValidationError("not a directory: " + report_dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(report_dir)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("point_", 0) == 0 && entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::ifstream in(file);
      std::stringstream buf;
      buf << in.rdbuf();
      const auto rec = lab::RunRecord::from_json(buf.str());
      std::printf("%s task=%s", file.filename().string().c_str(), rec.task.c_str());
      for (const auto& [key, value] : rec.inputs) std::printf(" %s=%.6g", key.c_str(), value);
      std::printf(" |");
      for (const auto& [key, value] : rec.scalars) std::printf(" %s=%.6g", key.c_str(), value);
      std::printf("\n");
    }
    std::printf("%zu records\n", files.size());
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const qplab::ValidationError& ex) {
    std::cerr << "validation error: " << ex.what() << "\n";
    return 2;
  } catch (const qplab::NumericalError& ex) {
    std::cerr << "numerical failure: " << ex.what() << "\n";
    return 3;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 3;
  }
}
