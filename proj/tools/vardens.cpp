// Command line driver: single manufactured-solution runs and convergence
// studies.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "vardens/errors.hpp"
#include "vardens/study.hpp"

namespace {

constexpr int kExitFailedRows = 2;

struct RunOptions {
  std::string case_name = "square2d";
  std::string h = "1/8";
  std::string tau = "1/64";
  double T = 0.25;
  double mu = 0.001;
  std::string cutoff = "widened";
  std::string diag;
};

struct StudyOptions {
  std::string case_name = "square2d";
  std::string mode = "space";
  std::string params;
  std::string tau = "1/2048";
  double T = 0.25;
  double mu = 0.001;
  std::string cutoff = "widened";
  std::string out;
  std::string format = "csv";
  bool no_timing = false;
};

int do_run(const RunOptions& o) {
  vardens::RunSpec spec;
  spec.case_name = o.case_name;
  spec.n = vardens::mesh_divisions(vardens::parse_fraction(o.h, true));
  spec.tau = vardens::parse_fraction(o.tau);
  spec.T = o.T;
  spec.mu = o.mu;
  spec.cutoff = vardens::parse_cutoff_mode(o.cutoff);

  const vardens::RunSummary s = vardens::simulate(spec);
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
  if (s.kink_hits > 0) {
    std::cerr << "warning: " << s.kink_hits
              << " source evaluations hit the nonsmooth set; right limits used\n";
  }
  bool cutoff_active = false;
  for (const auto& d : s.diagnostics) cutoff_active = cutoff_active || d.cutoff_active;
  std::printf("case      %s\n", spec.case_name.c_str());
  std::printf("h         %s\n", vardens::format_reciprocal(s.h).c_str());
  std::printf("tau       %s\n", vardens::format_reciprocal(s.tau).c_str());
  std::printf("steps     %d\n", s.steps);
  std::printf("E_rho     %.6e\n", s.e_rho);
  std::printf("E_u       %.6e\n", s.e_u);
  std::printf("energy    %.12e\n", s.diagnostics.back().energy);
  std::printf("mass      %.12e\n", s.diagnostics.back().mass);
  std::printf("cutoff    %s (%s)\n", std::string(vardens::to_string(spec.cutoff)).c_str(),
              cutoff_active ? "active" : "inactive");
  std::printf("seconds   %.2f\n", s.seconds);

  if (!o.diag.empty()) {
    std::ofstream out(o.diag);
    if (!out) throw vardens::InvalidArgument("cannot open " + o.diag);
    vardens::write_diagnostics_csv(out, s.diagnostics);
  }
  return 0;
}

int do_study(const StudyOptions& o) {
  vardens::StudySpec spec;
  spec.case_name = o.case_name;
  spec.mode = vardens::parse_study_mode(o.mode);
  spec.params = vardens::parse_fraction_list(o.params, spec.mode == vardens::StudyMode::Space);
  spec.tau = vardens::parse_fraction(o.tau);
  spec.T = o.T;
  spec.mu = o.mu;
  spec.cutoff = vardens::parse_cutoff_mode(o.cutoff);
  if (o.format != "csv" && o.format != "md") {
    throw vardens::InvalidArgument("unknown format '" + o.format + "' (expected csv or md)");
  }

  const auto rows = vardens::run_study(spec);
  const vardens::TableOptions table{!o.no_timing};
  vardens::write_table(std::cout, rows, table);
  if (!o.out.empty()) {
    std::ofstream out(o.out);
    if (!out) throw vardens::InvalidArgument("cannot open " + o.out);
    if (o.format == "md") {
      vardens::write_markdown(out, rows, table);
    } else {
      vardens::write_csv(out, rows, table);
    }
  }
  for (const auto& r : rows) {
    if (r.failed) return kExitFailedRows;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable-density Navier-Stokes solver with divergence-free post-processing"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run one manufactured-solution case");
  run_cmd->set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
  run_cmd->add_option("--case", run.case_name, "square2d, cube3d or cube3d_nonsmooth")
      ->capture_default_str();
  run_cmd->add_option("--h", run.h, "Mesh size 1/n (a bare n also works)")->capture_default_str();
  run_cmd->add_option("--tau", run.tau, "Time step, e.g. 1/64")->capture_default_str();
  run_cmd->add_option("--T", run.T, "Final time")->capture_default_str();
  run_cmd->add_option("--mu", run.mu, "Viscosity")->capture_default_str();
  run_cmd->add_option("--cutoff", run.cutoff, "strict, widened or off")->capture_default_str();
  run_cmd->add_option("--diag", run.diag, "Write per-step diagnostics CSV here");

  StudyOptions study;
  auto* study_cmd = app.add_subcommand("study", "Run a convergence study");
  study_cmd->add_option("--case", study.case_name, "square2d, cube3d or cube3d_nonsmooth")
      ->capture_default_str();
  study_cmd->add_option("--mode", study.mode, "space or time")->capture_default_str();
  study_cmd->add_option("--params", study.params, "Comma separated h (space) or tau (time) values")
      ->required();
  study_cmd->add_option("--tau", study.tau, "Fixed time step of a space study")
      ->capture_default_str();
  study_cmd->add_option("--T", study.T, "Final time")->capture_default_str();
  study_cmd->add_option("--mu", study.mu, "Viscosity")->capture_default_str();
  study_cmd->add_option("--cutoff", study.cutoff, "strict, widened or off")->capture_default_str();
  study_cmd->add_option("--out", study.out, "Write the table to this file");
  study_cmd->add_option("--format", study.format, "csv or md")->capture_default_str();
  study_cmd->add_flag("--no-timing", study.no_timing,
                      "Leave the seconds column empty (byte-reproducible output)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run_cmd->parsed()) return do_run(run);
    return do_study(study);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
