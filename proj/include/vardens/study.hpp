#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vardens/fe_space.hpp"
#include "vardens/scheme.hpp"

namespace vardens {

/// ||field - exact||_{L2} with the default cell rule.
double l2_error(const FeField& field, const ScalarFunction& exact);
double l2_error(const FeField& field, const VectorFunction& exact);

/// log(E1/E2) / log(h1/h2); nullopt when an error is not positive or h1 == h2.
std::optional<double> compute_order(double e1, double h1, double e2, double h2);

/// Parses "1/8", "0.125" or a bare integer n (meaning 1/n when as_reciprocal
/// is set). Throws InvalidArgument on malformed input or non-positive values.
double parse_fraction(std::string_view text, bool bare_integer_is_reciprocal = false);
std::vector<double> parse_fraction_list(std::string_view text,
                                        bool bare_integer_is_reciprocal = false);

/// Integer n with 1/n == h (to 1e-9 relative); throws InvalidArgument if none.
int mesh_divisions(double h);

/// One manufactured-solution run.
struct RunSpec {
  std::string case_name = "square2d";
  int n = 8;  // mesh divisions per axis, h = 1/n
  double tau = 1.0 / 64.0;
  double T = 0.25;
  double mu = 0.001;
  CutoffMode cutoff = CutoffMode::Widened;
};

struct RunSummary {
  double h = 0.0;
  double tau = 0.0;
  int n = 0;
  int steps = 0;
  double e_rho = 0.0;  // max over steps 1..N of ||rho_h^n - rho(t_n)||
  double e_u = 0.0;    // same for u
  double seconds = 0.0;
  long kink_hits = 0;
  std::vector<StepDiagnostics> diagnostics;
  std::vector<std::string> warnings;
};

/// Runs the scheme with the case's sources and tracks the errors every step.
RunSummary simulate(const RunSpec& spec);

enum class StudyMode { Space, Time };
StudyMode parse_study_mode(std::string_view name);

/// Space mode: params are h values, tau is fixed. Time mode: params are tau
/// values and h = tau^(1/2), i.e. n = round(tau^(-1/2)).
struct StudySpec {
  std::string case_name = "square2d";
  StudyMode mode = StudyMode::Space;
  std::vector<double> params;
  double tau = 1.0 / 2048.0;
  double T = 0.25;
  double mu = 0.001;
  CutoffMode cutoff = CutoffMode::Widened;

  /// Params strictly decreasing and positive; time mode needs each tau^(-1/2)
  /// to be an integer.
  void validate() const;
};

struct ConvergenceRecord {
  double h = 0.0;
  double tau = 0.0;
  double e_rho = 0.0;
  double e_u = 0.0;
  std::optional<double> order_rho;
  std::optional<double> order_u;
  double seconds = 0.0;
  bool failed = false;
  std::string error;
};

/// Runs every row; a failing row is recorded and the study continues. Orders
/// come from consecutive successful rows.
std::vector<ConvergenceRecord> run_study(const StudySpec& spec);

/// Fills order columns from consecutive rows (h for space, tau for time).
void fill_orders(std::vector<ConvergenceRecord>& rows, StudyMode mode);

struct TableOptions {
  bool timing = true;  // false leaves the seconds column empty
};

/// CSV with header h,tau,E_rho,order_rho,E_u,order_u,seconds.
void write_csv(std::ostream& out, const std::vector<ConvergenceRecord>& rows,
               const TableOptions& options = {});
void write_table(std::ostream& out, const std::vector<ConvergenceRecord>& rows,
                 const TableOptions& options = {});
void write_markdown(std::ostream& out, const std::vector<ConvergenceRecord>& rows,
                    const TableOptions& options = {});

/// "1/8" when value is the reciprocal of an integer, otherwise %.6g.
std::string format_reciprocal(double value);

}  // namespace vardens
