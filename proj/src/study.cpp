#include "vardens/study.hpp"

#include <chrono>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "vardens/assembly.hpp"
#include "vardens/errors.hpp"
#include "vardens/mms.hpp"

namespace vardens {

namespace {

template <class Exact, class Diff>
double l2_error_impl(const FeField& field, const Exact& exact, const Diff& diff2) {
  const FeSpace& space = field.space();
  const Mesh& mesh = space.mesh();
  const QuadratureRule& rule = default_cell_rule(mesh.dim());
  std::vector<double> local(space.local_size());
  double total = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const BasisValues b = eval_basis(space, c, rule.points);
    const AffineMap& map = mesh.affine_map(c);
    const double det = std::abs(map.determinant);
    field.gather(c, local);
    for (int q = 0; q < rule.size(); ++q) {
      Vec3 v{};
      for (int i = 0; i < b.n_local; ++i) v = v + local[i] * b.value(q, i);
      total += rule.weights[q] * det * diff2(v, exact(map.to_physical(rule.points[q])));
    }
  }
  return std::sqrt(total);
}

}  // namespace

double l2_error(const FeField& field, const ScalarFunction& exact) {
  return l2_error_impl(field, exact, [](const Vec3& v, double e) { return (v[0] - e) * (v[0] - e); });
}

double l2_error(const FeField& field, const VectorFunction& exact) {
  return l2_error_impl(field, exact, [](const Vec3& v, const Vec3& e) {
    const Vec3 d = v - e;
    return dot(d, d);
  });
}

std::optional<double> compute_order(double e1, double h1, double e2, double h2) {
  if (!(e1 > 0.0) || !(e2 > 0.0) || !(h1 > 0.0) || !(h2 > 0.0) || h1 == h2) {
    return std::nullopt;
  }
  return std::log(e1 / e2) / std::log(h1 / h2);
}

double parse_fraction(std::string_view text, bool bare_integer_is_reciprocal) {
  auto parse_number = [&](std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw InvalidArgument("cannot parse number '" + std::string(text) + "'");
    }
    return v;
  };
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  double value = 0.0;
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    const double num = parse_number(text.substr(0, slash));
    const double den = parse_number(text.substr(slash + 1));
    if (den == 0.0) throw InvalidArgument("zero denominator in '" + std::string(text) + "'");
    value = num / den;
  } else {
    value = parse_number(text);
    const bool is_integer = text.find_first_of(".eE") == std::string_view::npos;
    if (bare_integer_is_reciprocal && is_integer && value > 0.0) value = 1.0 / value;
  }
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InvalidArgument("value must be positive: '" + std::string(text) + "'");
  }
  return value;
}

std::vector<double> parse_fraction_list(std::string_view text, bool bare_integer_is_reciprocal) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? text.size() : comma;
    out.push_back(parse_fraction(text.substr(start, end - start), bare_integer_is_reciprocal));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

int mesh_divisions(double h) {
  const double n = h > 0.0 ? std::round(1.0 / h) : 0.0;
  if (!(n >= 1.0 && n <= 1e6) || std::abs(n * h - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "h = " << h << " is not 1/n for an integer n";
    throw InvalidArgument(msg.str());
  }
  return static_cast<int>(n);
}

RunSummary simulate(const RunSpec& spec) {
  const auto start = std::chrono::steady_clock::now();
  const ExactCase exact = make_case(spec.case_name);
  if (spec.n < 1) throw InvalidArgument("simulate: n must be >= 1");
  auto mesh = std::make_shared<const Mesh>(exact.dim() == 2 ? unit_square_mesh(spec.n)
                                                            : unit_cube_mesh(spec.n));
  SchemeConfig config;
  config.tau = spec.tau;
  config.T = spec.T;
  config.mu = spec.mu;
  config.cutoff_mode = spec.cutoff;
  const double mu = spec.mu;
  config.sources = [&exact, mu](const Point& x, double t) { return exact.sources(x, t, mu); };

  exact.reset_kink_hits();
  Scheme scheme(mesh, config);
  RunSummary summary;
  summary.n = spec.n;
  summary.h = 1.0 / spec.n;
  summary.tau = spec.tau;
  summary.steps = config.steps();
  auto observer = [&](const StepState& s, const StepDiagnostics&) {
    if (s.n == 0) return;
    const double t = s.t;
    summary.e_rho = std::max(
        summary.e_rho, l2_error(s.rho, [&](const Point& x) { return exact.rho(x, t); }));
    summary.e_u =
        std::max(summary.e_u, l2_error(s.u, [&](const Point& x) { return exact.u(x, t); }));
  };
  RunResult result = scheme.run([&](const Point& x) { return exact.rho(x, 0.0); },
                                [&](const Point& x) { return exact.u(x, 0.0); }, observer);
  summary.diagnostics = std::move(result.diagnostics);
  summary.warnings = scheme.warnings();
  summary.kink_hits = exact.kink_hits();
  summary.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

StudyMode parse_study_mode(std::string_view name) {
  if (name == "space") return StudyMode::Space;
  if (name == "time") return StudyMode::Time;
  throw InvalidArgument("unknown study mode '" + std::string(name) + "' (expected space or time)");
}

void StudySpec::validate() const {
  if (params.empty()) throw InvalidArgument("study needs at least one parameter");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!(params[i] > 0.0)) throw InvalidArgument("study parameters must be positive");
    if (i > 0 && !(params[i] < params[i - 1])) {
      throw InvalidArgument("study parameters must be strictly decreasing");
    }
    if (mode == StudyMode::Space) {
      mesh_divisions(params[i]);
    } else {
      mesh_divisions(std::sqrt(params[i]));
    }
  }
  if (mode == StudyMode::Space && !(tau > 0.0)) throw InvalidArgument("tau must be positive");
}

void fill_orders(std::vector<ConvergenceRecord>& rows, StudyMode mode) {
  const ConvergenceRecord* prev = nullptr;
  for (auto& r : rows) {
    r.order_rho.reset();
    r.order_u.reset();
    if (r.failed) {
      prev = nullptr;
      continue;
    }
    if (prev) {
      const double p1 = mode == StudyMode::Space ? prev->h : prev->tau;
      const double p2 = mode == StudyMode::Space ? r.h : r.tau;
      r.order_rho = compute_order(prev->e_rho, p1, r.e_rho, p2);
      r.order_u = compute_order(prev->e_u, p1, r.e_u, p2);
    }
    prev = &r;
  }
}

std::vector<ConvergenceRecord> run_study(const StudySpec& spec) {
  spec.validate();
  std::vector<ConvergenceRecord> rows;
  for (double param : spec.params) {
    RunSpec run;
    run.case_name = spec.case_name;
    run.T = spec.T;
    run.mu = spec.mu;
    run.cutoff = spec.cutoff;
    if (spec.mode == StudyMode::Space) {
      run.n = mesh_divisions(param);
      run.tau = spec.tau;
    } else {
      run.n = mesh_divisions(std::sqrt(param));
      run.tau = param;
    }
    ConvergenceRecord rec;
    rec.h = 1.0 / run.n;
    rec.tau = run.tau;
    const auto start = std::chrono::steady_clock::now();
    try {
      const RunSummary s = simulate(run);
      rec.e_rho = s.e_rho;
      rec.e_u = s.e_u;
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(rec);
  }
  fill_orders(rows, spec.mode);
  return rows;
}

std::string format_reciprocal(double value) {
  if (value > 0.0) {
    const double n = std::round(1.0 / value);
    if (n >= 1.0 && std::abs(n * value - 1.0) < 1e-12) {
      return "1/" + std::to_string(static_cast<long long>(n));
    }
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

std::string order_text(const std::optional<double>& o) {
  if (!o) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *o);
  return buf;
}

std::string seconds_text(const ConvergenceRecord& r, const TableOptions& options) {
  if (!options.timing) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", r.seconds);
  return buf;
}

std::vector<std::array<std::string, 7>> cells(const std::vector<ConvergenceRecord>& rows,
                                              const TableOptions& options) {
  std::vector<std::array<std::string, 7>> out;
  for (const auto& r : rows) {
    out.push_back({format_reciprocal(r.h), format_reciprocal(r.tau),
                   r.failed ? "failed" : sci(r.e_rho), order_text(r.order_rho),
                   r.failed ? "failed" : sci(r.e_u), order_text(r.order_u),
                   seconds_text(r, options)});
  }
  return out;
}

const std::array<std::string, 7> kHeader{"h", "tau", "E_rho", "order_rho", "E_u", "order_u",
                                         "seconds"};

}  // namespace

void write_csv(std::ostream& out, const std::vector<ConvergenceRecord>& rows,
               const TableOptions& options) {
  auto emit = [&](const std::array<std::string, 7>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  };
  emit(kHeader);
  for (const auto& row : cells(rows, options)) emit(row);
}

void write_table(std::ostream& out, const std::vector<ConvergenceRecord>& rows,
                 const TableOptions& options) {
  const auto body = cells(rows, options);
  std::array<std::size_t, 7> width{};
  for (std::size_t i = 0; i < 7; ++i) width[i] = kHeader[i].size();
  for (const auto& row : body) {
    for (std::size_t i = 0; i < 7; ++i) width[i] = std::max(width[i], row[i].size());
  }
  auto emit = [&](const std::array<std::string, 7>& row) {
    for (std::size_t i = 0; i < 7; ++i) {
      out << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << row[i];
    }
    out << '\n';
  };
  emit(kHeader);
  for (const auto& row : body) emit(row);
  for (const auto& r : rows) {
    if (r.failed) out << "row h=" << format_reciprocal(r.h) << " failed: " << r.error << '\n';
  }
}

void write_markdown(std::ostream& out, const std::vector<ConvergenceRecord>& rows,
                    const TableOptions& options) {
  auto emit = [&](const std::array<std::string, 7>& row) {
    out << '|';
    for (const auto& c : row) out << ' ' << c << " |";
    out << '\n';
  };
  emit(kHeader);
  out << "|---|---|---|---|---|---|---|\n";
  for (const auto& row : cells(rows, options)) emit(row);
}

}  // namespace vardens
