#include "vardens/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "vardens/assembly.hpp"
#include "vardens/errors.hpp"

namespace vardens {

std::string_view to_string(CutoffMode mode) {
  switch (mode) {
    case CutoffMode::Strict:
      return "strict";
    case CutoffMode::Widened:
      return "widened";
    case CutoffMode::Disabled:
      return "off";
  }
  return "?";
}

CutoffMode parse_cutoff_mode(std::string_view name) {
  if (name == "strict") return CutoffMode::Strict;
  if (name == "widened") return CutoffMode::Widened;
  if (name == "off" || name == "disabled") return CutoffMode::Disabled;
  throw InvalidArgument("unknown cutoff mode '" + std::string(name) +
                        "' (expected strict, widened or off)");
}

int SchemeConfig::steps() const {
  if (!(tau > 0.0) || !(T > 0.0)) throw ConfigError("tau and T must be positive");
  const double ratio = T / tau;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream msg;
    msg << "T = " << T << " is not an integer multiple of tau = " << tau;
    throw ConfigError(msg.str());
  }
  return static_cast<int>(n);
}

void SchemeConfig::validate() const {
  steps();
  if (!(mu > 0.0)) throw ConfigError("mu must be positive");
  if (cutoff_mode == CutoffMode::Widened && !(widen_factor >= 1.0)) {
    throw ConfigError("widen factor must be >= 1");
  }
  if (cutoff_mode != CutoffMode::Disabled) {
    if ((rho_min && !(*rho_min > 0.0)) || (rho_max && !(*rho_max > 0.0))) {
      throw ConfigError("rho_min and rho_max must be positive");
    }
    if (rho_min && rho_max && *rho_min > *rho_max) throw ConfigError("rho_min > rho_max");
  }
}

std::pair<double, double> cutoff_interval(const SchemeConfig& config) {
  if (!config.rho_min || !config.rho_max) {
    throw ConfigError("cutoff bounds rho_min / rho_max are not set");
  }
  double lo = *config.rho_min;
  double hi = *config.rho_max;
  if (config.cutoff_mode == CutoffMode::Widened) {
    lo /= config.widen_factor;
    hi *= config.widen_factor;
  }
  return {0.5 * lo, 1.5 * hi};
}

double cutoff(double s, const SchemeConfig& config) {
  if (config.cutoff_mode == CutoffMode::Disabled) return s;
  const auto [lo, hi] = cutoff_interval(config);
  return std::clamp(s, lo, hi);
}

namespace {

// Values of a field at the points of the cell rule, from a reference
// tabulation (valid for P2_dG and, per component, for P1b).
void scalar_values(const Tabulation& tab, std::span<const double> local, std::span<double> out) {
  for (int q = 0; q < tab.n_points; ++q) {
    double v = 0.0;
    for (int i = 0; i < tab.n_functions; ++i) v += local[i] * tab.value(q, i);
    out[q] = v;
  }
}

void add_scaled_subset(SparseMatrix& target, const SparseMatrix& source, double s) {
  for (int r = 0; r < source.rows(); ++r) {
    for (int k = source.row_ptr()[r]; k < source.row_ptr()[r + 1]; ++k) {
      if (source.values()[k] != 0.0) target.add(r, source.col_idx()[k], s * source.values()[k]);
    }
  }
}

}  // namespace

struct Scheme::Cache {
  const QuadratureRule* rule = nullptr;
  Tabulation tab_rho;  // P2
  Tabulation tab_u;    // P1 + bubble
  Tabulation tab_p;    // P1
  int n_u = 0;
  int n_p = 0;

  SparseMatrix rho_mass;

  SparseMatrix divergence;  // rows pressure, cols velocity: (q, div v)

  // The bubbles are condensed out of the velocity system cell by cell; the
  // reduced unknowns are the P1 velocity dofs followed by the pressure.
  std::vector<int> reduced_index;  // velocity dof -> reduced unknown, -1 for bubbles
  std::vector<int> reduced_fixed;  // Dirichlet dofs in reduced numbering
  int n_r = 0;
  SparseMatrix velocity_pattern;
  std::vector<double> pressure_functional;  // over reduced unknowns
  std::vector<double> pressure_mode;        // constant pressure, zero velocity
  DirectSolver velocity_solver;
  // Per cell and component: bubble row (P1 coefficients, pressure
  // coefficients, right-hand side) scaled by the inverse bubble diagonal.
  std::vector<double> bubble_rows;

  // Sources at the cell rule points, [cell * n_q + q], and the assembled
  // load vectors of the last step.
  double source_time = std::numeric_limits<double>::quiet_NaN();
  std::vector<Sources> sources;
  std::vector<double> rho_load;
  std::vector<double> u_load;
  int last_density_iterations = 0;
};

Scheme::Scheme(std::shared_ptr<const Mesh> mesh, SchemeConfig config)
    : mesh_(std::move(mesh)), config_(std::move(config)), cache_(std::make_unique<Cache>()) {
  if (!mesh_) throw InvalidArgument("Scheme: null mesh");
  config_.validate();
  const int d = mesh_->dim();
  rho_space_ = std::make_shared<FeSpace>(mesh_, SpaceKind::P2DG);
  u_space_ = std::make_shared<FeSpace>(mesh_, SpaceKind::P1BubbleVector);
  p_space_ = std::make_shared<FeSpace>(mesh_, SpaceKind::P1ZeroMean);
  projection_ = std::make_unique<RtProjectionWorkspace>(mesh_);

  Cache& c = *cache_;
  c.rule = &default_cell_rule(d);
  c.tab_rho = tabulate(ScalarElement::P2, d, c.rule->points);
  c.tab_u = tabulate(ScalarElement::P1Bubble, d, c.rule->points);
  c.tab_p = tabulate(ScalarElement::P1, d, c.rule->points);
  c.n_u = u_space_->n_dofs();
  c.n_p = p_space_->n_dofs();

  c.rho_mass = assemble_matrix(Form::Mass, *rho_space_, *rho_space_);
  c.divergence = assemble_matrix(Form::Divergence, *u_space_, *p_space_);

  c.reduced_index.assign(c.n_u, -1);
  for (int cell = 0; cell < mesh_->n_cells(); ++cell) {
    const auto udofs = u_space_->cell_dofs(cell);
    for (int comp = 0; comp < d; ++comp) {
      for (int a = 0; a <= d; ++a) {
        int& r = c.reduced_index[udofs[comp * (d + 2) + a]];
        if (r < 0) r = c.n_r++;
      }
    }
  }
  for (int i : u_space_->constrained_dofs()) c.reduced_fixed.push_back(c.reduced_index[i]);
  const int n_total = c.n_r + c.n_p;

  SparsityBuilder pattern(n_total, n_total);
  std::vector<int> rdofs(d * (d + 1)), pdofs(d + 1);
  for (int cell = 0; cell < mesh_->n_cells(); ++cell) {
    const auto udofs = u_space_->cell_dofs(cell);
    for (int comp = 0; comp < d; ++comp) {
      for (int a = 0; a <= d; ++a) {
        rdofs[comp * (d + 1) + a] = c.reduced_index[udofs[comp * (d + 2) + a]];
      }
      pattern.add_block(std::span<const int>(rdofs).subspan(comp * (d + 1), d + 1),
                        std::span<const int>(rdofs).subspan(comp * (d + 1), d + 1));
    }
    const auto pd = p_space_->cell_dofs(cell);
    for (int i = 0; i <= d; ++i) pdofs[i] = c.n_r + pd[i];
    pattern.add_block(rdofs, pdofs);
    pattern.add_block(pdofs, rdofs);
    pattern.add_block(pdofs, pdofs);
  }
  c.velocity_pattern = pattern.build();

  c.pressure_functional.assign(n_total, 0.0);
  c.pressure_mode.assign(n_total, 0.0);
  std::fill(c.pressure_mode.begin() + c.n_r, c.pressure_mode.end(), 1.0);
  for (int cell = 0; cell < mesh_->n_cells(); ++cell) {
    const double det = std::abs(mesh_->affine_map(cell).determinant);
    const auto pd = p_space_->cell_dofs(cell);
    for (int q = 0; q < c.rule->size(); ++q) {
      for (int i = 0; i <= d; ++i) {
        c.pressure_functional[c.n_r + pd[i]] += c.rule->weights[q] * det * c.tab_p.value(q, i);
      }
    }
  }
}

Scheme::~Scheme() = default;

void Scheme::check_finite(std::span<const double> v, int step, const char* what) const {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericalBreakdown(step, std::string(what) + ": non-finite value at step " +
                                         std::to_string(step));
    }
  }
}

void Scheme::evaluate_sources(double t) {
  Cache& c = *cache_;
  if (!config_.sources || c.source_time == t) return;
  const int nq = c.rule->size();
  c.sources.resize(static_cast<std::size_t>(mesh_->n_cells()) * nq);
  for (int cell = 0; cell < mesh_->n_cells(); ++cell) {
    const AffineMap& map = mesh_->affine_map(cell);
    for (int q = 0; q < nq; ++q) {
      c.sources[cell * nq + q] = config_.sources(map.to_physical(c.rule->points[q]), t);
    }
  }
  c.source_time = t;
}

StepState Scheme::initialize(const ScalarFunction& rho0, const VectorFunction& u0) {
  const Cache& c = *cache_;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  auto sample = [&](const Point& x) {
    const double r = rho0(x);
    if (!(r > 0.0)) {
      std::ostringstream msg;
      msg << "initial density " << r << " is not positive at (" << x[0] << ", " << x[1] << ", "
          << x[2] << ")";
      throw PositivityViolation(msg.str());
    }
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  };
  for (const Point& v : mesh_->vertices()) sample(v);
  for (int cell = 0; cell < mesh_->n_cells(); ++cell) {
    const AffineMap& map = mesh_->affine_map(cell);
    for (const Point& xi : c.rule->points) sample(map.to_physical(xi));
  }
  if (!config_.rho_min) config_.rho_min = lo;
  if (!config_.rho_max) config_.rho_max = hi;
  config_.validate();

  StepState s{0, 0.0, project_dg(rho_space_, rho0), interpolate_mini(u_space_, u0, &warnings_),
              FeField(p_space_), FeField(projection_->space())};
  s.w = projection_->project(s.u);
  return s;
}

FeField Scheme::density_step(const StepState& previous) {
  Cache& c = *cache_;
  const int step_index = previous.n + 1;
  const double t = step_index * config_.tau;
  const double tau = config_.tau;

  SparseMatrix a = assemble_facet_upwind(previous.w, *rho_space_, *rho_space_);
  a.scale(tau);
  const FormCoefficients coeffs{&previous.w};
  add_scaled_subset(a, assemble_matrix(Form::Transport, *rho_space_, *rho_space_, coeffs), tau);
  add_scaled_subset(a, c.rho_mass, 1.0);

  std::vector<double> rhs = c.rho_mass.multiply(previous.rho.coeffs());
  c.rho_load.assign(rho_space_->n_dofs(), 0.0);
  if (config_.sources) {
    evaluate_sources(t);
    const int nq = c.rule->size();
    const int nl = c.tab_rho.n_functions;
    for (int cell = 0; cell < mesh_->n_cells(); ++cell) {
      const double det = std::abs(mesh_->affine_map(cell).determinant);
      const auto dofs = rho_space_->cell_dofs(cell);
      for (int q = 0; q < nq; ++q) {
        const double wf = c.rule->weights[q] * det * c.sources[cell * nq + q].f;
        for (int i = 0; i < nl; ++i) c.rho_load[dofs[i]] += wf * c.tab_rho.value(q, i);
      }
    }
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += tau * c.rho_load[i];
  }
  check_finite(a.values(), step_index, "density matrix");
  check_finite(rhs, step_index, "density right-hand side");

  // Mass dominated; GMRES converges in a handful of iterations, where a
  // sparse LU of the P2_dG system would fill in heavily. The tight tolerance
  // keeps the mass drift (sum of the residual) negligible.
  KrylovOptions options;
  options.tolerance = std::min(config_.solver_tolerance, 1e-13);
  auto [x, report] = solve_krylov(a, rhs, options);
  c.last_density_iterations = report.iterations;
  check_finite(x, step_index, "density solve");
  return FeField(rho_space_, std::move(x));
}

std::pair<FeField, FeField> Scheme::velocity_step(const StepState& previous, const FeField& rho) {
  Cache& c = *cache_;
  const int d = mesh_->dim();
  const int step_index = previous.n + 1;
  const double t = step_index * config_.tau;
  const double tau = config_.tau;
  const double mu = config_.mu;
  const int nq = c.rule->size();
  const int nb = d + 2;  // scalar P1 + bubble functions per component
  const int bub = d + 1;  // local index of the bubble
  const int np = d + 1;
  if (config_.sources) evaluate_sources(t);

  SparseMatrix k = c.velocity_pattern;
  k.set_zero();
  std::vector<double> rhs(c.n_r + c.n_p, 0.0);
  c.u_load.assign(c.n_u, 0.0);
  const int row_len = np + np + 1;
  c.bubble_rows.assign(static_cast<std::size_t>(mesh_->n_cells()) * d * row_len, 0.0);

  std::vector<double> rho_old_local(c.tab_rho.n_functions), rho_new_local(c.tab_rho.n_functions);
  std::vector<double> chi_old(nq), chi_new(nq), tmp(nq);
  std::vector<double> u_local(u_space_->local_size());
  std::vector<Vec3> u_old(nq);
  std::vector<Vec3> grads(static_cast<std::size_t>(nq) * nb);
  // s_local: scalar block, row = test, col = trial. div_local[i][comp][a] =
  // (psi_i, d_comp phi_a). r_local: load per component and scalar function.
  std::vector<double> s_local(nb * nb), div_local(np * d * nb), r_local(d * nb);
  std::vector<double> kuu(np * np), kup(d * np * np), kpu(np * d * np), kpp(np * np), rp(np);
  std::vector<int> rdofs(d * np), pdofs(np);

  for (int cell = 0; cell < mesh_->n_cells(); ++cell) {
    const AffineMap& map = mesh_->affine_map(cell);
    const double det = std::abs(map.determinant);
    previous.rho.gather(cell, rho_old_local);
    rho.gather(cell, rho_new_local);
    scalar_values(c.tab_rho, rho_old_local, tmp);
    for (int q = 0; q < nq; ++q) chi_old[q] = cutoff(tmp[q], config_);
    scalar_values(c.tab_rho, rho_new_local, tmp);
    for (int q = 0; q < nq; ++q) chi_new[q] = cutoff(tmp[q], config_);
    previous.u.gather(cell, u_local);
    for (int q = 0; q < nq; ++q) {
      Vec3 w{};
      for (int comp = 0; comp < d; ++comp) {
        for (int a = 0; a < nb; ++a) w[comp] += u_local[comp * nb + a] * c.tab_u.value(q, a);
      }
      u_old[q] = w;
      for (int a = 0; a < nb; ++a) {
        grads[q * nb + a] = matvec_transposed(map.inverse, c.tab_u.ref_grad(q, a));
      }
    }

    std::fill(s_local.begin(), s_local.end(), 0.0);
    std::fill(div_local.begin(), div_local.end(), 0.0);
    std::fill(r_local.begin(), r_local.end(), 0.0);
    const auto udofs = u_space_->cell_dofs(cell);
    for (int q = 0; q < nq; ++q) {
      const double wq = c.rule->weights[q] * det;
      const double mass_coef = chi_old[q] / tau + 0.5 * (chi_new[q] - chi_old[q]) / tau;
      const Vec3& w = u_old[q];
      for (int b = 0; b < nb; ++b) {
        const double phib = c.tab_u.value(q, b);
        const Vec3& gb = grads[q * nb + b];
        const double w_gb = dot(w, gb);
        for (int a = 0; a < nb; ++a) {
          const double phia = c.tab_u.value(q, a);
          const Vec3& ga = grads[q * nb + a];
          const double v = mass_coef * phia * phib +
                           0.5 * chi_new[q] * (phib * dot(w, ga) - phia * w_gb) +
                           mu * dot(ga, gb);
          s_local[b * nb + a] += wq * v;
        }
        for (int comp = 0; comp < d; ++comp) {
          r_local[comp * nb + b] += wq * chi_old[q] * w[comp] / tau * phib;
          if (config_.sources) {
            const double gl = wq * c.sources[cell * nq + q].g[comp] * phib;
            r_local[comp * nb + b] += gl;
            c.u_load[udofs[comp * nb + b]] += gl;
          }
        }
      }
      for (int i = 0; i < np; ++i) {
        const double psi = c.tab_p.value(q, i);
        for (int comp = 0; comp < d; ++comp) {
          for (int a = 0; a < nb; ++a) {
            div_local[(i * d + comp) * nb + a] += wq * psi * grads[q * nb + a][comp];
          }
        }
      }
    }

    // Condense the bubbles. Its diagonal entry is positive: the mass
    // coefficient is (chi_old + chi_new) / (2 tau) and the skew part vanishes.
    // Velocity row (comp, b): sum_a S_ba u_a - sum_i D_i,comp,b p_i = r_b.
    // Pressure row i:        -sum_(comp, a) D_i,comp,a u_a       = 0.
    const double sbb = s_local[bub * nb + bub];
    for (int b = 0; b < np; ++b) {
      for (int a = 0; a < np; ++a) {
        kuu[b * np + a] = s_local[b * nb + a] - s_local[b * nb + bub] * s_local[bub * nb + a] / sbb;
      }
    }
    std::fill(kpp.begin(), kpp.end(), 0.0);
    std::fill(rp.begin(), rp.end(), 0.0);
    for (int comp = 0; comp < d; ++comp) {
      // u_bubble = rhs - sum_a cu[a] u_a - sum_i cp[i] p_i
      double* row = &c.bubble_rows[(static_cast<std::size_t>(cell) * d + comp) * row_len];
      double* cu = row;
      double* cp = row + np;
      const double rb = r_local[comp * nb + bub] / sbb;
      for (int a = 0; a < np; ++a) cu[a] = s_local[bub * nb + a] / sbb;
      for (int i = 0; i < np; ++i) cp[i] = -div_local[(i * d + comp) * nb + bub] / sbb;
      row[2 * np] = rb;

      for (int b = 0; b < np; ++b) {
        const double sb = s_local[b * nb + bub];
        for (int i = 0; i < np; ++i) {
          kup[(comp * np + b) * np + i] = -div_local[(i * d + comp) * nb + b] - sb * cp[i];
        }
        const int r = c.reduced_index[udofs[comp * nb + b]];
        rhs[r] += r_local[comp * nb + b] - sb * rb;
      }
      for (int i = 0; i < np; ++i) {
        const double di = div_local[(i * d + comp) * nb + bub];
        for (int a = 0; a < np; ++a) {
          kpu[i * (d * np) + comp * np + a] = -div_local[(i * d + comp) * nb + a] + di * cu[a];
        }
        for (int j = 0; j < np; ++j) kpp[i * np + j] += di * cp[j];
        rp[i] += di * rb;
      }
    }

    for (int comp = 0; comp < d; ++comp) {
      for (int a = 0; a < np; ++a) rdofs[comp * np + a] = c.reduced_index[udofs[comp * nb + a]];
    }
    const auto pd = p_space_->cell_dofs(cell);
    for (int i = 0; i < np; ++i) pdofs[i] = c.n_r + pd[i];
    for (int comp = 0; comp < d; ++comp) {
      k.add_block(std::span<const int>(rdofs).subspan(comp * np, np),
                  std::span<const int>(rdofs).subspan(comp * np, np), kuu);
    }
    k.add_block(rdofs, pdofs, kup);
    k.add_block(pdofs, rdofs, kpu);
    k.add_block(pdofs, pdofs, kpp);
    for (int i = 0; i < np; ++i) rhs[pdofs[i]] += rp[i];
  }

  k.eliminate(c.reduced_fixed);
  for (int i : c.reduced_fixed) rhs[i] = 0.0;
  for (int i : u_space_->constrained_dofs()) c.u_load[i] = 0.0;
  check_finite(k.values(), step_index, "velocity matrix");
  check_finite(rhs, step_index, "velocity right-hand side");

  LinearSystem system{std::move(k), std::move(rhs),
                      Constraint{c.pressure_functional, c.pressure_mode}};
  auto [x, report] = solve_saddle(c.velocity_solver, system, ConstraintStrategy::Pin, c.n_r,
                                  config_.solver_tolerance);
  check_finite(x, step_index, "velocity solve");

  FeField u(u_space_);
  FeField p(p_space_, std::vector<double>(x.begin() + c.n_r, x.end()));
  for (int i = 0; i < c.n_u; ++i) {
    if (c.reduced_index[i] >= 0) u.coeffs()[i] = x[c.reduced_index[i]];
  }
  for (int cell = 0; cell < mesh_->n_cells(); ++cell) {
    const auto udofs = u_space_->cell_dofs(cell);
    const auto pd = p_space_->cell_dofs(cell);
    for (int comp = 0; comp < d; ++comp) {
      const double* row = &c.bubble_rows[(static_cast<std::size_t>(cell) * d + comp) * row_len];
      double ub = row[2 * np];
      for (int a = 0; a < np; ++a) ub -= row[a] * x[c.reduced_index[udofs[comp * nb + a]]];
      for (int i = 0; i < np; ++i) ub -= row[np + i] * p.coeffs()[pd[i]];
      u.coeffs()[udofs[comp * nb + bub]] = ub;
    }
  }
  const double div_res = divergence_residual(u);
  if (!(div_res <= config_.divergence_tolerance)) {
    throw SolverError("velocity step " + std::to_string(step_index) +
                      ": discrete divergence residual " + format_scientific(div_res));
  }
  return {std::move(u), std::move(p)};
}

double Scheme::divergence_residual(const FeField& u) const {
  const std::vector<double> r = cache_->divergence.multiply(u.coeffs());
  double m = 0.0;
  for (double v : r) m = std::max(m, std::abs(v));
  return m;
}

StepDiagnostics Scheme::diagnostics(const StepState& state) const {
  const Cache& c = *cache_;
  const int d = mesh_->dim();
  const int nq = c.rule->size();
  const int nb = d + 2;
  const auto [lo, hi] = cutoff_interval(config_);

  StepDiagnostics out;
  out.n = state.n;
  out.t = state.t;
  std::vector<double> rho_local(c.tab_rho.n_functions), rho_q(nq), u_local(u_space_->local_size());
  std::vector<double> p_local(d + 1), p_q(nq);
  for (int cell = 0; cell < mesh_->n_cells(); ++cell) {
    const double det = std::abs(mesh_->affine_map(cell).determinant);
    state.rho.gather(cell, rho_local);
    scalar_values(c.tab_rho, rho_local, rho_q);
    state.u.gather(cell, u_local);
    state.p.gather(cell, p_local);
    scalar_values(c.tab_p, p_local, p_q);
    for (int i = 0; i <= d; ++i) {
      if (rho_local[i] < lo || rho_local[i] > hi) out.cutoff_active = true;
    }
    for (int q = 0; q < nq; ++q) {
      const double wq = c.rule->weights[q] * det;
      double u2 = 0.0;
      for (int comp = 0; comp < d; ++comp) {
        double v = 0.0;
        for (int a = 0; a < nb; ++a) v += u_local[comp * nb + a] * c.tab_u.value(q, a);
        u2 += v * v;
      }
      out.density_energy += wq * 0.5 * rho_q[q] * rho_q[q];
      out.kinetic_energy += wq * 0.5 * cutoff(rho_q[q], config_) * u2;
      out.mass += wq * rho_q[q];
      out.pressure_mean += wq * p_q[q];
      if (rho_q[q] < lo || rho_q[q] > hi) out.cutoff_active = true;
    }
  }
  out.energy = out.density_energy + out.kinetic_energy;
  out.divergence_residual = divergence_residual(state.u);
  return out;
}

std::pair<StepState, StepDiagnostics> Scheme::step(const StepState& previous) {
  const Cache& c = *cache_;
  const int d = mesh_->dim();
  const int nq = c.rule->size();
  const int nb = d + 2;
  const double tau = config_.tau;

  StepState next{previous.n + 1, (previous.n + 1) * tau, density_step(previous),
                 FeField(u_space_), FeField(p_space_), FeField(projection_->space())};
  auto [u, p] = velocity_step(previous, next.rho);
  next.u = std::move(u);
  next.p = std::move(p);
  next.w = projection_->project(next.u);

  StepDiagnostics diag = diagnostics(next);
  diag.density_iterations = c.last_density_iterations;
  diag.upwind_dissipation = tau * upwind_jump_dissipation(previous.w, next.rho);

  std::vector<double> r_old(c.tab_rho.n_functions), r_new(c.tab_rho.n_functions);
  std::vector<double> ro_q(nq), rn_q(nq);
  std::vector<double> u_old(u_space_->local_size()), u_new(u_space_->local_size());
  for (int cell = 0; cell < mesh_->n_cells(); ++cell) {
    const AffineMap& map = mesh_->affine_map(cell);
    const double det = std::abs(map.determinant);
    previous.rho.gather(cell, r_old);
    next.rho.gather(cell, r_new);
    scalar_values(c.tab_rho, r_old, ro_q);
    scalar_values(c.tab_rho, r_new, rn_q);
    previous.u.gather(cell, u_old);
    next.u.gather(cell, u_new);
    for (int q = 0; q < nq; ++q) {
      const double wq = c.rule->weights[q] * det;
      double du2 = 0.0;
      double grad2 = 0.0;
      for (int comp = 0; comp < d; ++comp) {
        double dv = 0.0;
        Vec3 g{};
        for (int a = 0; a < nb; ++a) {
          dv += (u_new[comp * nb + a] - u_old[comp * nb + a]) * c.tab_u.value(q, a);
          g = g + u_new[comp * nb + a] * matvec_transposed(map.inverse, c.tab_u.ref_grad(q, a));
        }
        du2 += dv * dv;
        grad2 += dot(g, g);
      }
      const double dr = rn_q[q] - ro_q[q];
      diag.density_increment += wq * 0.5 * dr * dr;
      diag.velocity_increment += wq * 0.5 * cutoff(ro_q[q], config_) * du2;
      diag.viscous_dissipation += wq * tau * config_.mu * grad2;
    }
  }
  if (config_.sources) {
    double work = 0.0;
    for (std::size_t i = 0; i < c.rho_load.size(); ++i) work += c.rho_load[i] * next.rho.coeffs()[i];
    for (std::size_t i = 0; i < c.u_load.size(); ++i) work += c.u_load[i] * next.u.coeffs()[i];
    diag.source_work = tau * work;
  }
  return {std::move(next), diag};
}

RunResult Scheme::run(const ScalarFunction& rho0, const VectorFunction& u0,
                      const StepObserver& observer) {
  const int n_steps = config_.steps();
  RunResult result{initialize(rho0, u0), {}};
  result.diagnostics.push_back(diagnostics(result.final_state));
  if (observer) observer(result.final_state, result.diagnostics.back());

  for (int n = 1; n <= n_steps; ++n) {
    try {
      auto [next, diag] = step(result.final_state);
      const StepDiagnostics& prev = result.diagnostics.back();
      if (!config_.sources) {
        if (diag.energy > prev.energy + config_.energy_slack) {
          std::ostringstream msg;
          msg.precision(17);
          msg << "energy increased from " << prev.energy << " to " << diag.energy;
          throw NumericalBreakdown(n, msg.str());
        }
        if (std::abs(diag.mass - prev.mass) > config_.mass_tolerance) {
          std::ostringstream msg;
          msg.precision(17);
          msg << "mass changed from " << prev.mass << " to " << diag.mass;
          throw NumericalBreakdown(n, msg.str());
        }
      }
      result.final_state = std::move(next);
      result.diagnostics.push_back(diag);
      if (observer) observer(result.final_state, result.diagnostics.back());
    } catch (const StepFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw StepFailure(n, result.final_state,
                        "step " + std::to_string(n) + " failed: " + e.what());
    }
  }
  return result;
}

void write_diagnostics_csv(std::ostream& out, const std::vector<StepDiagnostics>& rows) {
  const auto old_precision = out.precision(17);
  out << "n,t,energy,dissipation,mass,cutoff_active\n";
  for (const StepDiagnostics& r : rows) {
    out << r.n << ',' << r.t << ',' << r.energy << ','
        << r.viscous_dissipation + r.upwind_dissipation << ',' << r.mass << ','
        << (r.cutoff_active ? 1 : 0) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace vardens
