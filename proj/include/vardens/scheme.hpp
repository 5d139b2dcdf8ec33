#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vardens/fe_space.hpp"
#include "vardens/linalg.hpp"
#include "vardens/mms.hpp"
#include "vardens/projections.hpp"

namespace vardens {

enum class CutoffMode {
  Strict,    // clamp to [rho_min/2, 3 rho_max/2]
  Widened,   // same with rho_min/factor and rho_max*factor as the bounds
  Disabled,  // chi(s) = s
};

std::string_view to_string(CutoffMode mode);
/// "strict", "widened" or "off". Throws InvalidArgument otherwise.
CutoffMode parse_cutoff_mode(std::string_view name);

/// f and g of the momentum and density equations at (x, t).
using SourceHook = std::function<Sources(const Point&, double)>;

struct SchemeConfig {
  double tau = 1.0 / 64.0;
  double mu = 0.001;
  double T = 0.25;
  std::optional<double> rho_min;
  std::optional<double> rho_max;
  CutoffMode cutoff_mode = CutoffMode::Widened;
  double widen_factor = 1.5;
  double solver_tolerance = kSolverTolerance;
  /// Absolute bound on |(div u, q)| for every pressure basis function q.
  double divergence_tolerance = 1e-10;
  /// Absolute slack of the per-step energy and mass checks (zero sources).
  double energy_slack = 1e-9;
  double mass_tolerance = 1e-10;
  /// Unset means f = 0 and g = 0.
  SourceHook sources;

  /// Number of steps N with N tau = T. Throws ConfigError if T is not an
  /// integer multiple of tau (relative mismatch above 1e-9).
  int steps() const;
  /// Checks tau > 0, mu > 0, T = N tau, positive bounds when the cutoff is on.
  void validate() const;
};

/// Bounds [lo, hi] of the clamp for the configured mode. Disabled reports the
/// strict interval (used only for the cutoff-active flag).
std::pair<double, double> cutoff_interval(const SchemeConfig& config);

/// chi(s). Throws ConfigError when the mode needs bounds that are missing.
double cutoff(double s, const SchemeConfig& config);

struct StepState {
  int n = 0;
  double t = 0.0;
  FeField rho;  // P2_dG
  FeField u;    // P1b vector
  FeField p;    // P1, zero mean
  FeField w;    // RT1, divergence-free projection of u
};

struct StepDiagnostics {
  int n = 0;
  double t = 0.0;
  /// E = 1/2 ||rho||^2 + int 1/2 chi(rho) |u|^2
  double energy = 0.0;
  double density_energy = 0.0;
  double kinetic_energy = 0.0;
  /// tau mu ||grad u^n||^2
  double viscous_dissipation = 0.0;
  /// tau/2 sum_F || |w.nu|^(1/2) [[rho^n]] ||^2 with w = w^{n-1}
  double upwind_dissipation = 0.0;
  /// 1/2 ||rho^n - rho^{n-1}||^2
  double density_increment = 0.0;
  /// 1/2 int chi(rho^{n-1}) |u^n - u^{n-1}|^2
  double velocity_increment = 0.0;
  /// tau (f, rho^n) + tau (g, u^n)
  double source_work = 0.0;
  double mass = 0.0;
  bool cutoff_active = false;
  double divergence_residual = 0.0;
  double pressure_mean = 0.0;
  int density_iterations = 0;

  /// E^{n-1} - E^n minus all dissipation terms plus the source work; zero
  /// up to rounding for every step.
  double balance_residual(double previous_energy) const {
    return previous_energy - energy - viscous_dissipation - upwind_dissipation -
           density_increment - velocity_increment + source_work;
  }
};

/// Aborted time loop: carries the failing step and the last good state.
class StepFailure : public std::runtime_error {
 public:
  StepFailure(int step, StepState last_good, const std::string& what)
      : std::runtime_error(what), step_(step), last_good_(std::move(last_good)) {}

  int step() const noexcept { return step_; }
  const StepState& last_good() const noexcept { return last_good_; }

 private:
  int step_;
  StepState last_good_;
};

struct RunResult {
  StepState final_state;
  std::vector<StepDiagnostics> diagnostics;  // entry 0 is the initial state
};

/// Called after initialization (n = 0) and after every step.
using StepObserver = std::function<void(const StepState&, const StepDiagnostics&)>;

/// Linearized backward Euler scheme: upwind P2_dG density transported by the
/// divergence-free RT1 projection of the previous velocity, then a MINI
/// velocity-pressure solve, then the projection of the new velocity.
class Scheme {
 public:
  Scheme(std::shared_ptr<const Mesh> mesh, SchemeConfig config);
  ~Scheme();
  Scheme(const Scheme&) = delete;
  Scheme& operator=(const Scheme&) = delete;

  /// rho_h = project_dg(rho0), u_h = interpolate_mini(u0), p_h = 0, w_h its
  /// projection. Fills rho_min / rho_max from samples of rho0 when unset.
  /// Throws PositivityViolation if a sample of rho0 is not positive.
  StepState initialize(const ScalarFunction& rho0, const VectorFunction& u0);

  FeField density_step(const StepState& previous);
  std::pair<FeField, FeField> velocity_step(const StepState& previous, const FeField& rho);

  /// One full step with its diagnostics.
  std::pair<StepState, StepDiagnostics> step(const StepState& previous);
  StepDiagnostics diagnostics(const StepState& state) const;

  /// Initializes and runs N = T/tau steps. With zero sources, checks that
  /// the energy does not grow and the mass does not drift per step. Throws
  /// StepFailure on any error after initialization.
  RunResult run(const ScalarFunction& rho0, const VectorFunction& u0,
                const StepObserver& observer = {});

  const SchemeConfig& config() const { return config_; }
  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const FeSpace>& density_space() const { return rho_space_; }
  const std::shared_ptr<const FeSpace>& velocity_space() const { return u_space_; }
  const std::shared_ptr<const FeSpace>& pressure_space() const { return p_space_; }
  const RtProjectionWorkspace& projection() const { return *projection_; }

  /// |(div u, q_i)| maximized over the pressure basis.
  double divergence_residual(const FeField& u) const;

  std::vector<std::string> warnings() const { return warnings_; }

 private:
  struct Cache;

  void evaluate_sources(double t);
  void check_finite(std::span<const double> v, int step, const char* what) const;

  std::shared_ptr<const Mesh> mesh_;
  SchemeConfig config_;
  std::shared_ptr<const FeSpace> rho_space_;
  std::shared_ptr<const FeSpace> u_space_;
  std::shared_ptr<const FeSpace> p_space_;
  std::unique_ptr<RtProjectionWorkspace> projection_;
  std::unique_ptr<Cache> cache_;
  std::vector<std::string> warnings_;
};

/// Header and one row per step: n,t,energy,dissipation,mass,cutoff_active.
/// dissipation is the sum of the viscous and upwind terms.
void write_diagnostics_csv(std::ostream& out, const std::vector<StepDiagnostics>& rows);

}  // namespace vardens
