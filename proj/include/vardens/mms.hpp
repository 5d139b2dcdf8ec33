#pragma once

#include <array>
#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "vardens/dual.hpp"
#include "vardens/geometry.hpp"

namespace vardens {

/// Independent variables of the manufactured fields: x, y, z, t.
using Dual4 = Dual<4>;
inline constexpr int kTimeVariable = 3;

/// Closed-form fields of a case evaluated in scalar type S. The pressure is
/// the raw closed form, before re-centering.
template <class S>
struct CaseFields {
  S rho;
  std::array<S, 3> u;
  S p;
};

struct Sources {
  double f = 0.0;
  Vec3 g{};
};

/// A manufactured solution (rho, u, p) with sources derived by forward-mode
/// differentiation:
///   f = d_t rho + u . grad rho
///   g = rho d_t u + rho (u . grad) u + grad p - mu lap u
/// The 2D case ignores z and returns zero third components.
class ExactCase {
 public:
  using DoubleFields = std::function<CaseFields<double>(const Point&, double)>;
  using DualFields = std::function<CaseFields<Dual4>(const std::array<Dual4, 4>&)>;

  ExactCase(std::string name, int dim, std::optional<double> exponent, DoubleFields fields,
            DualFields dual_fields, std::shared_ptr<std::atomic<long>> kink_hits);

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  /// Smoothness exponent c of the nonsmooth case.
  std::optional<double> exponent() const { return exponent_; }

  double rho(const Point& x, double t) const;
  Vec3 u(const Point& x, double t) const;
  /// Zero-mean pressure: the closed form minus its numerically integrated
  /// mean over the domain.
  double p(const Point& x, double t) const;
  double raw_pressure_mean(double t) const;

  CaseFields<Dual4> evaluate(const Point& x, double t) const;
  Sources sources(const Point& x, double t, double mu) const;

  /// Number of evaluations that landed exactly on the nonsmooth set
  /// (derivatives there use the right limit).
  long kink_hits() const { return kink_hits_ ? kink_hits_->load() : 0; }
  void reset_kink_hits() const {
    if (kink_hits_) kink_hits_->store(0);
  }

 private:
  std::string name_;
  int dim_;
  std::optional<double> exponent_;
  DoubleFields fields_;
  DualFields dual_fields_;
  std::shared_ptr<std::atomic<long>> kink_hits_;
};

/// "square2d", "cube3d" or "cube3d_nonsmooth". Throws InvalidArgument
/// otherwise.
ExactCase make_case(std::string_view name);

double source_f(const ExactCase& c, const Point& x, double t);
Vec3 source_g(const ExactCase& c, const Point& x, double t, double mu);

inline constexpr double kNonsmoothExponent = 1.51;

}  // namespace vardens
