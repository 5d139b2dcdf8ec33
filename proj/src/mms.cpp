#include "vardens/mms.hpp"

#include <numbers>

#include "vardens/errors.hpp"
#include "vardens/quadrature.hpp"

namespace vardens {

namespace {

constexpr double kPi = std::numbers::pi;

template <class S>
S sq(const S& a) {
  return a * a;
}

struct Square2d {
  template <class S>
  CaseFields<S> operator()(const S& x, const S& y, const S& /*z*/, const S& t) const {
    using std::cos;
    using std::sin;
    const S st = sin(t);
    CaseFields<S> r;
    r.rho = 2.0 + x * (x - 1.0) * cos(st) + y * (y - 1.0) * sin(st);
    r.u[0] = sq(sin(kPi * x)) * sin(2.0 * kPi * y);
    r.u[1] = -sin(2.0 * kPi * x) * sq(sin(kPi * y));
    r.u[2] = S(0.0);
    r.p = t * x + y - (t + 1.0) / 2.0;
    return r;
  }
};

template <class S>
std::array<S, 3> cube_velocity(const S& x, const S& y, const S& z) {
  using std::sin;
  const S sx = sin(kPi * x), sy = sin(kPi * y), sz = sin(kPi * z);
  const S s2x = sin(2.0 * kPi * x), s2y = sin(2.0 * kPi * y), s2z = sin(2.0 * kPi * z);
  return {sq(sx) * s2y * s2z, s2x * sq(sy) * s2z, -2.0 * s2x * s2y * sq(sz)};
}

template <class S>
S cube_pressure(const S& x, const S& y, const S& z, const S& t) {
  return t * (x + y) + z - (t + 1.0) / 2.0;
}

struct Cube3d {
  template <class S>
  CaseFields<S> operator()(const S& x, const S& y, const S& z, const S& t) const {
    using std::sin;
    CaseFields<S> r;
    r.rho = 2.0 + (sin(kPi * x) + sin(kPi * y) + sin(kPi * z)) / 3.0 *
                      sin(kPi * t + kPi / 2.0);
    r.u = cube_velocity(x, y, z);
    r.p = cube_pressure(x, y, z, t);
    return r;
  }
};

struct Cube3dNonsmooth {
  double c;
  std::atomic<long>* kink_hits;

  template <class S>
  S g(const S& s) const {
    if (value_of(s) == 0.5) kink_hits->fetch_add(1, std::memory_order_relaxed);
    return pow_abs(s - 0.5, c);
  }

  template <class S>
  CaseFields<S> operator()(const S& x, const S& y, const S& z, const S& t) const {
    using std::cos;
    using std::sin;
    const S st = sin(t);
    CaseFields<S> r;
    r.rho = 2.0 + g(x) * cos(st) + (g(y) + g(z)) * sin(st);
    r.u = cube_velocity(x, y, z);
    r.p = cube_pressure(x, y, z, t);
    return r;
  }
};

template <class Functor>
ExactCase wrap(std::string name, int dim, std::optional<double> exponent, Functor fn,
               std::shared_ptr<std::atomic<long>> hits) {
  auto as_double = [fn](const Point& x, double t) { return fn(x[0], x[1], x[2], t); };
  auto as_dual = [fn](const std::array<Dual4, 4>& v) { return fn(v[0], v[1], v[2], v[3]); };
  return ExactCase(std::move(name), dim, exponent, as_double, as_dual, std::move(hits));
}

}  // namespace

ExactCase::ExactCase(std::string name, int dim, std::optional<double> exponent,
                     DoubleFields fields, DualFields dual_fields,
                     std::shared_ptr<std::atomic<long>> kink_hits)
    : name_(std::move(name)),
      dim_(dim),
      exponent_(exponent),
      fields_(std::move(fields)),
      dual_fields_(std::move(dual_fields)),
      kink_hits_(std::move(kink_hits)) {}

double ExactCase::rho(const Point& x, double t) const { return fields_(x, t).rho; }

Vec3 ExactCase::u(const Point& x, double t) const {
  const auto u = fields_(x, t).u;
  return {u[0], u[1], u[2]};
}

double ExactCase::raw_pressure_mean(double t) const {
  // Tensor Gauss-Legendre on the unit square/cube.
  const QuadratureRule line = simplex_rule(1, 7);
  double mean = 0.0;
  const int nz = dim_ == 3 ? line.size() : 1;
  for (int i = 0; i < line.size(); ++i) {
    for (int j = 0; j < line.size(); ++j) {
      for (int k = 0; k < nz; ++k) {
        const double wz = dim_ == 3 ? line.weights[k] : 1.0;
        const Point x{line.points[i][0], line.points[j][0],
                      dim_ == 3 ? line.points[k][0] : 0.0};
        mean += line.weights[i] * line.weights[j] * wz * fields_(x, t).p;
      }
    }
  }
  return mean;
}

double ExactCase::p(const Point& x, double t) const {
  return fields_(x, t).p - raw_pressure_mean(t);
}

CaseFields<Dual4> ExactCase::evaluate(const Point& x, double t) const {
  const std::array<Dual4, 4> vars{Dual4::variable(x[0], 0), Dual4::variable(x[1], 1),
                                  Dual4::variable(x[2], 2), Dual4::variable(t, kTimeVariable)};
  return dual_fields_(vars);
}

Sources ExactCase::sources(const Point& x, double t, double mu) const {
  const CaseFields<Dual4> fd = evaluate(x, t);
  const int d = dim_;
  Sources s;
  s.f = fd.rho.d[kTimeVariable];
  for (int j = 0; j < d; ++j) s.f += fd.u[j].v * fd.rho.d[j];
  for (int i = 0; i < d; ++i) {
    double convection = 0.0;
    double laplacian = 0.0;
    for (int j = 0; j < d; ++j) {
      convection += fd.u[j].v * fd.u[i].d[j];
      laplacian += fd.u[i].dd[j];
    }
    s.g[i] = fd.rho.v * (fd.u[i].d[kTimeVariable] + convection) + fd.p.d[i] - mu * laplacian;
  }
  return s;
}

ExactCase make_case(std::string_view name) {
  if (name == "square2d") return wrap("square2d", 2, std::nullopt, Square2d{}, nullptr);
  if (name == "cube3d") return wrap("cube3d", 3, std::nullopt, Cube3d{}, nullptr);
  if (name == "cube3d_nonsmooth") {
    auto hits = std::make_shared<std::atomic<long>>(0);
    return wrap("cube3d_nonsmooth", 3, kNonsmoothExponent,
                Cube3dNonsmooth{kNonsmoothExponent, hits.get()}, hits);
  }
  throw InvalidArgument("unknown case '" + std::string(name) +
                        "' (expected square2d, cube3d or cube3d_nonsmooth)");
}

double source_f(const ExactCase& c, const Point& x, double t) {
  return c.sources(x, t, 0.0).f;
}

Vec3 source_g(const ExactCase& c, const Point& x, double t, double mu) {
  return c.sources(x, t, mu).g;
}

}  // namespace vardens
