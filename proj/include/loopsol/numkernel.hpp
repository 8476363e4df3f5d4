#pragma once

#include <complex>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "loopsol/error.hpp"

namespace loopsol {

using Cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline const Cplx kI{0.0, 1.0};

// Gauss-Legendre nodes and weights on [-1, 1], cached per node count.
// Thread-safe.
const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(
    int n);

// A polyline contour. flags[i] marks an inverse-square-root singularity of
// the integrand at an endpoint of segment pts[i] -> pts[i+1]; such
// singularities are integrable and handled by substitution.
struct SegFlags {
  bool at_start = false;
  bool at_end = false;
};

struct ComplexPath {
  std::vector<Cplx> pts;        // at least 2, consecutive points distinct
  std::vector<SegFlags> flags;  // size pts.size()-1; empty means no flags

  static ComplexPath line(Cplx a, Cplx b, bool sing_a = false,
                          bool sing_b = false) {
    return ComplexPath{{a, b}, {SegFlags{sing_a, sing_b}}};
  }
  static ComplexPath polyline(std::vector<Cplx> p) {
    ComplexPath path;
    path.pts = std::move(p);
    path.flags.assign(path.pts.size() >= 1 ? path.pts.size() - 1 : 0, {});
    return path;
  }
};

struct QuadratureResult {
  Cplx value{};
  double error_estimate = 0.0;
  long evaluations = 0;
};

// Adaptive Gauss-Legendre along the polyline: nodes double from 4 until the
// successive difference meets tol (absolute), up to 12 doublings per smooth
// piece. Square-root endpoint singularities are removed by x = a + t^2*(b-a)
// before quadrature.
QuadratureResult integrate_path(const std::function<Cplx(Cplx)>& f,
                                const ComplexPath& path, double tol);

// Central finite difference of order 1, 2 or 3 with one Richardson step
// (h and h/2). Independent oracle; analytic derivatives live in the function
// modules.
Cplx finite_diff(const std::function<Cplx(double)>& f, double x, int order,
                 double h);

// Default step used by callers: balances truncation and roundoff at double
// precision for analytic f.
inline double fd_step(double x) { return 1e-3 * (1.0 + std::abs(x)); }

struct Vec2 {
  Cplx x{}, y{};
};

inline Vec2 operator+(const Vec2& a, const Vec2& b) {
  return {a.x + b.x, a.y + b.y};
}
inline Vec2 operator-(const Vec2& a, const Vec2& b) {
  return {a.x - b.x, a.y - b.y};
}
inline Vec2 operator*(Cplx s, const Vec2& v) { return {s * v.x, s * v.y}; }
inline Cplx dot(const Vec2& a, const Vec2& b) {
  return a.x * b.x + a.y * b.y;  // bilinear, no conjugation
}

// Row-major 2x2 complex matrix [[a, b], [c, d]].
struct Mat2 {
  Cplx a{}, b{}, c{}, d{};
};

inline Mat2 operator+(const Mat2& m, const Mat2& n) {
  return {m.a + n.a, m.b + n.b, m.c + n.c, m.d + n.d};
}
inline Mat2 operator-(const Mat2& m, const Mat2& n) {
  return {m.a - n.a, m.b - n.b, m.c - n.c, m.d - n.d};
}
inline Mat2 operator*(Cplx s, const Mat2& m) {
  return {s * m.a, s * m.b, s * m.c, s * m.d};
}
inline Mat2 operator*(const Mat2& m, const Mat2& n) {
  return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d,
          m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
}
inline Vec2 operator*(const Mat2& m, const Vec2& v) {
  return {m.a * v.x + m.b * v.y, m.c * v.x + m.d * v.y};
}
inline Mat2 transpose(const Mat2& m) { return {m.a, m.c, m.b, m.d}; }
inline Cplx det(const Mat2& m) { return m.a * m.d - m.b * m.c; }

Mat2 mat2_inv(const Mat2& m);  // SingularMatrix below |det| = 1e-300

// Evaluate sum coeffs[k] * x^k (ascending order).
inline Cplx horner(const std::vector<Cplx>& coeffs, Cplx x) {
  Cplx acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
    acc = acc * x + *it;
  return acc;
}

// Deterministic sampling helper. mt19937_64 has a pinned sequence across
// platforms and the [0,1) construction below avoids the implementation-
// defined std::uniform_real_distribution, so seeded runs are byte-identical
// everywhere.
class Rng {
 public:
  explicit Rng(unsigned long long seed) : eng_(seed) {}
  double unit() {  // [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  Cplx box(Cplx corner, Cplx span) {
    return corner + Cplx{span.real() * unit(), span.imag() * unit()};
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace loopsol
