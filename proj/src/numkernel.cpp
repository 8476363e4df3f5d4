#include "loopsol/numkernel.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace loopsol {

namespace {

std::pair<std::vector<double>, std::vector<double>> compute_gl(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Tricomi initial guess, then Newton on P_n via the three-term
    // recurrence. Converges in a handful of steps for all n used here.
    double xi = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 60; ++it) {
      double p0 = 1.0, p1 = xi;
      for (int k = 2; k <= n; ++k) {
        double pk = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
      double dx = p1 / dp;
      xi -= dx;
      if (std::abs(dx) < 1e-16 * (1.0 + std::abs(xi))) break;
    }
    x[i] = -xi;
    x[n - 1 - i] = xi;
    double wi = 2.0 / ((1.0 - xi * xi) * dp * dp);
    w[i] = wi;
    w[n - 1 - i] = wi;
  }
  return {std::move(x), std::move(w)};
}

std::map<int, std::pair<std::vector<double>, std::vector<double>>> gl_cache;
std::mutex gl_mutex;

// Integral of g over [0, 1] with an n-point rule.
Cplx gl01(const std::function<Cplx(double)>& g, int n, long& evals) {
  const auto& [xs, ws] = gauss_legendre(n);
  Cplx acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += ws[i] * g(0.5 * (xs[i] + 1.0));
    ++evals;
  }
  return 0.5 * acc;
}

// Node doubling until the successive difference is below tol. The base of 4
// keeps the 12-doubling ceiling at 16384 nodes, where the O(n^2) node solve
// is still cheap; smooth pieces converge by n = 64 anyway.
Cplx adaptive01(const std::function<Cplx(double)>& g, double tol, double& err,
                long& evals) {
  int n = 4;
  Cplx prev = gl01(g, n, evals);
  for (int doubling = 1; doubling <= 12; ++doubling) {
    n *= 2;
    Cplx cur = gl01(g, n, evals);
    double diff = std::abs(cur - prev);
    if (!std::isfinite(diff))
      fail(ErrKind::NonConvergence, "non-finite value in quadrature");
    if (diff <= tol) {
      err = diff;
      return cur;
    }
    prev = cur;
  }
  fail(ErrKind::NonConvergence,
       "node doubling exhausted before reaching tolerance");
}

}  // namespace

const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(
    int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n < 1");
  std::lock_guard<std::mutex> lock(gl_mutex);
  auto it = gl_cache.find(n);
  if (it == gl_cache.end()) it = gl_cache.emplace(n, compute_gl(n)).first;
  return it->second;
}

QuadratureResult integrate_path(const std::function<Cplx(Cplx)>& f,
                                const ComplexPath& path, double tol) {
  if (!(tol > 0)) throw std::invalid_argument("integrate_path: tol <= 0");
  if (path.pts.size() < 2)
    throw std::invalid_argument("integrate_path: fewer than two waypoints");
  const size_t nseg = path.pts.size() - 1;
  if (!path.flags.empty() && path.flags.size() != nseg)
    throw std::invalid_argument("integrate_path: flags/segment mismatch");

  // A smooth piece is g(t) on [0,1] already carrying the dx/dt factor.
  std::vector<std::function<Cplx(double)>> pieces;
  for (size_t i = 0; i < nseg; ++i) {
    const Cplx a = path.pts[i], b = path.pts[i + 1];
    if (a == b)
      throw std::invalid_argument("integrate_path: repeated waypoint");
    const SegFlags fl = path.flags.empty() ? SegFlags{} : path.flags[i];
    if (fl.at_start && fl.at_end) {
      const Cplx m = 0.5 * (a + b);
      pieces.push_back([f, a, m](double t) {
        const Cplx d = m - a;
        return f(a + t * t * d) * (2.0 * t * d);
      });
      pieces.push_back([f, b, m](double t) {
        const Cplx d = m - b;
        return -f(b + t * t * d) * (2.0 * t * d);
      });
    } else if (fl.at_start) {
      pieces.push_back([f, a, b](double t) {
        const Cplx d = b - a;
        return f(a + t * t * d) * (2.0 * t * d);
      });
    } else if (fl.at_end) {
      pieces.push_back([f, a, b](double t) {
        const Cplx d = a - b;
        return -f(b + t * t * d) * (2.0 * t * d);
      });
    } else {
      pieces.push_back([f, a, b](double t) {
        return f(a + t * (b - a)) * (b - a);
      });
    }
  }

  QuadratureResult res;
  const double piece_tol = tol / static_cast<double>(pieces.size());
  for (const auto& g : pieces) {
    double err = 0.0;
    res.value += adaptive01(g, piece_tol, err, res.evaluations);
    res.error_estimate += err;
  }
  return res;
}

Cplx finite_diff(const std::function<Cplx(double)>& f, double x, int order,
                 double h) {
  if (order < 1 || order > 3)
    throw std::invalid_argument("finite_diff: order must be 1, 2 or 3");
  if (!(h > 0)) throw std::invalid_argument("finite_diff: h <= 0");
  auto stencil = [&](double hh) -> Cplx {
    switch (order) {
      case 1:
        return (f(x + hh) - f(x - hh)) / (2.0 * hh);
      case 2:
        return (f(x + hh) - 2.0 * f(x) + f(x - hh)) / (hh * hh);
      default:
        return (f(x + 2.0 * hh) - 2.0 * f(x + hh) + 2.0 * f(x - hh) -
                f(x - 2.0 * hh)) /
               (2.0 * hh * hh * hh);
    }
  };
  // One Richardson level: the stencils are O(h^2) accurate, so
  // (4 D(h/2) - D(h)) / 3 cancels the leading term.
  return (4.0 * stencil(0.5 * h) - stencil(h)) / 3.0;
}

Mat2 mat2_inv(const Mat2& m) {
  const Cplx dt = det(m);
  if (std::abs(dt) < 1e-300)
    fail(ErrKind::SingularMatrix, "2x2 determinant below 1e-300");
  return {m.d / dt, -m.b / dt, -m.c / dt, m.a / dt};
}

}  // namespace loopsol
