#include "loopsol/elliptic.hpp"

#include <algorithm>
#include <cmath>

namespace loopsol {

namespace {

// Roots of 4x^3 - g2 x - g3 by Durand-Kerner on the monic form, polished
// with Newton on the original quartic-coefficient form.
std::array<Cplx, 3> cubic_roots(Cplx g2, Cplx g3) {
  const Cplx p = -g2 / 4.0, q = -g3 / 4.0;
  const double scale = std::max(
      {1.0, std::sqrt(std::abs(p)), std::cbrt(std::abs(q))});
  const Cplx w{0.4, 0.9};
  std::array<Cplx, 3> r{scale * w, scale * w * w, scale * w * w * w};
  for (int it = 0; it < 200; ++it) {
    double step = 0.0;
    for (int i = 0; i < 3; ++i) {
      const Cplx fi = (r[i] * r[i] + p) * r[i] + q;
      Cplx denom = 1.0;
      for (int j = 0; j < 3; ++j)
        if (j != i) denom *= r[i] - r[j];
      const Cplx d = fi / denom;
      r[i] -= d;
      step = std::max(step, std::abs(d));
    }
    if (step < 1e-15 * scale) break;
  }
  for (auto& x : r) {
    for (int it = 0; it < 4; ++it) {
      const Cplx f = (4.0 * x * x - g2) * x - g3;
      const Cplx df = 12.0 * x * x - g2;
      if (std::abs(df) < 1e-300) break;
      x -= f / df;
    }
  }
  std::sort(r.begin(), r.end(), [](Cplx a, Cplx b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  return r;
}

constexpr double kTailFactor = 1e-17;

struct ThetaPack {
  std::array<Cplx, 6> at_z{};   // derivative stack at the requested argument
  std::array<Cplx, 6> at_z0{};  // stack at the reduced argument
  Cplx log_factor{};            // theta(z) = exp(log_factor) * theta(z0)
  long m = 0, n = 0;
};

// Sum the series at the reduced argument, then transport the derivative
// stack through the quasi-periodicity factor
//   theta(z0 + m tau + n) = (-1)^(m+n) exp(-pi i (m^2 tau + 2 m z0)) theta(z0).
ThetaPack theta_pack(Cplx z, Cplx tau) {
  if (!(tau.imag() > 0)) fail(ErrKind::BadModulus, "Im(tau) <= 0");
  ThetaPack pk;
  pk.m = std::lround(z.imag() / tau.imag());
  const Cplx zm = z - static_cast<double>(pk.m) * tau;
  pk.n = std::lround(zm.real());
  const Cplx z0 = zm - static_cast<double>(pk.n);

  const Cplx two_pi_i = 2.0 * kPi * kI;
  double abs_sum = 0.0;
  int quiet = 0;
  for (int j = 1; j <= 500 && quiet < 2; ++j) {
    const double half = j - 0.5;
    double ring = 0.0;
    for (double sgn : {1.0, -1.0}) {
      const double idx = sgn * half;
      const Cplx term = std::exp(
          two_pi_i * (0.5 * tau * idx * idx + idx * (z0 - 0.5) + 0.25));
      const Cplx dmul = two_pi_i * idx;
      Cplx acc = term;
      pk.at_z0[0] += acc;
      for (int k = 1; k <= 5; ++k) {
        acc *= dmul;
        pk.at_z0[k] += acc;
      }
      ring += std::abs(term);
      abs_sum += std::abs(term);
    }
    const double weight = 1.0 + std::pow(2.0 * kPi * half, 5);
    if (j >= 3 && weight * ring <= kTailFactor * (abs_sum + 1e-30))
      ++quiet;
    else
      quiet = 0;
  }
  if (quiet < 2)
    fail(ErrKind::BadModulus, "theta series failed to truncate");

  const double md = static_cast<double>(pk.m);
  pk.log_factor = kI * kPi * static_cast<double>(pk.m + pk.n) -
                  kI * kPi * (md * md * tau + 2.0 * md * z0);
  const Cplx factor = std::exp(pk.log_factor);
  const Cplx dmul = -two_pi_i * md;  // derivative of the exponent
  // Leibniz transport: th^(k)(z) = factor * sum_j C(k,j) dmul^j th^(k-j)(z0)
  static const double binom[6][6] = {{1, 0, 0, 0, 0, 0},  {1, 1, 0, 0, 0, 0},
                                     {1, 2, 1, 0, 0, 0},  {1, 3, 3, 1, 0, 0},
                                     {1, 4, 6, 4, 1, 0},  {1, 5, 10, 10, 5, 1}};
  for (int k = 0; k <= 5; ++k) {
    Cplx s = 0.0, dpow = 1.0;
    for (int j = 0; j <= k; ++j) {
      s += binom[k][j] * dpow * pk.at_z0[k - j];
      dpow *= dmul;
    }
    pk.at_z[k] = factor * s;
  }
  return pk;
}

// Derivatives 2..5 of log f from the derivative stack of f.
std::array<Cplx, 4> log_derivs(const std::array<Cplx, 6>& f) {
  const Cplx a = f[1] / f[0], b = f[2] / f[0], c = f[3] / f[0],
             d = f[4] / f[0], e = f[5] / f[0];
  const Cplx a2 = a * a;
  std::array<Cplx, 4> L;
  L[0] = b - a2;
  L[1] = c - 3.0 * b * a + 2.0 * a2 * a;
  L[2] = d - 4.0 * c * a - 3.0 * b * b + 12.0 * b * a2 - 6.0 * a2 * a2;
  L[3] = e - 5.0 * d * a - 10.0 * c * b + 20.0 * c * a2 + 30.0 * b * b * a -
         60.0 * b * a2 * a + 24.0 * a2 * a2 * a;
  return L;
}

// (log theta1)'' .. ^(5) at z = u/(2 omega1), plus the pole guard.
std::array<Cplx, 4> theta_log_stack(Cplx u, const EllipticCurveG1& c) {
  if (lattice_distance(u, c) <= 1e-8)
    fail(ErrKind::PoleProximity, "argument within 1e-8 of the period lattice");
  const Cplx z = u / (2.0 * c.omega1);
  return log_derivs(theta_pack(z, c.tau).at_z);
}

bool segments_cross(Cplx p1, Cplx p2, Cplx q1, Cplx q2) {
  auto cross = [](Cplx a, Cplx b) {
    return a.real() * b.imag() - a.imag() * b.real();
  };
  const double d1 = cross(p2 - p1, q1 - p1), d2 = cross(p2 - p1, q2 - p1);
  const double d3 = cross(q2 - q1, p1 - q1), d4 = cross(q2 - q1, p2 - q1);
  return d1 * d2 < 0 && d3 * d4 < 0;
}

bool crosses_right_ray(Cplx p, Cplx q, Cplx base, double reach) {
  return segments_cross(p, q, base, base + reach);
}

double dist_point_segment(Cplx x, Cplx a, Cplx b) {
  const Cplx d = b - a;
  const double L2 = std::norm(d);
  if (L2 == 0.0) return std::abs(x - a);
  double t = ((x - a).real() * d.real() + (x - a).imag() * d.imag()) / L2;
  t = std::clamp(t, 0.0, 1.0);
  return std::abs(x - (a + t * d));
}

}  // namespace

Cplx theta1(Cplx z, Cplx tau) { return theta_pack(z, tau).at_z[0]; }

std::array<Cplx, 6> theta1_derivs(Cplx z, Cplx tau) {
  return theta_pack(z, tau).at_z;
}

EllipticCurveG1 curve_from_invariants(Cplx g2, Cplx g3) {
  const Cplx disc = g2 * g2 * g2 - 27.0 * g3 * g3;
  const double dscale =
      std::pow(std::abs(g2), 3) + std::pow(std::abs(g3), 2) + 1.0;
  if (std::abs(disc) < 1e-12 * dscale)
    fail(ErrKind::DegenerateCurve, "discriminant g2^3 - 27 g3^2 is zero");

  EllipticCurveG1 c;
  c.g2 = g2;
  c.g3 = g3;
  const auto roots = cubic_roots(g2, g3);
  c.e1 = roots[0];
  c.e2 = roots[1];
  c.e3 = roots[2];
  const double escale = std::max({std::abs(c.e1), std::abs(c.e2),
                                  std::abs(c.e3), 1.0});
  if (std::abs(c.e1 + c.e2 + c.e3) > 1e-12 * escale)
    fail(ErrKind::NonConvergence, "cubic roots do not sum to zero");

  // First-kind and second-kind integrals over the cut [e3, e2], in the
  // substitution x = mid - len*cos(phi) that removes both endpoint
  // singularities exactly:
  //   int_{e3}^{e2} dx / y+  ->  -(1/2) int_0^pi dphi / sqrt(e1 - x(phi))
  // with y+ the one-sided branch 2 i len sin(phi) sqrt(e1 - x) on the cut.
  // The principal sqrt(e1 - x) never meets its cut here because
  // Re(x) <= Re(e2) <= Re(e1) along the segment.
  const Cplx mid = 0.5 * (c.e3 + c.e2), len = 0.5 * (c.e2 - c.e3);
  const double qtol = 1e-11;
  const Cplx e1v = c.e1;
  auto cut_first = integrate_path(
      [&](Cplx phi) {
        const Cplx x = mid - len * std::cos(phi);
        return -0.5 / std::sqrt(e1v - x);
      },
      ComplexPath::line(0.0, kPi), qtol);
  auto cut_second = integrate_path(
      [&](Cplx phi) {
        const Cplx x = mid - len * std::cos(phi);
        return 0.5 * x / std::sqrt(e1v - x);
      },
      ComplexPath::line(0.0, kPi), qtol);
  Cplx om_a = cut_first.value;   // half period attached to e1
  Cplx eta_a = cut_second.value; // matching second-kind value

  // Path from e2 to e1 lifted off the real chord so it clears both the cut
  // [e3, e2] and the right-going ray from e1 (the two branch cuts of the
  // global y). The lift sign is chosen to keep away from e3.
  const Cplx chord = c.e1 - c.e2;
  Cplx lift = kI * chord / std::abs(chord);
  const double hsize = 0.35 * std::abs(chord);
  const double reach =
      4.0 * (std::abs(chord) + std::abs(c.e2 - c.e3)) + 4.0;
  Cplx A, B;
  bool ok = false;
  for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
    const double h = hsize / (1 << (attempt / 2));
    const Cplx l = (attempt % 2 == 0) ? lift : -lift;
    A = c.e2 + h * l;
    B = c.e1 + h * l;
    ok = true;
    const Cplx way[4] = {c.e2, A, B, c.e1};
    for (int i = 0; i < 3 && ok; ++i) {
      if (segments_cross(way[i], way[i + 1], c.e3, c.e2)) ok = false;
      if (crosses_right_ray(way[i], way[i + 1], c.e1, reach)) ok = false;
    }
    if (ok && std::min(dist_point_segment(c.e3, A, B),
                       dist_point_segment(c.e3, c.e2, A)) <
                  0.05 * std::abs(chord))
      ok = false;
  }
  if (!ok)
    fail(ErrKind::NonConvergence, "could not route the second period contour");

  // Global branch: y = 2 * pairfac * i * sqrt(e1 - x), where pairfac is the
  // continuous square root of (x-e2)(x-e3) cut exactly along [e3, e2].
  auto pairfac = [&](Cplx x) {
    const Cplx r = len / (x - mid);
    return (x - mid) * std::sqrt(1.0 - r * r);
  };
  auto y_global = [&](Cplx x) {
    return 2.0 * pairfac(x) * kI * std::sqrt(e1v - x);
  };
  ComplexPath path;
  path.pts = {c.e2, A, B, c.e1};
  path.flags = {{true, false}, {false, false}, {false, true}};
  auto chord_first = integrate_path(
      [&](Cplx x) { return 1.0 / y_global(x); }, path, qtol);
  auto chord_second = integrate_path(
      [&](Cplx x) { return -x / y_global(x); }, path, qtol);
  Cplx om_b = chord_first.value;   // half period attached to e3
  Cplx eta_b = chord_second.value;

  if (!(std::imag(om_b / om_a) > 0)) {
    om_b = -om_b;
    eta_b = -eta_b;
  }
  // Generator sign is free; fix Re(omega1) > 0 for reproducible output.
  // Negating the whole frame preserves tau, the labels, and Legendre.
  if (om_a.real() < 0 || (om_a.real() == 0 && om_a.imag() < 0)) {
    om_a = -om_a;
    eta_a = -eta_a;
    om_b = -om_b;
    eta_b = -eta_b;
  }

  // Same-contour consistency: the quadrature pair must satisfy the Legendre
  // relation with the +pi*i/2 normalization before any value is trusted.
  const Cplx legendre = eta_a * om_b - eta_b * om_a;
  const Cplx half_pi_i = kI * kPi * 0.5;
  if (std::abs(legendre - half_pi_i) > 1e-8 * (1.0 + std::abs(legendre)))
    fail(ErrKind::NonConvergence,
         "quadrature periods violate the Legendre relation");

  c.omega1 = om_a;
  c.omega3 = om_b;
  c.eta1 = eta_a;
  c.eta3 = (c.eta1 * c.omega3 - half_pi_i) / c.omega1;
  c.tau = c.omega3 / c.omega1;
  if (!(c.tau.imag() > 0))
    fail(ErrKind::NonConvergence, "period ratio has nonpositive imaginary part");

  // Labels are forced by the cut layout (the [e3,e2] integral lands in the
  // two-torsion class of e1); verify, and swap if the geometry outsmarted us.
  auto wp_at = [&](Cplx u) {
    const auto L = log_derivs(theta_pack(u / (2.0 * c.omega1), c.tau).at_z);
    const Cplx s = 1.0 / (2.0 * c.omega1);
    return -c.eta1 / c.omega1 - s * s * L[0];
  };
  const double match_tol = 1e-6 * escale;
  if (std::abs(wp_at(c.omega1) - c.e1) > match_tol ||
      std::abs(wp_at(c.omega3) - c.e3) > match_tol) {
    EllipticCurveG1 alt = c;
    alt.omega1 = om_b;
    alt.omega3 = -om_a;
    alt.eta1 = eta_b;
    alt.tau = alt.omega3 / alt.omega1;
    alt.eta3 = (alt.eta1 * alt.omega3 - half_pi_i) / alt.omega1;
    auto wp_alt = [&](Cplx u) {
      const auto L =
          log_derivs(theta_pack(u / (2.0 * alt.omega1), alt.tau).at_z);
      const Cplx s = 1.0 / (2.0 * alt.omega1);
      return -alt.eta1 / alt.omega1 - s * s * L[0];
    };
    if (std::abs(wp_alt(alt.omega1) - c.e1) > match_tol ||
        std::abs(wp_alt(alt.omega3) - c.e3) > match_tol)
      fail(ErrKind::NonConvergence, "half-period labeling failed");
    c = alt;
  }

  // Reconstruction check: 4(x-e1)(x-e2)(x-e3) == 4x^3 - g2 x - g3.
  for (int k = 0; k < 5; ++k) {
    const Cplx x = escale * Cplx{0.3 * k - 0.7, 0.4 + 0.2 * k};
    const Cplx lhs = 4.0 * (x - c.e1) * (x - c.e2) * (x - c.e3);
    const Cplx rhs = (4.0 * x * x - g2) * x - g3;
    if (std::abs(lhs - rhs) > 1e-10 * (1.0 + std::abs(rhs)))
      fail(ErrKind::NonConvergence, "root factorization check failed");
  }
  return c;
}

double lattice_distance(Cplx u, const EllipticCurveG1& c) {
  const Cplx w1 = 2.0 * c.omega1, w3 = 2.0 * c.omega3;
  const Mat2 basis{w1.real(), w3.real(), w1.imag(), w3.imag()};
  const Vec2 frac = mat2_inv(basis) * Vec2{u.real(), u.imag()};
  const double p = std::round(frac.x.real()), q = std::round(frac.y.real());
  double best = std::abs(u);
  for (int dp = -1; dp <= 1; ++dp)
    for (int dq = -1; dq <= 1; ++dq)
      best = std::min(best,
                      std::abs(u - ((p + dp) * w1 + (q + dq) * w3)));
  return best;
}

Cplx sigma(Cplx u, const EllipticCurveG1& c) {
  const auto pk = theta_pack(u / (2.0 * c.omega1), c.tau);
  const auto pk0 = theta_pack(Cplx{0.0}, c.tau);
  return std::exp(c.eta1 * u * u / (2.0 * c.omega1)) * pk.at_z[0] *
         (2.0 * c.omega1) / pk0.at_z[1];
}

namespace {

// Phase increment of sigma along the segment [a, b], bisecting until the
// chord is short enough that the principal argument of the quotient is the
// true increment. Stalls only if the segment passes through a lattice zero.
double arg_increment(Cplx a, Cplx b, Cplx fa, Cplx fb,
                     const EllipticCurveG1& c, int depth) {
  if (std::abs(fb - fa) < 0.5 * std::max(std::abs(fa), std::abs(fb)))
    return std::arg(fb / fa);
  if (depth > 48)
    fail(ErrKind::NonConvergence, "log sigma continuation hit a zero");
  const Cplx m = 0.5 * (a + b);
  const Cplx fm = sigma(m, c);
  return arg_increment(a, m, fa, fm, c, depth + 1) +
         arg_increment(m, b, fm, fb, c, depth + 1);
}

}  // namespace

SigmaValue sigma_full(Cplx u, const EllipticCurveG1& c) {
  SigmaValue sv;
  sv.value = sigma(u, c);
  sv.log_branch = 0;
  if (std::abs(sv.value) < 1e-300) return sv;  // at a zero; no usable log
  const double rmin =
      std::min({std::abs(2.0 * c.omega1), std::abs(2.0 * c.omega3),
                std::abs(2.0 * (c.omega1 + c.omega3))});
  const double r0 = 0.2 * rmin;
  if (std::abs(u) <= r0) return sv;  // principal branch, continuous from 0

  // Continue the logarithm along the ray t*u. Inside |u| <= r0 the value
  // sigma(tu) ~ tu keeps the principal argument continuous, which seeds the
  // unwrap; past that, accumulate increments segment by segment.
  const double t0 = r0 / std::abs(u);
  const int steps =
      static_cast<int>(std::ceil((1.0 - t0) * std::abs(u) / (0.08 * rmin)));
  Cplx a = t0 * u, fa = sigma(a, c);
  double im_log = std::arg(fa);
  for (int k = 1; k <= steps; ++k) {
    const Cplx b = (t0 + (1.0 - t0) * k / steps) * u;
    const Cplx fb = (k == steps) ? sv.value : sigma(b, c);
    im_log += arg_increment(a, b, fa, fb, c, 0);
    a = b;
    fa = fb;
  }
  sv.log_branch = std::lround((im_log - std::arg(sv.value)) / (2.0 * kPi));
  return sv;
}

namespace {

void half_period(const EllipticCurveG1& c, int a, Cplx& om, Cplx& eta) {
  switch (a) {
    case 1: om = c.omega1; eta = c.eta1; return;
    case 2: om = -c.omega1 - c.omega3; eta = -c.eta1 - c.eta3; return;
    case 3: om = c.omega3; eta = c.eta3; return;
    default: throw std::invalid_argument("sigma_a: a must be 1, 2 or 3");
  }
}

}  // namespace

Cplx sigma_a(Cplx u, int a, const EllipticCurveG1& c) {
  Cplx om, eta;
  half_period(c, a, om, eta);
  return std::exp(-eta * u) * sigma(u + om, c) / sigma(om, c);
}

Cplx wp(Cplx u, const EllipticCurveG1& c) {
  const auto L = theta_log_stack(u, c);
  const Cplx s = 1.0 / (2.0 * c.omega1);
  return -c.eta1 / c.omega1 - s * s * L[0];
}

Cplx wp_prime(Cplx u, const EllipticCurveG1& c) {
  const auto L = theta_log_stack(u, c);
  const Cplx s = 1.0 / (2.0 * c.omega1);
  return -s * s * s * L[1];
}

Cplx wp_second(Cplx u, const EllipticCurveG1& c) {
  const auto L = theta_log_stack(u, c);
  const Cplx s2 = 1.0 / (4.0 * c.omega1 * c.omega1);
  return -s2 * s2 * L[2];
}

Cplx wp_third(Cplx u, const EllipticCurveG1& c) {
  const auto L = theta_log_stack(u, c);
  const Cplx s = 1.0 / (2.0 * c.omega1);
  const Cplx s2 = s * s;
  return -s2 * s2 * s * L[3];
}

std::vector<ResidualReport> verify_addition_g1(const EllipticCurveG1& c,
                                               int sample_count,
                                               unsigned long long seed,
                                               double tolerance) {
  Rng rng(seed);
  const double rmin =
      std::min({std::abs(2.0 * c.omega1), std::abs(2.0 * c.omega3),
                std::abs(2.0 * (c.omega1 + c.omega3))});
  const double escale =
      std::max({std::abs(c.e1), std::abs(c.e2), std::abs(c.e3), 1.0});

  auto draw = [&]() {
    return rng.unit() * 2.0 * c.omega1 + rng.unit() * 2.0 * c.omega3;
  };
  auto clear_of_poles = [&](Cplx v) {
    return lattice_distance(v, c) > 0.15 * rmin;
  };

  std::vector<double> r1, r2, r3, r4;
  int produced = 0, guard = 0;
  while (produced < sample_count && guard < 100000) {
    ++guard;
    const Cplx z = draw(), u = draw();
    if (!clear_of_poles(z) || !clear_of_poles(u) || !clear_of_poles(z + u) ||
        !clear_of_poles(z - u))
      continue;
    const Cplx pz = wp(z, c), pu = wp(u, c);
    if (std::abs(pz - pu) < 0.3 * escale) continue;
    const Cplx ppz = wp_prime(z, c), ppu = wp_prime(u, c);
    const Cplx dwp = pz - pu;

    const Cplx sz = sigma(z, c), su = sigma(u, c);
    r1.push_back(std::abs(pz - pu - sigma(u + z, c) * sigma(u - z, c) /
                                        (su * su * sz * sz)));

    const Cplx quot_du =
        (-wp_second(u, c) * dwp + (ppz - ppu) * ppu) / (dwp * dwp);
    r2.push_back(std::abs(wp(u + z, c) - pu + 0.5 * quot_du));

    const Cplx fr = (ppu - ppz) / (pu - pz);
    r3.push_back(std::abs(wp(z + u, c) + pz + pu - 0.25 * fr * fr));

    double worst = 0.0;
    const Cplx ea[3] = {c.e1, c.e2, c.e3};
    for (int a = 1; a <= 3; ++a) {
      const Cplx ratio = sigma_a(u, a, c) / su;
      worst = std::max(worst, std::abs(pu - ea[a - 1] - ratio * ratio));
    }
    r4.push_back(worst);
    ++produced;
  }

  std::vector<ResidualReport> out;
  out.push_back(make_report("addition/sigma-quotient", r1, tolerance));
  out.push_back(make_report("addition/shift-derivative", r2, tolerance));
  out.push_back(make_report("addition/three-term-square", r3, tolerance));
  out.push_back(make_report("addition/sigma-a-ratio", r4, tolerance));
  return out;
}

Cplx mu_g1(Cplx u, const EllipticCurveG1& c) {
  const Cplx rho = wp(u, c) - c.e3;
  if (std::abs(rho) < 1e-12)
    fail(ErrKind::ZeroDenominator, "wp(u) - e3 vanishes");
  return wp_prime(u, c) / (2.0 * kI * rho);
}

Cplx tangent_g1(double s, Cplx delta, const EllipticCurveG1& c) {
  const Cplx w = s - 0.5 * c.omega3 + delta;
  if (lattice_distance(w, c) <= 1e-8)
    fail(ErrKind::PoleProximity, "tangent argument at a sigma zero");
  const Cplx ratio = sigma_a(w, 3, c) / sigma(w, c);
  return ratio * ratio;
}

JacobiTriple jacobi_from_wp(Cplx u, const EllipticCurveG1& c) {
  const Cplx rho = wp(u, c) - c.e3;
  if (std::abs(rho) < 1e-12)
    fail(ErrKind::ZeroDenominator, "wp(u) - e3 vanishes");
  JacobiTriple t;
  t.sn = std::sqrt((c.e1 - c.e3) / rho);
  t.cn = std::sqrt((wp(u, c) - c.e1) / rho);
  t.dn = std::sqrt((wp(u, c) - c.e2) / rho);
  return t;
}

}  // namespace loopsol
