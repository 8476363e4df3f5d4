#pragma once

#include <array>
#include <vector>

#include "loopsol/numkernel.hpp"
#include "loopsol/report.hpp"

namespace loopsol {

// Genus-2 layer: quintic curve y^2 = f(x) with five finite branch points and
// one at infinity, period matrices from contour quadrature, Riemann theta
// with half-integer characteristics, sigma functions and their log-derivative
// (wp) tensors, plus residual checks for the quadratic three-index relations,
// the addition formula, and the tangent/curvature functions built from them.

// Half-integer theta characteristic. delta_p shifts the argument, delta_pp
// shifts the summation index; entries are 0 or 1/2 (stored in Vec2.x/.y as
// real values).
struct ThetaCharacteristic {
  Vec2 delta_p{};   // added to z inside the series
  Vec2 delta_pp{};  // added to the summation index n
};

// Point of C^2 (Jacobian coordinate).
struct UVector {
  Cplx u1{}, u2{};
};

inline UVector operator+(const UVector& a, const UVector& b) {
  return {a.u1 + b.u1, a.u2 + b.u2};
}
inline UVector operator-(const UVector& a, const UVector& b) {
  return {a.u1 - b.u1, a.u2 - b.u2};
}
inline UVector operator*(Cplx s, const UVector& v) {
  return {s * v.u1, s * v.u2};
}

struct HyperCurveG2 {
  // f(x) = lambda0 + lambda1 x + ... + lambda5 x^5, lambda5 = 1.
  std::array<Cplx, 6> lambda{};

  // Branch points sorted into (a1, c1, a2, c2, c); the sixth lies at
  // infinity. Cuts run along [a1,c1], [a2,c2] and the ray [c, +inf).
  Cplx a1{}, c1{}, a2{}, c2{}, c{};

  // Half period matrices: columns j are the alpha_j / beta_j integrals of
  // (dx/2y, x dx/2y) divided by 2 (omega), same for the second-kind forms
  // (eta).
  Mat2 omega_p{}, omega_pp{};
  Mat2 eta_p{}, eta_pp{};

  Mat2 tau{};        // omega_p^{-1} omega_pp, symmetric, Im positive definite
  Vec2 riemann_K{};  // vector of Riemann constants for the base point at inf

  // Half-period vectors attached to the branch points a1, a2, and the
  // half-integer characteristics of their classes. Which 2-torsion class
  // the image of each branch point lands on depends on the realized
  // homology basis, so both are resolved at construction by scanning the
  // classes on the divisor of sigma.
  Vec2 half_vec1{}, half_vec2{};
  ThetaCharacteristic sig_ch1{}, sig_ch2{};

  // Normalization constants of the sigma_r family (index 0 <-> r=1).
  std::array<Cplx, 2> lam_r{};

  // Overall sigma normalization: 1 / (d sigma/du1 at 0 with gamma = 1), so
  // the expansion of sigma at the origin starts with u1. The two-variable
  // addition formula is off by this constant squared otherwise.
  Cplx gamma{1.0};
  double legendre_sign{};  // +1 or -1: sign of the (pi i/2) block pairing

  // Resolved homology realization: lift side of each cut-crossing contour,
  // the integer alpha2 multiple sheared off the first one, and the global
  // sign applied to both. Stored so the per-cycle integral functions
  // reproduce the assembled matrices exactly.
  int beta_lift1{1}, beta_lift2{1};
  int beta_shear{0};
  double beta_sign{1.0};
};

enum class Cycle { alpha1, alpha2, beta1, beta2 };

// Builds the curve from five pairwise distinct branch points: sorts them,
// expands the quintic, computes all eight cycle integrals and resolves the
// homology orientation so that tau is symmetric with Im tau positive
// definite and the block pairing of the period matrices is +-(pi i/2) I.
HyperCurveG2 curve_from_branch_points(const std::array<Cplx, 5>& points);

// Integral of (dx/2y, x dx/2y) over one cycle: a column of the doubled
// matrices 2*omega_p / 2*omega_pp. orientation = -1 reverses the cycle.
Vec2 first_kind_integrals(const HyperCurveG2& curve, Cycle cycle,
                          int orientation = 1);

// Same contours with the second-kind integrands
// ((lambda3 x + 2 lambda4 x^2 + 3 lambda5 x^3) dx/2y, lambda5 x^2 dx/2y).
Vec2 second_kind_integrals(const HyperCurveG2& curve, Cycle cycle,
                           int orientation = 1);

// Characteristic attached to sigma_r: r = 0 gives the zero characteristic,
// r = 1, 2 the half-period characteristics of the branch points a_r as
// resolved for this curve's homology basis.
ThetaCharacteristic sigma_characteristic(const HyperCurveG2& curve, int r);

// Fixed odd characteristic of the odd sigma; the theta it weights vanishes
// at the origin, and its translate picks out the sigma divisor.
ThetaCharacteristic riemann_constant_characteristic();

// Theta series with characteristic; truncation keeps the Gaussian tail
// below 1e-14 of the accumulated magnitude.
Cplx riemann_theta(const Vec2& z, const Mat2& tau,
                   const ThetaCharacteristic& ch);

// sigma_r prefactors: lam_r^2 is the constant relating (theta_r/theta_0)^2
// to the two-term wp quotient at the branch point a_r, fitted at
// construction; the root with Re >= 0 fixes the sign.
std::array<Cplx, 2> lambda_r_constants(const HyperCurveG2& curve);

// Odd sigma: gamma * exp(-1/2 u^T eta_p omega_p^{-1} u) *
// theta[rc]((2 omega_p)^{-1} u). Vanishes at u = 0.
Cplx sigma_g2(const UVector& u, const HyperCurveG2& curve);

// sigma_r family (r = 0, 1, 2) with the even r=0 characteristic; prefactor
// lam_r for r > 0, 1 for r = 0.
Cplx sigma_g2(const UVector& u, const HyperCurveG2& curve, int r);

// Symmetric second log-derivative tensors and, on demand, the third and
// fourth ones. third[k] / fourth[k] hold the component with k indices equal
// to 2 (e.g. third[1] = wp_112).
struct WpTensors {
  Mat2 second{};
  std::array<Cplx, 4> third{};
  std::array<Cplx, 5> fourth{};
};

// wp_{mu nu} = -d^2 log sigma, from the odd sigma.
Mat2 wp_matrix(const UVector& u, const HyperCurveG2& curve);
// wp^{(r)}_{mu nu} = -d^2 log sigma_r.
Mat2 wp_matrix(const UVector& u, const HyperCurveG2& curve, int r);

WpTensors wp_tensors(const UVector& u, const HyperCurveG2& curve);
WpTensors wp_tensors(const UVector& u, const HyperCurveG2& curve, int r);

// Checks that each wp^{(r)} is the odd-sigma wp translated by a fixed half
// period: wp^{(r)}(u) = wp(u - T_r), where T_r is the half-period vector of
// the 2-torsion class joining the r-th characteristic to the odd one. One
// report per r.
std::vector<ResidualReport> verify_shift_relations(const HyperCurveG2& curve,
                                                   int sample_count);

// Residuals of the five linear (in the fourth derivatives) relations and the
// three quadratic ones satisfied by the wp tensors, at random u away from
// the theta divisor.
std::vector<ResidualReport> verify_baker_pde(const HyperCurveG2& curve,
                                             int sample_count);

// Residual of sigma(u+v) sigma(u-v) / (sigma(u)^2 sigma(v)^2) =
// wp_22(u) wp_21(v) - wp_21(u) wp_22(v) - wp_11(u) + wp_11(v).
ResidualReport verify_addition_g2(const HyperCurveG2& curve, int sample_count);

// (sigma_2(u)/sigma_0(u))^2; equals (wp^{(0)}_21 + wp^{(0)}_22 a2 - a2^2)
// / Q(a2) with Q(x) = (x-c1)(x-c2)(x-c), which tests cross-check.
Cplx sigma_ratio_sq(const UVector& u, const HyperCurveG2& curve);

// mu = (1/2i) d_{u2} rho / rho with rho = wp^{(0)}_21 + wp^{(0)}_22 a2 -
// a2^2. Requires the curve to satisfy a2 = -lambda4/3.
Cplx mu_g2(const UVector& u, const HyperCurveG2& curve);

// Squared sigma quotient at u(s,t) + w1 + w2/2 + delta with
// u(s,t) = (-4t, s): the tangent function of the genus-2 flow.
Cplx tangent_g2(double s, double t, const Vec2& delta,
                const HyperCurveG2& curve);

}  // namespace loopsol
