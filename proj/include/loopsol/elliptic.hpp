#pragma once

#include <array>
#include <vector>

#include "loopsol/numkernel.hpp"
#include "loopsol/report.hpp"

namespace loopsol {

// Genus-1 curve y^2 = 4x^3 - g2 x - g3 with periods attached.
// Roots are ordered by descending real part (ties: descending imaginary
// part), so for real-root curves e1 > e2 > e3. Half-periods satisfy
// wp(omega1) = e1, wp(omega3) = e3 and Im(tau) > 0 with tau = omega3/omega1.
struct EllipticCurveG1 {
  Cplx g2{}, g3{};
  Cplx e1{}, e2{}, e3{};
  Cplx omega1{}, omega3{};
  Cplx eta1{}, eta3{};
  Cplx tau{};
};

EllipticCurveG1 curve_from_invariants(Cplx g2, Cplx g3);

// Theta series with half-integer characteristic fixed to the odd one:
//   theta1(z) = sum_n exp(2 pi i [ tau (n-1/2)^2 / 2 + (n-1/2)(z-1/2) + 1/4 ])
// Large arguments are reduced by quasi-periodicity before summing.
Cplx theta1(Cplx z, Cplx tau);

// z-derivatives of theta1, orders 0..5, at the unreduced argument.
std::array<Cplx, 6> theta1_derivs(Cplx z, Cplx tau);

// sigma evaluated together with an analytic-continuation record: the total
// logarithm accumulated from the series' quasi-periodic reduction factors is
// log|value| + i*(arg(value) + 2*pi*log_branch). Callers tracking log sigma
// across period cells can use it instead of unwrapping phases themselves.
struct SigmaValue {
  Cplx value{};
  long log_branch = 0;
};

Cplx sigma(Cplx u, const EllipticCurveG1& curve);
SigmaValue sigma_full(Cplx u, const EllipticCurveG1& curve);

// sigma_a(u) = exp(-eta_a u) sigma(u + omega_a)/sigma(omega_a), a in {1,2,3},
// with omega_2 := -omega_1 - omega_3 and eta_2 := -eta_1 - eta_3.
Cplx sigma_a(Cplx u, int a, const EllipticCurveG1& curve);

// wp and its u-derivatives, by term-by-term differentiation of the theta
// series (never finite differences). PoleProximity within 1e-8 of a lattice
// point.
Cplx wp(Cplx u, const EllipticCurveG1& curve);
Cplx wp_prime(Cplx u, const EllipticCurveG1& curve);
Cplx wp_second(Cplx u, const EllipticCurveG1& curve);
Cplx wp_third(Cplx u, const EllipticCurveG1& curve);

// Distance from u to the period lattice {2m omega1 + 2n omega3}.
double lattice_distance(Cplx u, const EllipticCurveG1& curve);

// Residual reports for the four sigma/wp addition identities at
// sample_count seeded random (z, u) pairs away from poles and coincidences.
std::vector<ResidualReport> verify_addition_g1(const EllipticCurveG1& curve,
                                               int sample_count,
                                               unsigned long long seed = 0,
                                               double tolerance = 1e-9);

// mu = wp'/(2i (wp - e3)), the curvature-generating function.
Cplx mu_g1(Cplx u, const EllipticCurveG1& curve);

// Tangent field (sigma_3/sigma)^2 at s - omega3/2 + delta; equals
// wp(arg) - e3, which callers use as a cross-check.
Cplx tangent_g1(double s, Cplx delta, const EllipticCurveG1& curve);

struct JacobiTriple {
  Cplx sn{}, cn{}, dn{};
};

// Jacobi function values at z = sqrt(e1-e3) u via the wp ratios, principal
// square-root branches.
JacobiTriple jacobi_from_wp(Cplx u, const EllipticCurveG1& curve);

}  // namespace loopsol
