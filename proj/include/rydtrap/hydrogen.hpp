#pragma once

#include <vector>

namespace rydtrap::atom::hydrogen {

// Atomic units throughout (lengths in a0, energies in Hartree, fields in
// a.u. of field). Infinite nuclear mass.

/// <n1 l1| r |n2 l2> radial integral. Exact rational-exponential sum
/// evaluated in 100-digit arithmetic and memoized. The radial functions
/// carry a positive leading (lowest power of r) coefficient.
double radial_integral(int n1, int l1, int n2, int l2);

/// <l2 m2| C^1_q |l1 m1>, zero unless m2 = m1 + q and |l2 - l1| = 1.
double angular_c1(int l2, int m2, int l1, int m1, int q);

/// Same quantity from the general Racah formula for Wigner 3j symbols;
/// slow, kept as an independent cross-check.
double angular_c1_racah(int l2, int m2, int l1, int m1, int q);

/// <n2 l2 m2| r C^1_q |n1 l1 m1>.
double spherical_dipole(int n2, int l2, int m2, int n1, int l1, int m1, int q);

/// Parabolic state |n k m> expanded on spherical |n l m>, l = |m| .. n-1.
/// Obtained by diagonalizing z within the (n, m) manifold (eigenvalue
/// 3/2 n k). Phase: the l = n-1 coefficient is positive.
struct ParabolicState {
    int n = 0;
    int k = 0;
    int m = 0;
    int l_min = 0;
    std::vector<double> c;
};

const ParabolicState& parabolic_state(int n, int k, int m);

/// <a| r C^1_q |b> between parabolic states.
double parabolic_dipole(const ParabolicState& a, const ParabolicState& b, int q);

/// Bare energy -1/(2 n^2).
double bare_energy(int n);

/// First- and second-order parabolic Stark coefficients:
/// E = bare + first * F + second * F^2.
double first_order(int n, int k);
double second_order(int n, int k, int m);

/// Stark shift of |n k m> from exact diagonalization of H0 + F z in the
/// spherical basis of fixed m, all manifolds n' <= n + extra_manifolds.
double exact_stark_shift(int n, int k, int m, double field_au, int extra_manifolds = 6);

}  // namespace rydtrap::atom::hydrogen
