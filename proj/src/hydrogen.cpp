#include "rydtrap/hydrogen.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <tuple>

#include <Eigen/Eigenvalues>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace rydtrap::atom::hydrogen {

namespace {

using Big = boost::multiprecision::cpp_bin_float_100;

const Big& factorial(int n) {
    static std::vector<Big> table = [] {
        std::vector<Big> t(400);
        t[0] = 1;
        for (int i = 1; i < 400; ++i) t[i] = t[i - 1] * i;
        return t;
    }();
    if (n < 0 || n >= 400) throw std::out_of_range("factorial argument out of table");
    return table[n];
}

Big binomial(int n, int k) {
    if (k < 0 || k > n) return Big(0);
    return factorial(n) / (factorial(k) * factorial(n - k));
}

// R_nl(r) = N r^l exp(-r/n) sum_j c_j (2r/n)^j
struct RadialPoly {
    Big norm;
    std::vector<Big> c;
};

RadialPoly radial_poly(int n, int l) {
    const int nr = n - l - 1;
    const int a = 2 * l + 1;
    RadialPoly p;
    for (int j = 0; j <= nr; ++j) {
        Big cj = binomial(nr + a, nr - j) / factorial(j);
        p.c.push_back(j % 2 ? Big(-cj) : cj);
    }
    const Big two_over_n = Big(2) / n;
    p.norm = sqrt(pow(two_over_n, 3) * factorial(n - l - 1) / (Big(2 * n) * factorial(n + l))) * pow(two_over_n, l);
    return p;
}

std::mutex g_mutex;

}  // namespace

double radial_integral(int n1, int l1, int n2, int l2) {
    if (n1 < 1 || n2 < 1 || l1 < 0 || l2 < 0 || l1 >= n1 || l2 >= n2)
        throw std::invalid_argument("invalid hydrogen quantum numbers");
    static std::map<std::tuple<int, int, int, int>, double> cache;
    {
        std::lock_guard lock(g_mutex);
        auto it = cache.find({n1, l1, n2, l2});
        if (it != cache.end()) return it->second;
    }
    const RadialPoly p1 = radial_poly(n1, l1);
    const RadialPoly p2 = radial_poly(n2, l2);
    const Big a = Big(1) / n1 + Big(1) / n2;
    const Big s1 = Big(2) / n1, s2 = Big(2) / n2;
    Big sum = 0;
    for (std::size_t j = 0; j < p1.c.size(); ++j)
        for (std::size_t k = 0; k < p2.c.size(); ++k) {
            const int p = l1 + l2 + 3 + static_cast<int>(j + k);
            sum += p1.c[j] * p2.c[k] * pow(s1, static_cast<int>(j)) * pow(s2, static_cast<int>(k)) * factorial(p) /
                   pow(a, p + 1);
        }
    const double value = static_cast<double>(p1.norm * p2.norm * sum);
    std::lock_guard lock(g_mutex);
    cache[{n1, l1, n2, l2}] = value;
    cache[{n2, l2, n1, l1}] = value;
    return value;
}

double angular_c1(int l2, int m2, int l1, int m1, int q) {
    if (m2 != m1 + q || std::abs(q) > 1 || std::abs(m1) > l1 || std::abs(m2) > l2) return 0.0;
    const double l = l1, m = m1;
    if (l2 == l1 + 1) {
        const double den = (2 * l + 1) * (2 * l + 3);
        if (q == 0) return std::sqrt(((l + 1) * (l + 1) - m * m) / den);
        if (q == 1) return std::sqrt((l + m + 1) * (l + m + 2) / (2 * den));
        return std::sqrt((l - m + 1) * (l - m + 2) / (2 * den));
    }
    if (l2 == l1 - 1) {
        const double den = (2 * l - 1) * (2 * l + 1);
        if (q == 0) return std::sqrt((l * l - m * m) / den);
        if (q == 1) return -std::sqrt((l - m) * (l - m - 1) / (2 * den));
        return -std::sqrt((l + m) * (l + m - 1) / (2 * den));
    }
    return 0.0;
}

namespace {

double log_fact(int n) { return std::lgamma(n + 1.0); }

// Wigner 3j (j1 j2 j3; m1 m2 m3) for integer arguments, Racah formula.
double wigner3j(int j1, int j2, int j3, int m1, int m2, int m3) {
    if (m1 + m2 + m3 != 0) return 0.0;
    if (j3 < std::abs(j1 - j2) || j3 > j1 + j2) return 0.0;
    if (std::abs(m1) > j1 || std::abs(m2) > j2 || std::abs(m3) > j3) return 0.0;
    const double log_tri = log_fact(j1 + j2 - j3) + log_fact(j1 - j2 + j3) + log_fact(-j1 + j2 + j3) -
                           log_fact(j1 + j2 + j3 + 1);
    const double log_m = log_fact(j1 + m1) + log_fact(j1 - m1) + log_fact(j2 + m2) + log_fact(j2 - m2) +
                         log_fact(j3 + m3) + log_fact(j3 - m3);
    const int t_min = std::max({0, j2 - j3 - m1, j1 - j3 + m2});
    const int t_max = std::min({j1 + j2 - j3, j1 - m1, j2 + m2});
    double sum = 0.0;
    for (int t = t_min; t <= t_max; ++t) {
        const double lt = log_fact(t) + log_fact(j3 - j2 + t + m1) + log_fact(j3 - j1 + t - m2) +
                          log_fact(j1 + j2 - j3 - t) + log_fact(j1 - t - m1) + log_fact(j2 - t + m2);
        sum += (t % 2 ? -1.0 : 1.0) * std::exp(0.5 * (log_tri + log_m) - lt);
    }
    return ((j1 - j2 - m3) % 2 ? -1.0 : 1.0) * sum;
}

}  // namespace

double angular_c1_racah(int l2, int m2, int l1, int m1, int q) {
    const double phase = (m2 % 2) ? -1.0 : 1.0;
    return phase * std::sqrt((2.0 * l2 + 1) * (2.0 * l1 + 1)) * wigner3j(l2, 1, l1, -m2, q, m1) *
           wigner3j(l2, 1, l1, 0, 0, 0);
}

double spherical_dipole(int n2, int l2, int m2, int n1, int l1, int m1, int q) {
    if (std::abs(l2 - l1) != 1 || m2 != m1 + q) return 0.0;
    return radial_integral(n2, l2, n1, l1) * angular_c1(l2, m2, l1, m1, q);
}

const ParabolicState& parabolic_state(int n, int k, int m) {
    const int am = std::abs(m);
    if (am > n - 1 || std::abs(k) > n - 1 - am || (n - 1 - am - k) % 2 != 0)
        throw std::invalid_argument("invalid parabolic quantum numbers");
    static std::map<std::tuple<int, int, int>, std::unique_ptr<ParabolicState>> cache;
    {
        std::lock_guard lock(g_mutex);
        auto it = cache.find({n, k, m});
        if (it != cache.end()) return *it->second;
    }
    const int size = n - am;
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(size, size);
    for (int a = 0; a + 1 < size; ++a) {
        const int l = am + a;
        const double v = radial_integral(n, l + 1, n, l) * angular_c1(l + 1, m, l, m, 0);
        Z(a + 1, a) = Z(a, a + 1) = v;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Z);
    std::vector<std::unique_ptr<ParabolicState>> made;
    for (int idx = 0; idx < size; ++idx) {
        auto st = std::make_unique<ParabolicState>();
        st->n = n;
        st->m = m;
        st->l_min = am;
        st->k = static_cast<int>(std::lround(es.eigenvalues()(idx) / (1.5 * n)));
        Eigen::VectorXd v = es.eigenvectors().col(idx);
        if (v(size - 1) < 0) v = -v;
        st->c.assign(v.data(), v.data() + size);
        made.push_back(std::move(st));
    }
    std::lock_guard lock(g_mutex);
    for (auto& st : made) {
        auto key = std::make_tuple(st->n, st->k, st->m);
        if (!cache.count(key)) cache[key] = std::move(st);
    }
    return *cache.at({n, k, m});
}

double parabolic_dipole(const ParabolicState& a, const ParabolicState& b, int q) {
    if (a.m != b.m + q) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.c.size(); ++i) {
        const int la = a.l_min + static_cast<int>(i);
        for (std::size_t j = 0; j < b.c.size(); ++j) {
            const int lb = b.l_min + static_cast<int>(j);
            if (std::abs(la - lb) != 1) continue;
            s += a.c[i] * b.c[j] * spherical_dipole(a.n, la, a.m, b.n, lb, b.m, q);
        }
    }
    return s;
}

double bare_energy(int n) { return -0.5 / (static_cast<double>(n) * n); }

double first_order(int n, int k) { return 1.5 * n * k; }

double second_order(int n, int k, int m) {
    const double N = n;
    return -(1.0 / 16.0) * N * N * N * N * (17.0 * N * N - 3.0 * k * k - 9.0 * m * m + 19.0);
}

double exact_stark_shift(int n, int k, int m, double field_au, int extra_manifolds) {
    const int am = std::abs(m);
    struct State {
        int n, l;
    };
    std::vector<State> states;
    for (int nn = am + 1; nn <= n + extra_manifolds; ++nn)
        for (int l = am; l < nn; ++l) states.push_back({nn, l});
    const int N = static_cast<int>(states.size());
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
    for (int a = 0; a < N; ++a) {
        H(a, a) = bare_energy(states[a].n);
        for (int b = a + 1; b < N; ++b) {
            if (std::abs(states[a].l - states[b].l) != 1) continue;
            const double v = field_au * spherical_dipole(states[a].n, states[a].l, m, states[b].n, states[b].l, m, 0);
            H(a, b) = H(b, a) = v;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
    // The eigenvalue adiabatically connected to |n k m> is the one closest
    // to the perturbative estimate; at the weak fields used here the
    // perturbative error is far below the level spacing 3 n F.
    const double target = bare_energy(n) + first_order(n, k) * field_au + second_order(n, k, m) * field_au * field_au;
    double best = es.eigenvalues()(0);
    for (int i = 1; i < N; ++i)
        if (std::abs(es.eigenvalues()(i) - target) < std::abs(best - target)) best = es.eigenvalues()(i);
    return best - bare_energy(n);
}

}  // namespace rydtrap::atom::hydrogen
