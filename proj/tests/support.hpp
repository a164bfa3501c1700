#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "iml/instance.hpp"

namespace iml::testing {

inline std::string fixture(const std::string& name) { return std::string(IML_FIXTURE_DIR) + "/" + name + ".json"; }

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

inline CMatrix mat2(Complex a, Complex b, Complex c, Complex d) {
    CMatrix m(2, 2);
    m << a, b, c, d;
    return m;
}

inline CMatrix gaussian(int r, std::mt19937& rng) {
    std::normal_distribution<double> n;
    CMatrix m(r, r);
    for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b) m(a, b) = Complex(n(rng), n(rng));
    return m;
}

/// Seeded random configuration: punctures in [-2, 2]^2 separated by >= 0.6,
/// basepoint below them.
inline MarkedSphere random_sphere(int n, std::mt19937& rng, bool infinity = false) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const Complex z0(0.0, -3.0);
    std::vector<Complex> t;
    while (static_cast<int>(t.size()) < n) {
        Complex c(u(rng), u(rng));
        bool ok = std::abs(c - z0) > 1.0;
        for (Complex s : t) ok = ok && std::abs(c - s) >= 0.6;
        if (ok) t.push_back(c);
    }
    return MarkedSphere(t, z0, infinity);
}

/// The four-point configuration shared by the generic fixtures.
inline MarkedSphere four_points() { return MarkedSphere({0.0, 1.0, 2.0, Complex(3.0, 1.0)}, Complex(1.5, -2.0)); }

/// Random complex residues on `sphere` with sum zero and max Frobenius norm exactly `top`.
inline FuchsianSystem random_system(const MarkedSphere& sphere, int r, unsigned seed, double top = 2.0) {
    std::mt19937 rng(seed);
    const int n = static_cast<int>(sphere.size());
    std::vector<CMatrix> a;
    CMatrix mean = CMatrix::Zero(r, r);
    for (int i = 0; i < n; ++i) {
        a.push_back(gaussian(r, rng));
        mean += a.back() / double(n);
    }
    double big = 0;
    for (auto& m : a) {
        m -= mean;
        big = std::max(big, m.norm());
    }
    for (auto& m : a) m *= top / big;
    return FuchsianSystem(sphere, a);
}

/// Residues P diag(lambda) P^-1 with exact rational exponents in (-1, 1) whose
/// total is an integer; infinity is marked so each residue is free.
inline ParabolicConnection random_exact_connection(int r, int n, unsigned seed) {
    std::mt19937 rng(seed);
    auto sphere = random_sphere(n, rng, true);
    std::uniform_int_distribution<int> num(-11, 11);
    ExponentTable rows;
    Rational total = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<Rational> vals;
        bool ok = false;
        while (!ok) {
            vals.clear();
            while (static_cast<int>(vals.size()) < r) {
                Rational q(num(rng), 12);
                bool fresh = true;
                for (const auto& v : vals) fresh = fresh && !is_integer(v - q);
                if (fresh) vals.push_back(q);
            }
            ok = true;
            if (i == n - 1) {
                // shift one entry so the total becomes an integer
                Rational frac = total;
                for (const auto& v : vals) frac += v;
                frac -= Rational(static_cast<long long>(iml::floor(frac)));
                vals[0] -= frac;
                for (int k = 1; k < r; ++k) ok = ok && !is_integer(vals[0] - vals[k]);
            }
        }
        std::vector<Exponent> row;
        for (const auto& v : vals) {
            total += v;
            row.emplace_back(ExactScalar(v));
        }
        rows.push_back(std::move(row));
    }
    std::vector<CMatrix> a;
    ExponentData lambda(rows);
    for (int i = 0; i < n; ++i) {
        // frame within distance 0.4 of the identity, so cond(p) <= 7/3
        CMatrix g = gaussian(r, rng);
        CMatrix p = CMatrix::Identity(r, r) + 0.4 / g.norm() * g;
        CMatrix d = CMatrix::Zero(r, r);
        for (int k = 0; k < r; ++k) d(k, k) = lambda.at(i, k).value;
        a.push_back(p * d * p.inverse());
    }
    // rows must be listed in decreasing real part
    ExponentTable sorted = rows;
    for (auto& row : sorted)
        std::sort(row.begin(), row.end(), [](const Exponent& x, const Exponent& y) { return compare_re(x, y) > 0; });
    return make_connection(FuchsianSystem(sphere, a), ExponentData(sorted));
}

}  // namespace iml::testing
