#include "iml/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace iml::linalg {

CMatrix range_basis(const CMatrix& m, double tol) {
    if (m.cols() == 0 || m.rows() == 0) return CMatrix(m.rows(), 0);
    Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeThinU);
    const auto& s = svd.singularValues();
    double thr = tol * (s.size() ? s(0) : 0.0);
    int k = 0;
    while (k < s.size() && s(k) > thr && s(k) > 0) ++k;
    return svd.matrixU().leftCols(k);
}

CMatrix null_space(const CMatrix& m, double tol, double scale) {
    const auto cols = m.cols();
    if (cols == 0) return CMatrix(0, 0);
    if (m.rows() == 0) return CMatrix::Identity(cols, cols);
    Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    double thr = tol * std::max(s.size() ? s(0) : 0.0, scale);
    int k = 0;  // numerical rank
    while (k < s.size() && s(k) > thr) ++k;
    return svd.matrixV().rightCols(cols - k);
}

CMatrix orthogonal_complement(const CMatrix& q) {
    const auto r = q.rows();
    if (q.cols() == 0) return CMatrix::Identity(r, r);
    return null_space(q.adjoint(), 1e-12);
}

CMatrix intersect(const CMatrix& a, const CMatrix& b, double tol) {
    const auto r = a.rows();
    if (a.cols() == 0 || b.cols() == 0) return CMatrix(r, 0);
    CMatrix qa = range_basis(a, tol), qb = range_basis(b, tol);
    CMatrix stacked(r, qa.cols() + qb.cols());
    stacked << qa, -qb;
    CMatrix n = null_space(stacked, tol);
    if (n.cols() == 0) return CMatrix(r, 0);
    return range_basis(qa * n.topRows(qa.cols()), tol);
}

int rank(const CMatrix& m, double tol) { return static_cast<int>(range_basis(m, tol).cols()); }

double condition_number(const CMatrix& m) {
    if (m.size() == 0) return 1.0;
    Eigen::JacobiSVD<CMatrix> svd(m);
    const auto& s = svd.singularValues();
    double smin = s(s.size() - 1);
    if (smin == 0.0) return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

std::vector<Complex> eigenvalues(const CMatrix& m) {
    Eigen::ComplexEigenSolver<CMatrix> es(m, false);
    std::vector<Complex> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    return out;
}

std::vector<Complex> char_poly(const CMatrix& a) {
    const auto r = a.rows();
    std::vector<Complex> c(r + 1, Complex(0));
    c[r] = 1.0;
    CMatrix mk = CMatrix::Zero(r, r);
    CMatrix id = CMatrix::Identity(r, r);
    for (Eigen::Index k = 1; k <= r; ++k) {
        mk = a * mk + c[r - k + 1] * id;
        c[r - k] = -(a * mk).trace() / static_cast<double>(k);
    }
    c.pop_back();
    return c;
}

std::vector<Complex> poly_from_roots(const std::vector<Complex>& roots) {
    // coefficients of the monic polynomial, low degree first, leading 1 implicit
    std::vector<Complex> p{1.0};
    for (Complex root : roots) {
        std::vector<Complex> next(p.size() + 1, Complex(0));
        for (std::size_t k = 0; k < p.size(); ++k) {
            next[k + 1] += p[k];
            next[k] -= root * p[k];
        }
        p = std::move(next);
    }
    p.pop_back();
    return p;
}

double matching_distance(const std::vector<Complex>& a, const std::vector<Complex>& b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    const std::size_t n = a.size();
    if (n == 0) return 0.0;
    if (n <= 6) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        do {
            double worst = 0.0;
            for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(a[k] - b[perm[k]]));
            best = std::min(best, worst);
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }
    std::vector<bool> used(n, false);
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pick = n;
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < n; ++m) {
            if (!used[m] && std::abs(a[k] - b[m]) < d) {
                d = std::abs(a[k] - b[m]);
                pick = m;
            }
        }
        used[pick] = true;
        worst = std::max(worst, d);
    }
    return worst;
}

CVector normalize_phase(const CVector& v) {
    Eigen::Index imax = 0;
    double best = -1.0;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        // first index wins ties so the choice is deterministic
        if (std::abs(v(k)) > best * (1.0 + 1e-12)) {
            best = std::abs(v(k));
            imax = k;
        }
    }
    if (best <= 0.0) return v;
    Complex phase = std::conj(v(imax)) / std::abs(v(imax));
    CVector out = v * phase;
    return out / out.norm();
}

std::vector<std::pair<Complex, int>> cluster(const std::vector<Complex>& values, double tol) {
    const std::size_t n = values.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(values[i] - values[j]) <= tol) parent[find(i)] = find(j);
    std::vector<std::pair<Complex, int>> out;
    std::vector<std::size_t> roots;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t root = find(i);
        auto it = std::find(roots.begin(), roots.end(), root);
        if (it == roots.end()) {
            roots.push_back(root);
            out.emplace_back(values[i], 1);
        } else {
            auto& slot = out[static_cast<std::size_t>(it - roots.begin())];
            slot.first += values[i];
            slot.second += 1;
        }
    }
    for (auto& [value, count] : out) value /= static_cast<double>(count);
    return out;
}

}  // namespace iml::linalg
