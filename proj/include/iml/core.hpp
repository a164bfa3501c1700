#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "iml/error.hpp"
#include "iml/exact.hpp"

namespace iml {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Single global default for approximate comparisons (relative to Frobenius norms).
inline constexpr double kDefaultTol = 1e-9;

/// Frobenius norm, the norm every tolerance in the library refers to.
inline double norm(const CMatrix& m) { return m.norm(); }

/// The punctured sphere P^1 minus {t_1..t_n} (and optionally infinity) with a basepoint.
class MarkedSphere {
public:
    MarkedSphere(std::vector<Complex> punctures, Complex basepoint, bool include_infinity = false,
                 double separation_tol = kDefaultTol);

    const std::vector<Complex>& punctures() const { return punctures_; }
    Complex puncture(std::size_t i) const { return punctures_.at(i); }
    std::size_t size() const { return punctures_.size(); }
    Complex basepoint() const { return basepoint_; }
    bool include_infinity() const { return include_infinity_; }
    double separation_tol() const { return separation_tol_; }

    double min_separation() const;

    MarkedSphere with_punctures(std::vector<Complex> punctures) const {
        return MarkedSphere(std::move(punctures), basepoint_, include_infinity_, separation_tol_);
    }
    MarkedSphere with_infinity(bool marked) const {
        return MarkedSphere(punctures_, basepoint_, marked, separation_tol_);
    }
    MarkedSphere with_basepoint(Complex z0) const {
        return MarkedSphere(punctures_, z0, include_infinity_, separation_tol_);
    }

private:
    std::vector<Complex> punctures_;
    Complex basepoint_;
    bool include_infinity_;
    double separation_tol_;
};

/// Full flag C^r = l_0 > l_1 > ... > l_r = 0 stored as an adapted basis:
/// l_j = span of columns j..r-1.
class Flag {
public:
    explicit Flag(CMatrix adapted_basis);

    static Flag identity(int r) { return Flag(CMatrix::Identity(r, r)); }

    const CMatrix& basis() const { return basis_; }
    int rank() const { return static_cast<int>(basis_.cols()); }
    double condition_number() const { return cond_; }

private:
    CMatrix basis_;
    double cond_;
};

/// Basis (r x (r-j)) of l_j.
CMatrix flag_subspace(const Flag& flag, int j);

/// Whether w lies in span(V): dist(w, span V) <= tol * |w|.  The zero vector lies
/// in every subspace.
bool subspace_contains(const CMatrix& V, const CVector& w, double tol = kDefaultTol);

}  // namespace iml
