#pragma once

#include <vector>

#include "iml/core.hpp"

namespace iml::linalg {

/// Orthonormal basis of the column span; singular values <= tol * sigma_max are dropped.
CMatrix range_basis(const CMatrix& m, double tol = kDefaultTol);

/// Orthonormal basis of ker(m); singular values <= tol * max(sigma_max, scale) count as zero.
CMatrix null_space(const CMatrix& m, double tol = kDefaultTol, double scale = 0.0);

/// Orthonormal basis of the orthogonal complement of span(q) (q orthonormal).
CMatrix orthogonal_complement(const CMatrix& q);

/// Orthonormal basis of span(a) cap span(b).
CMatrix intersect(const CMatrix& a, const CMatrix& b, double tol = kDefaultTol);

int rank(const CMatrix& m, double tol = kDefaultTol);

double condition_number(const CMatrix& m);

/// Eigenvalues of a square matrix.
std::vector<Complex> eigenvalues(const CMatrix& m);

/// Monic characteristic polynomial det(X I - m) = X^r + c_{r-1} X^{r-1} + ... + c_0;
/// returns c_0..c_{r-1} (Faddeev-LeVerrier).
std::vector<Complex> char_poly(const CMatrix& m);

/// Coefficients c_0..c_{r-1} of prod (X - root).
std::vector<Complex> poly_from_roots(const std::vector<Complex>& roots);

/// min over bijections of max |a_k - b_pi(k)|; exhaustive for size <= 6, greedy beyond.
double matching_distance(const std::vector<Complex>& a, const std::vector<Complex>& b);

/// Scale a vector so its largest-modulus entry is real and positive.
CVector normalize_phase(const CVector& v);

/// Commutator [a, b].
inline CMatrix commutator(const CMatrix& a, const CMatrix& b) { return a * b - b * a; }

/// Clusters values closer than tol (single linkage), returning one representative
/// (the mean) per cluster with its multiplicity.
std::vector<std::pair<Complex, int>> cluster(const std::vector<Complex>& values, double tol);

}  // namespace iml::linalg
