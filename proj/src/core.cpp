#include "iml/core.hpp"

#include <cmath>
#include <limits>

#include "iml/linalg.hpp"

namespace iml {

MarkedSphere::MarkedSphere(std::vector<Complex> punctures, Complex basepoint, bool include_infinity,
                           double separation_tol)
    : punctures_(std::move(punctures)),
      basepoint_(basepoint),
      include_infinity_(include_infinity),
      separation_tol_(separation_tol) {
    if (punctures_.empty()) throw Error(ErrorKind::InvalidInput, "at least one puncture is required");
    if (!(separation_tol_ > 0)) throw Error(ErrorKind::InvalidInput, "separation tolerance must be positive");
    auto finite = [](Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); };
    if (!finite(basepoint_)) throw Error(ErrorKind::InvalidInput, "basepoint is not finite");
    for (std::size_t i = 0; i < punctures_.size(); ++i) {
        if (!finite(punctures_[i])) throw Error(ErrorKind::InvalidInput, "puncture is not finite");
        if (std::abs(punctures_[i] - basepoint_) < separation_tol_)
            throw Error(ErrorKind::InvalidInput, "basepoint coincides with puncture " + std::to_string(i + 1));
        for (std::size_t j = 0; j < i; ++j) {
            if (std::abs(punctures_[i] - punctures_[j]) < separation_tol_)
                throw Error(ErrorKind::InvalidInput, "punctures " + std::to_string(j + 1) + " and " +
                                                         std::to_string(i + 1) + " are not separated");
        }
    }
}

double MarkedSphere::min_separation() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < punctures_.size(); ++i)
        for (std::size_t j = 0; j < i; ++j) best = std::min(best, std::abs(punctures_[i] - punctures_[j]));
    return best;
}

Flag::Flag(CMatrix adapted_basis) : basis_(std::move(adapted_basis)) {
    if (basis_.rows() != basis_.cols() || basis_.rows() < 1)
        throw Error(ErrorKind::InvalidInput, "flag basis must be square of size >= 1");
    if (!basis_.allFinite()) throw Error(ErrorKind::InvalidInput, "flag basis has non-finite entries");
    cond_ = linalg::condition_number(basis_);
    if (!std::isfinite(cond_) || cond_ > 1e14) throw Error(ErrorKind::InvalidInput, "flag basis is singular");
}

CMatrix flag_subspace(const Flag& flag, int j) {
    int r = flag.rank();
    if (j < 0 || j > r) throw Error(ErrorKind::IndexOutOfRange, "flag index " + std::to_string(j));
    return flag.basis().rightCols(r - j);
}

bool subspace_contains(const CMatrix& V, const CVector& w, double tol) {
    double wn = w.norm();
    if (wn == 0.0) return true;
    if (V.cols() == 0) return false;
    CMatrix q = linalg::range_basis(V);
    CVector residual = w - q * (q.adjoint() * w);
    return residual.norm() <= tol * wn;
}

}  // namespace iml
