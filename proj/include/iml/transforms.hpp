#pragma once

#include <string>
#include <utility>
#include <vector>

#include "iml/parabolic.hpp"

namespace iml {

/// G(z) = U diag((z - t_p)^{e_1}, ..., (z - t_p)^{e_r}) U^{-1} V.
struct GaugeFunction {
    CMatrix outer;               // U
    std::vector<int> exponents;  // e_k
    int puncture = -1;           // p (0-based); ignored when every e_k is 0
    CMatrix right;               // V

    static GaugeFunction constant(const CMatrix& m);
    static GaugeFunction scalar(int r, int puncture, int power);

    CMatrix evaluate(Complex z, const MarkedSphere& sphere) const;
    GaugeFunction inverse() const;
    std::string describe() const;
};

/// Y' = G Y, so A' = G A G^{-1} - G' G^{-1}.  Infinity becomes marked when the
/// new residues no longer sum to zero.  Throws SingularGauge / NonFuchsianGauge.
FuchsianSystem apply_gauge(const FuchsianSystem& system, const GaugeFunction& gauge, double tol = 1e-8);

using Transformed = std::pair<ParabolicConnection, TransformRecord>;

/// Flag and complement conditioning beyond this raises FlagDegenerate.
inline constexpr double kElmConditionLimit = 1e8;

/// Elementary transform along l^(i)_j, 1 <= j <= r-1, using the best-conditioned
/// complement of l^(i)_j invariant under the residue sum.
Transformed elm(const ParabolicConnection& conn, int i, int j);

/// Same with an explicit invariant complement W (r x j).
Transformed elm(const ParabolicConnection& conn, int i, int j, const CMatrix& complement);

/// Admissible complements for elm(i, j), best conditioned first.
std::vector<CMatrix> elm_complements(const ParabolicConnection& conn, int i, int j);

/// Inverse of elm(i, j): elm(i, r - j) followed by twist_b(i, +1).
std::pair<ParabolicConnection, std::vector<TransformRecord>> elm_inverse(const ParabolicConnection& conn, int i,
                                                                         int j);

/// Scalar twist by (z - t_i)^{direction}: exponents at i drop by direction, d grows by r * direction.
Transformed twist_b(const ParabolicConnection& conn, int i, int direction);

/// Constant change of frame Y' = g Y: residues conjugated, flags mapped by g.
Transformed conjugate(const ParabolicConnection& conn, const CMatrix& g, const std::string& description);

/// Constant gauge that diagonalizes A_inf when it is well conditioned and then
/// balances the residues by diagonal scaling.  Exponents are unchanged.
Transformed balance_frame(const ParabolicConnection& conn);

enum class ExponentOrder { DecreasingRe, IncreasingRe };

/// Re-sorts the exponents at i into multiplicity blocks and rebuilds the flag.
Transformed permute_a(const ParabolicConnection& conn, int i, ExponentOrder order = ExponentOrder::DecreasingRe);

/// Brings every exponent into 0 <= Re < 1.  Throws NonTermination when the step budget runs out.
std::pair<ParabolicConnection, std::vector<TransformRecord>> normalize_sigma(const ParabolicConnection& conn);

}  // namespace iml
