#pragma once

#include <optional>
#include <string>
#include <vector>

#include "iml/core.hpp"
#include "iml/transform_record.hpp"

namespace iml {

using ExponentTable = std::vector<std::vector<Exponent>>;

/// d := -sum(lambda); throws NonIntegralDegree when the sum is not an integer
/// (exactly, or within tol in float mode).
long long degree_of(const ExponentTable& lambda, double tol = kDefaultTol);

/// Local exponents lambda^(i)_j (n rows of length r) and the degree they force.
class ExponentData {
public:
    explicit ExponentData(ExponentTable rows, double tol = kDefaultTol);

    const ExponentTable& rows() const { return rows_; }
    const std::vector<Exponent>& row(std::size_t i) const { return rows_.at(i); }
    const Exponent& at(std::size_t i, std::size_t j) const { return rows_.at(i).at(j); }
    std::size_t punctures() const { return rows_.size(); }
    int rank() const { return rows_.empty() ? 0 : static_cast<int>(rows_.front().size()); }
    long long degree() const { return degree_; }
    bool exact() const;

    ExponentData with_row(std::size_t i, std::vector<Exponent> row) const;

private:
    ExponentTable rows_;
    long long degree_;
};

/// Exponent table read off the residue spectra (float mode).
ExponentData exponents_from_spectra(const std::vector<CMatrix>& residues);

/// d + sum A_i dz/(z - t_i) on the trivial rank-r bundle.
class FuchsianSystem {
public:
    FuchsianSystem(MarkedSphere sphere, std::vector<CMatrix> residues, double tol = kDefaultTol);

    const MarkedSphere& sphere() const { return sphere_; }
    const std::vector<CMatrix>& residues() const { return residues_; }
    const CMatrix& residue(std::size_t i) const { return residues_.at(i); }
    int rank() const { return rank_; }
    std::size_t size() const { return residues_.size(); }

    /// A_inf = -sum A_i.
    CMatrix residue_at_infinity() const;

    /// sum_i A_i / (z - t_i).
    CMatrix connection_matrix(Complex z) const;

    FuchsianSystem with_residues(std::vector<CMatrix> residues) const;

private:
    MarkedSphere sphere_;
    std::vector<CMatrix> residues_;
    int rank_;
};

/// A parabolic connection in the Fuchsian chart.  Plain value; use
/// make_connection / check_compatibility to validate.
struct ParabolicConnection {
    FuchsianSystem system;
    ExponentData exponents;
    std::vector<Flag> flags;
    std::vector<TransformRecord> provenance;
};

struct CompatibilityReport {
    /// residual[i][j] = |(1 - P_{l_{j+1}})(A_i - lambda_j)Q_{l_j}| / max(1, |A_i|)
    std::vector<std::vector<double>> residuals;
    std::vector<double> trace_mismatch;  // |tr A_i - sum_j lambda_j| / max(1, |A_i|)
    double max_residual = 0.0;
    double tol = kDefaultTol;
    bool pass = false;
};

CompatibilityReport check_compatibility(const ParabolicConnection& conn, double tol = kDefaultTol);

/// Flag adapted to `residue` with the exponents in the prescribed order
/// (lower-triangular action, diagonal = order).  Throws SpectrumMismatch.
Flag adapted_flag(const CMatrix& residue, const std::vector<Exponent>& order, double tol = kDefaultTol);

std::vector<Flag> build_flags(const FuchsianSystem& system, const ExponentData& lambda, double tol = kDefaultTol);

/// Validated connection; flags built when not supplied.
ParabolicConnection make_connection(FuchsianSystem system, ExponentData lambda,
                                    std::optional<std::vector<Flag>> flags = std::nullopt,
                                    double tol = kDefaultTol);

// ---------------------------------------------------------------- classification

struct LambdaClass {
    enum class Kind { Generic, Resonant, ReducibleSpecial };
    Kind kind = Kind::Generic;
    /// Resonant: (i, j, k) with lambda_j - lambda_k in Z.
    int puncture = -1, j = -1, k = -1;
    /// ReducibleSpecial: subset size s and chosen indices per puncture.
    int s = 0;
    std::vector<std::vector<int>> subsets;
    Exponent witness_sum;
    /// Search stopped before exhausting condition (2); result is "generic within budget".
    bool budget_exceeded = false;
};

const char* to_string(LambdaClass::Kind kind);

LambdaClass classify_lambda(const ExponentData& lambda, double tol = kDefaultTol,
                            long long search_budget = 2'000'000);

// ---------------------------------------------------------------- invariant subspaces

struct InvariantSubspace {
    CMatrix basis;  // orthonormal, r x dim
    /// Spectrum of A_i restricted to the subspace, per puncture.
    std::vector<std::vector<Complex>> exponents;
    /// Member of a positive-dimensional family (not isolated).
    bool from_family = false;
};

struct InvariantSubspaceSearch {
    std::vector<InvariantSubspace> subspaces;  // proper, nonzero
    bool complete = true;
    std::string note;
};

/// Proper nonzero subspaces invariant under every matrix in `mats` (r <= 3).
InvariantSubspaceSearch common_invariant_subspaces(const std::vector<CMatrix>& mats, double tol = kDefaultTol,
                                                   int max_rank = 3,
                                                   const std::vector<CMatrix>& special_subspaces = {});

/// Residue-invariant subspaces V (A_i V in V for all i), i.e. trivial invariant subbundles.
InvariantSubspaceSearch residue_invariant_subspaces(const FuchsianSystem& system, int max_rank = 3,
                                                    double tol = kDefaultTol,
                                                    const std::vector<Flag>* flags = nullptr);

// ---------------------------------------------------------------- stability

/// 0 < alpha_1 < ... < alpha_r < 1 per puncture, all distinct.
class Weights {
public:
    explicit Weights(std::vector<std::vector<Rational>> alpha);

    const std::vector<std::vector<Rational>>& alpha() const { return alpha_; }
    const Rational& at(std::size_t i, std::size_t j) const { return alpha_.at(i).at(j); }
    std::size_t punctures() const { return alpha_.size(); }
    int rank() const { return alpha_.empty() ? 0 : static_cast<int>(alpha_.front().size()); }

private:
    std::vector<std::vector<Rational>> alpha_;
};

struct GenericityCertificate {
    bool generic = true;
    bool exhaustive = true;
    long long checked = 0;
    std::string witness;
};

/// No candidate subbundle can tie the slope inequality for degree d.
GenericityCertificate check_weight_genericity(const Weights& weights, long long degree, unsigned seed = 0,
                                              long long samples = 20000);

/// rank F, deg F and jumps[i][j-1] = dim((F|t_i cap l_{j-1}) / (F|t_i cap l_j)), j = 1..r.
struct SubbundleCandidate {
    int rank = 0;
    long long degree = 0;
    std::vector<std::vector<int>> jumps;
    std::string label;
};

SubbundleCandidate candidate_from_subspace(const ParabolicConnection& conn, const InvariantSubspace& sub,
                                           const std::string& label, double tol = kDefaultTol);

struct SlopeComparison {
    std::string label;
    Rational slope_sub;
    Rational slope_total;
    bool violates = false;  // slope_sub >= slope_total
};

struct StabilityResult {
    enum class Verdict { Stable, Unstable, Undecided };
    Verdict verdict = Verdict::Undecided;
    std::vector<SlopeComparison> comparisons;
    int witness = -1;  // index into comparisons
    std::string reason;
};

const char* to_string(StabilityResult::Verdict v);

StabilityResult stability_test(const ParabolicConnection& conn, const Weights& weights,
                               const std::vector<SubbundleCandidate>& candidates, bool candidates_complete);

/// Candidates generated from residue_invariant_subspaces.
StabilityResult stability_test(const ParabolicConnection& conn, const Weights& weights,
                               double tol = kDefaultTol);

struct DimensionResult {
    long long value = 0;
    std::optional<std::string> warning;
};

/// 2 r^2 (g - 1) + n r (r - 1) + 2.
DimensionResult moduli_dimension(int genus, int rank, int punctures);

}  // namespace iml
