#pragma once

#include <optional>
#include <string>
#include <vector>

#include "iml/parabolic.hpp"

namespace iml {

using Path = std::vector<Complex>;  // polygonal path through these vertices

/// Default relative step tolerance for transports.
inline constexpr double kTransportTol = 1e-17;  // relative, for the long double integrator

/// Closed polygonal loop based at z_0 with its winding certificate.
struct Loop {
    Path vertices;
    int puncture = -1;          // encircled puncture (0-based); -1 for the loop around infinity
    std::vector<int> winding;   // winding number about each finite puncture
};

struct LoopSet {
    std::vector<Loop> loops;     // indexed by puncture
    std::vector<int> order;      // relation order: M[order[0]] ... M[order[n-1]] (M_inf) = I
    double cut_angle = 0.0;      // direction of the ray from z_0 that no loop crosses
    double clearance = 0.0;
    std::optional<Loop> infinity_loop;
};

/// Distance from p to the segment [a, b].
double segment_distance(Complex a, Complex b, Complex p);

/// Winding numbers of a closed polygon about each point, by argument summation.
std::vector<int> winding_numbers(const Path& closed, const std::vector<Complex>& points);

/// Keyhole loops, one per puncture, ordered by argument from the cut.
/// cut_angle fixes the cut instead of taking the bisector of the widest gap.
LoopSet standard_loops(const MarkedSphere& sphere, std::optional<double> cut_angle = std::nullopt);

struct TransportResult {
    CMatrix value;
    double error_bound = 0.0;
    long long steps = 0;
    long long rejected = 0;
};

/// Fundamental solution of dY/dz = -A(z) Y along the path with Y(start) = I.
TransportResult transport(const FuchsianSystem& system, const Path& path, double tol = kTransportTol);

/// Fixed-step product of left-endpoint exponentials exp(-A(z_k) dz); first order.
CMatrix oracle_transport(const FuchsianSystem& system, const Path& path, long long steps);

struct MonodromyRep {
    std::vector<CMatrix> matrices;   // M_i, indexed by puncture
    std::vector<double> error_bounds;
    std::vector<int> order;
    Complex basepoint;
    double cut_angle = 0.0;
    std::string convention;
    std::optional<CMatrix> infinity;  // M_inf when infinity is marked
    double infinity_error = 0.0;
    double relation_residual = 0.0;
    double relation_bound = 0.0;
};

/// M_{o_1} ... M_{o_n} (M_inf).
CMatrix relation_product(const MonodromyRep& rep);

/// Transports run concurrently (capped by IML_THREADS); results are combined in loop order.
MonodromyRep monodromy_rep(const FuchsianSystem& system, double tol = kTransportTol,
                           std::optional<double> cut_angle = std::nullopt);

/// Worker count from IML_THREADS (default: hardware concurrency, at least 1).
unsigned thread_budget();

struct LocalMonodromyData {
    /// coefficients[i] = a^(i)_0 .. a^(i)_{r-1} of prod_j (X - exp(-2 pi i lambda^(i)_j)).
    std::vector<std::vector<Complex>> coefficients;
    Complex product_constant;    // prod_i a^(i)_0
    double constraint_residual;  // |prod_i a^(i)_0 - (-1)^{rn}|
};

LocalMonodromyData rh_map(const ExponentData& lambda);

/// exp(-2 pi i lambda), reducing exact exponents mod 1 first.
Complex local_eigenvalue(const Exponent& lambda);

struct RhConsistency {
    std::vector<double> deviation;  // per puncture, max coefficient difference
    double max_deviation = 0.0;
    double tol = 0.0;
    bool pass = false;
};

RhConsistency check_rh_consistency(const ParabolicConnection& conn, const MonodromyRep& rep, double tol);

struct InvariantVector {
    std::vector<std::vector<int>> words;
    std::vector<Complex> values;
};

/// Traces of positive words of length <= word_budget, one per cyclic class, in (length, lexicographic) order.
InvariantVector rep_invariants(const std::vector<CMatrix>& matrices, int word_budget = 3);
InvariantVector rep_invariants(const MonodromyRep& rep, int word_budget = 3);

/// max_k |a_k - b_k| / max(1, |a_k|); infinite when the word lists differ.
double invariant_distance(const InvariantVector& a, const InvariantVector& b);

struct SingularPointResult {
    bool singular = false;
    bool reducible = false;
    bool search_complete = true;
    std::string witness;
};

SingularPointResult is_singular_point(const MonodromyRep& rep, const ExponentData& lambda, double tol = 1e-7);

}  // namespace iml
