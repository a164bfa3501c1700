#pragma once

#include <functional>
#include <vector>

#include "iml/monodromy.hpp"
#include "iml/transforms.hpp"

namespace iml {

using Configuration = std::vector<Complex>;

/// Piecewise-linear path s -> (t_1(s), ..., t_n(s)) through the samples.
struct DeformationPath {
    std::vector<Configuration> samples;

    std::vector<bool> moving() const;
    /// Clearance used for collision checks: 1e-3 times the diameter of the first sample.
    double clearance() const;
};

/// Derivatives of the residues for the configuration velocity dt.
using DeformationField = std::function<std::vector<CMatrix>(const Configuration& t, const std::vector<CMatrix>& residues,
                                                             const Configuration& dt)>;

/// dA_i = sum_j (dA_i/dt_j) dt_j with dA_i/dt_j = -[A_i, A_j]/(t_i - t_j) and
/// dA_i/dt_i = sum_{k != i} [A_i, A_k]/(t_i - t_k).
std::vector<CMatrix> schlesinger_rhs(const Configuration& t, const std::vector<CMatrix>& residues,
                                     const Configuration& dt);

/// Rejects paths on which two punctures (or a puncture and the basepoint) come
/// closer than the clearance.  Throws ConfigurationCollision.
void check_path(const DeformationPath& path, const MarkedSphere& start);

struct FlowOptions {
    double tol = 1e-12;
    double blowup = 1e6;             // ChartExit threshold on |A_i|
    DeformationField field;          // empty: schlesinger_rhs
    bool regularize = false;         // switch charts by elm before exiting
    double regularize_threshold = 0; // 0: min(100 * (1 + max |A_i(0)|), blowup / 10)
    int max_regularizations = 16;
};

struct FlowCheckpoint {
    double s = 0.0;
    Configuration punctures;
    std::vector<CMatrix> residues;
};

struct FlowResult {
    ParabolicConnection endpoint;
    std::vector<FlowCheckpoint> checkpoints;
    double sum_drift = 0.0;       // max_s |sum A_i(s) - sum A_i(0)| within each chart
    double spectrum_drift = 0.0;  // max_s max_i matching distance of spectra
    long long accepted = 0;
    long long rejected = 0;
    std::vector<TransformRecord> transforms;  // chart switches, in order
};

FlowResult flow(const ParabolicConnection& conn, const DeformationPath& path, const FlowOptions& options = {});

/// Dense trajectory of the flow; chart switches are applied when options.regularize is set.
FlowResult horizontal_lift(const ParabolicConnection& conn, const DeformationPath& path,
                           const FlowOptions& options = {});

struct IsomonodromyReport {
    InvariantVector start;
    InvariantVector end;
    double deviation = 0.0;
    double transport_bound = 0.0;
    double tol = 0.0;
    double cut_angle = 0.0;
    std::vector<int> order;
    bool pass = false;
};

/// Compares trace-word invariants at both ends with loops built from the same
/// cut.  Throws OrderingCutCrossed when a puncture crosses the cut along the path.
IsomonodromyReport verify_isomonodromy(const ParabolicConnection& conn, const FlowResult& result, double tol,
                                       double transport_tol = kTransportTol);

IsomonodromyReport verify_isomonodromy(const ParabolicConnection& conn, const DeformationPath& path, double tol,
                                       const FlowOptions& options = {});

}  // namespace iml
