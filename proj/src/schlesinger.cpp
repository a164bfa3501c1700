#include "iml/schlesinger.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "iml/integrator.hpp"
#include "iml/linalg.hpp"

namespace iml {

namespace {

constexpr int kCheckpointsPerSegment = 64;

OdeState pack(const std::vector<CMatrix>& mats) {
    const auto r = mats.front().rows();
    OdeState y(static_cast<Eigen::Index>(mats.size()) * r * r);
    for (std::size_t k = 0; k < mats.size(); ++k)
        y.segment(static_cast<Eigen::Index>(k) * r * r, r * r) = Eigen::Map<const OdeState>(mats[k].data(), r * r);
    return y;
}

std::vector<CMatrix> unpack(const OdeState& y, std::size_t n, Eigen::Index r) {
    std::vector<CMatrix> out;
    for (std::size_t k = 0; k < n; ++k)
        out.emplace_back(Eigen::Map<const CMatrix>(y.data() + static_cast<Eigen::Index>(k) * r * r, r, r));
    return out;
}

double max_norm(const std::vector<CMatrix>& mats) {
    double m = 0.0;
    for (const auto& a : mats) m = std::max(m, norm(a));
    return m;
}

CMatrix total(const std::vector<CMatrix>& mats) {
    CMatrix s = CMatrix::Zero(mats.front().rows(), mats.front().cols());
    for (const auto& a : mats) s += a;
    return s;
}

/// Raised from the step observer when the residues cross the regularization threshold.
struct ThresholdReached {
    double u;
    OdeState y;
};

double relative_angle(Complex t, Complex z0, double cut) {
    double x = std::fmod(std::arg(t - z0) - cut, 2 * std::numbers::pi);
    if (x < 0) x += 2 * std::numbers::pi;
    return x;
}

std::vector<int> angular_order(const Configuration& t, Complex z0, double cut) {
    std::vector<int> order(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) order[k] = static_cast<int>(k);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return relative_angle(t[a], z0, cut) > relative_angle(t[b], z0, cut);
    });
    return order;
}

}  // namespace

std::vector<bool> DeformationPath::moving() const {
    std::vector<bool> out;
    if (samples.empty()) return out;
    out.assign(samples.front().size(), false);
    for (const auto& c : samples)
        for (std::size_t k = 0; k < c.size() && k < out.size(); ++k)
            if (c[k] != samples.front()[k]) out[k] = true;
    return out;
}

double DeformationPath::clearance() const {
    double diam = 0.0;
    if (samples.empty()) return 0.0;
    const auto& c = samples.front();
    for (std::size_t a = 0; a < c.size(); ++a)
        for (std::size_t b = 0; b < a; ++b) diam = std::max(diam, std::abs(c[a] - c[b]));
    return 1e-3 * diam;
}

std::vector<CMatrix> schlesinger_rhs(const Configuration& t, const std::vector<CMatrix>& a, const Configuration& dt) {
    const std::size_t n = a.size();
    std::vector<CMatrix> out(n, CMatrix::Zero(a.front().rows(), a.front().cols()));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const Complex diff = t[i] - t[j];
            if (std::abs(diff) == 0.0) throw Error(ErrorKind::ConfigurationCollision, "punctures coincide");
            const Complex weight = dt[i] - dt[j];
            if (weight == Complex(0.0)) continue;
            // dA_i/dt_i and dA_i/dt_j collected over the pair
            out[i] += linalg::commutator(a[i], a[j]) * (weight / diff);
        }
    return out;
}

void check_path(const DeformationPath& path, const MarkedSphere& start) {
    if (path.samples.empty()) throw Error(ErrorKind::InvalidInput, "deformation path has no samples");
    const std::size_t n = start.size();
    for (const auto& c : path.samples) {
        if (c.size() != n) throw Error(ErrorKind::InvalidInput, "path sample has the wrong number of punctures");
        for (Complex z : c)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw Error(ErrorKind::InvalidInput, "path sample is not finite");
    }
    for (std::size_t k = 0; k < n; ++k)
        if (std::abs(path.samples.front()[k] - start.puncture(k)) > 1e-12 * (1.0 + std::abs(start.puncture(k))))
            throw Error(ErrorKind::InvalidInput, "path does not start at the connection's configuration");
    const double clearance = path.clearance();
    const Complex z0 = start.basepoint();
    for (std::size_t p = 0; p + 1 < path.samples.size(); ++p) {
        const auto& c0 = path.samples[p];
        const auto& c1 = path.samples[p + 1];
        for (std::size_t a = 0; a < n; ++a) {
            if (segment_distance(c0[a], c1[a], z0) < clearance)
                throw Error(ErrorKind::ConfigurationCollision,
                            "puncture " + std::to_string(a + 1) + " runs into the basepoint");
            for (std::size_t b = 0; b < a; ++b) {
                const double d = segment_distance(c0[a] - c0[b], c1[a] - c1[b], Complex(0.0));
                if (d < clearance) {
                    std::ostringstream os;
                    os << "punctures " << b + 1 << " and " << a + 1 << " come within " << d << " (clearance "
                       << clearance << ") on path segment " << p + 1;
                    throw Error(ErrorKind::ConfigurationCollision, os.str());
                }
            }
        }
    }
}

namespace {

struct ChartSwitch {
    ParabolicConnection conn;
    std::vector<TransformRecord> records;
};

/// Best elm over all (i, j) and complements, each followed by frame balancing:
/// smallest resulting residue norm.
std::optional<ChartSwitch> chart_switch(const ParabolicConnection& conn) {
    std::optional<ChartSwitch> best;
    double best_norm = max_norm(conn.system.residues());
    const int r = conn.system.rank();
    for (std::size_t i = 0; i < conn.system.size(); ++i)
        for (int j = 1; j < r; ++j) {
            std::vector<CMatrix> complements;
            try {
                complements = elm_complements(conn, static_cast<int>(i), j);
            } catch (const Error&) {
                continue;
            }
            for (const auto& w : complements) {
                try {
                    auto moved = elm(conn, static_cast<int>(i), j, w);
                    auto balanced = balance_frame(moved.first);
                    double m = max_norm(balanced.first.system.residues());
                    if (m < best_norm) {
                        best_norm = m;
                        best = ChartSwitch{std::move(balanced.first), {moved.second, balanced.second}};
                    }
                } catch (const Error&) {
                }
            }
        }
    return best;
}

FlowResult run_flow(const ParabolicConnection& conn, const DeformationPath& path, const FlowOptions& opts,
                    bool allow_switch) {
    check_path(path, conn.system.sphere());
    const std::size_t n = conn.system.size();
    const auto r = conn.system.rank();
    const DeformationField field = opts.field ? opts.field : DeformationField(schlesinger_rhs);
    const double threshold = opts.regularize_threshold > 0
                                 ? opts.regularize_threshold
                                 : std::min(1e2 * (1.0 + max_norm(conn.system.residues())), opts.blowup / 10);
    const bool regularize = allow_switch && opts.regularize;

    std::vector<double> lengths;
    double total_length = 0.0;
    for (std::size_t p = 0; p + 1 < path.samples.size(); ++p) {
        double l = 0.0;
        for (std::size_t k = 0; k < n; ++k) l += std::norm(path.samples[p + 1][k] - path.samples[p][k]);
        lengths.push_back(std::sqrt(l));
        total_length += lengths.back();
    }

    FlowResult out{conn, {}, 0.0, 0.0, 0, 0, {}};
    ParabolicConnection cur = conn;
    std::vector<CMatrix> residues = conn.system.residues();
    CMatrix sum0 = total(residues);
    std::vector<std::vector<Complex>> spectra0;
    for (const auto& a : residues) spectra0.push_back(linalg::eigenvalues(a));
    out.checkpoints.push_back({0.0, path.samples.front(), residues});

    auto track_drift = [&](const std::vector<CMatrix>& mats) {
        out.sum_drift = std::max(out.sum_drift, norm(total(mats) - sum0));
        for (std::size_t k = 0; k < n; ++k)
            out.spectrum_drift =
                std::max(out.spectrum_drift, linalg::matching_distance(spectra0[k], linalg::eigenvalues(mats[k])));
    };

    OdeOptions ode;
    ode.rtol = opts.tol;
    OdeStats stats;
    double arc_before = 0.0;
    Configuration here = path.samples.front();

    for (std::size_t p = 0; p + 1 < path.samples.size(); ++p) {
        if (lengths[p] == 0.0) continue;
        const Configuration& c0 = path.samples[p];
        Configuration dt(n);
        for (std::size_t k = 0; k < n; ++k) dt[k] = path.samples[p + 1][k] - c0[k];
        auto config_at = [&](double u) {
            Configuration c(n);
            for (std::size_t k = 0; k < n; ++k) c[k] = c0[k] + u * dt[k];
            return c;
        };
        auto rhs = [&](double u, const OdeState& y, OdeState& dy) {
            auto d = field(config_at(u), unpack(y, n, r), dt);
            dy = pack(d);
        };
        auto observe = [&](double, const OdeState&, double u1, const OdeState& y1, const OdeState&) {
            auto mats = unpack(y1, n, r);
            double m = max_norm(mats);
            if (regularize && m > threshold) throw ThresholdReached{u1, y1};
            if (!(m <= opts.blowup)) {
                std::ostringstream os;
                os << "residue norm " << m << " exceeds " << opts.blowup << " at s="
                   << (arc_before + u1 * lengths[p]) / total_length << "; the path leaves the Fuchsian chart";
                throw Error(ErrorKind::ChartExit, os.str());
            }
        };

        for (int m = 0; m < kCheckpointsPerSegment; ++m) {
            double u = static_cast<double>(m) / kCheckpointsPerSegment;
            const double u_end = static_cast<double>(m + 1) / kCheckpointsPerSegment;
            OdeState y = pack(residues);
            while (true) {
                try {
                    y = integrate_dp45<double>(rhs, u, u_end, y, ode, &stats, observe);
                    break;
                } catch (const ThresholdReached& hit) {
                    if (static_cast<int>(out.transforms.size()) >= opts.max_regularizations)
                        throw Error(ErrorKind::ChartExit, "regularization budget exhausted");
                    auto mats = unpack(hit.y, n, r);
                    Configuration c = config_at(hit.u);
                    MarkedSphere sphere = cur.system.sphere().with_punctures(c);
                    FuchsianSystem sys(sphere, mats, 1e-6);
                    const double flag_tol = std::max(1e-7, 1e-10 * max_norm(mats));
                    ParabolicConnection probe{sys, cur.exponents, build_flags(sys, cur.exponents, flag_tol), cur.provenance};
                    auto sw = chart_switch(probe);
                    if (!sw) throw Error(ErrorKind::ChartExit, "no elementary transform re-enters a bounded chart");
                    std::ostringstream note;
                    note << "chart switch at s=" << (arc_before + hit.u * lengths[p]) / total_length;
                    const std::size_t base = sw->conn.provenance.size() - sw->records.size();
                    for (std::size_t k = 0; k < sw->records.size(); ++k) {
                        sw->records[k].notes.push_back(note.str());
                        sw->conn.provenance[base + k].notes.push_back(note.str());
                        out.transforms.push_back(sw->records[k]);
                    }
                    cur = std::move(sw->conn);
                    y = pack(cur.system.residues());
                    u = hit.u;
                    // conservation is monitored per chart
                    sum0 = total(cur.system.residues());
                    spectra0.clear();
                    for (const auto& a : cur.system.residues()) spectra0.push_back(linalg::eigenvalues(a));
                }
            }
            residues = unpack(y, n, r);
            track_drift(residues);
            here = config_at(u_end);
            if (m + 1 == kCheckpointsPerSegment) here = path.samples[p + 1];
            out.checkpoints.push_back(
                {(arc_before + u_end * lengths[p]) / total_length, here, residues});
        }
        arc_before += lengths[p];
    }
    if (total_length > 0.0) out.checkpoints.back().s = 1.0;

    MarkedSphere sphere = cur.system.sphere().with_punctures(path.samples.back());
    if (opts.field) {
        // a foreign vector field need not conserve the residue sum or the spectra
        double scale = 1.0;
        for (const auto& a : residues) scale += norm(a);
        if (norm(total(residues)) > 1e-9 * scale) sphere = sphere.with_infinity(true);
        FuchsianSystem sys(sphere, residues, 1e-6);
        ExponentData lambda = cur.exponents;
        std::vector<Flag> flags;
        try {
            flags = build_flags(sys, lambda, 1e-7);
        } catch (const Error&) {
            lambda = exponents_from_spectra(residues);
            flags = build_flags(sys, lambda, 1e-7);
        }
        out.endpoint = ParabolicConnection{std::move(sys), std::move(lambda), std::move(flags), cur.provenance};
    } else {
        FuchsianSystem sys(sphere, residues, 1e-6);
        std::vector<Flag> flags = build_flags(sys, cur.exponents, 1e-7);
        out.endpoint = ParabolicConnection{std::move(sys), cur.exponents, std::move(flags), cur.provenance};
    }
    out.accepted = stats.accepted;
    out.rejected = stats.rejected;
    return out;
}

}  // namespace

FlowResult flow(const ParabolicConnection& conn, const DeformationPath& path, const FlowOptions& options) {
    return run_flow(conn, path, options, options.regularize);
}

FlowResult horizontal_lift(const ParabolicConnection& conn, const DeformationPath& path, const FlowOptions& options) {
    return run_flow(conn, path, options, true);
}

IsomonodromyReport verify_isomonodromy(const ParabolicConnection& conn, const FlowResult& result, double tol,
                                       double transport_tol) {
    const MarkedSphere& start = conn.system.sphere();
    const Complex z0 = start.basepoint();
    const LoopSet loops0 = standard_loops(start);
    const double cut = loops0.cut_angle;

    // the cut must not be crossed and the angular order must not change
    std::vector<double> prev;
    for (Complex t : start.punctures()) prev.push_back(relative_angle(t, z0, cut));
    for (const auto& cp : result.checkpoints) {
        for (std::size_t k = 0; k < cp.punctures.size(); ++k) {
            double x = relative_angle(cp.punctures[k], z0, cut);
            if (std::abs(x - prev[k]) > std::numbers::pi) {
                std::ostringstream os;
                os << "puncture " << k + 1 << " crosses the ordering cut near s=" << cp.s << "; split the path";
                throw Error(ErrorKind::OrderingCutCrossed, os.str());
            }
            prev[k] = x;
        }
        if (angular_order(cp.punctures, z0, cut) != loops0.order) {
            std::ostringstream os;
            os << "angular order of the punctures changes near s=" << cp.s << "; split the path";
            throw Error(ErrorKind::OrderingCutCrossed, os.str());
        }
    }

    const MonodromyRep rep0 = monodromy_rep(conn.system, transport_tol, cut);
    const MonodromyRep rep1 = monodromy_rep(result.endpoint.system, transport_tol, cut);
    if (rep1.order != rep0.order) throw Error(ErrorKind::OrderingCutCrossed, "loop order differs at the endpoint");

    IsomonodromyReport out;
    out.start = rep_invariants(rep0);
    out.end = rep_invariants(rep1);
    out.deviation = invariant_distance(out.start, out.end);
    for (double b : rep0.error_bounds) out.transport_bound += b;
    for (double b : rep1.error_bounds) out.transport_bound += b;
    out.tol = tol;
    out.cut_angle = cut;
    out.order = rep0.order;
    out.pass = out.deviation <= tol;
    return out;
}

IsomonodromyReport verify_isomonodromy(const ParabolicConnection& conn, const DeformationPath& path, double tol,
                                       const FlowOptions& options) {
    return verify_isomonodromy(conn, flow(conn, path, options), tol);
}

}  // namespace iml
