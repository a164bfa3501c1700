#include "iml/monodromy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include <unsupported/Eigen/MatrixFunctions>

#include "iml/integrator.hpp"
#include "iml/linalg.hpp"

namespace iml {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kCircleVertices = 64;

double wrap_angle(double x) {
    x = std::fmod(x, kTwoPi);
    if (x < 0) x += kTwoPi;
    return x;
}

void check_clearance(const Path& path, const std::vector<Complex>& points, double clearance,
                     const std::string& what) {
    for (std::size_t s = 0; s + 1 < path.size(); ++s)
        for (std::size_t k = 0; k < points.size(); ++k) {
            double d = segment_distance(path[s], path[s + 1], points[k]);
            if (d < clearance) {
                std::ostringstream os;
                os << what << " passes within " << d << " of puncture " << k + 1 << " (clearance " << clearance
                   << "); move the basepoint";
                throw Error(ErrorKind::GeometryTooTight, os.str());
            }
        }
}

}  // namespace

double segment_distance(Complex a, Complex b, Complex p) {
    Complex d = b - a;
    double len2 = std::norm(d);
    if (len2 == 0.0) return std::abs(p - a);
    double s = std::clamp(((p - a) * std::conj(d)).real() / len2, 0.0, 1.0);
    return std::abs(p - (a + s * d));
}

std::vector<int> winding_numbers(const Path& closed, const std::vector<Complex>& points) {
    std::vector<int> out;
    for (Complex p : points) {
        double total = 0.0;
        for (std::size_t s = 0; s + 1 < closed.size(); ++s) total += std::arg((closed[s + 1] - p) / (closed[s] - p));
        double turns = total / kTwoPi;
        long long w = std::llround(turns);
        if (std::abs(turns - static_cast<double>(w)) > 1e-6)
            throw Error(ErrorKind::GeometryTooTight, "winding number is not an integer; path passes through a puncture");
        out.push_back(static_cast<int>(w));
    }
    return out;
}

// Straight segment a -> b, bent around every puncture it passes within radius[m]
// of.  The arc stays on the side the segment already passes, so the homotopy
// class relative to the punctures is unchanged.
Path routed_segment(Complex a, Complex b, const std::vector<Complex>& pts, int skip,
                    const std::vector<double>& radius) {
    const double len = std::abs(b - a);
    const Complex u = (b - a) / len;
    struct Detour {
        double entry, exit;
        int m;
    };
    std::vector<Detour> detours;
    for (std::size_t m = 0; m < pts.size(); ++m) {
        if (static_cast<int>(m) == skip) continue;
        const double rad = radius[m];
        if (segment_distance(a, b, pts[m]) >= rad) continue;
        const Complex rel = (pts[m] - a) * std::conj(u);
        const double along = rel.real(), off = std::abs(rel.imag());
        if (off < 1e-9 * rad)
            throw Error(ErrorKind::GeometryTooTight,
                        "a loop stem runs through puncture " + std::to_string(m + 1) + "; move the basepoint");
        const double half = std::sqrt(rad * rad - off * off);
        if (along - half <= 0.0 || along + half >= len) continue;  // endpoint inside the disc; clearance check decides
        detours.push_back({along - half, along + half, static_cast<int>(m)});
    }
    std::sort(detours.begin(), detours.end(), [](const Detour& x, const Detour& y) { return x.entry < y.entry; });

    Path out{a};
    for (const auto& d : detours) {
        const Complex c = pts[d.m];
        const Complex e = a + d.entry * u, x = a + d.exit * u;
        const double th_e = std::arg(e - c);
        const double sweep = std::remainder(std::arg(x - c) - th_e, kTwoPi);  // short arc, on the segment's side
        const double rad = std::abs(e - c);
        const int steps = std::max(2, static_cast<int>(std::ceil(std::abs(sweep) / (kTwoPi / kCircleVertices))));
        out.push_back(e);
        for (int q = 1; q < steps; ++q) out.push_back(c + std::polar(rad, th_e + sweep * q / steps));
        out.push_back(x);
    }
    out.push_back(b);
    return out;
}

LoopSet standard_loops(const MarkedSphere& sphere, std::optional<double> cut_angle) {
    const auto& pts = sphere.punctures();
    const std::size_t n = pts.size();
    const Complex z0 = sphere.basepoint();
    LoopSet out;

    std::vector<double> theta;
    for (Complex t : pts) theta.push_back(std::arg(t - z0));
    double cut;
    if (cut_angle) {
        cut = *cut_angle;
    } else if (n == 1) {
        cut = theta[0] + std::numbers::pi;
    } else {
        std::vector<double> sorted = theta;
        std::sort(sorted.begin(), sorted.end());
        double best_gap = -1.0;
        cut = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            double lo = sorted[k];
            double hi = k + 1 < n ? sorted[k + 1] : sorted[0] + kTwoPi;
            if (hi - lo > best_gap + 1e-12) {
                best_gap = hi - lo;
                cut = lo + (hi - lo) / 2;
            }
        }
    }
    out.cut_angle = std::remainder(cut, kTwoPi);

    std::vector<double> rel;
    for (double th : theta) {
        double x = wrap_angle(th - out.cut_angle);
        if (x < 1e-12 || x > kTwoPi - 1e-12)
            throw Error(ErrorKind::GeometryTooTight, "a puncture lies on the cut ray");
        rel.push_back(x);
    }
    out.order.resize(n);
    for (std::size_t k = 0; k < n; ++k) out.order[k] = static_cast<int>(k);
    std::stable_sort(out.order.begin(), out.order.end(), [&](int a, int b) { return rel[a] > rel[b]; });

    double min_sep = sphere.min_separation();
    if (n == 1) min_sep = std::abs(pts[0] - z0);
    out.clearance = min_sep / 4;
    std::vector<double> detour_radius;
    for (Complex t : pts) detour_radius.push_back(std::min(0.45 * min_sep, 0.5 * std::abs(t - z0)));

    for (std::size_t k = 0; k < n; ++k) {
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < n; ++m)
            if (m != k) dmin = std::min(dmin, std::abs(pts[m] - pts[k]));
        const double dist = std::abs(pts[k] - z0);
        const double radius = std::min(dmin / 2, dist / 2);
        const Complex u = (pts[k] - z0) / dist;
        const Complex stem_end = pts[k] - radius * u;
        const double start = std::arg(-u);
        const Path stem = routed_segment(z0, stem_end, pts, static_cast<int>(k), detour_radius);
        Loop loop;
        loop.puncture = static_cast<int>(k);
        loop.vertices = stem;
        for (int m = 1; m < kCircleVertices; ++m)
            loop.vertices.push_back(pts[k] + radius * std::polar(1.0, start + kTwoPi * m / kCircleVertices));
        loop.vertices.insert(loop.vertices.end(), stem.rbegin(), stem.rend());
        check_clearance(loop.vertices, pts, out.clearance, "loop " + std::to_string(k + 1));
        loop.winding = winding_numbers(loop.vertices, pts);
        for (std::size_t m = 0; m < n; ++m)
            if (loop.winding[m] != (m == k ? 1 : 0))
                throw Error(ErrorKind::GeometryTooTight, "loop " + std::to_string(k + 1) + " fails its winding certificate");
        out.loops.push_back(std::move(loop));
    }

    if (sphere.include_infinity()) {
        double far = 0.0;
        for (Complex t : pts) far = std::max(far, std::abs(t - z0));
        const double radius = 2 * far + min_sep;
        const Complex exit = z0 + std::polar(radius, out.cut_angle);
        const Path ray = routed_segment(z0, exit, pts, -1, detour_radius);
        Loop loop;
        loop.vertices = ray;
        for (int m = 1; m < kCircleVertices; ++m)
            loop.vertices.push_back(z0 + std::polar(radius, out.cut_angle - kTwoPi * m / kCircleVertices));
        loop.vertices.insert(loop.vertices.end(), ray.rbegin(), ray.rend());
        check_clearance(loop.vertices, pts, out.clearance, "loop around infinity");
        loop.winding = winding_numbers(loop.vertices, pts);
        for (int w : loop.winding)
            if (w != -1) throw Error(ErrorKind::GeometryTooTight, "loop around infinity fails its winding certificate");
        out.infinity_loop = std::move(loop);
    }
    return out;
}

// ---------------------------------------------------------------- transport

namespace {

using LComplex = std::complex<long double>;
using LMatrix = Eigen::Matrix<LComplex, Eigen::Dynamic, Eigen::Dynamic>;
using LState = OdeStateT<long double>;

struct ExtendedTransport {
    LMatrix value;
    double error_bound = 0.0;
    long long steps = 0;
    long long rejected = 0;
};

// Transport carried in long double.  Loop matrices grow like exp(2 pi |Im lambda|)
// and the relation multiplies several of them, so double rounding alone would
// leave a residual far above the integrator tolerance.
ExtendedTransport transport_extended(const FuchsianSystem& system, const Path& path, double tol) {
    const int r = system.rank();
    const auto& pts = system.sphere().punctures();
    if (path.empty()) throw Error(ErrorKind::InvalidInput, "empty path");
    for (std::size_t s = 0; s + 1 < path.size(); ++s)
        for (std::size_t k = 0; k < pts.size(); ++k)
            if (segment_distance(path[s], path[s + 1], pts[k]) <= 1e-12 * (1.0 + std::abs(pts[k])))
                throw Error(ErrorKind::GeometryTooTight, "path runs through puncture " + std::to_string(k + 1));

    std::vector<LMatrix> residues;
    std::vector<LComplex> poles;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        residues.push_back(system.residues()[k].cast<LComplex>());
        poles.emplace_back(pts[k].real(), pts[k].imag());
    }

    ExtendedTransport out;
    LState y = Eigen::Map<const LState>(LMatrix::Identity(r, r).eval().data(), r * r);
    OdeOptions opts;
    opts.rtol = tol;
    OdeStats stats;
    constexpr long double eps = std::numeric_limits<long double>::epsilon();
    // local errors pulled back to the start; pushed forward by Y_end at the end
    std::vector<LMatrix> pulled_back;
    long double roundoff = 0.0L;
    LMatrix conn(r, r), d(r, r);

    for (std::size_t s = 0; s + 1 < path.size(); ++s) {
        const LComplex a(path[s].real(), path[s].imag());
        const LComplex dz = LComplex(path[s + 1].real(), path[s + 1].imag()) - a;
        if (dz == LComplex(0.0L)) continue;
        auto rhs = [&](long double u, const LState& state, LState& deriv) {
            const LComplex z = a + u * dz;
            conn.setZero();
            for (std::size_t k = 0; k < residues.size(); ++k) conn += residues[k] * (dz / (z - poles[k]));
            Eigen::Map<const LMatrix> ym(state.data(), r, r);
            d.noalias() = -conn * ym;
            deriv = Eigen::Map<const LState>(d.data(), r * r);
        };
        auto observe = [&](long double, const LState&, long double, const LState& y1, const LState& err) {
            Eigen::Map<const LMatrix> m1(y1.data(), r, r);
            Eigen::Map<const LMatrix> e(err.data(), r, r);
            pulled_back.push_back(m1.partialPivLu().solve(LMatrix(e)));
            roundoff += 16 * eps * y1.norm();
        };
        y = integrate_dp45<long double>(rhs, 0.0L, 1.0L, y, opts, &stats, observe);
    }
    out.value = Eigen::Map<const LMatrix>(y.data(), r, r);
    long double bound = roundoff;
    for (const auto& x : pulled_back) bound += (out.value * x).norm();
    out.error_bound = static_cast<double>(bound);
    out.steps = stats.accepted;
    out.rejected = stats.rejected;
    return out;
}

}  // namespace

TransportResult transport(const FuchsianSystem& system, const Path& path, double tol) {
    ExtendedTransport ext = transport_extended(system, path, tol);
    TransportResult out;
    out.value = ext.value.cast<Complex>();
    // rounding the result to double
    out.error_bound = ext.error_bound + std::numeric_limits<double>::epsilon() * norm(out.value);
    out.steps = ext.steps;
    out.rejected = ext.rejected;
    return out;
}

CMatrix oracle_transport(const FuchsianSystem& system, const Path& path, long long steps) {
    if (steps < 1) throw Error(ErrorKind::Precondition, "oracle needs at least one step");
    const int r = system.rank();
    double total = 0.0;
    for (std::size_t s = 0; s + 1 < path.size(); ++s) total += std::abs(path[s + 1] - path[s]);
    CMatrix y = CMatrix::Identity(r, r);
    if (total == 0.0) return y;
    for (std::size_t s = 0; s + 1 < path.size(); ++s) {
        const Complex a = path[s];
        const Complex dz = path[s + 1] - a;
        if (dz == Complex(0.0)) continue;
        long long m = std::max<long long>(1, std::llround(static_cast<double>(steps) * std::abs(dz) / total));
        const Complex h = dz / static_cast<double>(m);
        for (long long k = 0; k < m; ++k) {
            CMatrix step = (-(system.connection_matrix(a + static_cast<double>(k) * h) * h)).exp();
            y = step * y;
        }
    }
    return y;
}

// ---------------------------------------------------------------- representation

unsigned thread_budget() {
    if (const char* env = std::getenv("IML_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

CMatrix relation_product(const MonodromyRep& rep) {
    const auto r = rep.matrices.front().rows();
    CMatrix p = CMatrix::Identity(r, r);
    for (int k : rep.order) p = p * rep.matrices[static_cast<std::size_t>(k)];
    if (rep.infinity) p = p * *rep.infinity;
    return p;
}

MonodromyRep monodromy_rep(const FuchsianSystem& system, double tol, std::optional<double> cut_angle) {
    const LoopSet loops = standard_loops(system.sphere(), cut_angle);
    std::vector<const Path*> paths;
    for (const auto& l : loops.loops) paths.push_back(&l.vertices);
    if (loops.infinity_loop) paths.push_back(&loops.infinity_loop->vertices);

    std::vector<ExtendedTransport> results(paths.size());
    std::vector<std::exception_ptr> errors(paths.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t k = next++; k < paths.size(); k = next++) {
            try {
                results[k] = transport_extended(system, *paths[k], tol);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const unsigned workers = std::min<unsigned>(thread_budget(), static_cast<unsigned>(paths.size()));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    MonodromyRep rep;
    const std::size_t n = loops.loops.size();
    for (std::size_t k = 0; k < n; ++k) {
        rep.matrices.push_back(results[k].value.cast<Complex>());
        rep.error_bounds.push_back(results[k].error_bound);
    }
    if (loops.infinity_loop) {
        rep.infinity = results[n].value.cast<Complex>();
        rep.infinity_error = results[n].error_bound;
    }
    rep.order = loops.order;
    rep.basepoint = system.sphere().basepoint();
    rep.cut_angle = loops.cut_angle;
    rep.convention = rep.infinity ? "dY/dz=-A(z)Y; counterclockwise keyhole loops; M[order[0]]...M[order[n-1]]*M_inf=I"
                                  : "dY/dz=-A(z)Y; counterclockwise keyhole loops; M[order[0]]...M[order[n-1]]=I";

    // the residual is taken before rounding the loop matrices to double
    LMatrix p = LMatrix::Identity(system.rank(), system.rank());
    for (int k : rep.order) p = p * results[static_cast<std::size_t>(k)].value;
    if (rep.infinity) p = p * results[n].value;
    rep.relation_residual = static_cast<double>((p - LMatrix::Identity(p.rows(), p.cols())).norm());
    // first-order propagation of the per-matrix bounds through the product
    std::vector<double> norms, errs;
    for (int k : rep.order) {
        norms.push_back(norm(rep.matrices[static_cast<std::size_t>(k)]));
        errs.push_back(rep.error_bounds[static_cast<std::size_t>(k)]);
    }
    if (rep.infinity) {
        norms.push_back(norm(*rep.infinity));
        errs.push_back(rep.infinity_error);
    }
    for (std::size_t k = 0; k < norms.size(); ++k) {
        double f = errs[k];
        for (std::size_t m = 0; m < norms.size(); ++m)
            if (m != k) f *= norms[m];
        rep.relation_bound += f;
    }
    return rep;
}

// ---------------------------------------------------------------- local data

Complex local_eigenvalue(const Exponent& lambda) {
    double re, im;
    if (lambda.exact) {
        Rational x = lambda.exact->re - Rational(iml::floor(lambda.exact->re));
        re = to_double(x);
        im = to_double(lambda.exact->im);
    } else {
        re = lambda.value.real() - std::floor(lambda.value.real());
        im = lambda.value.imag();
    }
    // exp(-2 pi i (re + i im))
    return std::exp(kTwoPi * im) * std::polar(1.0, -kTwoPi * re);
}

LocalMonodromyData rh_map(const ExponentData& lambda) {
    LocalMonodromyData out;
    out.product_constant = 1.0;
    for (const auto& row : lambda.rows()) {
        std::vector<Complex> roots;
        for (const auto& x : row) roots.push_back(local_eigenvalue(x));
        out.coefficients.push_back(linalg::poly_from_roots(roots));
        out.product_constant *= out.coefficients.back().front();
    }
    const long long rn = static_cast<long long>(lambda.rank()) * static_cast<long long>(lambda.punctures());
    out.constraint_residual = std::abs(out.product_constant - Complex(rn % 2 == 0 ? 1.0 : -1.0));
    return out;
}

RhConsistency check_rh_consistency(const ParabolicConnection& conn, const MonodromyRep& rep, double tol) {
    if (rep.matrices.size() != conn.exponents.punctures())
        throw Error(ErrorKind::InvalidInput, "representation and exponents disagree on the number of punctures");
    const auto rh = rh_map(conn.exponents);
    RhConsistency out;
    out.tol = tol;
    for (std::size_t i = 0; i < rep.matrices.size(); ++i) {
        auto cp = linalg::char_poly(rep.matrices[i]);
        double dev = 0.0;
        for (std::size_t k = 0; k < cp.size(); ++k) dev = std::max(dev, std::abs(cp[k] - rh.coefficients[i][k]));
        out.deviation.push_back(dev);
        out.max_deviation = std::max(out.max_deviation, dev);
    }
    out.pass = out.max_deviation <= tol;
    return out;
}

// ---------------------------------------------------------------- invariants

InvariantVector rep_invariants(const std::vector<CMatrix>& matrices, int word_budget) {
    InvariantVector out;
    const int n = static_cast<int>(matrices.size());
    if (n == 0 || word_budget < 1) return out;
    for (int len = 1; len <= word_budget; ++len) {
        std::vector<int> w(static_cast<std::size_t>(len), 0);
        while (true) {
            bool canonical = true;
            for (int rot = 1; rot < len && canonical; ++rot) {
                std::vector<int> rw(w.begin() + rot, w.end());
                rw.insert(rw.end(), w.begin(), w.begin() + rot);
                if (rw < w) canonical = false;
            }
            if (canonical) {
                CMatrix p = matrices[static_cast<std::size_t>(w[0])];
                for (int k = 1; k < len; ++k) p = p * matrices[static_cast<std::size_t>(w[k])];
                out.words.push_back(w);
                out.values.push_back(p.trace());
            }
            int pos = len - 1;
            while (pos >= 0 && ++w[pos] == n) w[pos--] = 0;
            if (pos < 0) break;
        }
    }
    return out;
}

InvariantVector rep_invariants(const MonodromyRep& rep, int word_budget) {
    return rep_invariants(rep.matrices, word_budget);
}

double invariant_distance(const InvariantVector& a, const InvariantVector& b) {
    if (a.words != b.words) return std::numeric_limits<double>::infinity();
    double d = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k)
        d = std::max(d, std::abs(a.values[k] - b.values[k]) / std::max(1.0, std::abs(a.values[k])));
    return d;
}

SingularPointResult is_singular_point(const MonodromyRep& rep, const ExponentData& lambda, double tol) {
    SingularPointResult out;
    const int r = static_cast<int>(rep.matrices.front().rows());
    auto search = common_invariant_subspaces(rep.matrices, tol, std::max(3, r));
    out.search_complete = search.complete && r <= 3;
    if (!search.subspaces.empty()) {
        out.singular = out.reducible = true;
        out.witness = "common invariant subspace of dimension " + std::to_string(search.subspaces.front().basis.cols());
        return out;
    }
    for (std::size_t i = 0; i < rep.matrices.size(); ++i) {
        const CMatrix& m = rep.matrices[i];
        for (int j = 0; j < r; ++j) {
            const Complex c = local_eigenvalue(lambda.at(i, static_cast<std::size_t>(j)));
            CMatrix shifted = m - c * CMatrix::Identity(r, r);
            Eigen::JacobiSVD<CMatrix> svd(shifted);
            const auto& s = svd.singularValues();
            const double thr = tol * std::max(s(0), norm(m));
            int kernel = 0;
            for (Eigen::Index k = 0; k < s.size(); ++k)
                if (s(k) <= thr) ++kernel;
            if (kernel >= 2) {
                out.singular = true;
                std::ostringstream os;
                os << "dim ker(M_" << i + 1 << " - exp(-2 pi i lambda_" << j << ")) = " << kernel;
                out.witness = os.str();
                return out;
            }
        }
    }
    return out;
}

}  // namespace iml
