#include "iml/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "iml/linalg.hpp"

namespace iml {

// ---------------------------------------------------------------- gauges

GaugeFunction GaugeFunction::constant(const CMatrix& m) {
    const auto r = m.rows();
    return {CMatrix::Identity(r, r), std::vector<int>(static_cast<std::size_t>(r), 0), -1, m};
}

GaugeFunction GaugeFunction::scalar(int r, int puncture, int power) {
    return {CMatrix::Identity(r, r), std::vector<int>(static_cast<std::size_t>(r), power), puncture,
            CMatrix::Identity(r, r)};
}

CMatrix GaugeFunction::evaluate(Complex z, const MarkedSphere& sphere) const {
    const auto r = outer.rows();
    CMatrix d = CMatrix::Zero(r, r);
    for (Eigen::Index k = 0; k < r; ++k) {
        int e = exponents[static_cast<std::size_t>(k)];
        d(k, k) = e == 0 ? Complex(1.0) : std::pow(z - sphere.puncture(static_cast<std::size_t>(puncture)), e);
    }
    return outer * d * outer.inverse() * right;
}

GaugeFunction GaugeFunction::inverse() const {
    std::vector<int> neg;
    for (int e : exponents) neg.push_back(-e);
    CMatrix vinv = right.inverse();
    return {vinv * outer, neg, puncture, vinv};
}

std::string GaugeFunction::describe() const {
    std::ostringstream os;
    bool trivial = std::all_of(exponents.begin(), exponents.end(), [](int e) { return e == 0; });
    if (trivial) return "constant";
    os << "U diag(";
    for (std::size_t k = 0; k < exponents.size(); ++k) os << (k ? "," : "") << exponents[k];
    os << ") U^-1 at t" << puncture + 1;
    return os.str();
}

namespace {

void check_puncture(const ParabolicConnection& conn, int i) {
    if (i < 0 || static_cast<std::size_t>(i) >= conn.system.size())
        throw Error(ErrorKind::IndexOutOfRange, "puncture index " + std::to_string(i + 1) + " out of range");
}

std::vector<Exponent> row_of(const ParabolicConnection& conn, int i) {
    return conn.exponents.row(static_cast<std::size_t>(i));
}

}  // namespace

FuchsianSystem apply_gauge(const FuchsianSystem& system, const GaugeFunction& g, double tol) {
    const int r = system.rank();
    const std::size_t n = system.size();
    if (g.outer.rows() != r || g.outer.cols() != r || g.right.rows() != r || g.right.cols() != r ||
        static_cast<int>(g.exponents.size()) != r)
        throw Error(ErrorKind::InvalidInput, "gauge shape does not match the system rank");
    const bool trivial = std::all_of(g.exponents.begin(), g.exponents.end(), [](int e) { return e == 0; });
    if (!trivial && (g.puncture < 0 || static_cast<std::size_t>(g.puncture) >= n))
        throw Error(ErrorKind::IndexOutOfRange, "gauge puncture out of range");
    for (const CMatrix* m : {&g.outer, &g.right}) {
        double c = linalg::condition_number(*m);
        if (!m->allFinite() || !std::isfinite(c) || c > 1e12)
            throw Error(ErrorKind::SingularGauge, "gauge factor is singular (condition number " + std::to_string(c) + ")");
    }
    const CMatrix uinv = g.outer.inverse();
    const CMatrix vinv = g.right.inverse();
    const std::size_t p = trivial ? n : static_cast<std::size_t>(g.puncture);
    const Complex t = trivial ? Complex(0.0) : system.sphere().puncture(p);

    std::vector<CMatrix> b(n);
    double bscale = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        b[k] = uinv * g.right * system.residue(k) * vinv * g.outer;
        bscale += norm(b[k]);
    }
    auto require_zero = [&](Complex value, double magnitude) {
        if (std::abs(value) > tol * magnitude + 1e-13 * bscale)
            throw Error(ErrorKind::NonFuchsianGauge, "gauge introduces a higher-order pole or an irregular term at infinity");
    };

    std::vector<CMatrix> res(n, CMatrix::Zero(r, r));
    for (int a = 0; a < r; ++a)
        for (int c = 0; c < r; ++c) {
            const int m = trivial ? 0 : g.exponents[a] - g.exponents[c];
            for (std::size_t k = 0; k < n; ++k) {
                if (k == p) continue;
                Complex dist = system.sphere().puncture(k) - t;
                res[k](a, c) = m == 0 ? b[k](a, c) : b[k](a, c) * std::pow(dist, m);
            }
            if (trivial) continue;
            if (m == 0) {
                res[p](a, c) = b[p](a, c);
            } else if (m < 0) {
                const int q = -m;
                require_zero(b[p](a, c), std::abs(b[p](a, c)) + 0.0);
                for (int s = 0; s <= q - 2; ++s) {
                    Complex acc = 0;
                    double mag = 0;
                    for (std::size_t k = 0; k < n; ++k) {
                        if (k == p) continue;
                        Complex term = b[k](a, c) / std::pow(system.sphere().puncture(k) - t, s + 1);
                        acc += term;
                        mag += std::abs(term);
                    }
                    require_zero(acc, mag);
                }
                Complex acc = 0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p) continue;
                    acc -= b[k](a, c) / std::pow(system.sphere().puncture(k) - t, q);
                }
                res[p](a, c) = acc;
            } else {
                for (int pp = 0; pp <= m - 1; ++pp) {
                    Complex acc = pp == m - 1 ? b[p](a, c) : Complex(0.0);
                    double mag = std::abs(acc);
                    for (std::size_t k = 0; k < n; ++k) {
                        if (k == p) continue;
                        Complex term = b[k](a, c) * std::pow(system.sphere().puncture(k) - t, m - 1 - pp);
                        acc += term;
                        mag += std::abs(term);
                    }
                    require_zero(acc, mag);
                }
                res[p](a, c) = 0;
            }
        }
    if (!trivial)
        for (int a = 0; a < r; ++a) res[p](a, a) -= static_cast<double>(g.exponents[a]);

    std::vector<CMatrix> out;
    CMatrix total = CMatrix::Zero(r, r);
    double scale = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        out.push_back(g.outer * res[k] * uinv);
        total += out.back();
        scale += norm(out.back());
    }
    bool marked = system.sphere().include_infinity() || norm(total) > kDefaultTol * scale;
    return FuchsianSystem(system.sphere().with_infinity(marked), std::move(out));
}

// ---------------------------------------------------------------- elementary transforms

namespace {

/// j-dimensional S-invariant complements of span(deep), best conditioned first.
std::vector<std::pair<double, CMatrix>> invariant_complements(const CMatrix& s, const CMatrix& deep, int j) {
    const auto r = s.rows();
    const double scale = std::max(1.0, norm(s));
    const Complex mean = s.trace() / static_cast<double>(r);
    std::vector<std::pair<double, CMatrix>> out;
    if (norm(s - mean * CMatrix::Identity(r, r)) <= 1e-10 * scale) {
        CMatrix q = linalg::orthogonal_complement(linalg::range_basis(deep, 1e-12));
        CMatrix full(r, r);
        full << q, deep;
        out.emplace_back(linalg::condition_number(full), q);
        return out;
    }
    Eigen::ComplexEigenSolver<CMatrix> es(s);
    const CMatrix vecs = es.eigenvectors();
    std::vector<int> pick(static_cast<std::size_t>(r), 0);
    std::fill(pick.begin(), pick.begin() + j, 1);
    std::sort(pick.begin(), pick.end());
    do {
        CMatrix w(r, j);
        int c = 0;
        for (Eigen::Index k = 0; k < r; ++k)
            if (pick[static_cast<std::size_t>(k)]) w.col(c++) = vecs.col(k).normalized();
        CMatrix q = linalg::range_basis(w, 1e-10);
        if (q.cols() != j) continue;
        CMatrix leak = s * q - q * (q.adjoint() * s * q);
        if (norm(leak) > 1e-8 * scale) continue;
        CMatrix full(r, r);
        full << q, deep;
        double cond = linalg::condition_number(full);
        if (std::isfinite(cond)) out.emplace_back(cond, q);
    } while (std::next_permutation(pick.begin(), pick.end()));
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first - 1e-12; });
    return out;
}

CMatrix unit_columns(CMatrix m) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) m.col(k) = linalg::normalize_phase(m.col(k).normalized());
    return m;
}

}  // namespace

namespace {

void check_elm_args(const ParabolicConnection& conn, int i, int j) {
    check_puncture(conn, i);
    const int r = conn.system.rank();
    if (j < 1 || j > r - 1)
        throw Error(ErrorKind::Precondition, "elm needs 1 <= j <= r-1 (got j=" + std::to_string(j) +
                                                 ", r=" + std::to_string(r) + ")");
    const Flag& flag = conn.flags[static_cast<std::size_t>(i)];
    if (flag.condition_number() > kElmConditionLimit)
        throw Error(ErrorKind::FlagDegenerate, "adapted basis at t" + std::to_string(i + 1) + " is ill-conditioned");
}

}  // namespace

std::vector<CMatrix> elm_complements(const ParabolicConnection& conn, int i, int j) {
    check_elm_args(conn, i, j);
    const int r = conn.system.rank();
    const CMatrix deep = conn.flags[static_cast<std::size_t>(i)].basis().rightCols(r - j);
    std::vector<CMatrix> out;
    for (auto& [cond, q] : invariant_complements(-conn.system.residue_at_infinity(), deep, j))
        if (cond <= kElmConditionLimit) out.push_back(std::move(q));
    return out;
}

Transformed elm(const ParabolicConnection& conn, int i, int j) {
    auto options = elm_complements(conn, i, j);
    if (options.empty())
        throw Error(ErrorKind::FlagDegenerate,
                    "no well-conditioned invariant complement of the flag piece for the residue sum");
    return elm(conn, i, j, options.front());
}

Transformed elm(const ParabolicConnection& conn, int i, int j, const CMatrix& complement) {
    check_elm_args(conn, i, j);
    const int r = conn.system.rank();
    const Flag& flag = conn.flags[static_cast<std::size_t>(i)];
    const CMatrix& v = flag.basis();
    const CMatrix deep = v.rightCols(r - j);
    const CMatrix s = -conn.system.residue_at_infinity();
    if (complement.rows() != r || complement.cols() != j)
        throw Error(ErrorKind::InvalidInput, "complement must be r x j");
    const CMatrix w_space = linalg::range_basis(complement, 1e-10);
    {
        CMatrix full(r, r);
        if (w_space.cols() != j) throw Error(ErrorKind::FlagDegenerate, "complement is rank deficient");
        full << w_space, deep;
        if (linalg::condition_number(full) > kElmConditionLimit)
            throw Error(ErrorKind::FlagDegenerate, "complement is nearly contained in the flag piece");
        CMatrix leak = s * w_space - w_space * (w_space.adjoint() * s * w_space);
        if (norm(leak) > 1e-8 * std::max(1.0, norm(s)))
            throw Error(ErrorKind::Precondition, "complement is not invariant under the residue sum");
    }

    // w_k: projection of v_k onto W along l_j
    CMatrix split(r, r);
    split << w_space, deep;
    const CMatrix coords = split.fullPivLu().solve(v.leftCols(j));
    const CMatrix w = w_space * coords.topRows(j);

    CMatrix u(r, r);
    u << w, deep;
    std::vector<int> e(static_cast<std::size_t>(r), 0);
    std::fill(e.begin(), e.begin() + j, -1);
    GaugeFunction g{u, e, i, CMatrix::Identity(r, r)};
    FuchsianSystem sys = apply_gauge(conn.system, g);

    std::vector<Flag> flags;
    for (std::size_t k = 0; k < conn.system.size(); ++k) {
        if (static_cast<int>(k) == i) {
            CMatrix nb(r, r);
            nb << deep, w;
            flags.emplace_back(unit_columns(nb));
        } else {
            CMatrix gk = g.evaluate(conn.system.sphere().puncture(k), conn.system.sphere());
            flags.emplace_back(unit_columns(gk * conn.flags[k].basis()));
        }
    }

    const auto before = row_of(conn, i);
    std::vector<Exponent> after;
    for (int k = j; k < r; ++k) after.push_back(before[k]);
    for (int k = 0; k < j; ++k) after.push_back(before[k].shifted(1));
    ExponentData lambda = conn.exponents.with_row(static_cast<std::size_t>(i), after);

    TransformRecord rec;
    rec.kind = TransformRecord::Kind::Elm;
    rec.puncture = i;
    rec.j = j;
    rec.gauge = g.describe();
    rec.before = before;
    rec.after = after;
    rec.degree_delta = lambda.degree() - conn.exponents.degree();

    ParabolicConnection out{std::move(sys), std::move(lambda), std::move(flags), conn.provenance};
    out.provenance.push_back(rec);
    return {std::move(out), std::move(rec)};
}

std::pair<ParabolicConnection, std::vector<TransformRecord>> elm_inverse(const ParabolicConnection& conn, int i,
                                                                         int j) {
    const int r = conn.system.rank();
    if (j < 1 || j > r - 1) throw Error(ErrorKind::Precondition, "elm inverse needs 1 <= j <= r-1");
    auto [first, rec1] = elm(conn, i, r - j);
    auto [second, rec2] = twist_b(first, i, +1);
    return {std::move(second), {std::move(rec1), std::move(rec2)}};
}

Transformed twist_b(const ParabolicConnection& conn, int i, int direction) {
    check_puncture(conn, i);
    if (direction != 1 && direction != -1) throw Error(ErrorKind::Precondition, "twist direction must be +1 or -1");
    const int r = conn.system.rank();
    GaugeFunction g = GaugeFunction::scalar(r, i, direction);
    FuchsianSystem sys = apply_gauge(conn.system, g);

    const auto before = row_of(conn, i);
    std::vector<Exponent> after;
    for (const auto& x : before) after.push_back(x.shifted(-direction));
    ExponentData lambda = conn.exponents.with_row(static_cast<std::size_t>(i), after);

    TransformRecord rec;
    rec.kind = TransformRecord::Kind::TwistB;
    rec.puncture = i;
    rec.direction = direction;
    rec.gauge = g.describe();
    rec.before = before;
    rec.after = after;
    rec.degree_delta = lambda.degree() - conn.exponents.degree();

    ParabolicConnection out{std::move(sys), std::move(lambda), conn.flags, conn.provenance};
    out.provenance.push_back(rec);
    return {std::move(out), std::move(rec)};
}

// ---------------------------------------------------------------- constant frames

Transformed conjugate(const ParabolicConnection& conn, const CMatrix& g, const std::string& description) {
    FuchsianSystem sys = apply_gauge(conn.system, GaugeFunction::constant(g));
    std::vector<Flag> flags;
    for (const auto& f : conn.flags) flags.emplace_back(unit_columns(g * f.basis()));
    TransformRecord rec;
    rec.kind = TransformRecord::Kind::Gauge;
    rec.gauge = description;
    ParabolicConnection out{std::move(sys), conn.exponents, std::move(flags), conn.provenance};
    out.provenance.push_back(rec);
    return {std::move(out), std::move(rec)};
}

Transformed balance_frame(const ParabolicConnection& conn) {
    const int r = conn.system.rank();
    CMatrix frame = CMatrix::Identity(r, r);  // new coordinates: Y' = frame^{-1} Y
    const CMatrix s = -conn.system.residue_at_infinity();
    if (norm(s) > 0.0) {
        Eigen::ComplexEigenSolver<CMatrix> es(s);
        CMatrix v = es.eigenvectors();
        for (int k = 0; k < r; ++k) v.col(k).normalize();
        if (linalg::condition_number(v) < 1e8) frame = v;
    }
    std::vector<CMatrix> mats;
    const CMatrix finv = frame.inverse();
    for (const auto& a : conn.system.residues()) mats.push_back(finv * a * frame);
    std::vector<double> d(static_cast<std::size_t>(r), 1.0);
    for (int sweep = 0; sweep < 100; ++sweep) {
        bool moved = false;
        for (int x = 0; x < r; ++x) {
            double col = 0.0, row = 0.0;
            for (const auto& a : mats)
                for (int b = 0; b < r; ++b)
                    if (b != x) {
                        col += std::norm(a(b, x));
                        row += std::norm(a(x, b));
                    }
            if (col == 0.0 || row == 0.0) continue;
            const double f = std::pow(row / col, 0.25);
            if (std::abs(f - 1.0) > 1e-3) moved = true;
            for (auto& a : mats) {
                a.col(x) *= f;
                a.row(x) /= f;
            }
            d[static_cast<std::size_t>(x)] *= f;
        }
        if (!moved) break;
    }
    CMatrix scale = CMatrix::Zero(r, r);
    for (int k = 0; k < r; ++k) scale(k, k) = d[static_cast<std::size_t>(k)];
    return conjugate(conn, (frame * scale).inverse(), "constant frame balancing A_inf");
}

// ---------------------------------------------------------------- regrouping

namespace {

/// Basis of K adapted to the filtration K cap l_j, ordered like the old flag.
CMatrix adapted_inside(const CMatrix& k, const Flag& flag) {
    const int r = flag.rank();
    std::vector<CMatrix> pieces;
    for (int j = 0; j <= r; ++j) pieces.push_back(linalg::intersect(k, flag_subspace(flag, j), 1e-8));
    CMatrix out(k.rows(), 0);
    for (int j = 0; j < r; ++j) {
        if (pieces[j].cols() <= pieces[j + 1].cols()) continue;
        const CMatrix& next = pieces[j + 1];
        CMatrix rest = pieces[j];
        if (next.cols() > 0) rest -= next * (next.adjoint() * rest);
        CMatrix q = linalg::range_basis(rest, 1e-8);
        if (q.cols() == 0) continue;
        CMatrix grown(k.rows(), out.cols() + 1);
        grown << out, linalg::normalize_phase(q.col(0));
        out = grown;
    }
    return out;
}

}  // namespace

Transformed permute_a(const ParabolicConnection& conn, int i, ExponentOrder order) {
    check_puncture(conn, i);
    const int r = conn.system.rank();
    const auto before = row_of(conn, i);
    const CMatrix& a = conn.system.residue(static_cast<std::size_t>(i));
    constexpr double tie_tol = 1e-12;

    std::vector<int> idx(static_cast<std::size_t>(r));
    std::iota(idx.begin(), idx.end(), 0);
    bool tie_used = false;
    auto ties = [&](const Exponent& x, const Exponent& y) {
        if (x.exact && y.exact) return compare_re(x, y) == 0;
        return std::abs(x.value.real() - y.value.real()) <= tie_tol * std::max(1.0, std::abs(x.value.real()));
    };
    std::stable_sort(idx.begin(), idx.end(), [&](int p, int q) {
        const Exponent& x = before[p];
        const Exponent& y = before[q];
        if (!ties(x, y)) {
            int c = compare_re(x, y);
            return order == ExponentOrder::DecreasingRe ? c > 0 : c < 0;
        }
        int c = compare_im(x, y);
        return order == ExponentOrder::DecreasingRe ? c > 0 : c < 0;
    });
    for (int p = 0; p < r; ++p)
        for (int q = p + 1; q < r; ++q)
            if (ties(before[p], before[q]) && !before[p].same_as(before[q], kDefaultTol)) tie_used = true;

    std::vector<Exponent> after;
    for (int p : idx) after.push_back(before[p]);
    // multiplicity blocks, kept contiguous
    std::vector<std::pair<Exponent, int>> blocks;
    for (const auto& x : after) {
        if (!blocks.empty() && blocks.back().first.same_as(x, kDefaultTol))
            ++blocks.back().second;
        else
            blocks.emplace_back(x, 1);
    }

    const double scale = std::max(1.0, norm(a));
    CMatrix basis(r, 0);
    bool ok = true;
    for (const auto& [mu, mult] : blocks) {
        CMatrix shifted = a - mu.value * CMatrix::Identity(r, r);
        CMatrix power = CMatrix::Identity(r, r);
        for (int p = 0; p < mult; ++p) power = power * shifted;
        CMatrix k = linalg::null_space(power, 1e-8, std::pow(scale, mult));
        if (k.cols() != mult) {
            ok = false;
            break;
        }
        CMatrix inside = adapted_inside(k, conn.flags[static_cast<std::size_t>(i)]);
        if (inside.cols() != mult) {
            ok = false;
            break;
        }
        CMatrix grown(r, basis.cols() + mult);
        grown << basis, inside;
        basis = grown;
    }

    std::vector<Flag> flags = conn.flags;
    ExponentData lambda = conn.exponents.with_row(static_cast<std::size_t>(i), after);
    if (ok) {
        flags[static_cast<std::size_t>(i)] = Flag(basis);
        ParabolicConnection probe{conn.system, lambda, flags, {}};
        ok = check_compatibility(probe, 1e-8).pass;
    }
    if (!ok) flags[static_cast<std::size_t>(i)] = adapted_flag(a, after);

    TransformRecord rec;
    rec.kind = TransformRecord::Kind::PermuteA;
    rec.puncture = i;
    rec.gauge = "identity";
    rec.before = before;
    rec.after = after;
    rec.degree_delta = 0;
    if (tie_used) rec.notes.push_back("equal real parts ordered by imaginary part");
    if (!ok) rec.notes.push_back("flag rebuilt by deflation");

    ParabolicConnection out{conn.system, std::move(lambda), std::move(flags), conn.provenance};
    out.provenance.push_back(rec);
    return {std::move(out), std::move(rec)};
}

// ---------------------------------------------------------------- normalization

std::pair<ParabolicConnection, std::vector<TransformRecord>> normalize_sigma(const ParabolicConnection& conn) {
    const std::size_t n = conn.system.size();
    const int r = conn.system.rank();
    long long widest = 0;
    for (const auto& row : conn.exponents.rows())
        for (const auto& x : row) widest = std::max(widest, std::llabs(x.re_floor()));
    const long long budget = 10LL * static_cast<long long>(n) * r * (1 + widest);

    ParabolicConnection cur = conn;
    std::vector<TransformRecord> log;
    long long steps = 0;
    auto tick = [&]() {
        if (++steps > budget)
            throw Error(ErrorKind::NonTermination,
                        "normalization exceeded its step budget after " + std::to_string(log.size()) + " transforms");
    };
    auto in_window = [](const std::vector<Exponent>& row) {
        return std::all_of(row.begin(), row.end(), [](const Exponent& x) { return x.re_floor() == 0; });
    };

    for (std::size_t pi = 0; pi < n; ++pi) {
        const int i = static_cast<int>(pi);
        if (in_window(cur.exponents.row(pi))) continue;

        long long top = std::numeric_limits<long long>::min();
        for (const auto& x : cur.exponents.row(pi)) top = std::max(top, x.re_floor());
        const int dir = top > 0 ? 1 : -1;
        for (long long k = 0; k < std::llabs(top); ++k) {
            tick();
            auto [next, rec] = twist_b(cur, i, dir);
            cur = std::move(next);
            log.push_back(std::move(rec));
        }
        while (!in_window(cur.exponents.row(pi))) {
            tick();
            auto [sorted, prec] = permute_a(cur, i, ExponentOrder::IncreasingRe);
            cur = std::move(sorted);
            log.push_back(std::move(prec));
            int neg = 0;
            for (const auto& x : cur.exponents.row(pi))
                if (x.re_floor() < 0) ++neg;
            if (neg == 0) break;
            tick();
            auto [next, rec] = elm(cur, i, neg);
            cur = std::move(next);
            log.push_back(std::move(rec));
        }
    }
    return {std::move(cur), std::move(log)};
}

}  // namespace iml
