#include "iml/parabolic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "iml/linalg.hpp"

namespace iml {

const char* to_string(TransformRecord::Kind kind) {
    switch (kind) {
        case TransformRecord::Kind::Elm: return "elm";
        case TransformRecord::Kind::PermuteA: return "permute_a";
        case TransformRecord::Kind::TwistB: return "twist_b";
        case TransformRecord::Kind::Gauge: return "gauge";
    }
    return "unknown";
}

// ---------------------------------------------------------------- exponents

long long degree_of(const ExponentTable& lambda, double tol) {
    std::vector<Exponent> flat;
    for (const auto& row : lambda)
        for (const auto& e : row) {
            if (!std::isfinite(e.value.real()) || !std::isfinite(e.value.imag()))
                throw Error(ErrorKind::InvalidInput, "exponent is not finite");
            flat.push_back(e);
        }
    Exponent total = sum(flat.data(), flat.data() + flat.size());
    if (total.exact) {
        if (!total.exact->is_integer())
            throw Error(ErrorKind::NonIntegralDegree, "sum of exponents is " + to_string(*total.exact));
        return -total.exact->re.convert_to<long long>();
    }
    if (!is_integral(total, tol)) {
        std::ostringstream os;
        os << "sum of exponents " << total.value << " is not within " << tol << " of an integer";
        throw Error(ErrorKind::NonIntegralDegree, os.str());
    }
    return -static_cast<long long>(std::llround(total.value.real()));
}

ExponentData::ExponentData(ExponentTable rows, double tol) : rows_(std::move(rows)) {
    if (rows_.empty()) throw Error(ErrorKind::InvalidInput, "exponent table is empty");
    const std::size_t r = rows_.front().size();
    if (r == 0) throw Error(ErrorKind::InvalidInput, "exponent rows must be nonempty");
    for (const auto& row : rows_)
        if (row.size() != r) throw Error(ErrorKind::InvalidInput, "exponent table is not rectangular");
    degree_ = degree_of(rows_, tol);
}

bool ExponentData::exact() const {
    for (const auto& row : rows_)
        for (const auto& e : row)
            if (!e.exact) return false;
    return true;
}

ExponentData ExponentData::with_row(std::size_t i, std::vector<Exponent> row) const {
    ExponentTable rows = rows_;
    rows.at(i) = std::move(row);
    return ExponentData(std::move(rows));
}

ExponentData exponents_from_spectra(const std::vector<CMatrix>& residues) {
    ExponentTable rows;
    for (const auto& a : residues) {
        auto ev = linalg::eigenvalues(a);
        std::sort(ev.begin(), ev.end(), [](Complex x, Complex y) {
            if (x.real() != y.real()) return x.real() > y.real();
            return x.imag() > y.imag();
        });
        std::vector<Exponent> row;
        for (Complex v : ev) row.emplace_back(v);
        rows.push_back(std::move(row));
    }
    // spectra are only as integral as the residue sum is traceless
    return ExponentData(std::move(rows), 1e-7);
}

// ---------------------------------------------------------------- system

FuchsianSystem::FuchsianSystem(MarkedSphere sphere, std::vector<CMatrix> residues, double tol)
    : sphere_(std::move(sphere)), residues_(std::move(residues)) {
    if (residues_.size() != sphere_.size())
        throw Error(ErrorKind::InvalidInput, "expected " + std::to_string(sphere_.size()) + " residues, got " +
                                                 std::to_string(residues_.size()));
    rank_ = static_cast<int>(residues_.front().rows());
    if (rank_ < 1) throw Error(ErrorKind::InvalidInput, "rank must be at least 1");
    double scale = 1.0;
    for (const auto& a : residues_) {
        if (a.rows() != rank_ || a.cols() != rank_)
            throw Error(ErrorKind::InvalidInput, "residues must all be " + std::to_string(rank_) + "x" +
                                                     std::to_string(rank_));
        if (!a.allFinite()) throw Error(ErrorKind::InvalidInput, "residue has non-finite entries");
        scale += norm(a);
    }
    if (!sphere_.include_infinity() && norm(residue_at_infinity()) > tol * scale)
        throw Error(ErrorKind::InvalidInput,
                    "sum of residues is nonzero but infinity is not a marked point");
}

CMatrix FuchsianSystem::residue_at_infinity() const {
    CMatrix s = CMatrix::Zero(rank_, rank_);
    for (const auto& a : residues_) s -= a;
    return s;
}

CMatrix FuchsianSystem::connection_matrix(Complex z) const {
    CMatrix m = CMatrix::Zero(rank_, rank_);
    for (std::size_t i = 0; i < residues_.size(); ++i) m += residues_[i] / (z - sphere_.puncture(i));
    return m;
}

FuchsianSystem FuchsianSystem::with_residues(std::vector<CMatrix> residues) const {
    return FuchsianSystem(sphere_, std::move(residues));
}

// ---------------------------------------------------------------- compatibility

CompatibilityReport check_compatibility(const ParabolicConnection& conn, double tol) {
    const auto& sys = conn.system;
    const int r = sys.rank();
    if (conn.exponents.punctures() != sys.size() || conn.exponents.rank() != r || conn.flags.size() != sys.size())
        throw Error(ErrorKind::InvalidInput, "connection shapes are inconsistent");
    CompatibilityReport rep;
    rep.tol = tol;
    for (std::size_t i = 0; i < sys.size(); ++i) {
        const CMatrix& a = sys.residue(i);
        const Flag& flag = conn.flags[i];
        if (flag.rank() != r) throw Error(ErrorKind::InvalidInput, "flag rank mismatch");
        double scale = std::max(1.0, norm(a));
        std::vector<double> row;
        for (int j = 0; j < r; ++j) {
            CMatrix qj = linalg::range_basis(flag_subspace(flag, j), 1e-13);
            CMatrix qn = linalg::range_basis(flag_subspace(flag, j + 1), 1e-13);
            CMatrix image = (a - conn.exponents.at(i, j).value * CMatrix::Identity(r, r)) * qj;
            if (qn.cols() > 0) image -= qn * (qn.adjoint() * image);
            double res = norm(image) / scale;
            row.push_back(res);
            rep.max_residual = std::max(rep.max_residual, res);
        }
        rep.residuals.push_back(std::move(row));
        Complex lsum = 0;
        for (const auto& e : conn.exponents.row(i)) lsum += e.value;
        double tm = std::abs(a.trace() - lsum) / scale;
        rep.trace_mismatch.push_back(tm);
        rep.max_residual = std::max(rep.max_residual, tm);
    }
    rep.pass = rep.max_residual <= tol;
    return rep;
}

// ---------------------------------------------------------------- flags

namespace {

/// Unit vector in span(x) closest to a standard basis vector, preferring later
/// coordinates; makes the choice inside degenerate eigenspaces deterministic.
CVector canonical_member(const CMatrix& x) {
    const auto r = x.rows();
    CMatrix q = linalg::range_basis(x, 1e-12);
    Eigen::Index best_k = r - 1;
    double best = -1.0;
    for (Eigen::Index k = r - 1; k >= 0; --k) {
        double w = q.row(k).norm();
        if (w > best + 1e-12) {
            best = w;
            best_k = k;
        }
    }
    CVector v = q * q.row(best_k).adjoint();
    return linalg::normalize_phase(v);
}

}  // namespace

Flag adapted_flag(const CMatrix& residue, const std::vector<Exponent>& order, double tol) {
    const auto r = residue.rows();
    if (static_cast<Eigen::Index>(order.size()) != r)
        throw Error(ErrorKind::InvalidInput, "exponent row length differs from rank");
    const double scale = std::max(1.0, norm(residue));
    const double thr = std::max(tol, 1e-12);
    CMatrix basis = CMatrix::Zero(r, r);
    CMatrix deep(r, 0);  // orthonormal basis of l_{k+1}
    for (Eigen::Index k = r - 1; k >= 0; --k) {
        CMatrix qc = linalg::orthogonal_complement(deep);
        CMatrix induced = qc.adjoint() * residue * qc;
        const Complex nu = order[static_cast<std::size_t>(k)].value;
        CMatrix shifted = induced - nu * CMatrix::Identity(induced.rows(), induced.cols());
        Eigen::JacobiSVD<CMatrix> svd(shifted, Eigen::ComputeFullV);
        const auto& s = svd.singularValues();
        if (s(s.size() - 1) > thr * scale) {
            std::ostringstream os;
            os << "exponent " << to_string(order[static_cast<std::size_t>(k)])
               << " is not an eigenvalue of the residue (remaining spectrum mismatch, sigma_min = "
               << s(s.size() - 1) << ")";
            throw Error(ErrorKind::SpectrumMismatch, os.str());
        }
        int nullity = 0;
        for (Eigen::Index m = 0; m < s.size(); ++m)
            if (s(m) <= thr * scale) ++nullity;
        CMatrix kernel = qc * svd.matrixV().rightCols(nullity);
        CVector v = nullity == 1 ? linalg::normalize_phase(kernel.col(0)) : canonical_member(kernel);
        basis.col(k) = v;
        CMatrix grown(r, deep.cols() + 1);
        grown << v, deep;
        deep = linalg::range_basis(grown, 1e-13);
    }
    return Flag(basis);
}

std::vector<Flag> build_flags(const FuchsianSystem& system, const ExponentData& lambda, double tol) {
    if (lambda.punctures() != system.size() || lambda.rank() != system.rank())
        throw Error(ErrorKind::InvalidInput, "exponent table shape does not match the system");
    std::vector<Flag> flags;
    for (std::size_t i = 0; i < system.size(); ++i) {
        const CMatrix& a = system.residue(i);
        Complex lsum = 0;
        for (const auto& e : lambda.row(i)) lsum += e.value;
        if (std::abs(a.trace() - lsum) > std::max(tol, 1e-12) * std::max(1.0, norm(a)) * a.rows())
            throw Error(ErrorKind::SpectrumMismatch,
                        "trace of residue " + std::to_string(i + 1) + " differs from the exponent sum");
        flags.push_back(adapted_flag(a, lambda.row(i), tol));
    }
    return flags;
}

ParabolicConnection make_connection(FuchsianSystem system, ExponentData lambda,
                                    std::optional<std::vector<Flag>> flags, double tol) {
    std::vector<Flag> f = flags ? std::move(*flags) : build_flags(system, lambda, tol);
    ParabolicConnection conn{std::move(system), std::move(lambda), std::move(f), {}};
    auto rep = check_compatibility(conn, std::max(tol, 1e-9));
    if (!rep.pass) {
        std::ostringstream os;
        os << "flags are not compatible with the residues (max residual " << rep.max_residual << ")";
        throw Error(ErrorKind::SpectrumMismatch, os.str());
    }
    return conn;
}

// ---------------------------------------------------------------- classification

const char* to_string(LambdaClass::Kind kind) {
    switch (kind) {
        case LambdaClass::Kind::Generic: return "Generic";
        case LambdaClass::Kind::Resonant: return "Resonant";
        case LambdaClass::Kind::ReducibleSpecial: return "ReducibleSpecial";
    }
    return "Unknown";
}

LambdaClass classify_lambda(const ExponentData& lambda, double tol, long long search_budget) {
    LambdaClass out;
    const int n = static_cast<int>(lambda.punctures());
    const int r = lambda.rank();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < r; ++j)
            for (int k = j + 1; k < r; ++k) {
                const Exponent& a = lambda.at(i, j);
                const Exponent& b = lambda.at(i, k);
                Exponent diff = (a.exact && b.exact) ? Exponent(*a.exact - *b.exact) : Exponent(a.value - b.value);
                if (is_integral(diff, tol)) {
                    out.kind = LambdaClass::Kind::Resonant;
                    out.puncture = i;
                    out.j = j;
                    out.k = k;
                    out.witness_sum = diff;
                    return out;
                }
            }

    const bool exhaustive = r <= 4 && n <= 6;
    long long visited = 0;
    for (int s = 1; s <= r - 1; ++s) {
        std::vector<unsigned> masks;
        for (unsigned m = 0; m < (1u << r); ++m)
            if (std::popcount(m) == s) masks.push_back(m);
        // per-puncture subset sums
        std::vector<std::vector<Exponent>> sums(n);
        for (int i = 0; i < n; ++i)
            for (unsigned m : masks) {
                std::vector<Exponent> picked;
                for (int j = 0; j < r; ++j)
                    if (m & (1u << j)) picked.push_back(lambda.at(i, j));
                sums[i].push_back(sum(picked.data(), picked.data() + picked.size()));
            }
        std::vector<std::size_t> idx(n, 0);
        while (true) {
            if (!exhaustive && visited >= search_budget) {
                out.budget_exceeded = true;
                return out;
            }
            ++visited;
            std::vector<Exponent> terms;
            for (int i = 0; i < n; ++i) terms.push_back(sums[i][idx[i]]);
            Exponent total = sum(terms.data(), terms.data() + terms.size());
            if (is_integral(total, tol)) {
                out.kind = LambdaClass::Kind::ReducibleSpecial;
                out.s = s;
                out.witness_sum = total;
                for (int i = 0; i < n; ++i) {
                    std::vector<int> chosen;
                    for (int j = 0; j < r; ++j)
                        if (masks[idx[i]] & (1u << j)) chosen.push_back(j);
                    out.subsets.push_back(std::move(chosen));
                }
                return out;
            }
            int pos = 0;
            while (pos < n && ++idx[pos] == masks.size()) idx[pos++] = 0;
            if (pos == n) break;
        }
    }
    return out;
}

// ---------------------------------------------------------------- invariant subspaces

namespace {

/// Maximal subspaces on which every matrix acts as a scalar.
void common_eigenspaces(const std::vector<CMatrix>& mats, std::size_t idx, const CMatrix& k, double tol,
                        std::vector<CMatrix>& out) {
    if (k.cols() == 0) return;
    if (idx == mats.size()) {
        out.push_back(k);
        return;
    }
    const CMatrix& m = mats[idx];
    const auto r = m.rows();
    const double scale = std::max(1.0, norm(m));
    CMatrix leak = (CMatrix::Identity(r, r) - k * k.adjoint()) * m * k;
    CMatrix stay = linalg::null_space(leak, tol, scale);
    if (stay.cols() == 0) return;
    CMatrix kk = linalg::range_basis(k * stay, 1e-12);
    CMatrix compressed = kk.adjoint() * m * kk;
    auto groups = linalg::cluster(linalg::eigenvalues(compressed), std::sqrt(tol) * scale);
    for (const auto& [mu, mult] : groups) {
        CMatrix shifted = compressed - mu * CMatrix::Identity(compressed.rows(), compressed.cols());
        CMatrix e = linalg::null_space(shifted, tol, scale);
        if (e.cols() == 0) continue;
        common_eigenspaces(mats, idx + 1, linalg::range_basis(kk * e, 1e-12), tol, out);
    }
}

bool same_span(const CMatrix& a, const CMatrix& b) {
    if (a.cols() != b.cols()) return false;
    return norm(a * a.adjoint() - b * b.adjoint()) < 1e-6;
}

void add_unique(std::vector<InvariantSubspace>& list, CMatrix basis, bool family) {
    for (const auto& s : list)
        if (same_span(s.basis, basis)) return;
    list.push_back({std::move(basis), {}, family});
}

}  // namespace

InvariantSubspaceSearch common_invariant_subspaces(const std::vector<CMatrix>& mats, double tol, int max_rank,
                                                   const std::vector<CMatrix>& special_subspaces) {
    InvariantSubspaceSearch out;
    if (mats.empty()) throw Error(ErrorKind::InvalidInput, "no matrices given");
    const int r = static_cast<int>(mats.front().rows());
    if (r == 1) return out;
    if (r > max_rank)
        throw Error(ErrorKind::RankBudgetExceeded,
                    "exhaustive invariant-subspace search supports rank <= " + std::to_string(max_rank));

    std::vector<CMatrix> adjoints;
    for (const auto& m : mats) adjoints.push_back(m.adjoint());

    std::vector<CMatrix> line_spaces, dual_spaces;
    common_eigenspaces(mats, 0, CMatrix::Identity(r, r), tol, line_spaces);
    if (r >= 3) common_eigenspaces(adjoints, 0, CMatrix::Identity(r, r), tol, dual_spaces);

    std::vector<CMatrix> specials;
    for (const auto& s : special_subspaces) specials.push_back(linalg::range_basis(s, 1e-12));

    // lines
    for (const auto& k : line_spaces) {
        if (k.cols() == 1) {
            add_unique(out.subspaces, k, false);
            continue;
        }
        out.complete = false;
        out.note = "positive-dimensional family of invariant subspaces; only flag-special members listed";
        if (k.cols() == r) {
            // every subspace is invariant: list the flag pieces themselves
            for (const auto& s : specials)
                if (s.cols() > 0 && s.cols() < r) add_unique(out.subspaces, s, true);
            continue;
        }
        for (const auto& s : specials) {
            CMatrix x = linalg::intersect(k, s, 1e-8);
            if (x.cols() == 1) add_unique(out.subspaces, x, true);
        }
        if (k.cols() < r) add_unique(out.subspaces, k, true);  // the span itself is invariant too
    }
    // hyperplanes (r >= 3): complements of common eigenvectors of the adjoints
    for (const auto& k : dual_spaces) {
        if (k.cols() == 1) {
            add_unique(out.subspaces, linalg::orthogonal_complement(k), false);
            continue;
        }
        out.complete = false;
        out.note = "positive-dimensional family of invariant subspaces; only flag-special members listed";
        if (k.cols() == r) continue;  // already covered by the line pass
        for (const auto& s : specials) {
            CMatrix perp = linalg::orthogonal_complement(s);
            CMatrix x = linalg::intersect(k, perp, 1e-8);
            if (x.cols() == 1) add_unique(out.subspaces, linalg::orthogonal_complement(x), true);
        }
    }

    for (auto& sub : out.subspaces) {
        for (const auto& m : mats) sub.exponents.push_back(linalg::eigenvalues(sub.basis.adjoint() * m * sub.basis));
    }
    std::stable_sort(out.subspaces.begin(), out.subspaces.end(),
                     [](const InvariantSubspace& a, const InvariantSubspace& b) { return a.basis.cols() < b.basis.cols(); });
    return out;
}

InvariantSubspaceSearch residue_invariant_subspaces(const FuchsianSystem& system, int max_rank, double tol,
                                                    const std::vector<Flag>* flags) {
    std::vector<CMatrix> specials;
    if (flags)
        for (const auto& f : *flags)
            for (int j = 1; j < f.rank(); ++j) specials.push_back(flag_subspace(f, j));
    return common_invariant_subspaces(system.residues(), tol, max_rank, specials);
}

// ---------------------------------------------------------------- stability

Weights::Weights(std::vector<std::vector<Rational>> alpha) : alpha_(std::move(alpha)) {
    if (alpha_.empty()) throw Error(ErrorKind::InvalidInput, "weights table is empty");
    const std::size_t r = alpha_.front().size();
    std::vector<Rational> all;
    for (const auto& row : alpha_) {
        if (row.size() != r || r == 0) throw Error(ErrorKind::InvalidInput, "weights table is not rectangular");
        for (std::size_t j = 0; j < r; ++j) {
            if (row[j] <= 0 || row[j] >= 1) throw Error(ErrorKind::InvalidInput, "weights must lie in (0, 1)");
            if (j > 0 && !(row[j - 1] < row[j]))
                throw Error(ErrorKind::InvalidInput, "weights must be strictly increasing at each puncture");
            all.push_back(row[j]);
        }
    }
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) != all.end())
        throw Error(ErrorKind::InvalidInput, "weights must be pairwise distinct");
}

GenericityCertificate check_weight_genericity(const Weights& weights, long long degree, unsigned seed,
                                              long long samples) {
    GenericityCertificate cert;
    const int n = static_cast<int>(weights.punctures());
    const int r = weights.rank();
    if (r == 1) return cert;
    Rational total = degree;
    for (const auto& row : weights.alpha())
        for (const auto& a : row) total += a;

    auto tie = [&](int s, const std::vector<unsigned>& choice) {
        Rational sub = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < r; ++j)
                if (choice[i] & (1u << j)) sub += weights.at(i, j);
        Rational x = (Rational(s) * total - Rational(r) * sub) / Rational(r);
        return is_integer(x);
    };
    auto describe = [&](int s, const std::vector<unsigned>& choice) {
        std::ostringstream os;
        os << "s=" << s << " subsets:";
        for (unsigned m : choice) os << ' ' << m;
        return os.str();
    };

    cert.exhaustive = r <= 3 && n <= 6;
    for (int s = 1; s <= r - 1; ++s) {
        std::vector<unsigned> masks;
        for (unsigned m = 0; m < (1u << r); ++m)
            if (std::popcount(m) == s) masks.push_back(m);
        if (cert.exhaustive) {
            std::vector<std::size_t> idx(n, 0);
            while (true) {
                std::vector<unsigned> choice;
                for (int i = 0; i < n; ++i) choice.push_back(masks[idx[i]]);
                ++cert.checked;
                if (tie(s, choice)) {
                    cert.generic = false;
                    cert.witness = describe(s, choice);
                    return cert;
                }
                int pos = 0;
                while (pos < n && ++idx[pos] == masks.size()) idx[pos++] = 0;
                if (pos == n) break;
            }
        } else {
            std::mt19937 rng(seed + static_cast<unsigned>(s));
            std::uniform_int_distribution<std::size_t> pick(0, masks.size() - 1);
            for (long long t = 0; t < samples; ++t) {
                std::vector<unsigned> choice;
                for (int i = 0; i < n; ++i) choice.push_back(masks[pick(rng)]);
                ++cert.checked;
                if (tie(s, choice)) {
                    cert.generic = false;
                    cert.witness = describe(s, choice);
                    return cert;
                }
            }
        }
    }
    return cert;
}

SubbundleCandidate candidate_from_subspace(const ParabolicConnection& conn, const InvariantSubspace& sub,
                                           const std::string& label, double tol) {
    SubbundleCandidate c;
    c.label = label;
    c.rank = static_cast<int>(sub.basis.cols());
    const int r = conn.system.rank();
    const double itol = std::max(tol, 1e-8);
    std::vector<Exponent> f_exponents;
    for (std::size_t i = 0; i < conn.system.size(); ++i) {
        std::vector<int> dims(r + 1, 0);
        for (int j = 0; j <= r; ++j)
            dims[j] = static_cast<int>(linalg::intersect(sub.basis, flag_subspace(conn.flags[i], j), itol).cols());
        std::vector<int> jumps;
        for (int j = 1; j <= r; ++j) jumps.push_back(dims[j - 1] - dims[j]);
        c.jumps.push_back(std::move(jumps));

        // match the subspace's local exponents against lambda^(i), exactly where possible
        std::vector<Complex> spec = sub.exponents.empty()
                                        ? linalg::eigenvalues(sub.basis.adjoint() * conn.system.residue(i) * sub.basis)
                                        : sub.exponents[i];
        std::vector<bool> used(r, false);
        for (Complex mu : spec) {
            int best = -1;
            double dist = 0.0;
            for (int j = 0; j < r; ++j) {
                if (used[j]) continue;
                double d = std::abs(conn.exponents.at(i, j).value - mu);
                if (best < 0 || d < dist) {
                    best = j;
                    dist = d;
                }
            }
            if (best >= 0 && dist <= 1e-6 * std::max(1.0, std::abs(mu))) {
                used[best] = true;
                f_exponents.push_back(conn.exponents.at(i, best));
            } else {
                f_exponents.emplace_back(mu);
            }
        }
    }
    Exponent total = sum(f_exponents.data(), f_exponents.data() + f_exponents.size());
    if (total.exact) {
        if (!total.exact->is_integer())
            throw Error(ErrorKind::InconsistentCandidate, "subbundle exponents do not sum to an integer");
        c.degree = -total.exact->re.convert_to<long long>();
    } else {
        if (!is_integral(total, 1e-6))
            throw Error(ErrorKind::InconsistentCandidate, "subbundle exponents do not sum to an integer");
        c.degree = -std::llround(total.value.real());
    }
    return c;
}

const char* to_string(StabilityResult::Verdict v) {
    switch (v) {
        case StabilityResult::Verdict::Stable: return "Stable";
        case StabilityResult::Verdict::Unstable: return "Unstable";
        case StabilityResult::Verdict::Undecided: return "Undecided";
    }
    return "Unknown";
}

StabilityResult stability_test(const ParabolicConnection& conn, const Weights& weights,
                               const std::vector<SubbundleCandidate>& candidates, bool candidates_complete) {
    const int r = conn.system.rank();
    const std::size_t n = conn.system.size();
    if (weights.punctures() != n || weights.rank() != r)
        throw Error(ErrorKind::InvalidInput, "weights shape does not match the connection");
    StabilityResult out;
    if (r == 1) {
        out.verdict = StabilityResult::Verdict::Stable;
        out.reason = "rank 1 has no proper nonzero subbundle";
        return out;
    }
    Rational total = conn.exponents.degree();
    for (const auto& row : weights.alpha())
        for (const auto& a : row) total += a;
    const Rational slope_total = total / Rational(r);

    Rational worst_excess = 0;
    for (const auto& c : candidates) {
        if (c.rank < 1 || c.rank >= r)
            throw Error(ErrorKind::InconsistentCandidate, c.label + ": rank must be in 1.." + std::to_string(r - 1));
        if (c.jumps.size() != n) throw Error(ErrorKind::InconsistentCandidate, c.label + ": wrong number of points");
        Rational weighted = c.degree;
        for (std::size_t i = 0; i < n; ++i) {
            if (static_cast<int>(c.jumps[i].size()) != r)
                throw Error(ErrorKind::InconsistentCandidate, c.label + ": wrong number of jumps");
            int dim_sum = 0;
            for (int j = 0; j < r; ++j) {
                if (c.jumps[i][j] < 0 || c.jumps[i][j] > 1)
                    throw Error(ErrorKind::InconsistentCandidate, c.label + ": jumps must be 0 or 1");
                dim_sum += c.jumps[i][j];
                weighted += weights.at(i, j) * c.jumps[i][j];
            }
            if (dim_sum != c.rank)
                throw Error(ErrorKind::InconsistentCandidate,
                            c.label + ": intersection dimensions at point " + std::to_string(i + 1) +
                                " do not sum to rank F");
        }
        SlopeComparison cmp{c.label, weighted / Rational(c.rank), slope_total, false};
        cmp.violates = cmp.slope_sub >= cmp.slope_total;
        if (cmp.violates) {
            Rational excess = cmp.slope_sub - cmp.slope_total;
            if (out.witness < 0 || excess > worst_excess) {
                out.witness = static_cast<int>(out.comparisons.size());
                worst_excess = excess;
            }
        }
        out.comparisons.push_back(std::move(cmp));
    }
    if (out.witness >= 0) {
        out.verdict = StabilityResult::Verdict::Unstable;
        out.reason = "slope inequality fails for " + out.comparisons[out.witness].label;
    } else if (!candidates_complete) {
        out.verdict = StabilityResult::Verdict::Undecided;
        out.reason = "candidate list is not exhaustive";
    } else {
        out.verdict = StabilityResult::Verdict::Stable;
        out.reason = candidates.empty() ? "no proper invariant subbundle" : "all candidates satisfy the strict inequality";
    }
    return out;
}

StabilityResult stability_test(const ParabolicConnection& conn, const Weights& weights, double tol) {
    const int r = conn.system.rank();
    if (r > 3) {
        auto out = stability_test(conn, weights, {}, false);
        out.reason = "rank budget: automatic candidate search covers r <= 3";
        return out;
    }
    auto search = residue_invariant_subspaces(conn.system, 3, tol, &conn.flags);
    std::vector<SubbundleCandidate> candidates;
    int k = 0;
    for (const auto& sub : search.subspaces)
        candidates.push_back(candidate_from_subspace(conn, sub, "V" + std::to_string(++k), tol));
    auto out = stability_test(conn, weights, candidates, search.complete);
    if (out.verdict == StabilityResult::Verdict::Undecided && !search.note.empty()) out.reason = search.note;
    return out;
}

DimensionResult moduli_dimension(int genus, int rank, int punctures) {
    if (genus < 0 || rank < 1 || punctures < 1) throw Error(ErrorKind::InvalidInput, "invalid (g, r, n)");
    DimensionResult out;
    const long long g = genus, r = rank, n = punctures;
    out.value = 2 * r * r * (g - 1) + n * r * (r - 1) + 2;
    if (genus == 0 && r * n - 2 * r - 2 <= 0)
        out.warning = "rn - 2r - 2 <= 0 at genus 0: the dimension formula is outside its assumed range";
    return out;
}

}  // namespace iml
