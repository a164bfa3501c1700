// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "iml/cli.hpp"
#include "iml/linalg.hpp"
#include "support.hpp"

using namespace iml;
using namespace iml::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Outcome scalar_closed_form() {
    auto t0 = Clock::now();
    auto inst = load_instance(fixture("scalar_r1n2"));
    auto rep = monodromy_rep(inst.system());
    double err = 0;
    for (const auto& m : rep.matrices) err = std::max(err, std::abs(m(0, 0) + 1.0));
    double secs = seconds_since(t0);
    return {err <= 1e-10 && secs < 1.0, "max |M_i + 1| = " + fmt("%.3g", err) + ", " + fmt("%.3f", secs) + " s"};
}

Outcome abelian_closed_form() {
    double worst = 0;
    int systems = 0;
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    for (int r = 1; r <= 3; ++r)
        for (int n = 2; n <= 4; ++n) {
            auto sphere = random_sphere(n, rng);
            std::vector<CMatrix> a(n, CMatrix::Zero(r, r));
            for (int k = 0; k < r; ++k) {
                Complex sum = 0;
                for (int i = 0; i + 1 < n; ++i) {
                    a[i](k, k) = Complex(u(rng), 0.3 * u(rng));
                    sum += a[i](k, k);
                }
                a[n - 1](k, k) = -sum;
            }
            auto rep = monodromy_rep(FuchsianSystem(sphere, a));
            for (int i = 0; i < n; ++i) {
                CMatrix expect = CMatrix::Zero(r, r);
                for (int k = 0; k < r; ++k) expect(k, k) = std::exp(Complex(0, -2 * M_PI) * a[i](k, k));
                worst = std::max(worst, (rep.matrices[i] - expect).cwiseAbs().maxCoeff());
            }
            ++systems;
        }
    return {worst <= 1e-9, std::to_string(systems) + " systems, max entry error " + fmt("%.3g", worst)};
}

struct RandomRuns {
    double worst_relation = 0;
    double worst_rh = 0;
    double secs = 0;
};

const RandomRuns& random_runs() {
    static RandomRuns runs = [] {
        RandomRuns out;
        auto t0 = Clock::now();
        for (unsigned seed = 1; seed <= 20; ++seed) {
            auto sys = random_system(four_points(), 2, seed);
            auto rep = monodromy_rep(sys);
            out.worst_relation = std::max(out.worst_relation, rep.relation_residual);
            ParabolicConnection conn{sys, exponents_from_spectra(sys.residues()), {}, {}};
            out.worst_rh = std::max(out.worst_rh, check_rh_consistency(conn, rep, 1e-6).max_deviation);
        }
        out.secs = seconds_since(t0);
        return out;
    }();
    return runs;
}

Outcome relation_residual() {
    const auto& r = random_runs();
    return {r.worst_relation <= 1e-8 && r.secs < 30.0,
            "20 systems, worst |M1M2M3M4 - I| = " + fmt("%.3g", r.worst_relation) + ", " + fmt("%.2f", r.secs) + " s"};
}

Outcome rh_consistency() {
    const auto& r = random_runs();
    return {r.worst_rh <= 1e-6, "20 systems, worst coefficient deviation " + fmt("%.3g", r.worst_rh)};
}

bool rows_equal_exact(const std::vector<Exponent>& a, const std::vector<Exponent>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k)
        if (!a[k].exact || !b[k].exact || !(*a[k].exact == *b[k].exact)) return false;
    return true;
}

Outcome transform_invariance() {
    double worst = 0;
    bool recipes = true, window = true;
    std::string why;
    for (unsigned seed = 1; seed <= 10; ++seed) {
        const int r = seed <= 5 ? 2 : 3;
        auto conn = random_exact_connection(r, 3, 100 + seed);
        const int i = static_cast<int>(seed % 3);
        auto rep0 = monodromy_rep(conn.system);
        auto inv0 = rep_invariants(rep0);
        auto dev = [&](const ParabolicConnection& c) {
            return invariant_distance(inv0, rep_invariants(monodromy_rep(c.system, kTransportTol, rep0.cut_angle)));
        };
        const auto& row = conn.exponents.row(i);

        const int j = 1 + static_cast<int>(seed % (r - 1));
        auto [e, erec] = elm(conn, i, j);
        std::vector<Exponent> expect(row.begin() + j, row.end());
        for (int k = 0; k < j; ++k) expect.push_back(row[k].shifted(1));
        if (!rows_equal_exact(e.exponents.row(i), expect) || e.exponents.degree() != conn.exponents.degree() - j) {
            recipes = false;
            why = "elm recipe, seed " + std::to_string(seed);
        }
        worst = std::max(worst, dev(e));

        auto [b, brec] = twist_b(conn, i, 1);
        std::vector<Exponent> down;
        for (const auto& x : row) down.push_back(x.shifted(-1));
        if (!rows_equal_exact(b.exponents.row(i), down) || b.exponents.degree() != conn.exponents.degree() + r) {
            recipes = false;
            why = "twist recipe, seed " + std::to_string(seed);
        }
        worst = std::max(worst, dev(b));

        auto [p, prec] = permute_a(conn, i, ExponentOrder::IncreasingRe);
        std::vector<Exponent> rev(row.rbegin(), row.rend());
        if (!rows_equal_exact(p.exponents.row(i), rev)) {
            recipes = false;
            why = "permute recipe, seed " + std::to_string(seed);
        }
        worst = std::max(worst, dev(p));

        auto [nconn, log] = normalize_sigma(conn);
        for (const auto& rw : nconn.exponents.rows())
            for (const auto& x : rw)
                if (!x.exact || x.exact->re < 0 || x.exact->re >= 1) window = false;
        worst = std::max(worst, dev(nconn));
    }
    std::string detail = "10 instances, worst invariant change " + fmt("%.3g", worst) +
                         (recipes ? ", recipes exact" : ", recipe mismatch (" + why + ")") +
                         (window ? ", normalize window exact" : ", normalize window violated");
    return {worst <= 1e-8 && recipes && window, detail};
}

struct FlowRuns {
    ParabolicConnection conn;
    DeformationPath path;
    FlowResult result;
    double secs = 0;
};

const FlowRuns& flow_runs() {
    static FlowRuns runs = [] {
        auto inst = load_instance(fixture("generic_r2n4"));
        auto conn = inst.connection();
        auto t0 = Clock::now();
        auto result = flow(conn, *inst.path);
        return FlowRuns{conn, *inst.path, result, seconds_since(t0)};
    }();
    return runs;
}

Outcome conservation() {
    const auto& f = flow_runs();
    bool ok = f.result.sum_drift <= 1e-9 && f.result.spectrum_drift <= 1e-8 && f.secs < 60.0;
    return {ok, "sum drift " + fmt("%.3g", f.result.sum_drift) + ", spectrum drift " +
                    fmt("%.3g", f.result.spectrum_drift) + ", " + fmt("%.2f", f.secs) + " s"};
}

Outcome isomonodromy() {
    const auto& f = flow_runs();
    auto iso = verify_isomonodromy(f.conn, f.result, 1e-6);
    // negative control: drop the [A3, A4] coupling from dA3
    FlowOptions bad;
    bad.field = [](const Configuration& t, const std::vector<CMatrix>& a, const Configuration& dt) {
        auto d = schlesinger_rhs(t, a, dt);
        d[2] -= linalg::commutator(a[2], a[3]) * (dt[2] - dt[3]) / (t[2] - t[3]);
        return d;
    };
    auto corrupted = flow(f.conn, f.path, bad);
    auto neg = verify_isomonodromy(f.conn, corrupted, 1e-6);
    return {iso.deviation <= 1e-6 && neg.deviation >= 1e-3,
            "deviation " + fmt("%.3g", iso.deviation) + ", corrupted field " + fmt("%.3g", neg.deviation)};
}

Outcome oracle_equivalence() {
    double worst_gap = 0, lo_ratio = 1e300, hi_ratio = 0;
    for (unsigned seed = 1; seed <= 5; ++seed) {
        std::mt19937 rng(500 + seed);
        auto sphere = random_sphere(3, rng);
        std::vector<CMatrix> a;
        CMatrix sum = CMatrix::Zero(2, 2);
        for (int i = 0; i < 2; ++i) {
            CMatrix m = gaussian(2, rng);
            m *= 0.3 / m.norm();
            a.push_back(m);
            sum += m;
        }
        a.push_back(-sum);
        FuchsianSystem sys(sphere, a);
        // open path well below the punctures
        const Complex z0 = sphere.basepoint() - Complex(0.0, 1.0);
        const Path path{z0, z0 + Complex(1.0, 0.25), z0 + Complex(1.5, -0.5)};
        const CMatrix ref = transport(sys, path).value;
        const double e1 = (oracle_transport(sys, path, 100000) - ref).norm();
        const double e2 = (oracle_transport(sys, path, 200000) - ref).norm();
        worst_gap = std::max(worst_gap, e1);
        lo_ratio = std::min(lo_ratio, e1 / e2);
        hi_ratio = std::max(hi_ratio, e1 / e2);
    }
    bool ok = worst_gap <= 1e-6 && lo_ratio >= 1.8 && hi_ratio <= 2.2;
    return {ok, "5 instances, worst gap at 1e5 steps " + fmt("%.3g", worst_gap) + ", halving ratio in [" +
                    fmt("%.4f", lo_ratio) + ", " + fmt("%.4f", hi_ratio) + "]"};
}

Json run_report(const std::vector<std::string>& args, int& code) {
    std::ostringstream out, err;
    code = run_cli(args, out, err);
    return Json::parse(out.str());
}

Outcome dimension_arithmetic() {
    int c4 = 0, c5 = 0;
    auto r4 = run_report({"verify", fixture("generic_r2n4")}, c4);
    auto r5 = run_report({"verify", fixture("generic_r2n5")}, c5);
    const long long d4 = r4["moduli_dimension"]["value"].get<long long>();
    const long long d5 = r5["moduli_dimension"]["value"].get<long long>();
    // expected values as stated by the criterion
    bool ok = d4 == 2 && d5 == 6;
    std::string detail = "(0,2,4) -> " + std::to_string(d4) + " (expected 2), (0,2,5) -> " + std::to_string(d5) +
                         " (expected 6; 2r^2(g-1)+nr(r-1)+2 evaluates to 4 here)";
    return {ok, detail};
}

Outcome stability_determinism() {
    int ca = 0, cb = 0, ca2 = 0;
    std::ostringstream a1, a2, b1, err;
    ca = run_cli({"stability", fixture("split_alpha_a")}, a1, err);
    ca2 = run_cli({"stability", fixture("split_alpha_a")}, a2, err);
    cb = run_cli({"stability", fixture("split_alpha_b")}, b1, err);
    auto ra = Json::parse(a1.str());
    auto rb = Json::parse(b1.str());
    bool identical = a1.str() == a2.str();
    bool a_ok = ra["verdict"] == "Unstable" && ra["witness"] == "V1" && ra["candidates"][0]["slope"] == "77/40" &&
                ra["slope_total"] == "77/48";
    bool b_ok = rb["verdict"] == "Stable" && rb["candidates"][0]["slope"] == "31/20" && rb["slope_total"] == "137/80";
    bool ok = ca == 0 && ca2 == 0 && cb == 0 && a_ok && b_ok && identical;
    return {ok, "alpha_A " + ra["verdict"].get<std::string>() + " (witness V1: 77/40 >= 77/48), alpha_B " +
                    rb["verdict"].get<std::string>() + " (31/20 < 137/80), reports " +
                    (identical ? "bit-identical" : "differ")};
}

}  // namespace

// Usage: iml_acceptance [--known-fail N]...
// Exit 0 when the set of failing criteria equals the declared known failures.
int main(int argc, char** argv) {
    std::set<int> known;
    for (int a = 1; a + 1 < argc; a += 2)
        if (std::string(argv[a]) == "--known-fail") known.insert(std::atoi(argv[a + 1]));
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {"scalar closed form", scalar_closed_form},
        {"abelian closed form", abelian_closed_form},
        {"relation residual", relation_residual},
        {"rh consistency", rh_consistency},
        {"transform invariance", transform_invariance},
        {"schlesinger conservation", conservation},
        {"isomonodromy certification", isomonodromy},
        {"oracle equivalence", oracle_equivalence},
        {"dimension arithmetic", dimension_arithmetic},
        {"stability determinism", stability_determinism},
    };
    int failed = 0, k = 0;
    std::set<int> failing;
    for (const auto& c : criteria) {
        ++k;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        if (!o.pass) {
            ++failed;
            failing.insert(k);
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << k << ". " << c.name << ": " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria pass" << std::endl;
    for (int f : known)
        if (!failing.count(f)) std::cout << "criterion " << f << " declared a known failure but passed" << std::endl;
    for (int f : failing)
        if (known.count(f)) std::cout << "criterion " << f << " fails as documented" << std::endl;
    return failing == known ? 0 : 1;
}
