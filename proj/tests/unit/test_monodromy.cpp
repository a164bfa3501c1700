#include <doctest.h>

#include <cstdlib>

#include "iml/monodromy.hpp"
#include "support.hpp"

using namespace iml;
using namespace iml::testing;

namespace {

FuchsianSystem scalar_system() {
    CMatrix a(1, 1), b(1, 1);
    a(0, 0) = 0.5;
    b(0, 0) = -0.5;
    return FuchsianSystem(MarkedSphere({0.0, 1.0}, Complex(0.5, 2.0)), {a, b});
}

}  // namespace

TEST_CASE("segment distance and winding") {
    CHECK(segment_distance(0.0, 2.0, Complex(1, 1)) == doctest::Approx(1.0));
    CHECK(segment_distance(0.0, 2.0, Complex(3, 0)) == doctest::Approx(1.0));
    Path square{Complex(-1, -1), Complex(1, -1), Complex(1, 1), Complex(-1, 1), Complex(-1, -1)};
    auto w = winding_numbers(square, {0.0, Complex(3, 0)});
    CHECK(w == std::vector<int>{1, 0});
    Path reversed(square.rbegin(), square.rend());
    CHECK(winding_numbers(reversed, {0.0})[0] == -1);
}

TEST_CASE("standard loops wind once around their puncture") {
    auto sphere = four_points();
    auto loops = standard_loops(sphere);
    REQUIRE(loops.loops.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& l = loops.loops[k];
        CHECK(l.vertices.front() == sphere.basepoint());
        CHECK(l.vertices.back() == sphere.basepoint());
        for (std::size_t m = 0; m < 4; ++m) CHECK(l.winding[m] == (m == k ? 1 : 0));
    }
    std::vector<int> sorted = loops.order;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("loops detour around collinear punctures") {
    // the stem to the far puncture passes right next to the nearer ones
    MarkedSphere s({Complex(0.002, 1), Complex(0, 2), Complex(0.001, 3)}, Complex(0, 0));
    auto loops = standard_loops(s);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t m = 0; m < 3; ++m) CHECK(loops.loops[k].winding[m] == (m == k ? 1 : 0));
    auto rep = monodromy_rep(FuchsianSystem(s, {mat2(0.1, 0.2, 0, -0.1), mat2(0.2, 0, 0.1, 0.1), mat2(-0.3, -0.2, -0.1, 0)}));
    CHECK(rep.relation_residual < 1e-12);

    // exactly collinear: no side to detour on
    MarkedSphere line({Complex(0, 1), Complex(0, 2)}, Complex(0, 0));
    CHECK_THROWS_AS(standard_loops(line), Error);
}

TEST_CASE("scalar monodromy is -1") {
    auto rep = monodromy_rep(scalar_system());
    CHECK(std::abs(rep.matrices[0](0, 0) + 1.0) < 1e-12);
    CHECK(std::abs(rep.matrices[1](0, 0) + 1.0) < 1e-12);
    CHECK(rep.relation_residual < 1e-12);
}

TEST_CASE("transport matches a frozen independent solution") {
    // reference from a separate DOP853 run at rtol 1e-13
    auto sys = load_instance(fixture("generic_r2n4")).system();
    Path rect{Complex(1.5, -2), Complex(2.5, -0.5), Complex(2.5, 0.5), Complex(0.5, 0.5), Complex(0.5, -0.5),
              Complex(1.5, -2)};
    CMatrix expect = mat2(Complex(2.152216793235682, -6.605706677804289), Complex(-1.802621654212862, 4.74466354288032),
                          Complex(-4.642402842761945, 6.779143375232109), Complex(3.710354554062133, -4.900237437676146));
    auto t = transport(sys, rect);
    CHECK((t.value - expect).norm() < 1e-10);
    CHECK(t.error_bound < 1e-10);
    CHECK(t.steps > 0);
}

TEST_CASE("transport refuses a path through a puncture") {
    auto sys = load_instance(fixture("generic_r2n4")).system();
    try {
        transport(sys, {Complex(-1, 0), Complex(0.5, 0)});
        FAIL("expected GeometryTooTight");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::GeometryTooTight);
    }
}

TEST_CASE("oracle transport converges at first order") {
    auto sys = load_instance(fixture("generic_r2n4")).system();
    Path p{Complex(1.5, -2), Complex(2.5, -1.5), Complex(3.5, -2.5)};
    CMatrix ref = transport(sys, p).value;
    const double e1 = (oracle_transport(sys, p, 2000) - ref).norm();
    const double e2 = (oracle_transport(sys, p, 4000) - ref).norm();
    CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.05));
    CHECK_THROWS_AS(oracle_transport(sys, p, 0), Error);
}

TEST_CASE("relation holds for a random system") {
    auto sys = random_system(four_points(), 2, 14);
    auto rep = monodromy_rep(sys);
    CHECK(rep.relation_residual < 1e-8);
    CHECK(rep.relation_residual <= rep.relation_bound);
    CMatrix p = relation_product(rep);
    CHECK(p.rows() == 2);
}

TEST_CASE("relation with infinity marked") {
    auto conn = load_instance(fixture("normalize_r2n3")).connection();
    auto rep = monodromy_rep(conn.system);
    REQUIRE(rep.infinity.has_value());
    CHECK(rep.relation_residual < 1e-8);
}

TEST_CASE("monodromy does not depend on the thread count") {
    auto sys = load_instance(fixture("generic_r2n4")).system();
    setenv("IML_THREADS", "1", 1);
    auto one = monodromy_rep(sys);
    setenv("IML_THREADS", "4", 1);
    auto four = monodromy_rep(sys);
    unsetenv("IML_THREADS");
    for (std::size_t k = 0; k < 4; ++k) CHECK((one.matrices[k] - four.matrices[k]).norm() == 0.0);
    CHECK(one.relation_residual == four.relation_residual);
}

TEST_CASE("rh map and local eigenvalues") {
    ExponentData half({{Exponent(ExactScalar(Rational(1, 2)))}, {Exponent(ExactScalar(Rational(-1, 2)))}});
    auto data = rh_map(half);
    CHECK(std::abs(data.coefficients[0][0] - Complex(1.0)) < 1e-15);
    CHECK(data.constraint_residual < 1e-15);
    // exact exponents are reduced mod 1 before exponentiating
    Exponent big(ExactScalar(Rational(100001, 4)));
    CHECK(std::abs(local_eigenvalue(big) - Complex(0, -1)) < 1e-15);
}

TEST_CASE("rh consistency on the generic fixture") {
    auto conn = load_instance(fixture("generic_r2n4")).connection();
    auto rep = monodromy_rep(conn.system);
    auto rh = check_rh_consistency(conn, rep, 1e-6);
    CHECK(rh.pass);
    CHECK(rh.max_deviation < 1e-9);
}

TEST_CASE("trace words") {
    std::vector<CMatrix> m{mat2(1, 1, 0, 1), mat2(2, 0, 0, 3)};
    auto inv = rep_invariants(m, 2);
    // words 0, 1, 00, 01, 11 (10 is a rotation of 01)
    REQUIRE(inv.words.size() == 5);
    CHECK(inv.values[0] == Complex(2));
    CHECK(inv.values[1] == Complex(5));
    CHECK(inv.values[3] == Complex(5));
    CHECK(invariant_distance(inv, inv) == 0.0);
    CHECK(std::isinf(invariant_distance(inv, rep_invariants(m, 1))));
}

TEST_CASE("singular point predicate") {
    auto split = load_instance(fixture("split_alpha_a")).connection();
    auto r1 = is_singular_point(monodromy_rep(split.system), split.exponents);
    CHECK(r1.reducible);
    CHECK(r1.singular);
    auto gen = load_instance(fixture("irreducible_r2n3")).connection();
    auto r2 = is_singular_point(monodromy_rep(gen.system), gen.exponents);
    CHECK_FALSE(r2.reducible);
}
