#include <doctest.h>

#include "iml/error.hpp"
#include "iml/exact.hpp"
#include "iml/integrator.hpp"
#include "iml/linalg.hpp"
#include "support.hpp"

using namespace iml;
using namespace iml::testing;

TEST_CASE("rational parsing") {
    CHECK(parse_rational("3/6") == Rational(1, 2));
    CHECK(parse_rational("-7") == Rational(-7));
    CHECK(parse_rational("0.125") == Rational(1, 8));
    CHECK(parse_rational("1e-3") == Rational(1, 1000));
    CHECK(to_string(Rational(-4, 6)) == "-2/3");
    CHECK(to_string(Rational(5)) == "5");
    CHECK_THROWS_AS(parse_rational("1/0"), Error);
    CHECK_THROWS_AS(parse_rational("abc"), Error);
}

TEST_CASE("exponent arithmetic stays exact") {
    Exponent a(ExactScalar(Rational(1, 3)));
    Exponent b(ExactScalar(Rational(2, 3)));
    CHECK(a.shifted(2).exact->re == Rational(7, 3));
    CHECK(a.shifted(-1).re_floor() == -1);
    CHECK(compare_re(a, b) < 0);
    std::vector<Exponent> v{a, b};
    Exponent s = sum(v.data(), v.data() + 2);
    REQUIRE(s.is_exact());
    CHECK(s.exact->re == 1);
    CHECK(is_integral(s, 1e-12));

    // mixing in a float exponent drops exactness
    v.emplace_back(Complex(0.5, 0));
    CHECK_FALSE(sum(v.data(), v.data() + 3).is_exact());
    // a hair below an integer floors to that integer
    CHECK(Exponent(Complex(2.0 - 1e-14, 0)).re_floor() == 2);
}

TEST_CASE("marked sphere rejects coincident punctures") {
    CHECK_THROWS_AS(MarkedSphere({0.0, 1.0, 1.0}, Complex(0, -1)), Error);
    CHECK_THROWS_AS(MarkedSphere({0.0, 1.0}, Complex(1.0, 0)), Error);
    MarkedSphere s({0.0, 1.0, Complex(0, 2)}, Complex(3, 3));
    CHECK(s.min_separation() == doctest::Approx(1.0));
}

TEST_CASE("flag subspaces") {
    CMatrix b = CMatrix::Identity(3, 3);
    b(0, 1) = 2.0;
    Flag f(b);
    CHECK(flag_subspace(f, 0).cols() == 3);
    CHECK(flag_subspace(f, 2).cols() == 1);
    CVector e3 = CVector::Unit(3, 2);
    CHECK(subspace_contains(flag_subspace(f, 2), e3));
    CHECK_FALSE(subspace_contains(flag_subspace(f, 2), CVector::Unit(3, 0)));
    CHECK(subspace_contains(flag_subspace(f, 1), CVector::Zero(3)));
    CHECK_THROWS_AS(Flag(CMatrix::Zero(2, 2)), Error);
}

TEST_CASE("subspace_contains is basis independent") {
    std::mt19937 rng(3);
    CMatrix v = gaussian(4, rng).leftCols(2);
    CMatrix g = gaussian(2, rng);
    CVector w = v * CVector::Ones(2);
    CHECK(subspace_contains(v, w));
    CHECK(subspace_contains(v * g, w));
    CHECK(subspace_contains(linalg::range_basis(v), w));
}

TEST_CASE("characteristic polynomial") {
    CMatrix m = mat2(1, 2, 3, 4);
    auto c = linalg::char_poly(m);
    REQUIRE(c.size() == 2);
    CHECK(std::abs(c[0] - Complex(-2)) < 1e-14);
    CHECK(std::abs(c[1] - Complex(-5)) < 1e-14);
    auto p = linalg::poly_from_roots({Complex(1), Complex(0, 1)});
    CHECK(std::abs(p[0] - Complex(0, 1)) < 1e-15);
    CHECK(std::abs(p[1] - Complex(-1, -1)) < 1e-15);
}

TEST_CASE("linear algebra helpers") {
    CMatrix m = mat2(1, 1, 1, 1);
    CHECK(linalg::rank(m) == 1);
    CMatrix k = linalg::null_space(m);
    REQUIRE(k.cols() == 1);
    CHECK((m * k).norm() < 1e-14);

    CMatrix a(3, 2), b(3, 2);
    a << 1, 0, 0, 1, 0, 0;
    b << 0, 0, 1, 0, 0, 1;
    CMatrix both = linalg::intersect(a, b);
    REQUIRE(both.cols() == 1);
    CHECK(std::abs(std::abs(both(1, 0)) - 1.0) < 1e-14);

    CHECK(linalg::matching_distance({Complex(1), Complex(2)}, {Complex(2), Complex(1)}) == 0.0);
    auto cl = linalg::cluster({Complex(1), Complex(1 + 1e-12), Complex(3)}, 1e-9);
    CHECK(cl.size() == 2);
}

TEST_CASE("dp45 integrates y' = i y") {
    OdeRhs rhs = [](double, const OdeState& y, OdeState& dy) { dy = Complex(0, 1) * y; };
    OdeState y0(1);
    y0(0) = 1.0;
    OdeOptions opts;
    opts.rtol = 1e-13;
    OdeStats stats;
    OdeState y = integrate_dp45<double>(rhs, 0.0, 2.0, y0, opts, &stats);
    CHECK(std::abs(y(0) - std::exp(Complex(0, 2))) < 1e-11);
    CHECK(stats.accepted > 0);

    // and backwards
    OdeState back = integrate_dp45<double>(rhs, 2.0, 0.0, y, opts);
    CHECK(std::abs(back(0) - 1.0) < 1e-11);
}

TEST_CASE("dp45 in long double reaches below double epsilon") {
    OdeRhsT<long double> rhs = [](long double, const OdeStateT<long double>& y, OdeStateT<long double>& dy) {
        dy = std::complex<long double>(0, 1) * y;
    };
    OdeStateT<long double> y0(1);
    y0(0) = 1.0L;
    OdeOptions opts;
    opts.rtol = 1e-18;
    auto y = integrate_dp45<long double>(rhs, 0.0L, 1.0L, y0, opts);
    const std::complex<long double> exact(std::cos(1.0L), std::sin(1.0L));
    CHECK(static_cast<double>(std::abs(y(0) - exact)) < 1e-17);
}

TEST_CASE("dp45 reports step underflow") {
    OdeRhs rhs = [](double s, const OdeState& y, OdeState& dy) { dy = y / (1.0 - s); };
    OdeState y0 = OdeState::Ones(1);
    OdeOptions opts;
    opts.rtol = 1e-12;
    try {
        integrate_dp45<double>(rhs, 0.0, 1.0, y0, opts);
        FAIL("expected StepUnderflow");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::StepUnderflow);
    }
}

TEST_CASE("error kinds split into validation and numerical") {
    CHECK(is_validation_error(ErrorKind::InvalidInput));
    CHECK(is_validation_error(ErrorKind::ConfigurationCollision));
    CHECK_FALSE(is_validation_error(ErrorKind::StepUnderflow));
    CHECK_FALSE(is_validation_error(ErrorKind::ChartExit));
}
