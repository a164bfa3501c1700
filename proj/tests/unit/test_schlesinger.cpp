#include <doctest.h>

#include "iml/linalg.hpp"
#include "iml/schlesinger.hpp"
#include "support.hpp"

using namespace iml;
using namespace iml::testing;

TEST_CASE("schlesinger field conserves the residue sum") {
    auto inst = load_instance(fixture("generic_r2n4"));
    Configuration t = inst.punctures;
    Configuration dt{0.0, Complex(0.3, 0.1), 0.0, Complex(0, 1)};
    auto d = schlesinger_rhs(t, inst.residues, dt);
    CMatrix total = CMatrix::Zero(2, 2);
    for (const auto& m : d) total += m;
    CHECK(total.norm() < 1e-15);
    // each derivative is a commutator with A_i, so traces stay put
    for (const auto& m : d) CHECK(std::abs(m.trace()) < 1e-15);
}

TEST_CASE("commuting residues do not move") {
    auto inst = load_instance(fixture("commuting_r2n4"));
    auto conn = inst.connection();
    auto res = flow(conn, *inst.path);
    for (std::size_t i = 0; i < conn.system.size(); ++i)
        CHECK((res.endpoint.system.residue(i) - conn.system.residue(i)).norm() == 0.0);
}

TEST_CASE("flow conserves sum and spectra") {
    auto inst = load_instance(fixture("generic_r2n4"));
    auto conn = inst.connection();
    auto res = flow(conn, *inst.path);
    CHECK(res.sum_drift < 1e-9);
    CHECK(res.spectrum_drift < 1e-8);
    CHECK(res.accepted > 0);
    CHECK(res.checkpoints.size() >= 2);
    CHECK(res.endpoint.system.sphere().puncture(3) == Complex(3, 1));
    CHECK(check_compatibility(res.endpoint).pass);
}

TEST_CASE("flow is isomonodromic") {
    auto inst = load_instance(fixture("generic_r2n4"));
    auto conn = inst.connection();
    auto rep = verify_isomonodromy(conn, *inst.path, 1e-6);
    CHECK(rep.pass);
    CHECK(rep.deviation < 1e-9);
}

TEST_CASE("a wrong vector field is caught") {
    auto inst = load_instance(fixture("generic_r2n4"));
    FlowOptions opts;
    opts.field = [](const Configuration& t, const std::vector<CMatrix>& a, const Configuration& dt) {
        auto d = schlesinger_rhs(t, a, dt);
        d[2] += linalg::commutator(a[2], a[3]) * dt[3];
        return d;
    };
    auto rep = verify_isomonodromy(inst.connection(), *inst.path, 1e-6, opts);
    CHECK_FALSE(rep.pass);
    CHECK(rep.deviation > 1e-3);
}

TEST_CASE("colliding path is rejected") {
    auto inst = load_instance(fixture("collision_r2n4"));
    try {
        check_path(*inst.path, inst.sphere());
        FAIL("expected ConfigurationCollision");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigurationCollision);
    }
}

TEST_CASE("near a pole the flow exits the chart unless regularized") {
    auto inst = load_instance(fixture("near_pole_r2n4"));
    auto conn = inst.connection();
    try {
        flow(conn, *inst.path);
        FAIL("expected ChartExit");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ChartExit);
    }
    FlowOptions opts;
    opts.regularize = true;
    auto res = flow(conn, *inst.path, opts);
    CHECK_FALSE(res.transforms.empty());
    auto rep = verify_isomonodromy(conn, res, 1e-5);
    CHECK(rep.pass);
}

TEST_CASE("horizontal lift returns the dense trajectory") {
    auto inst = load_instance(fixture("generic_r2n4"));
    auto lift = horizontal_lift(inst.connection(), *inst.path);
    REQUIRE(lift.checkpoints.size() >= 2);
    CHECK(lift.checkpoints.front().s == 0.0);
    CHECK(lift.checkpoints.back().s == 1.0);
}
