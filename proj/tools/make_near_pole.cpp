// Builds the near-pole flow fixture: a rank-2 system whose Fuchsian chart breaks
// down at t4 = 3 + 0.6i.  Writes the instance to stdout.
#include <iostream>

#include "iml/instance.hpp"

using namespace iml;

namespace {

CMatrix mat(Complex a, Complex b, Complex c, Complex d) {
    CMatrix m(2, 2);
    m << a, b, c, d;
    return m;
}

}  // namespace

int main() {
    const Complex pole(3.0, 0.6);
    const CMatrix s = mat(0.4, 0, 0, -0.4);
    std::vector<CMatrix> a = {mat(-0.1, 0.25, 0, 0.3), mat(-0.2, 0.1, 0.3, 0.25), mat(0.1, -0.3, 0.2, 0.05)};
    a.push_back(s - a[0] - a[1] - a[2]);
    const Complex z0(1.5, -2.0);

    // at the pole the line of the first flag is e1; flow back to t4 = 3
    FuchsianSystem at_pole(MarkedSphere({0.0, 1.0, 2.0, pole}, z0, true), a);
    auto q = make_connection(at_pole, exponents_from_spectra(a));
    DeformationPath back{{{0.0, 1.0, 2.0, pole}, {0.0, 1.0, 2.0, 3.0}}};
    auto q0 = flow(q, back).endpoint;

    // elementary gauge with complement e1: the result has a trivial-bundle
    // chart that degenerates exactly where e1 returns to the flag
    CMatrix u(2, 2);
    u.col(0) = CVector::Unit(2, 0);
    u.col(1) = q0.flags[0].basis().col(1);
    GaugeFunction g{u, {-1, 0}, 0, CMatrix::Identity(2, 2)};
    FuchsianSystem p0s = apply_gauge(q0.system, g);
    auto p0 = balance_frame(make_connection(p0s, exponents_from_spectra(p0s.residues()))).first;
    p0.provenance.clear();

    Instance base;
    base.description = "chart exit at t4 = 3+0.6i; needs regularize";
    Json doc = instance_json(base, p0);
    doc.erase("transform_log");
    Json path = Json::array();
    for (Complex t4 : {Complex(3.0, 0.0), pole, pole + Complex(0.0, 0.4)})
        path.push_back(Json::array({complex_json(0.0), complex_json(1.0), complex_json(2.0), complex_json(t4)}));
    doc["path"] = std::move(path);
    doc["options"] = Json{{"regularize", true}};
    doc["tolerances"] = Json{{"isomonodromy", 1e-5}};
    std::cout << dump_report(doc);
}
