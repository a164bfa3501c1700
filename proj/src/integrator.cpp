#include "iml/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "iml/error.hpp"

namespace iml {

namespace {

// Dormand-Prince tableau, exact in long double
template <class R>
struct Tableau {
    static constexpr R c2 = R(1) / 5, c3 = R(3) / 10, c4 = R(4) / 5, c5 = R(8) / 9;
    static constexpr R a21 = R(1) / 5;
    static constexpr R a31 = R(3) / 40, a32 = R(9) / 40;
    static constexpr R a41 = R(44) / 45, a42 = R(-56) / 15, a43 = R(32) / 9;
    static constexpr R a51 = R(19372) / 6561, a52 = R(-25360) / 2187, a53 = R(64448) / 6561, a54 = R(-212) / 729;
    static constexpr R a61 = R(9017) / 3168, a62 = R(-355) / 33, a63 = R(46732) / 5247, a64 = R(49) / 176,
                       a65 = R(-5103) / 18656;
    static constexpr R b1 = R(35) / 384, b3 = R(500) / 1113, b4 = R(125) / 192, b5 = R(-2187) / 6784,
                       b6 = R(11) / 84;
    // b - b*, the embedded fourth-order difference
    static constexpr R e1 = R(71) / 57600, e3 = R(-71) / 16695, e4 = R(71) / 1920, e5 = R(-17253) / 339200,
                       e6 = R(22) / 525, e7 = R(-1) / 40;
};

constexpr double kSafety = 0.9;
constexpr double kAlpha = 0.17;
constexpr double kBeta = 0.04;

}  // namespace

template <class Real>
OdeStateT<Real> integrate_dp45(const OdeRhsT<Real>& rhs, Real s0, Real s1, OdeStateT<Real> y, const OdeOptions& opts,
                               OdeStats* stats, const OdeObserverT<Real>& observer) {
    using T = Tableau<Real>;
    const Real span = s1 - s0;
    if (span == 0.0) return y;
    const Real dir = span > 0 ? Real(1) : Real(-1);
    const Real len = std::abs(span);
    const Real h_min = Real(opts.h_min) * len;
    Real h = opts.h_init > 0 ? std::min(Real(opts.h_init), len) : len / 16;

    const auto n = y.size();
    OdeStateT<Real> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n), err(n);
    Real s = s0;
    rhs(s, y, k1);
    double err_prev = 1e-4;
    long long steps = 0;
    bool last_rejected = false;

    while (dir * (s1 - s) > 0) {
        if (++steps > opts.max_steps) throw Error(ErrorKind::StepUnderflow, "step count limit reached");
        bool final_step = false;
        if (h >= std::abs(s1 - s)) {
            h = std::abs(s1 - s);
            final_step = true;
        }
        const Real hs = dir * h;
        tmp = y + hs * T::a21 * k1;
        rhs(s + T::c2 * hs, tmp, k2);
        tmp = y + hs * (T::a31 * k1 + T::a32 * k2);
        rhs(s + T::c3 * hs, tmp, k3);
        tmp = y + hs * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3);
        rhs(s + T::c4 * hs, tmp, k4);
        tmp = y + hs * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4);
        rhs(s + T::c5 * hs, tmp, k5);
        tmp = y + hs * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5);
        rhs(s + hs, tmp, k6);
        ynew = y + hs * (T::b1 * k1 + T::b3 * k3 + T::b4 * k4 + T::b5 * k5 + T::b6 * k6);
        rhs(s + hs, ynew, k7);
        err = hs * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);

        const Real scale = Real(opts.rtol) * (1 + std::max(y.norm(), ynew.norm()));
        double en = static_cast<double>(err.norm() / scale);
        if (!std::isfinite(en)) en = 1e10;

        if (en <= 1.0) {
            if (stats) ++stats->accepted;
            const Real s_new = final_step ? s1 : s + hs;
            if (observer) observer(s, y, s_new, ynew, err);
            s = s_new;
            y = ynew;
            k1 = k7;
            double fac = en == 0.0 ? 10.0 : kSafety * std::pow(en, -kAlpha) * std::pow(err_prev, kBeta);
            fac = std::clamp(fac, 0.2, 10.0);
            if (last_rejected) fac = std::min(fac, 1.0);
            h *= Real(fac);
            err_prev = std::max(en, 1e-4);
            last_rejected = false;
        } else {
            if (stats) ++stats->rejected;
            h *= Real(std::max(0.2, kSafety * std::pow(en, -kAlpha)));
            last_rejected = true;
        }
        if (h < h_min && dir * (s1 - s) > 0) {
            std::ostringstream os;
            os << "step size underflow at s=" << static_cast<double>(s);
            throw Error(ErrorKind::StepUnderflow, os.str());
        }
    }
    return y;
}

template OdeStateT<double> integrate_dp45<double>(const OdeRhsT<double>&, double, double, OdeStateT<double>,
                                                  const OdeOptions&, OdeStats*, const OdeObserverT<double>&);
template OdeStateT<long double> integrate_dp45<long double>(const OdeRhsT<long double>&, long double, long double,
                                                            OdeStateT<long double>, const OdeOptions&, OdeStats*,
                                                            const OdeObserverT<long double>&);

}  // namespace iml
