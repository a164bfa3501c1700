#pragma once

#include <complex>
#include <functional>

#include <Eigen/Dense>

namespace iml {

struct OdeOptions {
    double rtol = 1e-12;
    double h_min = 1e-14;  // relative to the interval length
    double h_init = 0.0;   // 0: pick automatically
    long long max_steps = 2'000'000;
};

struct OdeStats {
    long long accepted = 0;
    long long rejected = 0;
};

template <class Real>
using OdeStateT = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;
template <class Real>
using OdeRhsT = std::function<void(Real s, const OdeStateT<Real>& y, OdeStateT<Real>& dy)>;
/// Called after every accepted step with the step start/end states and the
/// embedded error estimate.
template <class Real>
using OdeObserverT = std::function<void(Real s0, const OdeStateT<Real>& y0, Real s1, const OdeStateT<Real>& y1,
                                        const OdeStateT<Real>& error)>;

using OdeState = OdeStateT<double>;
using OdeRhs = OdeRhsT<double>;
using OdeObserver = OdeObserverT<double>;

/// Dormand-Prince 5(4) with PI step control from s0 to s1.  Throws
/// StepUnderflow when the step falls below h_min * |s1 - s0|.  Instantiated
/// for double and long double.
template <class Real>
OdeStateT<Real> integrate_dp45(const OdeRhsT<Real>& rhs, Real s0, Real s1, OdeStateT<Real> y, const OdeOptions& opts,
                               OdeStats* stats = nullptr, const OdeObserverT<Real>& observer = {});

extern template OdeStateT<double> integrate_dp45<double>(const OdeRhsT<double>&, double, double, OdeStateT<double>,
                                                         const OdeOptions&, OdeStats*, const OdeObserverT<double>&);
extern template OdeStateT<long double> integrate_dp45<long double>(const OdeRhsT<long double>&, long double,
                                                                   long double, OdeStateT<long double>,
                                                                   const OdeOptions&, OdeStats*,
                                                                   const OdeObserverT<long double>&);

}  // namespace iml
