#pragma once

#include <complex>
#include <optional>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace iml {

using Complex = std::complex<double>;
using Integer = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Parses "p/q", "-3", "0.125" or "1e-3" into an exact rational.  Decimal
/// strings are read as the exact decimal fraction they denote.
Rational parse_rational(std::string_view text);

/// "p/q" with q > 0 omitted when q == 1.
std::string to_string(const Rational& q);

double to_double(const Rational& q);
Integer floor(const Rational& q);
bool is_integer(const Rational& q);

/// Gaussian rational re + i*im.
struct ExactScalar {
    Rational re;
    Rational im;

    ExactScalar() = default;
    ExactScalar(Rational real, Rational imag = 0) : re(std::move(real)), im(std::move(imag)) {}
    ExactScalar(long long real) : re(real), im(0) {}

    Complex to_complex() const { return {to_double(re), to_double(im)}; }
    bool is_integer() const { return im == 0 && iml::is_integer(re); }

    friend ExactScalar operator+(const ExactScalar& a, const ExactScalar& b) { return {a.re + b.re, a.im + b.im}; }
    friend ExactScalar operator-(const ExactScalar& a, const ExactScalar& b) { return {a.re - b.re, a.im - b.im}; }
    friend ExactScalar operator-(const ExactScalar& a) { return {-a.re, -a.im}; }
    friend ExactScalar operator*(const ExactScalar& a, const ExactScalar& b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    friend bool operator==(const ExactScalar& a, const ExactScalar& b) { return a.re == b.re && a.im == b.im; }
    ExactScalar& operator+=(const ExactScalar& b) { re += b.re; im += b.im; return *this; }
};

std::string to_string(const ExactScalar& z);

/// A local exponent: always carries a floating value, plus the exact value when
/// the input was rational.
struct Exponent {
    Complex value;
    std::optional<ExactScalar> exact;

    Exponent() = default;
    explicit Exponent(Complex v) : value(v) {}
    explicit Exponent(ExactScalar e) : value(e.to_complex()), exact(std::move(e)) {}

    bool is_exact() const { return exact.has_value(); }

    /// Shift by an integer; exactness is preserved.
    Exponent shifted(long long k) const;

    /// floor(Re); exact in exact mode, otherwise floor(Re + 1e-12) so that
    /// values a hair below an integer are not pushed across it.
    long long re_floor() const;

    /// Three-way comparison of real parts, exact when both sides are exact.
    friend int compare_re(const Exponent& a, const Exponent& b);
    friend int compare_im(const Exponent& a, const Exponent& b);

    /// Exact equality when both exact, otherwise |a-b| <= tol.
    bool same_as(const Exponent& other, double tol) const;
};

std::string to_string(const Exponent& e);

/// Sum of exponents: exact iff every term is exact.
Exponent sum(const Exponent* first, const Exponent* last);

/// Integrality with the float tolerance used across the library.
bool is_integral(const Exponent& e, double tol);

}  // namespace iml
