#include "iml/exact.hpp"

#include <cmath>
#include <cstdio>

#include "iml/error.hpp"

namespace iml {

namespace {

Integer pow10(int k) {
    Integer p = 1;
    for (int i = 0; i < k; ++i) p *= 10;
    return p;
}

Rational parse_decimal(std::string_view s) {
    std::size_t i = 0;
    bool negative = false;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) negative = s[i++] == '-';
    Integer mantissa = 0;
    int frac_digits = 0;
    bool digits = false;
    bool seen_point = false;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (c >= '0' && c <= '9') {
            mantissa = mantissa * 10 + (c - '0');
            digits = true;
            if (seen_point) ++frac_digits;
        } else if (c == '.' && !seen_point) {
            seen_point = true;
        } else {
            break;
        }
    }
    if (!digits) throw Error(ErrorKind::InvalidInput, "malformed number '" + std::string(s) + "'");
    long long exponent = 0;
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        ++i;
        std::string rest(s.substr(i));
        std::size_t used = 0;
        try {
            exponent = std::stoll(rest, &used);
        } catch (const std::exception&) {
            throw Error(ErrorKind::InvalidInput, "malformed exponent in '" + std::string(s) + "'");
        }
        i += used;
    }
    if (i != s.size()) throw Error(ErrorKind::InvalidInput, "trailing characters in '" + std::string(s) + "'");
    long long scale = exponent - frac_digits;
    if (scale > 4000 || scale < -4000) throw Error(ErrorKind::InvalidInput, "exponent out of range");
    Rational q = mantissa;
    if (scale >= 0) {
        q *= pow10(static_cast<int>(scale));
    } else {
        q /= pow10(static_cast<int>(-scale));
    }
    return negative ? Rational(-q) : q;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    if (b == std::string_view::npos) return {};
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Rational parse_rational(std::string_view text) {
    std::string s = trim(text);
    auto slash = s.find('/');
    if (slash == std::string::npos) return parse_decimal(s);
    Rational num = parse_decimal(trim(std::string_view(s).substr(0, slash)));
    Rational den = parse_decimal(trim(std::string_view(s).substr(slash + 1)));
    if (den == 0) throw Error(ErrorKind::InvalidInput, "zero denominator in '" + s + "'");
    return num / den;
}

std::string to_string(const Rational& q) {
    Integer num = boost::multiprecision::numerator(q);
    Integer den = boost::multiprecision::denominator(q);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

double to_double(const Rational& q) { return q.convert_to<double>(); }

Integer floor(const Rational& q) {
    Integer num = boost::multiprecision::numerator(q);
    Integer den = boost::multiprecision::denominator(q);
    Integer quot = num / den;  // truncates toward zero
    if (num < 0 && quot * den != num) quot -= 1;
    return quot;
}

bool is_integer(const Rational& q) { return boost::multiprecision::denominator(q) == 1; }

std::string to_string(const ExactScalar& z) {
    if (z.im == 0) return to_string(z.re);
    return "(" + to_string(z.re) + (z.im < 0 ? ")-(" : ")+(") + to_string(z.im < 0 ? Rational(-z.im) : z.im) + ")i";
}

Exponent Exponent::shifted(long long k) const {
    if (exact) return Exponent(*exact + ExactScalar(k));
    return Exponent(value + static_cast<double>(k));
}

long long Exponent::re_floor() const {
    if (exact) return iml::floor(exact->re).convert_to<long long>();
    return static_cast<long long>(std::floor(value.real() + 1e-12));
}

int compare_re(const Exponent& a, const Exponent& b) {
    if (a.exact && b.exact) return a.exact->re < b.exact->re ? -1 : (a.exact->re > b.exact->re ? 1 : 0);
    double x = a.value.real(), y = b.value.real();
    return x < y ? -1 : (x > y ? 1 : 0);
}

int compare_im(const Exponent& a, const Exponent& b) {
    if (a.exact && b.exact) return a.exact->im < b.exact->im ? -1 : (a.exact->im > b.exact->im ? 1 : 0);
    double x = a.value.imag(), y = b.value.imag();
    return x < y ? -1 : (x > y ? 1 : 0);
}

bool Exponent::same_as(const Exponent& other, double tol) const {
    if (exact && other.exact) return *exact == *other.exact;
    return std::abs(value - other.value) <= tol;
}

std::string to_string(const Exponent& e) {
    if (e.exact) return to_string(*e.exact);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.17g%+.17gi", e.value.real(), e.value.imag());
    return buf;
}

Exponent sum(const Exponent* first, const Exponent* last) {
    bool all_exact = true;
    Complex v = 0;
    ExactScalar ex;
    for (auto it = first; it != last; ++it) {
        v += it->value;
        if (it->exact) {
            ex += *it->exact;
        } else {
            all_exact = false;
        }
    }
    if (all_exact) return Exponent(ex);
    return Exponent(v);
}

bool is_integral(const Exponent& e, double tol) {
    if (e.exact) return e.exact->is_integer();
    return std::abs(e.value.imag()) <= tol && std::abs(e.value.real() - std::round(e.value.real())) <= tol;
}

}  // namespace iml
