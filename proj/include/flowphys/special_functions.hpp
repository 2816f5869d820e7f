#ifndef FLOWPHYS_SPECIAL_FUNCTIONS_HPP_
#define FLOWPHYS_SPECIAL_FUNCTIONS_HPP_

#include <cmath>
#include <limits>
#include <stdexcept>

namespace flowphys::special {

namespace detail {

inline constexpr double kEps = 1e-16;
inline constexpr double kTiny = 1e-300;
inline constexpr int kMaxIter = 10000;

/// Continued fraction for the incomplete beta (modified Lentz).
inline double beta_cf(double a, double b, double x)
{
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw std::runtime_error("incomplete beta continued fraction did not converge");
}

/// P(a, x) by series; valid for x < a + 1.
inline double gamma_series(double a, double x)
{
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < kMaxIter; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * kEps) {
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
        }
    }
    throw std::runtime_error("incomplete gamma series did not converge");
}

/// Q(a, x) by continued fraction; valid for x >= a + 1.
inline double gamma_cf(double a, double x)
{
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
    }
    throw std::runtime_error("incomplete gamma continued fraction did not converge");
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double betainc(double a, double b, double x)
{
    if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("betainc requires a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double front =
        std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// Regularized lower incomplete gamma P(a, x).
inline double gammainc_lower(double a, double x)
{
    if (!(a > 0.0)) throw std::domain_error("gammainc requires a > 0");
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_series(a, x);
    return 1.0 - detail::gamma_cf(a, x);
}

/// Regularized upper incomplete gamma Q(a, x).
inline double gammainc_upper(double a, double x)
{
    if (!(a > 0.0)) throw std::domain_error("gammainc requires a > 0");
    if (x <= 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_series(a, x);
    return detail::gamma_cf(a, x);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Upper tail of the standard normal.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

/// P(F > f) for F(d1, d2).
inline double f_sf(double f, double d1, double d2)
{
    if (std::isinf(f)) return 0.0;
    if (f <= 0.0) return 1.0;
    return betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

/// P(X > x) for chi-square with `df` degrees of freedom.
inline double chi2_sf(double x, double df) { return gammainc_upper(df / 2.0, x / 2.0); }

/// Two-sided p for Student t with `df` degrees of freedom.
inline double t_two_sided(double t, double df)
{
    if (std::isinf(t)) return 0.0;
    return betainc(df / 2.0, 0.5, df / (df + t * t));
}

} // namespace flowphys::special

#endif // FLOWPHYS_SPECIAL_FUNCTIONS_HPP_
