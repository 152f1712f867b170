#pragma once

// Decay-rate extraction from Δ2 series and generalized gamma fits of
// overlap magnitudes.

#include "series.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace brickdesign {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y, std::size_t begin,
                        std::size_t end) {
    const auto n = static_cast<double>(end - begin);
    if (end - begin < 2) throw std::invalid_argument("fit_line: need at least two points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        ss += r * r;
    }
    f.rms = std::sqrt(ss / n);
    return f;
}

struct TwoStepOptions {
    double noise_floor = 1e-12;
    double rms_factor = 3.0;
    double abs_tol = 1e-9;      // residuals below this never break the early line
    double stderr_factor = 3.0;  // points with Δ2 < factor * stderr count as noise
    std::size_t min_points = 6;
    std::size_t seed_points = 3;
    double t_min = 0.0;  // earlier points are ignored
};

struct TwoStepFit {
    double r1 = 0.0, c1 = 0.0;
    double r2 = 0.0, c2 = 0.0;
    double t_star = 0.0;
    double window1_begin = 0.0, window1_end = 0.0;
    double window2_begin = 0.0, window2_end = 0.0;
    double rms1 = 0.0, rms2 = 0.0;
    bool breakpoint = false;
    std::size_t used_points = 0;
};

/// Piecewise-linear fit of ln Δ2(t) = -r t + c. A line through the first
/// seed_points points is extrapolated; the first later point off it by more
/// than max(rms_factor * RMS, abs_tol) breaks the first regime, t* is the
/// point before it, the early line is refitted on t <= t* and the late line
/// on t > t*. Only the leading run of points above the noise floor is used.
inline TwoStepFit fit_two_step(const std::vector<double>& t, const std::vector<double>& delta2,
                               const std::vector<double>& delta2_stderr = {},
                               const TwoStepOptions& opts = {}) {
    if (t.size() != delta2.size()) throw std::invalid_argument("fit_two_step: size mismatch");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < opts.t_min) continue;
        const double v = delta2[i];
        const double err = i < delta2_stderr.size() ? delta2_stderr[i] : 0.0;
        if (!std::isfinite(v) || v <= opts.noise_floor || v <= opts.stderr_factor * err) break;
        x.push_back(t[i]);
        y.push_back(std::log(v));
    }
    if (x.size() < opts.min_points)
        throw std::invalid_argument("fit_two_step: " + std::to_string(x.size()) +
                                    " usable points, need " + std::to_string(opts.min_points));
    const std::size_t n = x.size();
    std::size_t end = std::max<std::size_t>(std::min(opts.seed_points, n), 2);
    const LineFit seed = fit_line(x, y, 0, end);
    const double tol = std::max(opts.rms_factor * seed.rms, opts.abs_tol);
    while (end < n && std::abs(y[end] - seed.intercept - seed.slope * x[end]) <= tol) ++end;
    const LineFit early = fit_line(x, y, 0, end);
    TwoStepFit fit;
    fit.used_points = n;
    fit.r1 = -early.slope;
    fit.c1 = early.intercept;
    fit.rms1 = early.rms;
    fit.window1_begin = x.front();
    fit.window1_end = x[end - 1];
    fit.t_star = x[end - 1];
    if (end == n) {
        fit.r2 = fit.r1;
        fit.c2 = fit.c1;
        fit.rms2 = fit.rms1;
        fit.window2_begin = fit.window2_end = x.back();
        return fit;
    }
    fit.breakpoint = true;
    // With a single point after t*, the late line also passes through t*.
    const std::size_t late_begin = (n - end >= 2) ? end : end - 1;
    const LineFit late = fit_line(x, y, late_begin, n);
    fit.r2 = -late.slope;
    fit.c2 = late.intercept;
    fit.rms2 = late.rms;
    fit.window2_begin = x[late_begin];
    fit.window2_end = x.back();
    return fit;
}

inline TwoStepFit fit_two_step(const std::vector<MomentRow>& rows, double f_haar,
                               const TwoStepOptions& opts = {}) {
    std::vector<double> t, d, e;
    for (const auto& r : rows) {
        t.push_back(r.t);
        d.push_back(r.delta2);
        e.push_back(r.F_stderr / f_haar);
    }
    return fit_two_step(t, d, e, opts);
}

/// Late-time rate only: a straight line through the points with t >= t_from.
inline LineFit fit_tail(const std::vector<double>& t, const std::vector<double>& delta2, double t_from,
                        double noise_floor = 1e-300) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i] >= t_from && delta2[i] > noise_floor && std::isfinite(delta2[i])) {
            x.push_back(t[i]);
            y.push_back(std::log(delta2[i]));
        }
    return fit_line(x, y, 0, x.size());
}

struct GammaFit {
    double a = 0.0;
    double p = 0.0;
    double q = 0.0;
    double ks = 0.0;  // Kolmogorov-Smirnov distance to the fitted CDF
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Density p x^{q-1} exp(-(x/a)^p) / (a^q Γ(q/p)).
inline double gamma_pdf(double x, double a, double p, double q) {
    if (x <= 0.0) return 0.0;
    return std::exp(std::log(p) + (q - 1.0) * std::log(x) - q * std::log(a) - std::lgamma(q / p) -
                    std::pow(x / a, p));
}

inline double gamma_cdf(double x, double a, double p, double q) {
    if (x <= 0.0) return 0.0;
    return boost::math::gamma_p(q / p, std::pow(x / a, p));
}

namespace detail {

/// Mean negative log-likelihood and gradient in θ = (ln a, ln p, ln q) for data scaled to unit RMS.
inline double gamma_nll(const std::vector<double>& x, const std::vector<double>& logx, const Eigen::Vector3d& th,
                        Eigen::Vector3d* grad) {
    const double a = std::exp(th[0]), p = std::exp(th[1]), q = std::exp(th[2]);
    const double n = static_cast<double>(x.size());
    double s_pow = 0.0, s_pow_log = 0.0, s_log = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lr = logx[i] - th[0];
        const double u = std::exp(p * lr);
        s_pow += u;
        s_pow_log += u * lr;
        s_log += logx[i];
    }
    const double ll = n * (std::log(p) - q * th[0] - std::lgamma(q / p)) + (q - 1.0) * s_log - s_pow;
    if (grad) {
        const double psi = boost::math::digamma(q / p);
        const double da = -n * q / a + (p / a) * s_pow;
        const double dp = n / p + n * q / (p * p) * psi - s_pow_log;
        const double dq = -n * th[0] - n / p * psi + s_log;
        *grad = -Eigen::Vector3d(a * da, p * dp, q * dq) / n;
    }
    return -ll / n;
}

}  // namespace detail

/// Maximum-likelihood generalized gamma fit (BFGS in log parameters,
/// started from p = q = 2 with a matched to the second moment).
inline GammaFit fit_overlap_distribution(const std::vector<double>& overlaps, int max_iter = 500) {
    if (overlaps.size() < 1000) throw std::invalid_argument("gamma fit: need at least 1000 samples");
    const auto [mn, mx] = std::minmax_element(overlaps.begin(), overlaps.end());
    if (*mn <= 0.0) throw std::invalid_argument("gamma fit: samples must be positive");
    if (*mx - *mn <= 1e-15 * *mx) throw std::invalid_argument("gamma fit: degenerate data (all equal)");

    double m2 = 0.0;
    for (double v : overlaps) m2 += v * v;
    const double scale = std::sqrt(m2 / overlaps.size());
    std::vector<double> x(overlaps.size()), logx(overlaps.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = overlaps[i] / scale;
        logx[i] = std::log(x[i]);
    }

    Eigen::Vector3d th(0.0, std::log(2.0), std::log(2.0));
    Eigen::Vector3d g;
    double f = detail::gamma_nll(x, logx, th, &g);
    Eigen::Matrix3d hinv = Eigen::Matrix3d::Identity();
    GammaFit out;
    for (int it = 0; it < max_iter; ++it) {
        out.iterations = it + 1;
        if (g.norm() < 1e-9) {
            out.converged = true;
            break;
        }
        Eigen::Vector3d dir = -hinv * g;
        if (dir.dot(g) >= 0.0) {
            hinv.setIdentity();
            dir = -g;
        }
        double step = 1.0;
        Eigen::Vector3d th_new, g_new;
        double f_new = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            th_new = th + step * dir;
            f_new = detail::gamma_nll(x, logx, th_new, &g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * g.dot(dir)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        // No decrease at machine precision: stationary up to round-off.
        if (!accepted || !(f_new < f)) {
            out.converged = g.norm() < 1e-6;
            break;
        }
        const Eigen::Vector3d s = th_new - th, yv = g_new - g;
        const double sy = s.dot(yv);
        if (sy > 1e-16) {
            const double rho = 1.0 / sy;
            const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
            hinv = (id - rho * s * yv.transpose()) * hinv * (id - rho * yv * s.transpose()) +
                   rho * s * s.transpose();
        }
        th = th_new;
        f = f_new;
        g = g_new;
    }

    out.a = std::exp(th[0]) * scale;
    out.p = std::exp(th[1]);
    out.q = std::exp(th[2]);
    out.log_likelihood = -f * static_cast<double>(x.size()) - static_cast<double>(x.size()) * std::log(scale);

    std::vector<double> sorted = overlaps;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double c = gamma_cdf(sorted[i], out.a, out.p, out.q);
        ks = std::max({ks, std::abs(c - i / n), std::abs(c - (i + 1) / n)});
    }
    out.ks = ks;
    return out;
}

struct RateTrend {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_ci = 0.0;  // half-width of the 95% interval
    double intercept_ci = 0.0;
    std::size_t n_points = 0;
    std::vector<double> excluded;
};

/// ln r = slope δ + intercept by least squares with Student-t intervals.
/// δ = 0 and non-positive rates are excluded.
inline RateTrend rate_vs_delta(const std::vector<double>& delta, const std::vector<double>& rate,
                               double confidence = 0.95) {
    if (delta.size() != rate.size()) throw std::invalid_argument("rate_vs_delta: size mismatch");
    std::vector<double> x, y;
    RateTrend out;
    for (std::size_t i = 0; i < delta.size(); ++i) {
        if (delta[i] == 0.0 || !(rate[i] > 0.0) || !std::isfinite(rate[i])) {
            out.excluded.push_back(delta[i]);
            continue;
        }
        x.push_back(delta[i]);
        y.push_back(std::log(rate[i]));
    }
    if (x.size() < 4) throw std::invalid_argument("rate_vs_delta: need at least 4 usable points");
    const LineFit f = fit_line(x, y, 0, x.size());
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double sxx = 0.0, sx2 = 0.0;
    for (double v : x) {
        sxx += (v - mx) * (v - mx);
        sx2 += v * v;
    }
    const double s2 = f.rms * f.rms * n / (n - 2.0);
    boost::math::students_t dist(n - 2.0);
    const double tq = boost::math::quantile(boost::math::complement(dist, (1.0 - confidence) / 2.0));
    out.slope = f.slope;
    out.intercept = f.intercept;
    out.slope_ci = tq * std::sqrt(s2 / sxx);
    out.intercept_ci = tq * std::sqrt(s2 * sx2 / (n * sxx));
    out.n_points = x.size();
    return out;
}

}  // namespace brickdesign
