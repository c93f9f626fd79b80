#include "mspop/num/ode.hpp"

#include "mspop/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mspop::num {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// 4th-order weights for the embedded error estimate.
constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                 e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;

struct Stepper {
    const OdeRhs& f;
    std::size_t n;
    std::vector<double> k1, k2, k3, k4, k5, k6, k7, ytmp;

    Stepper(const OdeRhs& f_, std::size_t n_)
        : f(f_), n(n_), k1(n_), k2(n_), k3(n_), k4(n_), k5(n_), k6(n_),
          k7(n_), ytmp(n_) {}

    // One trial step from (t, y) with size h; fills ynew and returns the
    // scaled RMS error.
    double attempt(double t, const std::vector<double>& y, double h,
                   std::vector<double>& ynew, const OdeOptions& opt) {
        f(t, y, k1);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * a21 * k1[i];
        f(t + c2 * h, ytmp, k2);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        f(t + c3 * h, ytmp, k3);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        f(t + c4 * h, ytmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] +
                                  a54 * k4[i]);
        f(t + c5 * h, ytmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                                  a64 * k4[i] + a65 * k5[i]);
        f(t + h, ytmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] +
                                  b5 * k5[i] + b6 * k6[i]);
        f(t + h, ynew, k7);

        double err2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double y4 = y[i] + h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] +
                                    e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            double sc = opt.atol +
                        opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            double d = (ynew[i] - y4) / sc;
            err2 += d * d;
        }
        return std::sqrt(err2 / static_cast<double>(n));
    }
};

double initial_step(const OdeRhs& f, double t0, const std::vector<double>& y0,
                    double span, const OdeOptions& opt) {
    std::vector<double> f0(y0.size());
    f(t0, y0, f0);
    double ynorm = 0, fnorm = 0;
    for (std::size_t i = 0; i < y0.size(); ++i) {
        double sc = opt.atol + opt.rtol * std::abs(y0[i]);
        ynorm = std::max(ynorm, std::abs(y0[i]) / sc);
        fnorm = std::max(fnorm, std::abs(f0[i]) / sc);
    }
    double h = (fnorm > 0) ? 0.01 * ynorm / fnorm : 1e-6 * std::abs(span);
    if (h <= 0 || !std::isfinite(h)) h = 1e-6 * std::abs(span);
    return std::min(h, std::abs(span));
}

// Integration core without guard handling.
OdeResult run(const OdeRhs& f, double t0, std::vector<double> y, double t1,
              const OdeOptions& opt) {
    OdeResult res;
    res.t = t0;
    const double span = t1 - t0;
    if (span == 0) {
        res.y = std::move(y);
        return res;
    }
    const double dir = (span > 0) ? 1.0 : -1.0;
    Stepper st(f, y.size());
    std::vector<double> ynew(y.size());
    double h = (opt.h_init > 0) ? opt.h_init : initial_step(f, t0, y, span, opt);
    double t = t0;
    while (dir * (t1 - t) > 0) {
        h = std::min(h, std::abs(t1 - t));
        if (res.stats.steps + res.stats.rejected >= opt.max_steps)
            throw NotConverged("ode integration exceeded the step budget");
        double err = st.attempt(t, y, dir * h, ynew, opt);
        if (err <= 1.0) {
            t += dir * h;
            y.swap(ynew);
            ++res.stats.steps;
            res.stats.est_error += err * opt.rtol;
        } else {
            ++res.stats.rejected;
        }
        double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
        h *= std::clamp(fac, 0.2, 10.0);
        if (!(h > 0) || !std::isfinite(h))
            throw NotConverged("ode step size collapsed");
    }
    res.t = t1;
    res.y = std::move(y);
    return res;
}

} // namespace

OdeResult integrate(const OdeRhs& f, double t0, std::span<const double> y0,
                    double t1, const OdeOptions& opt, const OdeGuard& inside) {
    std::vector<double> y(y0.begin(), y0.end());
    if (!inside) return run(f, t0, std::move(y), t1, opt);

    // Guarded integration: march in chunks, and when the guard trips
    // localize the crossing by bisection on the chunk from the last state
    // known to be inside.
    if (!inside(t0, y)) {
        OdeResult res;
        res.t = t0;
        res.y = std::move(y);
        res.stopped = true;
        return res;
    }
    // A full pass first; most trajectories never leave.
    OdeResult full = run(f, t0, y, t1, opt);
    if (inside(full.t, full.y)) return full;

    double lo = t0, hi = t1;
    std::vector<double> ylo = y;
    const double ttol = std::max(1e-12, 1e-10 * std::abs(t1 - t0));
    OdeStats stats = full.stats;
    while (std::abs(hi - lo) > ttol) {
        double mid = 0.5 * (lo + hi);
        OdeResult part = run(f, lo, ylo, mid, opt);
        stats.steps += part.stats.steps;
        stats.rejected += part.stats.rejected;
        if (inside(part.t, part.y)) {
            lo = part.t;
            ylo = std::move(part.y);
        } else {
            hi = mid;
        }
    }
    OdeResult res;
    res.t = lo;
    res.y = std::move(ylo);
    res.stopped = true;
    res.stats = stats;
    return res;
}

} // namespace mspop::num
