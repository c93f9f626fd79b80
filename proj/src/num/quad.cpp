#include "mspop/num/quad.hpp"

#include "mspop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

namespace mspop::num {

namespace {

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (positive half;
// even-index entries are the embedded Gauss-7 nodes).
constexpr double xk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr double wk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

} // namespace

double gk15(const Integrand& f, double a, double b, double& err) {
    const double c = 0.5 * (a + b);
    const double hl = 0.5 * (b - a);
    double fv[15];
    fv[7] = f(c);
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - hl * xk[i]);
        fv[14 - i] = f(c + hl * xk[i]);
    }
    double k = wk[7] * fv[7];
    double g = wg[3] * fv[7];
    for (int i = 0; i < 7; ++i) {
        k += wk[i] * (fv[i] + fv[14 - i]);
        if (i % 2 == 1) g += wg[i / 2] * (fv[i] + fv[14 - i]);
    }
    k *= hl;
    g *= hl;
    err = std::abs(k - g);
    return k;
}

QuadResult integrate(const Integrand& f, double a, double b,
                     const QuadOptions& opt) {
    QuadResult res;
    if (a == b) return res;

    struct Interval {
        double a, b, value, err;
        bool operator<(const Interval& o) const { return err < o.err; }
    };
    std::priority_queue<Interval> queue;

    double err0;
    double v0 = gk15(f, a, b, err0);
    res.evaluations = 15;
    queue.push({a, b, v0, err0});
    double total = v0, total_err = err0;

    while (total_err > std::max(opt.atol, opt.rtol * std::abs(total))) {
        if (queue.size() >= opt.max_intervals)
            throw NotConverged("adaptive quadrature exceeded interval budget");
        Interval worst = queue.top();
        queue.pop();
        double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b)
            throw NotConverged("adaptive quadrature interval underflow");
        double el, er;
        double vl = gk15(f, worst.a, mid, el);
        double vr = gk15(f, mid, worst.b, er);
        res.evaluations += 30;
        total += vl + vr - worst.value;
        total_err += el + er - worst.err;
        queue.push({worst.a, mid, vl, el});
        queue.push({mid, worst.b, vr, er});
    }
    res.value = total;
    res.est_error = total_err;
    return res;
}

QuadResult integrate_segments(const Integrand& f,
                              const std::vector<double>& pts,
                              const QuadOptions& opt) {
    if (pts.size() < 2)
        throw OutOfRange("integrate_segments: need at least two breakpoints");
    QuadResult total;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        if (pts[k + 1] < pts[k])
            throw OutOfRange("integrate_segments: breakpoints must ascend");
        if (pts[k + 1] == pts[k]) continue;
        QuadResult r = integrate(f, pts[k], pts[k + 1], opt);
        total.value += r.value;
        total.est_error += r.est_error;
        total.evaluations += r.evaluations;
    }
    return total;
}

} // namespace mspop::num
