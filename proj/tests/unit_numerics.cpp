// Numeric kernels: ODE stepper, adaptive quadrature, lattice interpolation,
// root finding, statistics helpers, counter RNG.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mspop/errors.hpp"
#include "mspop/num/lattice.hpp"
#include "mspop/num/linalg.hpp"
#include "mspop/num/ode.hpp"
#include "mspop/num/quad.hpp"
#include "mspop/num/roots.hpp"
#include "mspop/num/stats.hpp"
#include "mspop/rng.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace mspop;

TEST_CASE("ode: exponential decay against the closed form") {
    num::OdeRhs rhs = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = -y[0];
    };
    const std::vector<double> y0 = {1.0};
    auto res = num::integrate(rhs, 0.0, y0, 2.0);
    CHECK(res.t == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(res.y[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-9));
    CHECK_FALSE(res.stopped);

    // Backward in time grows the solution.
    auto back = num::integrate(rhs, 0.0, y0, -1.0);
    CHECK(back.y[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-9));
}

TEST_CASE("ode: harmonic oscillator preserves energy over many periods") {
    num::OdeRhs rhs = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = y[1];
        dy[1] = -y[0];
    };
    const std::vector<double> y0 = {1.0, 0.0};
    const double t1 = 10 * 2 * std::numbers::pi;
    auto res = num::integrate(rhs, 0.0, y0, t1);
    const double energy = res.y[0] * res.y[0] + res.y[1] * res.y[1];
    CHECK(energy == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(res.y[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("ode: guard stops at the crossing, state remains inside") {
    num::OdeRhs rhs = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = -y[0];
    };
    const std::vector<double> y0 = {1.0};
    // Stop once y drops below 1/2; exact crossing time is ln 2.
    num::OdeGuard inside = [](double, std::span<const double> y) {
        return y[0] >= 0.5;
    };
    auto res = num::integrate(rhs, 0.0, y0, 5.0, {}, inside);
    CHECK(res.stopped);
    CHECK(res.y[0] >= 0.5);
    CHECK(res.t == doctest::Approx(std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("ode: step budget exhaustion raises NotConverged") {
    num::OdeRhs rhs = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = y[0];
    };
    const std::vector<double> y0 = {1.0};
    num::OdeOptions opt;
    opt.max_steps = 3;
    CHECK_THROWS_AS(num::integrate(rhs, 0.0, y0, 50.0, opt), NotConverged);
}

TEST_CASE("quad: single panel is exact for low-degree polynomials") {
    double err = 0;
    const double v = num::gk15([](double x) { return x * x * x - 2 * x + 1; },
                               0.0, 2.0, err);
    CHECK(v == doctest::Approx(2.0).epsilon(1e-14)); // x^4/4 - x^2 + x at 2
    CHECK(err < 1e-12);
}

TEST_CASE("quad: adaptive refinement resolves an interior peak") {
    // A peak the first panel can see (width comparable to the node
    // spacing) must be chased down by refinement to full tolerance.
    const double w = 0.02;
    auto f = [w](double x) {
        const double z = (x - 3.0) / w;
        return std::exp(-0.5 * z * z);
    };
    auto res = num::integrate(f, 0.0, 10.0);
    const double exact = w * std::sqrt(2 * std::numbers::pi);
    CHECK(res.value == doctest::Approx(exact).epsilon(1e-8));
}

TEST_CASE("quad: breakpoints rescue a spike the nodes would step over") {
    // Width 1e-3 in [0, 10] falls between the panel nodes; plain
    // integration legitimately converges to zero, segmented integration
    // with a breakpoint list bracketing the spike recovers it.
    const double w = 1e-3;
    auto f = [w](double x) {
        const double z = (x - 3.0) / w;
        return std::exp(-0.5 * z * z);
    };
    const double exact = w * std::sqrt(2 * std::numbers::pi);
    auto blind = num::integrate(f, 0.0, 10.0);
    CHECK(std::abs(blind.value) < 1e-10 * exact);
    auto seg = num::integrate_segments(f, {0.0, 3.0 - 8 * w, 3.0 + 8 * w, 10.0});
    CHECK(seg.value == doctest::Approx(exact).epsilon(1e-8));
    CHECK_THROWS_AS(num::integrate_segments(f, {0.0}), OutOfRange);
    CHECK_THROWS_AS(num::integrate_segments(f, {1.0, 0.5, 2.0}), OutOfRange);
}

TEST_CASE("quad: interval budget exhaustion raises NotConverged") {
    num::QuadOptions opt;
    opt.rtol = 1e-15;
    opt.atol = 0;
    opt.max_intervals = 2;
    auto f = [](double x) { return std::sqrt(std::abs(x - 0.3141)); };
    CHECK_THROWS_AS(num::integrate(f, 0.0, 1.0, opt), NotConverged);
}

TEST_CASE("lattice: indexing round trip and node coordinates") {
    num::Lattice lat({num::Axis{0.0, 1.0, 5}, num::Axis{2.0, 4.0, 3}});
    REQUIRE(lat.size() == 15);
    std::vector<std::size_t> idx(2);
    for (std::size_t k = 0; k < lat.size(); ++k) {
        lat.unflatten(k, idx);
        CHECK(lat.flat_index(idx) == k);
    }
    std::vector<double> c(2);
    lat.node_coords(14, c); // last node = both axes at the top
    CHECK(c[0] == doctest::Approx(1.0));
    CHECK(c[1] == doctest::Approx(4.0));
}

TEST_CASE("lattice: multilinear interpolation reproduces affine data exactly") {
    num::Lattice lat({num::Axis{0.0, 1.0, 9}, num::Axis{0.0, 2.0, 9}});
    lat.fill([](std::span<const double> c) { return 3 * c[0] - c[1] + 0.5; });
    const double probe[2] = {0.37, 1.21};
    CHECK(lat.value(probe) == doctest::Approx(3 * 0.37 - 1.21 + 0.5).epsilon(1e-14));
    const double outside[2] = {1.5, 1.0};
    CHECK(lat.value(outside) == 0.0); // zero extension off the box
}

TEST_CASE("lattice: trapezoid weights integrate a constant to the box volume") {
    num::Lattice lat({num::Axis{0.0, 2.0, 7}, num::Axis{1.0, 4.0, 5}});
    lat.fill([](std::span<const double>) { return 1.0; });
    CHECK(lat.integral() == doctest::Approx(6.0).epsilon(1e-14));
    double wsum = 0;
    for (std::size_t k = 0; k < lat.size(); ++k) wsum += lat.node_weight(k);
    CHECK(wsum == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("lattice: degenerate axes are rejected") {
    CHECK_THROWS_AS(num::Lattice({num::Axis{1.0, 1.0, 4}}), OutOfRange);
    CHECK_THROWS_AS(num::Lattice({num::Axis{0.0, 1.0, 1}}), OutOfRange);
}

TEST_CASE("roots: bisection-Newton hybrid lands on cos root") {
    auto f = [](double x) { return std::cos(x); };
    const double r = num::find_root(f, 0.0, 2.0, 1e-14);
    CHECK(r == doctest::Approx(std::numbers::pi / 2).epsilon(1e-13));
    CHECK_THROWS_AS(num::find_root(f, 0.0, 1.0, 1e-14), NoBracket);
}

TEST_CASE("stats: exact line fit and correlation extremes") {
    const std::vector<double> x = {0, 1, 2, 3, 4};
    std::vector<double> y;
    for (double v : x) y.push_back(2.5 * v - 1.0);
    auto fit = num::fit_line(x, y);
    CHECK(fit.slope == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(fit.intercept == doctest::Approx(-1.0).epsilon(1e-13));
    CHECK(num::pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));

    const std::vector<double> v = {1, 2, 3};
    CHECK(num::mean(v) == doctest::Approx(2.0));
    CHECK(num::sample_sd(v) == doctest::Approx(1.0));
}

TEST_CASE("linalg: LU determinant on small matrices") {
    CHECK(num::det_lu({1, 0, 0, 1}, 2) == doctest::Approx(1.0));
    CHECK(num::det_lu({3, 1, 4, 2}, 2) == doctest::Approx(2.0)); // 3*2-1*4
    CHECK(num::det_lu({1, 2, 2, 4}, 2) == doctest::Approx(0.0));
    // Permutation matrix: determinant -1 from the row swap.
    CHECK(num::det_lu({0, 1, 1, 0}, 2) == doctest::Approx(-1.0));
}

TEST_CASE("rng: counter streams are reproducible and well distributed") {
    CounterRng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    CounterRng c(7);
    double sum = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = c.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    // Mean of U(0,1): sd of the average is 1/sqrt(12 n) ~ 0.002.
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));

    CounterRng d(9);
    double esum = 0;
    for (int i = 0; i < n; ++i) esum += d.exponential(2.0);
    CHECK(esum / n == doctest::Approx(0.5).epsilon(0.05));
    CHECK(d.exponential(0.0) == std::numeric_limits<double>::infinity());
}

TEST_CASE("rng: derived and child keys separate streams") {
    const auto k1 = CounterRng::derive_key(1, 0, 0);
    const auto k2 = CounterRng::derive_key(1, 0, 1);
    const auto k3 = CounterRng::derive_key(1, 1, 0);
    const auto k4 = CounterRng::derive_key(2, 0, 0);
    CHECK(k1 != k2);
    CHECK(k1 != k3);
    CHECK(k1 != k4);
    CHECK(k2 != k3);

    CounterRng parent(k1);
    CHECK(parent.child_key(0) != parent.child_key(1));
    CHECK(parent.child_key(0) != k1);
}
