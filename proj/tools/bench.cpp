// Timings of the parallel kernels against their serial reference paths.
// The serial path is the ground truth the tests trust; this target shows
// the two produce identical numbers and reports the speedup.

#include "mspop/cohort.hpp"
#include "mspop/mc.hpp"
#include "mspop/parallel.hpp"
#include "mspop/renewal.hpp"
#include "mspop/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

using namespace mspop;

namespace {

double seconds(const std::function<void()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

void report(const char* name, double serial_s, double parallel_s, bool same) {
    std::printf("%-28s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx   %s\n",
                name, serial_s * 1e3, parallel_s * 1e3,
                parallel_s > 0 ? serial_s / parallel_s : 0.0,
                same ? "results identical" : "RESULTS DIFFER");
}

ModelSpec reference_spec(double mu_d) {
    ModelSpec s;
    s.m = 2;
    s.x_m = 0.5;
    s.x_M = 2.0;
    s.alpha = std::log(2.0);
    s.mu_d = mu_d;
    s.division.kind = DivisionKind::doubling;
    s.hazard.kind = HazardKind::dirac;
    return s;
}

} // namespace

int main() {
    std::printf("threads available: %d (OpenMP %s)\n\n", max_threads(),
                openmp_enabled() ? "enabled" : "disabled");

    // Stochastic replicates, the embarrassingly parallel axis.
    {
        const Model model = Model::validate(reference_spec(0.1));
        McInit init;
        init.kind = McInit::Kind::stationary;
        init.count = 4000;
        McOptions mo;
        std::vector<Trajectory> a, b;
        const double ts = seconds([&] {
            mo.exec = Exec::serial;
            a = simulate(model, init, 6.0, 0.25, 99, 16, mo);
        });
        const double tp = seconds([&] {
            mo.exec = Exec::parallel;
            b = simulate(model, init, 6.0, 0.25, 99, 16, mo);
        });
        bool same = a.size() == b.size();
        for (std::size_t i = 0; same && i < a.size(); ++i)
            same = a[i].counts == b[i].counts && a[i].births == b[i].births &&
                   a[i].deaths == b[i].deaths;
        report("mc 16 replicates", ts, tp, same);
    }

    // Propagator composition over a sample cloud.
    {
        const Model model = Model::validate(reference_spec(0.0));
        const InitialCohort phi{make_smooth_cohort(model)};
        SampleBox box;
        box.margin = 0.02;
        SemigroupReport a, b;
        const double ts = seconds([&] {
            a = verify_semigroup(model, phi, 0.4, 0.3, 20000, 7, box,
                                 {0.1, 0.01, 0.001}, Exec::serial);
        });
        const double tp = seconds([&] {
            b = verify_semigroup(model, phi, 0.4, 0.3, 20000, 7, box,
                                 {0.1, 0.01, 0.001}, Exec::parallel);
        });
        report("semigroup 20k points", ts, tp,
               a.max_deviation == b.max_deviation && a.l1 == b.l1);
    }

    // Grid renewal series (Volterra sweep per term).
    {
        ModelSpec s;
        s.m = 0;
        s.x_m = 0.5;
        s.x_M = 4.0;
        s.alpha = 1.0;
        s.division.kind = DivisionKind::smooth_hazard;
        s.hazard.kind = HazardKind::constant;
        s.hazard.b0 = 2.0;
        const Model model = Model::validate(s);

        GridCohort phi;
        phi.density = num::Lattice({num::Axis{0.0, 0.5, 9},
                                    num::Axis{0.5, 4.0, 71}});
        phi.density.fill([](std::span<const double> c) {
            const double x = c[1];
            return (x >= 0.6 && x <= 3.6) ? (3.6 - x) * 4.0 / 9.0 : 0.0;
        });
        const double horizon = contraction_window(model, InitialCohort{phi}, 0.8);

        RenewalOptions ro;
        ro.backend = RenewalBackend::grid;
        ro.time_nodes = 257;
        ro.size_nodes = 129;
        RenewalSolution a, b;
        const double ts = seconds([&] {
            ro.exec = Exec::serial;
            a = solve_series(model, InitialCohort{phi}, horizon, ro);
        });
        const double tp = seconds([&] {
            ro.exec = Exec::parallel;
            b = solve_series(model, InitialCohort{phi}, horizon, ro);
        });
        report("renewal grid 257x129", ts, tp,
               a.term_norms == b.term_norms);
    }

    return 0;
}
