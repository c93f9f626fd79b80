#include "mspop/mc.hpp"

#include "mspop/characteristics.hpp"
#include "mspop/errors.hpp"
#include "mspop/num/stats.hpp"
#include "mspop/rng.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>

namespace mspop {

namespace {

constexpr double INF = std::numeric_limits<double>::infinity();

// An agent waiting to be processed.  The whole population can be handled
// one agent at a time because individuals do not interact: each one's
// fate depends only on its own entry data and its private random stream.
struct Pending {
    double t0 = 0;   // simulation time at entry
    double age0 = 0; // age at entry
    StateVector state;
    double birth_size = 0;
    CounterRng rng;
};

double size_at_age(const Model& model, double birth_size, double age) {
    // Growth parks at the upper wall instead of leaving the domain.
    return std::min(birth_size * std::exp(model.alpha() * age), model.x_M());
}

void bin_into(Histogram& h, double v) {
    if (v < h.bins.lo) {
        h.below += 1;
        return;
    }
    if (v >= h.bins.hi) {
        h.above += 1;
        return;
    }
    double u = (v - h.bins.lo) / (h.bins.hi - h.bins.lo) *
               static_cast<double>(h.bins.n);
    std::size_t i = std::min(static_cast<std::size_t>(u), h.bins.n - 1);
    h.counts[i] += 1;
}

Histogram make_histogram(const BinSpec& spec) {
    Histogram h;
    h.bins = spec;
    h.counts.assign(spec.n, 0.0);
    return h;
}

Pending make_initial(const Model& model, const McInit& init, std::size_t i,
                     CounterRng rng) {
    Pending p{0, 0, {}, 0, rng};
    switch (init.kind) {
    case McInit::Kind::newborn:
        p.age0 = 0;
        p.birth_size = init.birth_size;
        p.state.size = init.birth_size;
        p.state.aux.assign(static_cast<std::size_t>(model.m()), 0.0);
        break;
    case McInit::Kind::stationary: {
        // Stable age profile of a renewing population: density
        // proportional to 2^{-a/a*} on [0, a*), independent of mu_d.
        double a_star = division_age(model, init.birth_size);
        if (!std::isfinite(a_star))
            throw OutOfRange("stationary start needs a dividing population");
        double k = std::log(2.0) / a_star;
        double a = -std::log1p(-0.5 * p.rng.uniform()) / k;
        p.age0 = a;
        p.birth_size = init.birth_size;
        p.state.size = size_at_age(model, init.birth_size, a);
        // Auxiliary coordinates sit on the invariant family: newborn value
        // a* under halving, plus the sampled age.
        double aux0 = model.spec().daughter_aux == DaughterAux::halve
                          ? a_star
                          : 0.0;
        p.state.aux.assign(static_cast<std::size_t>(model.m()), aux0 + a);
        break;
    }
    case McInit::Kind::agents: {
        const Agent& a = init.agents[i];
        p.age0 = a.age;
        p.state = a.state;
        p.birth_size =
            a.birth_size > 0
                ? a.birth_size
                : a.state.size * std::exp(-model.alpha() * a.age);
        break;
    }
    }
    return p;
}

Trajectory run_replicate(const Model& model, const McInit& init, double t_end,
                         double dt, std::uint64_t seed, std::uint64_t rep,
                         const McOptions& opt) {
    Trajectory tr;
    tr.seed = seed;
    tr.replicate = rep;
    tr.dt = dt;
    const std::size_t K =
        static_cast<std::size_t>(std::floor(t_end / dt + 1e-9));
    tr.times.resize(K + 1);
    for (std::size_t k = 0; k <= K; ++k)
        tr.times[k] = dt * static_cast<double>(k);
    std::vector<double> diff(K + 2, 0.0);
    tr.births.assign(K + 1, 0.0);
    tr.deaths.assign(K + 1, 0.0);

    BinSpec size_bins = opt.size_bins;
    if (size_bins.lo == size_bins.hi) {
        size_bins.lo = model.x_m();
        size_bins.hi = model.x_M() * (1 + 1e-12); // keep the wall in range
    }
    for (double t : opt.hist_times) {
        CensusHistograms h;
        h.time = t;
        h.age = make_histogram(opt.age_bins);
        h.size = make_histogram(size_bins);
        for (int i = 0; i < model.m(); ++i)
            h.aux.push_back(make_histogram(opt.aux_bins));
        tr.histograms.push_back(std::move(h));
    }

    const bool deterministic = model.deterministic_division();
    const double bbar = deterministic ? 0.0 : model.hazard_bound();
    const double table_end = model.spec().hazard.kind == HazardKind::table
                                 ? model.spec().hazard.ages.back()
                                 : INF;
    // Event bin k covers (t_{k-1}, t_k]; the instant 0 lands in bin 0.
    auto event_bin = [&](double t) {
        double x = std::ceil(t / dt - 1e-9);
        return static_cast<std::size_t>(std::clamp(x, 0.0, static_cast<double>(K)));
    };
    auto first_tick_at_or_after = [&](double t) {
        double x = std::ceil(t / dt - 1e-9);
        return static_cast<std::size_t>(
            std::clamp(x, 0.0, static_cast<double>(K + 1)));
    };

    std::vector<Pending> stack;
    stack.reserve(256);
    const std::size_t n0 =
        init.kind == McInit::Kind::agents ? init.agents.size() : init.count;
    for (std::size_t i = 0; i < n0; ++i)
        stack.push_back(make_initial(
            model, init, i, CounterRng(CounterRng::derive_key(seed, rep, i))));

    while (!stack.empty()) {
        Pending a = std::move(stack.back());
        stack.pop_back();
        if (++tr.agents_processed > opt.max_agents)
            throw PopulationExplosion(
                "simulate: agent budget exhausted; the population outgrew "
                "max_agents");

        const double b = a.birth_size;
        const double t_death = a.t0 + a.rng.exponential(model.mu_d());

        double t_div = INF;
        double div_age = 0;
        std::optional<DivisionEvent> ev;
        if (deterministic) {
            ev = division_event(model, b);
            if (ev && ev->age >= a.age0) {
                div_age = ev->age;
                t_div = a.t0 + (div_age - a.age0);
            }
        } else if (bbar > 0) {
            // Thinning against the hazard's supremum.  The rate vanishes
            // below the reproductive region, so skip straight to it.
            double age = a.age0;
            if (size_at_age(model, b, age) <= model.x_M() / 2)
                age = std::max(age,
                               std::log(model.x_M() / (2 * b)) / model.alpha());
            const double t_stop = std::min(t_death, t_end);
            for (;;) {
                age += a.rng.exponential(bbar);
                double t_cand = a.t0 + (age - a.age0);
                if (t_cand > t_stop || age > table_end) break;
                if (model.region_of_size(size_at_age(model, b, age)) !=
                    Region::reproductive)
                    continue;
                if (a.rng.uniform() * bbar <= model.hazard_rate(age)) {
                    t_div = t_cand;
                    div_age = age;
                    break;
                }
            }
        }

        const bool censored = t_death > t_end && t_div > t_end;
        const double t_final = std::min({t_death, t_div, t_end});

        // Alive on [t0, t_final); censoring keeps the final tick inclusive.
        std::size_t k_lo = first_tick_at_or_after(a.t0);
        std::size_t k_hi = censored ? K + 1 : first_tick_at_or_after(t_final);
        if (k_lo < k_hi && k_lo <= K) {
            diff[k_lo] += 1;
            diff[k_hi] -= 1;
        }

        if (t_div <= t_death && t_div <= t_end) {
            tr.births[event_bin(t_div)] += 2;
            StateVector mother;
            mother.size = deterministic ? ev->size
                                        : size_at_age(model, b, div_age);
            mother.aux = a.state.aux;
            for (auto& c : mother.aux) c += div_age - a.age0;
            StateVector d = model.daughter_state(mother);
            for (std::uint64_t slot = 0; slot < 2; ++slot)
                stack.push_back(Pending{t_div, 0.0, d, d.size,
                                        CounterRng(a.rng.child_key(slot))});
        } else if (t_death <= t_end) {
            tr.deaths[event_bin(t_death)] += 1;
        }

        for (auto& h : tr.histograms) {
            const double u = h.time;
            bool alive =
                u >= a.t0 && (u < t_final || (censored && u <= t_end));
            if (!alive) continue;
            double age_u = a.age0 + (u - a.t0);
            bin_into(h.age, age_u);
            bin_into(h.size, size_at_age(model, b, age_u));
            for (std::size_t i = 0; i < h.aux.size(); ++i)
                bin_into(h.aux[i], a.state.aux[i] + (u - a.t0));
        }
    }

    tr.counts.resize(K + 1);
    double running = 0;
    for (std::size_t k = 0; k <= K; ++k) {
        running += diff[k];
        tr.counts[k] = running;
    }
    return tr;
}

} // namespace

std::vector<Trajectory> simulate(const Model& model, const McInit& init,
                                 double t_end, double dt_census,
                                 std::uint64_t seed, std::size_t replicates,
                                 const McOptions& opt) {
    if (!(t_end > 0)) throw OutOfRange("simulate: t_end must be positive");
    if (!(dt_census > 0) || dt_census > t_end)
        throw OutOfRange("simulate: census step must lie in (0, t_end]");
    if (replicates == 0)
        throw OutOfRange("simulate: need at least one replicate");
    if (!model.closed_form())
        throw OutOfRange("the agent oracle needs the declarative velocity "
                         "fields");
    if (init.kind == McInit::Kind::agents)
        for (const auto& a : init.agents) model.check_state(a.state);

    std::vector<Trajectory> out(replicates);
    std::vector<std::exception_ptr> errors(replicates);
    for_each_index(
        static_cast<std::ptrdiff_t>(replicates), opt.exec,
        [&](std::ptrdiff_t r) {
            try {
                out[static_cast<std::size_t>(r)] = run_replicate(
                    model, init, t_end, dt_census, seed,
                    static_cast<std::uint64_t>(r), opt);
            } catch (...) {
                errors[static_cast<std::size_t>(r)] =
                    std::current_exception();
            }
        });
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

GrowthEstimate estimate_growth_rate(const std::vector<Trajectory>& trajs,
                                    double t_lo, double t_hi) {
    std::vector<double> slopes;
    for (const auto& tr : trajs) {
        std::vector<double> xs, ys;
        bool usable = true;
        for (std::size_t k = 0; k < tr.times.size(); ++k) {
            double t = tr.times[k];
            if (t < t_lo - 1e-9 || t > t_hi + 1e-9) continue;
            if (!(tr.counts[k] > 0)) {
                usable = false;
                break;
            }
            xs.push_back(t);
            ys.push_back(std::log(tr.counts[k]));
        }
        if (usable && xs.size() >= 3)
            slopes.push_back(num::fit_line(xs, ys).slope);
    }
    if (slopes.size() < 2)
        throw InsufficientData("estimate_growth_rate: need two replicates "
                               "with positive counts across the window");
    GrowthEstimate est;
    est.replicates_used = slopes.size();
    est.lambda_hat = num::mean(slopes);
    est.stderr_ = num::sample_sd(slopes) /
                  std::sqrt(static_cast<double>(slopes.size()));
    return est;
}

const CensusHistograms& census_distribution(const Trajectory& traj, double t) {
    for (const auto& h : traj.histograms)
        if (std::abs(h.time - t) <= 1e-9 * std::max(1.0, std::abs(t)))
            return h;
    throw TimeNotSampled("census_distribution: no histogram at this time");
}

double l1_shape_distance(const Histogram& a, const Histogram& b) {
    if (a.bins.n != b.bins.n || a.bins.lo != b.bins.lo ||
        a.bins.hi != b.bins.hi)
        throw OutOfRange("l1_shape_distance: histograms use different bins");
    double ta = a.in_range(), tb = b.in_range();
    if (ta <= 0 || tb <= 0)
        throw InsufficientData("l1_shape_distance: empty histogram");
    double d = 0;
    for (std::size_t i = 0; i < a.counts.size(); ++i)
        d += std::abs(a.counts[i] / ta - b.counts[i] / tb);
    return d;
}

} // namespace mspop
