#pragma once

#include "mspop/model.hpp"
#include "mspop/parallel.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mspop {

// One simulated individual.  birth_size pins the deterministic division
// target; 0 means "derive from age and state".
struct Agent {
    double age = 0;
    StateVector state;
    double birth_size = 0;
};

struct BinSpec {
    double lo = 0;
    double hi = 1;
    std::size_t n = 64;
};

struct Histogram {
    BinSpec bins{};
    std::vector<double> counts;
    double below = 0, above = 0; // out-of-range tallies

    double total() const {
        double s = below + above;
        for (double c : counts) s += c;
        return s;
    }
    double in_range() const {
        double s = 0;
        for (double c : counts) s += c;
        return s;
    }
};

struct CensusHistograms {
    double time = 0;
    Histogram age;
    Histogram size;
    std::vector<Histogram> aux;
};

struct Trajectory {
    std::uint64_t seed = 0;
    std::uint64_t replicate = 0;
    double dt = 0;
    std::vector<double> times;  // census ticks, 0, dt, ..., t_end
    std::vector<double> counts; // alive at the tick, events at the tick done
    std::vector<double> births; // division events inside (t_{k-1}, t_k]
    std::vector<double> deaths;
    std::vector<CensusHistograms> histograms;
    std::size_t agents_processed = 0;
};

struct McInit {
    enum class Kind {
        newborn,    // count agents of age 0 at birth_size
        stationary, // ages from the stable exponential age profile
        agents      // the explicit list below
    };
    Kind kind = Kind::newborn;
    std::size_t count = 1000;
    double birth_size = 1.0;
    std::vector<Agent> agents;
};

struct McOptions {
    std::vector<double> hist_times; // census snapshots to histogram
    BinSpec age_bins{0, 4, 64};
    BinSpec size_bins{0, 0, 64}; // lo == hi: use [x_m, x_M]
    BinSpec aux_bins{0, 4, 64};
    std::size_t max_agents = 10'000'000; // per replicate, processed total
    Exec exec = Exec::parallel;
};

// Event-driven agent simulation: exact division/death event times, no time
// discretization.  Each agent owns a counter-based random stream derived
// from (seed, replicate, lineage), so trajectories are reproducible
// bit-for-bit regardless of scheduling.  Requires the declarative
// velocity fields.
std::vector<Trajectory> simulate(const Model& model, const McInit& init,
                                 double t_end, double dt_census,
                                 std::uint64_t seed, std::size_t replicates,
                                 const McOptions& opt = {});

struct GrowthEstimate {
    double lambda_hat = 0;
    double stderr_ = 0;
    std::size_t replicates_used = 0;
};

// Least-squares slope of log(count) over ticks in [t_lo, t_hi], one fit
// per replicate, averaged with the standard error of the mean.
GrowthEstimate estimate_growth_rate(const std::vector<Trajectory>& trajs,
                                    double t_lo, double t_hi);

// Histogram snapshot nearest the requested time (within half a tick).
const CensusHistograms& census_distribution(const Trajectory& traj, double t);

// L1 distance between the two histograms normalized to unit in-range mass;
// 0 for identical shapes, up to 2 for disjoint ones.
double l1_shape_distance(const Histogram& a, const Histogram& b);

} // namespace mspop
