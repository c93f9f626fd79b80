#pragma once

#include "mspop/model.hpp"
#include "mspop/population.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mspop {

// Initial-cohort description as it appears in a config file.  `smooth` is
// the built-in separable bump scaled to the model box; atoms and grids are
// given explicitly.
struct CohortDescriptor {
    std::string kind = "atoms"; // atoms | grid | smooth
    AtomCohort atoms;
    GridCohort grid;
};

InitialCohort realize_cohort(const CohortDescriptor& desc, const Model& model);

struct NumericsConfig {
    double flow_rtol = 1e-10;
    double quad_rtol = 1e-10;
    double dt = 0.05;             // output / census step
    std::size_t time_nodes = 129; // renewal grid resolution
    std::size_t size_nodes = 65;
    std::size_t eigen_nodes = 129; // eigenfunction resolution
    double tol = 1e-10;
    int max_terms = 64;
};

struct McConfig {
    int replicates = 8;
    std::uint64_t seed = 1;
    std::int64_t agent_cap = 10000000;
    int initial_agents = 1000;
    std::string init = "newborn"; // newborn | stationary
    double birth_size = 1.0;
};

struct OutputConfig {
    std::string directory = ".";
    std::vector<std::string> formats = {"csv", "json"};
};

struct RunConfig {
    int schema = 1;
    ModelSpec model;
    CohortDescriptor initial_cohort;
    double t_end = 2.0;
    double horizon = 0; // renewal horizon; 0 derives one from the model
    NumericsConfig numerics;
    McConfig mc;
    OutputConfig output;
    std::uint64_t fingerprint = 0; // hash of the canonical serialization
};

// Strict parse: schema must equal 1, unknown keys are rejected at every
// level, malformed documents report the parse location.  Throws
// ConfigError; model-level violations surface as ValidationError when the
// model is later validated.
RunConfig parse_config(const std::string& json_text,
                       const std::string& origin = "<string>");
RunConfig load_config(const std::string& path); // throws IoError / ConfigError

// Canonical re-serialization (sorted keys, defaults materialized); two
// configs with equal canonical forms produce bit-identical runs.
std::string canonical_json(const RunConfig& cfg);

std::uint64_t fnv1a(std::string_view bytes);

// manifest.json: config hash, seeds, versions, emitted files.
void write_manifest(const RunConfig& cfg, const std::string& directory,
                    const std::vector<std::string>& outputs,
                    std::uint64_t seed, int threads);

} // namespace mspop
