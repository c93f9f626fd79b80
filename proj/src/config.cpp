#include "mspop/config.hpp"

#include "mspop/errors.hpp"
#include "mspop/parallel.hpp"
#include "mspop/verify.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace mspop {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
}

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) { known = true; break; }
        if (!known) fail(where, "unknown key '" + it.key() + "'");
    }
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) fail(where, "expected a number");
    return v.get<double>();
}

double num_or(const json& obj, const std::string& where, const char* key,
              double dflt) {
    const json* v = find(obj, key);
    return v ? as_number(*v, where + "." + key) : dflt;
}

std::int64_t int_or(const json& obj, const std::string& where, const char* key,
                    std::int64_t dflt) {
    const json* v = find(obj, key);
    if (!v) return dflt;
    if (!v->is_number_integer())
        fail(where + "." + key, "expected an integer");
    return v->get<std::int64_t>();
}

std::string str_or(const json& obj, const std::string& where, const char* key,
                   const std::string& dflt) {
    const json* v = find(obj, key);
    if (!v) return dflt;
    if (!v->is_string()) fail(where + "." + key, "expected a string");
    return v->get<std::string>();
}

std::vector<double> number_list(const json& v, const std::string& where) {
    if (!v.is_array()) fail(where, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) out.push_back(as_number(e, where));
    return out;
}

DivisionKind parse_division_kind(const std::string& s, const std::string& where) {
    if (s == "doubling") return DivisionKind::doubling;
    if (s == "adder") return DivisionKind::adder;
    if (s == "smooth_hazard") return DivisionKind::smooth_hazard;
    fail(where, "unknown division kind '" + s + "'");
}

HazardKind parse_hazard_kind(const std::string& s, const std::string& where) {
    if (s == "dirac") return HazardKind::dirac;
    if (s == "constant") return HazardKind::constant;
    if (s == "table") return HazardKind::table;
    fail(where, "unknown hazard kind '" + s + "'");
}

const char* division_kind_name(DivisionKind k) {
    switch (k) {
        case DivisionKind::doubling: return "doubling";
        case DivisionKind::adder: return "adder";
        case DivisionKind::smooth_hazard: return "smooth_hazard";
    }
    return "?";
}

const char* hazard_kind_name(HazardKind k) {
    switch (k) {
        case HazardKind::dirac: return "dirac";
        case HazardKind::constant: return "constant";
        case HazardKind::table: return "table";
    }
    return "?";
}

ModelSpec parse_model(const json& obj) {
    if (!obj.is_object()) fail("model", "expected an object");
    reject_unknown(obj, "model",
                   {"m", "x_m", "x_M", "alpha", "mu_d", "division", "hazard",
                    "daughter_aux"});
    ModelSpec spec;
    spec.m = static_cast<int>(int_or(obj, "model", "m", spec.m));
    spec.x_m = num_or(obj, "model", "x_m", spec.x_m);
    spec.x_M = num_or(obj, "model", "x_M", spec.x_M);
    spec.alpha = num_or(obj, "model", "alpha", spec.alpha);
    spec.mu_d = num_or(obj, "model", "mu_d", spec.mu_d);

    if (const json* d = find(obj, "division")) {
        if (!d->is_object()) fail("model.division", "expected an object");
        reject_unknown(*d, "model.division", {"kind", "delta_l"});
        spec.division.kind = parse_division_kind(
            str_or(*d, "model.division", "kind", "doubling"), "model.division.kind");
        spec.division.delta_l = num_or(*d, "model.division", "delta_l", 0.0);
    }
    if (const json* h = find(obj, "hazard")) {
        if (!h->is_object()) fail("model.hazard", "expected an object");
        reject_unknown(*h, "model.hazard", {"kind", "a_star", "b0", "ages", "rates"});
        spec.hazard.kind = parse_hazard_kind(
            str_or(*h, "model.hazard", "kind", "dirac"), "model.hazard.kind");
        spec.hazard.a_star = num_or(*h, "model.hazard", "a_star", 0.0);
        spec.hazard.b0 = num_or(*h, "model.hazard", "b0", 0.0);
        if (const json* a = find(*h, "ages"))
            spec.hazard.ages = number_list(*a, "model.hazard.ages");
        if (const json* r = find(*h, "rates"))
            spec.hazard.rates = number_list(*r, "model.hazard.rates");
    }
    const std::string aux = str_or(obj, "model", "daughter_aux", "halve");
    if (aux == "halve") spec.daughter_aux = DaughterAux::halve;
    else if (aux == "preserve") spec.daughter_aux = DaughterAux::preserve;
    else fail("model.daughter_aux", "expected 'halve' or 'preserve'");
    return spec;
}

CohortDescriptor parse_cohort(const json& obj) {
    if (!obj.is_object()) fail("initial_cohort", "expected an object");
    reject_unknown(obj, "initial_cohort", {"kind", "atoms", "axes", "values"});
    CohortDescriptor desc;
    desc.kind = str_or(obj, "initial_cohort", "kind", "atoms");
    if (desc.kind == "atoms") {
        const json* arr = find(obj, "atoms");
        if (!arr || !arr->is_array())
            fail("initial_cohort.atoms", "expected an array");
        for (std::size_t i = 0; i < arr->size(); ++i) {
            const json& a = (*arr)[i];
            const std::string where = "initial_cohort.atoms[" + std::to_string(i) + "]";
            if (!a.is_object()) fail(where, "expected an object");
            reject_unknown(a, where, {"age", "size", "aux", "weight"});
            InitialAtom atom;
            atom.age = num_or(a, where, "age", 0.0);
            atom.state.size = num_or(a, where, "size", 1.0);
            if (const json* x = find(a, "aux"))
                atom.state.aux = number_list(*x, where + ".aux");
            atom.weight = num_or(a, where, "weight", 1.0);
            desc.atoms.atoms.push_back(std::move(atom));
        }
    } else if (desc.kind == "grid") {
        const json* axes = find(obj, "axes");
        const json* values = find(obj, "values");
        if (!axes || !axes->is_array() || axes->size() < 2)
            fail("initial_cohort.axes", "expected at least [age, size] axes");
        std::vector<num::Axis> ax;
        for (std::size_t i = 0; i < axes->size(); ++i) {
            const json& a = (*axes)[i];
            const std::string where = "initial_cohort.axes[" + std::to_string(i) + "]";
            if (!a.is_object()) fail(where, "expected an object");
            reject_unknown(a, where, {"lo", "hi", "n"});
            num::Axis axis;
            axis.lo = num_or(a, where, "lo", 0.0);
            axis.hi = num_or(a, where, "hi", 1.0);
            axis.n = static_cast<std::size_t>(int_or(a, where, "n", 2));
            if (axis.n < 2 || !(axis.hi > axis.lo))
                fail(where, "need hi > lo and n >= 2");
            ax.push_back(axis);
        }
        desc.grid.density = num::Lattice(std::move(ax));
        if (!values || !values->is_array())
            fail("initial_cohort.values", "expected an array");
        if (values->size() != desc.grid.density.size())
            fail("initial_cohort.values",
                 "expected " + std::to_string(desc.grid.density.size()) +
                     " node values, got " + std::to_string(values->size()));
        auto dst = desc.grid.density.values();
        for (std::size_t i = 0; i < values->size(); ++i)
            dst[i] = as_number((*values)[i], "initial_cohort.values");
    } else if (desc.kind != "smooth") {
        fail("initial_cohort.kind", "expected 'atoms', 'grid' or 'smooth'");
    }
    return desc;
}

} // namespace

InitialCohort realize_cohort(const CohortDescriptor& desc, const Model& model) {
    if (desc.kind == "atoms") {
        for (const auto& a : desc.atoms.atoms)
            if (static_cast<int>(a.state.aux.size()) != model.m())
                throw ConfigError(
                    "initial_cohort: atom has " + std::to_string(a.state.aux.size()) +
                    " auxiliary coordinates, model expects " + std::to_string(model.m()));
        return desc.atoms;
    }
    if (desc.kind == "grid") {
        if (desc.grid.density.dims() != 2 + static_cast<std::size_t>(model.m()))
            throw ConfigError("initial_cohort: grid has " +
                              std::to_string(desc.grid.density.dims()) +
                              " axes, model expects " +
                              std::to_string(2 + model.m()));
        return desc.grid;
    }
    return make_smooth_cohort(model);
}

RunConfig parse_config(const std::string& json_text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        // e.byte is the offset where parsing stopped; surface it verbatim.
        throw ConfigError(origin + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(origin + ": top level must be an object");
    reject_unknown(doc, "config",
                   {"schema", "model", "initial_cohort", "t_end", "horizon",
                    "numerics", "mc", "output"});

    RunConfig cfg;
    const json* schema = find(doc, "schema");
    if (!schema) throw ConfigError(origin + ": missing 'schema'");
    if (!schema->is_number_integer() || schema->get<int>() != 1)
        throw ConfigError(origin + ": unsupported schema (expected 1)");
    cfg.schema = 1;

    const json* model = find(doc, "model");
    if (!model) throw ConfigError(origin + ": missing 'model'");
    cfg.model = parse_model(*model);

    if (const json* c = find(doc, "initial_cohort")) cfg.initial_cohort = parse_cohort(*c);
    cfg.t_end = num_or(doc, "config", "t_end", cfg.t_end);
    cfg.horizon = num_or(doc, "config", "horizon", cfg.horizon);

    if (const json* n = find(doc, "numerics")) {
        if (!n->is_object()) fail("numerics", "expected an object");
        reject_unknown(*n, "numerics",
                       {"flow_rtol", "quad_rtol", "dt", "time_nodes",
                        "size_nodes", "eigen_nodes", "tol", "max_terms"});
        NumericsConfig& x = cfg.numerics;
        x.flow_rtol = num_or(*n, "numerics", "flow_rtol", x.flow_rtol);
        x.quad_rtol = num_or(*n, "numerics", "quad_rtol", x.quad_rtol);
        x.dt = num_or(*n, "numerics", "dt", x.dt);
        x.time_nodes = static_cast<std::size_t>(
            int_or(*n, "numerics", "time_nodes", static_cast<std::int64_t>(x.time_nodes)));
        x.size_nodes = static_cast<std::size_t>(
            int_or(*n, "numerics", "size_nodes", static_cast<std::int64_t>(x.size_nodes)));
        x.eigen_nodes = static_cast<std::size_t>(
            int_or(*n, "numerics", "eigen_nodes", static_cast<std::int64_t>(x.eigen_nodes)));
        x.tol = num_or(*n, "numerics", "tol", x.tol);
        x.max_terms = static_cast<int>(int_or(*n, "numerics", "max_terms", x.max_terms));
        if (x.flow_rtol <= 0 || x.quad_rtol <= 0 || x.tol <= 0)
            fail("numerics", "tolerances must be positive");
        if (x.dt <= 0) fail("numerics.dt", "must be positive");
        if (x.time_nodes < 2 || x.size_nodes < 2 || x.eigen_nodes < 2)
            fail("numerics", "grid resolutions must be at least 2");
        if (x.max_terms < 1) fail("numerics.max_terms", "must be at least 1");
    }

    if (const json* m = find(doc, "mc")) {
        if (!m->is_object()) fail("mc", "expected an object");
        reject_unknown(*m, "mc",
                       {"replicates", "seed", "agent_cap", "initial_agents",
                        "init", "birth_size"});
        McConfig& x = cfg.mc;
        x.replicates = static_cast<int>(int_or(*m, "mc", "replicates", x.replicates));
        x.seed = static_cast<std::uint64_t>(int_or(*m, "mc", "seed",
                                                   static_cast<std::int64_t>(x.seed)));
        x.agent_cap = int_or(*m, "mc", "agent_cap", x.agent_cap);
        x.initial_agents = static_cast<int>(int_or(*m, "mc", "initial_agents", x.initial_agents));
        x.init = str_or(*m, "mc", "init", x.init);
        x.birth_size = num_or(*m, "mc", "birth_size", x.birth_size);
        if (x.replicates < 1) fail("mc.replicates", "must be at least 1");
        if (x.initial_agents < 1) fail("mc.initial_agents", "must be at least 1");
        if (x.agent_cap < 1) fail("mc.agent_cap", "must be at least 1");
        if (x.init != "newborn" && x.init != "stationary")
            fail("mc.init", "expected 'newborn' or 'stationary'");
    }

    if (const json* o = find(doc, "output")) {
        if (!o->is_object()) fail("output", "expected an object");
        reject_unknown(*o, "output", {"directory", "formats"});
        cfg.output.directory = str_or(*o, "output", "directory", cfg.output.directory);
        if (const json* f = find(*o, "formats")) {
            if (!f->is_array()) fail("output.formats", "expected an array");
            cfg.output.formats.clear();
            for (const auto& e : *f) {
                if (!e.is_string()) fail("output.formats", "expected strings");
                const std::string s = e.get<std::string>();
                if (s != "csv" && s != "json")
                    fail("output.formats", "unknown format '" + s + "'");
                cfg.output.formats.push_back(s);
            }
        }
    }

    cfg.fingerprint = fnv1a(canonical_json(cfg));
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

std::string canonical_json(const RunConfig& cfg) {
    json doc;
    doc["schema"] = cfg.schema;

    json model;
    model["m"] = cfg.model.m;
    model["x_m"] = cfg.model.x_m;
    model["x_M"] = cfg.model.x_M;
    model["alpha"] = cfg.model.alpha;
    model["mu_d"] = cfg.model.mu_d;
    model["division"] = {{"kind", division_kind_name(cfg.model.division.kind)},
                         {"delta_l", cfg.model.division.delta_l}};
    model["hazard"] = {{"kind", hazard_kind_name(cfg.model.hazard.kind)},
                       {"a_star", cfg.model.hazard.a_star},
                       {"b0", cfg.model.hazard.b0},
                       {"ages", cfg.model.hazard.ages},
                       {"rates", cfg.model.hazard.rates}};
    model["daughter_aux"] =
        cfg.model.daughter_aux == DaughterAux::halve ? "halve" : "preserve";
    doc["model"] = std::move(model);

    json cohort;
    cohort["kind"] = cfg.initial_cohort.kind;
    if (cfg.initial_cohort.kind == "atoms") {
        json atoms = json::array();
        for (const auto& a : cfg.initial_cohort.atoms.atoms)
            atoms.push_back({{"age", a.age},
                             {"size", a.state.size},
                             {"aux", a.state.aux},
                             {"weight", a.weight}});
        cohort["atoms"] = std::move(atoms);
    } else if (cfg.initial_cohort.kind == "grid") {
        const num::Lattice& lat = cfg.initial_cohort.grid.density;
        json axes = json::array();
        for (std::size_t d = 0; d < lat.dims(); ++d)
            axes.push_back({{"lo", lat.axis(d).lo},
                            {"hi", lat.axis(d).hi},
                            {"n", lat.axis(d).n}});
        cohort["axes"] = std::move(axes);
        cohort["values"] = std::vector<double>(lat.values().begin(),
                                               lat.values().end());
    }
    doc["initial_cohort"] = std::move(cohort);

    doc["t_end"] = cfg.t_end;
    doc["horizon"] = cfg.horizon;
    doc["numerics"] = {{"flow_rtol", cfg.numerics.flow_rtol},
                       {"quad_rtol", cfg.numerics.quad_rtol},
                       {"dt", cfg.numerics.dt},
                       {"time_nodes", cfg.numerics.time_nodes},
                       {"size_nodes", cfg.numerics.size_nodes},
                       {"eigen_nodes", cfg.numerics.eigen_nodes},
                       {"tol", cfg.numerics.tol},
                       {"max_terms", cfg.numerics.max_terms}};
    doc["mc"] = {{"replicates", cfg.mc.replicates},
                 {"seed", cfg.mc.seed},
                 {"agent_cap", cfg.mc.agent_cap},
                 {"initial_agents", cfg.mc.initial_agents},
                 {"init", cfg.mc.init},
                 {"birth_size", cfg.mc.birth_size}};
    doc["output"] = {{"directory", cfg.output.directory},
                     {"formats", cfg.output.formats}};
    return doc.dump();
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

void write_manifest(const RunConfig& cfg, const std::string& directory,
                    const std::vector<std::string>& outputs,
                    std::uint64_t seed, int threads) {
    json doc;
    doc["schema"] = cfg.schema;
    char hex[19];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(cfg.fingerprint));
    doc["config_fingerprint"] = hex;
    doc["seed"] = seed;
    doc["threads"] = threads;
    doc["openmp"] = openmp_enabled();
    doc["compiler"] = __VERSION__;
    doc["outputs"] = outputs;
    const std::string path = directory + "/manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("failed writing '" + path + "'");
}

} // namespace mspop
