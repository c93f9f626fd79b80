// Command-line front end: reads a JSON run configuration, dispatches to the
// library, writes CSV/JSON artifacts plus a manifest into the output
// directory, and prints a one-line summary per run.
//
// Exit codes: 0 success, 1 configuration or validation error, 2 numerical
// failure, 3 I/O failure.

#include "mspop/characteristics.hpp"
#include "mspop/cohort.hpp"
#include "mspop/config.hpp"
#include "mspop/csv.hpp"
#include "mspop/errors.hpp"
#include "mspop/kinetics.hpp"
#include "mspop/mc.hpp"
#include "mspop/parallel.hpp"
#include "mspop/renewal.hpp"
#include "mspop/spectral.hpp"
#include "mspop/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mspop;

namespace {

struct CliArgs {
    std::string config_path;
    std::string out_override;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::string backend; // "", "atomic", "grid"
    std::optional<double> t_end;
    std::string method = "auto"; // eigen: auto|closed|scalar|power
    bool quiet = false;
};

void add_common(CLI::App* cmd, CliArgs& args) {
    cmd->add_option("--config", args.config_path, "run configuration (JSON)")
        ->required();
    cmd->add_option("--out", args.out_override,
                    "output directory (overrides the config)");
    cmd->add_option("--seed", args.seed, "RNG seed (overrides the config)");
    cmd->add_option("--threads", args.threads, "worker thread cap, 0 = default");
    cmd->add_option("--backend", args.backend, "atomic|grid")
        ->check(CLI::IsMember({"atomic", "grid"}));
    cmd->add_option("--t-end", args.t_end, "end time (overrides the config)");
    cmd->add_flag("--quiet", args.quiet, "suppress the summary line");
}

struct Run {
    RunConfig cfg;
    std::string out_dir;
    std::vector<std::string> outputs;

    std::string file(const std::string& name) {
        outputs.push_back(name);
        return out_dir + "/" + name;
    }
};

Run open_run(const CliArgs& args) {
    Run run;
    run.cfg = load_config(args.config_path);
    if (args.seed) run.cfg.mc.seed = *args.seed;
    if (args.t_end) run.cfg.t_end = *args.t_end;
    if (!args.out_override.empty()) run.cfg.output.directory = args.out_override;
    if (args.threads > 0) set_thread_limit(args.threads);
    run.out_dir = run.cfg.output.directory;
    std::error_code ec;
    fs::create_directories(run.out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + run.out_dir +
                          "': " + ec.message());
    return run;
}

void finish_run(Run& run, const CliArgs& args, const std::string& summary) {
    write_manifest(run.cfg, run.out_dir, run.outputs, run.cfg.mc.seed,
                   args.threads > 0 ? args.threads : max_threads());
    if (!args.quiet) std::cout << summary << "\n";
}

std::vector<std::string> state_columns(int m, const std::string& prefix = "") {
    std::vector<std::string> cols = {prefix + "size"};
    for (int i = 0; i < m; ++i)
        cols.push_back(prefix + "aux" + std::to_string(i + 1));
    return cols;
}

const char* method_name(SpectralMethod m) {
    switch (m) {
        case SpectralMethod::auto_pick: return "auto";
        case SpectralMethod::closed_form: return "closed_form";
        case SpectralMethod::euler_lotka_scalar: return "euler_lotka_scalar";
        case SpectralMethod::power_iteration: return "power_iteration";
    }
    return "?";
}

// Representative start states for flow evaluation: cohort atoms, or the
// box centre when the cohort is not atomic.
std::vector<InitialAtom> flow_seeds(const Model& model, const RunConfig& cfg) {
    if (cfg.initial_cohort.kind == "atoms" &&
        !cfg.initial_cohort.atoms.atoms.empty())
        return cfg.initial_cohort.atoms.atoms;
    InitialAtom centre;
    centre.age = 0;
    centre.state.size = 0.5 * (model.x_m() + model.x_M());
    centre.state.aux.assign(static_cast<std::size_t>(model.m()), 0.0);
    centre.weight = 1;
    return {centre};
}

int cmd_validate(const CliArgs& args) {
    Run run = open_run(args);
    const std::vector<std::string> problems = Model::check(run.cfg.model);
    if (!problems.empty()) {
        for (const auto& p : problems) std::cerr << "validate: " << p << "\n";
        return 1;
    }
    const Model model = Model::validate(run.cfg.model);
    std::ostringstream s;
    s << "validate: ok  m=" << model.m() << " box=[" << model.x_m() << ", "
      << model.x_M() << "] alpha=" << model.alpha() << " mu_d=" << model.mu_d()
      << (model.deterministic_division() ? " division=deterministic"
                                         : " division=stochastic");
    finish_run(run, args, s.str());
    return 0;
}

int cmd_flow(const CliArgs& args) {
    Run run = open_run(args);
    const Model model = Model::validate(run.cfg.model);
    const std::vector<InitialAtom> seeds = flow_seeds(model, run.cfg);

    std::vector<std::string> cols = {"point", "theta", "age"};
    for (const auto& c : state_columns(model.m())) cols.push_back(c);
    cols.push_back("jacobian");
    cols.push_back("survival");
    CsvWriter csv(run.file("flow.csv"), cols);

    const double dt = run.cfg.numerics.dt;
    const int steps = static_cast<int>(std::floor(run.cfg.t_end / dt + 1e-9));
    int truncated = 0;
    for (std::size_t p = 0; p < seeds.size(); ++p) {
        const InitialAtom& a = seeds[p];
        for (int k = 0; k <= steps; ++k) {
            const double theta = k * dt;
            FlowResult fr;
            try {
                fr = flow(model, theta, a.age, a.state);
            } catch (const ExceedsMaxSize&) {
                // The curve ran into the size wall; stop this trace there.
                ++truncated;
                break;
            } catch (const LeftDomain&) {
                ++truncated;
                break;
            }
            std::vector<double> rowv = {static_cast<double>(p), theta, fr.age,
                                        fr.state.size};
            for (double v : fr.state.aux) rowv.push_back(v);
            rowv.push_back(jacobian(model, theta, fr.age, fr.state));
            rowv.push_back(survival(model, theta, fr.age, fr.state));
            csv.row(rowv);
        }
    }
    std::ostringstream s;
    s << "flow: " << seeds.size() << " start point(s) x " << (steps + 1)
      << " offsets";
    if (truncated > 0) s << " (" << truncated << " trace(s) hit the box wall)";
    s << " -> flow.csv";
    finish_run(run, args, s.str());
    return 0;
}

int cmd_simulate(const CliArgs& args) {
    Run run = open_run(args);
    const Model model = Model::validate(run.cfg.model);
    const InitialCohort phi = realize_cohort(run.cfg.initial_cohort, model);

    // Birth history up to the end time, so the emitted density and mass
    // series describe the whole population, not just the founding cohort.
    // Configurations outside both solver backends fall back to pure
    // transport and say so in the summary.
    std::optional<BirthFunction> births;
    std::string note;
    try {
        RenewalOptions ro;
        ro.time_nodes = run.cfg.numerics.time_nodes;
        ro.size_nodes = run.cfg.numerics.size_nodes;
        ro.max_terms = run.cfg.numerics.max_terms;
        ro.tol = run.cfg.numerics.tol;
        ro.backend = model.deterministic_division() ? RenewalBackend::atomic
                                                    : RenewalBackend::grid;
        births = solve_series(model, phi, run.cfg.t_end + 1e-9, ro).births;
    } catch (const Error&) {
        note = " (founding cohort only; no birth solve for this configuration)";
    }
    const BirthFunction* bp = births ? &*births : nullptr;

    CsvWriter mass(run.file("mass.csv"), {"t", "population"});
    const double dt = run.cfg.numerics.dt;
    const int steps = static_cast<int>(std::floor(run.cfg.t_end / dt + 1e-9));
    double mass0 = 0, mass_end = 0;
    for (int k = 0; k <= steps; ++k) {
        const double t = k * dt;
        const double m = total_population(model, t, phi, bp);
        if (k == 0) mass0 = m;
        mass_end = m;
        mass.row(std::vector<double>{t, m});
    }

    // Density samples at the end time: (age, size) lattice, auxiliary
    // coordinates pinned to the age (the slice newborn lineages occupy
    // under the unit auxiliary velocities).
    std::vector<std::string> cols = {"t", "age"};
    for (const auto& c : state_columns(model.m())) cols.push_back(c);
    cols.push_back("density");
    CsvWriter dens(run.file("density.csv"), cols);
    const double t = run.cfg.t_end;
    const num::Axis age_axis{0.0, std::min(t + 1.0, 4.0), 17};
    const num::Axis size_axis{model.x_m(), model.x_M(), 17};
    for (std::size_t i = 0; i < age_axis.n; ++i) {
        for (std::size_t j = 0; j < size_axis.n; ++j) {
            const double age = age_axis.coord(i);
            // Without a birth history, points at or below the t = a line
            // have no defined value; skip those rows rather than guess.
            if (!bp && age <= t) continue;
            StateVector x;
            x.size = size_axis.coord(j);
            x.aux.assign(static_cast<std::size_t>(model.m()), age);
            const double d = evaluate_density(model, t, age, x, phi, bp);
            std::vector<double> rowv = {t, age, x.size};
            for (double v : x.aux) rowv.push_back(v);
            rowv.push_back(d);
            dens.row(rowv);
        }
    }

    std::ostringstream s;
    s << "simulate: t in [0, " << run.cfg.t_end << "], population " << mass0
      << " -> " << mass_end << note << " -> mass.csv, density.csv";
    finish_run(run, args, s.str());
    return 0;
}

int cmd_renewal(const CliArgs& args) {
    Run run = open_run(args);
    const Model model = Model::validate(run.cfg.model);
    const InitialCohort phi = realize_cohort(run.cfg.initial_cohort, model);

    RenewalOptions ro;
    ro.time_nodes = run.cfg.numerics.time_nodes;
    ro.size_nodes = run.cfg.numerics.size_nodes;
    ro.max_terms = run.cfg.numerics.max_terms;
    ro.tol = run.cfg.numerics.tol;
    ro.kin.flow_rtol = run.cfg.numerics.flow_rtol;
    ro.kin.quad_rtol = run.cfg.numerics.quad_rtol;
    if (!args.backend.empty())
        ro.backend = args.backend == "grid" ? RenewalBackend::grid
                                            : RenewalBackend::atomic;
    else
        ro.backend = model.deterministic_division() ? RenewalBackend::atomic
                                                    : RenewalBackend::grid;

    double horizon = run.cfg.horizon;
    if (horizon <= 0) {
        if (ro.backend == RenewalBackend::atomic)
            horizon = 3.5 * (model.has_fixed_a_star()
                                 ? model.a_star()
                                 : std::log(2.0) / model.alpha());
        else
            horizon = contraction_window(model, phi, 0.8);
    }

    const RenewalSolution sol = solve_series(model, phi, horizon, ro);

    if (const auto* atoms = std::get_if<AtomBirths>(&sol.births)) {
        std::vector<std::string> cols = {"birth_time"};
        for (const auto& c : state_columns(model.m())) cols.push_back(c);
        cols.push_back("weight");
        cols.push_back("generation");
        CsvWriter csv(run.file("births.csv"), cols);
        for (const auto& a : atoms->atoms) {
            std::vector<double> rowv = {a.time, a.state.size};
            for (double v : a.state.aux) rowv.push_back(v);
            rowv.push_back(a.weight);
            rowv.push_back(static_cast<double>(a.generation));
            csv.row(rowv);
        }
    } else {
        const auto& g = std::get<GridBirths>(sol.births);
        CsvWriter csv(run.file("births.csv"), {"t", "size", "rate"});
        const num::Lattice& lat = g.values;
        std::vector<std::size_t> idx(2);
        std::vector<double> c(2);
        for (std::size_t k = 0; k < lat.size(); ++k) {
            lat.node_coords(k, c);
            csv.row(std::vector<double>{c[0], c[1], lat.values()[k]});
        }
    }

    json report;
    report["backend"] = ro.backend == RenewalBackend::atomic ? "atomic" : "grid";
    report["horizon"] = horizon;
    report["terms"] = sol.term_norms;
    report["converged"] = sol.converged;
    {
        std::ofstream out(run.file("renewal.json"), std::ios::binary);
        if (!out) throw IoError("cannot write renewal.json");
        out << report.dump(2) << "\n";
    }

    std::ostringstream s;
    s << "renewal: " << sol.term_norms.size() << " term(s) on [0, " << horizon
      << "], " << (sol.converged ? "converged" : "NOT converged")
      << " -> births.csv, renewal.json";
    finish_run(run, args, s.str());
    return 0;
}

int cmd_eigen(const CliArgs& args) {
    Run run = open_run(args);
    const Model model = Model::validate(run.cfg.model);

    SpectralOptions so;
    so.size_nodes = run.cfg.numerics.eigen_nodes;
    so.kin.flow_rtol = run.cfg.numerics.flow_rtol;
    so.kin.quad_rtol = run.cfg.numerics.quad_rtol;
    if (args.method == "closed") so.method = SpectralMethod::closed_form;
    else if (args.method == "scalar") so.method = SpectralMethod::euler_lotka_scalar;
    else if (args.method == "power") so.method = SpectralMethod::power_iteration;

    const SpectralResult sr = dominant_eigenvalue(model, so);

    json doc;
    doc["lambda0"] = sr.lambda0;
    doc["method"] = method_name(sr.method);
    doc["residual"] = sr.residual;
    doc["paper_lambda"] = sr.paper_lambda;
    doc["discrepancy_flag"] = sr.discrepancy_flag;
    {
        std::ofstream out(run.file("eigen.json"), std::ios::binary);
        if (!out) throw IoError("cannot write eigen.json");
        out << doc.dump(2) << "\n";
    }

    if (sr.atomic) {
        std::vector<std::string> cols = state_columns(model.m());
        cols.push_back("weight");
        CsvWriter csv(run.file("psi.csv"), cols);
        for (const auto& a : sr.psi_atoms) {
            std::vector<double> rowv = {a.state.size};
            for (double v : a.state.aux) rowv.push_back(v);
            rowv.push_back(a.weight);
            csv.row(rowv);
        }
    } else {
        CsvWriter csv(run.file("psi.csv"), {"size", "density"});
        const num::Lattice& lat = sr.psi_grid;
        std::vector<double> c(1);
        for (std::size_t k = 0; k < lat.size(); ++k) {
            lat.node_coords(k, c);
            csv.row(std::vector<double>{c[0], lat.values()[k]});
        }
    }

    std::ostringstream s;
    s << "eigen: lambda0=" << sr.lambda0 << " (" << method_name(sr.method)
      << ", residual " << sr.residual << ")";
    if (sr.discrepancy_flag)
        s << "  note: published closed form gives " << sr.paper_lambda;
    s << " -> eigen.json, psi.csv";
    finish_run(run, args, s.str());
    return 0;
}

int cmd_mc(const CliArgs& args) {
    Run run = open_run(args);
    const Model model = Model::validate(run.cfg.model);

    McInit init;
    init.count = run.cfg.mc.initial_agents;
    init.birth_size = run.cfg.mc.birth_size;
    init.kind = run.cfg.mc.init == "stationary" ? McInit::Kind::stationary
                                                : McInit::Kind::newborn;

    McOptions mo;
    mo.hist_times = {run.cfg.t_end};
    mo.max_agents = run.cfg.mc.agent_cap;

    const std::vector<Trajectory> trajs =
        simulate(model, init, run.cfg.t_end, run.cfg.numerics.dt,
                 run.cfg.mc.seed, run.cfg.mc.replicates, mo);

    CsvWriter counts(run.file("counts.csv"),
                     {"replicate", "t", "count", "births", "deaths"});
    double final_sum = 0;
    for (const auto& tr : trajs) {
        for (std::size_t k = 0; k < tr.times.size(); ++k)
            counts.row(std::vector<double>{static_cast<double>(tr.replicate),
                                           tr.times[k],
                                           static_cast<double>(tr.counts[k]),
                                           static_cast<double>(tr.births[k]),
                                           static_cast<double>(tr.deaths[k])});
        final_sum += static_cast<double>(tr.counts.back());
    }

    CsvWriter census(run.file("census.csv"),
                     {"replicate", "t", "axis", "bin_lo", "bin_hi", "count"});
    auto dump_hist = [&](std::uint64_t rep, double t, const std::string& axis,
                         const Histogram& h) {
        const double w = (h.bins.hi - h.bins.lo) / static_cast<double>(h.bins.n);
        for (std::size_t b = 0; b < h.counts.size(); ++b)
            census.row({std::to_string(rep), csv_format(t), axis,
                        csv_format(h.bins.lo + static_cast<double>(b) * w),
                        csv_format(h.bins.lo + static_cast<double>(b + 1) * w),
                        csv_format(h.counts[b])});
    };
    for (const auto& tr : trajs)
        for (const auto& ch : tr.histograms) {
            dump_hist(tr.replicate, ch.time, "age", ch.age);
            dump_hist(tr.replicate, ch.time, "size", ch.size);
            for (std::size_t ai = 0; ai < ch.aux.size(); ++ai)
                dump_hist(tr.replicate, ch.time, "aux" + std::to_string(ai + 1),
                          ch.aux[ai]);
        }

    std::ostringstream s;
    s << "mc: " << trajs.size() << " replicate(s) to t=" << run.cfg.t_end
      << ", mean final count " << final_sum / static_cast<double>(trajs.size())
      << " -> counts.csv, census.csv";
    finish_run(run, args, s.str());
    return 0;
}

int cmd_verify(const CliArgs& args) {
    Run run = open_run(args);
    const Model model = Model::validate(run.cfg.model);

    VerifyOptions vo;
    vo.seed = run.cfg.mc.seed;
    const VerifyReport rep = run_verify(model, vo);

    std::vector<std::string> cols = {"point", "theta", "age"};
    for (const auto& c : state_columns(model.m())) cols.push_back(c);
    cols.push_back("jacobian");
    cols.push_back("jacobian_fd");
    cols.push_back("rel_err");
    CsvWriter csv(run.file("liouville.csv"), cols);
    for (std::size_t i = 0; i < rep.liouville.points.size(); ++i) {
        const LiouvillePoint& p = rep.liouville.points[i];
        std::vector<double> rowv = {static_cast<double>(i), p.theta, p.age,
                                    p.x.size};
        for (double v : p.x.aux) rowv.push_back(v);
        rowv.push_back(p.analytic);
        rowv.push_back(p.fd);
        rowv.push_back(p.rel_err);
        csv.row(rowv);
    }

    json doc;
    doc["lambda0"] = rep.lambda0;
    doc["all_passed"] = rep.all_passed;
    json checks = json::array();
    for (const auto& c : rep.checks) {
        checks.push_back({{"name", c.name},
                          {"observed", c.observed},
                          {"bound", c.bound},
                          {"passed", c.passed},
                          {"detail", c.detail}});
        if (!args.quiet)
            std::printf("%-24s %-4s observed %.3e vs %.3e%s%s\n", c.name.c_str(),
                        c.passed ? "ok" : "FAIL", c.observed, c.bound,
                        c.detail.empty() ? "" : "  ", c.detail.c_str());
    }
    doc["checks"] = std::move(checks);
    {
        std::ofstream out(run.file("verify.json"), std::ios::binary);
        if (!out) throw IoError("cannot write verify.json");
        out << doc.dump(2) << "\n";
    }

    std::size_t passed = 0;
    for (const auto& c : rep.checks) passed += c.passed ? 1 : 0;
    std::ostringstream s;
    s << "verify: " << passed << "/" << rep.checks.size()
      << " checks passed, lambda0=" << rep.lambda0 << ", liouville max "
      << rep.liouville.max_rel_err << " -> verify.json, liouville.csv";
    finish_run(run, args, s.str());
    return rep.all_passed ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-structured population balance toolkit"};
    app.require_subcommand(1);

    CliArgs args;
    CLI::App* validate = app.add_subcommand("validate", "check a model configuration");
    CLI::App* flow_cmd = app.add_subcommand("flow", "spot characteristic evaluation");
    CLI::App* simulate_cmd = app.add_subcommand("simulate", "transported density and mass series");
    CLI::App* renewal_cmd = app.add_subcommand("renewal", "birth-rate series solution");
    CLI::App* eigen_cmd = app.add_subcommand("eigen", "dominant eigenvalue and asymptotic profile");
    CLI::App* mc_cmd = app.add_subcommand("mc", "individual-based stochastic runs");
    CLI::App* verify_cmd = app.add_subcommand("verify", "full property suite");
    for (CLI::App* c : {validate, flow_cmd, simulate_cmd, renewal_cmd,
                        eigen_cmd, mc_cmd, verify_cmd})
        add_common(c, args);
    eigen_cmd->add_option("--method", args.method,
                          "auto|closed|scalar|power")
        ->check(CLI::IsMember({"auto", "closed", "scalar", "power"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (validate->parsed()) return cmd_validate(args);
        if (flow_cmd->parsed()) return cmd_flow(args);
        if (simulate_cmd->parsed()) return cmd_simulate(args);
        if (renewal_cmd->parsed()) return cmd_renewal(args);
        if (eigen_cmd->parsed()) return cmd_eigen(args);
        if (mc_cmd->parsed()) return cmd_mc(args);
        if (verify_cmd->parsed()) return cmd_verify(args);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
