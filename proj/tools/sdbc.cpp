// sdbc: eigen / design / simulate / sweep driven by a flat key = value config.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sdbc/analysis.hpp"
#include "sdbc/backstepping.hpp"
#include "sdbc/core.hpp"
#include "sdbc/fd_oracle.hpp"
#include "sdbc/io.hpp"
#include "sdbc/modal_sim.hpp"
#include "sdbc/reduced_design.hpp"
#include "sdbc/sl_operator.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace sdbc;

namespace {

constexpr const char* kVersion = "1.0.0";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const std::set<std::string> kKnownKeys = {
    "p", "q", "r", "a1", "a2", "b1", "b2", "n_max", "grid_size",
    "eigen.method", "eigen.tol", "eigen.n_tail",
    "controller.type", "controller.m", "controller.poles", "controller.margin",
    "controller.c", "controller.sigma_frac", "controller.policy", "controller.available_modes",
    "schedule.kind", "schedule.T", "schedule.T_factor", "schedule.seed", "schedule.times",
    "sim.t_end", "sim.output_dt", "sim.x0", "sim.snapshots",
    "oracle.enable", "oracle.M", "oracle.dt",
    "sweep.T", "sweep.horizon", "sweep.threads",
    "out",
};

json to_json(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
    return a;
}

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Problem

/// Coefficient from a number or a two-column table path; `sign` flips tabulated values too.
Coefficient coefficient(const io::Config& cfg, const std::string& key, double fallback, double sign = 1.0) {
    if (!cfg.has(key)) return Coefficient::constant(sign * fallback);
    const std::string v = cfg.str(key);
    if (v.empty()) throw UsageError("config key " + key + " is empty");
    try {
        std::size_t used = 0;
        const double c = std::stod(v, &used);
        if (used == v.size()) return Coefficient::constant(sign * c);
    } catch (const std::exception&) {
    }
    require(fs::exists(v), ErrorKind::InvalidArgument, "coefficient table for " + key + " not found: " + v);
    std::vector<double> z, val;
    io::read_table(v, z, val);
    for (double& x : val) x *= sign;
    return Coefficient::tabulated(std::move(z), std::move(val));
}

/// `q` is the reaction coefficient: r x_t = (p x_z)_z + q x.
SLProblem problem_from(const io::Config& cfg) {
    SLProblem pr;
    pr.p = coefficient(cfg, "p", 1.0);
    pr.q = coefficient(cfg, "q", 0.0, -1.0);
    pr.r = coefficient(cfg, "r", 1.0);
    pr.a1 = cfg.num("a1", 1.0);
    pr.a2 = cfg.num("a2", 0.0);
    pr.b1 = cfg.num("b1", 1.0);
    pr.b2 = cfg.num("b2", 0.0);
    return pr;
}

int required_int(const io::Config& cfg, const std::string& key, long fallback, long lo, long hi) {
    if (cfg.has(key) && cfg.str(key).empty()) throw UsageError("config key " + key + " is empty");
    const long v = cfg.integer(key, fallback);
    require(v >= lo && v <= hi, ErrorKind::InvalidArgument,
            key + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(v);
}

struct Setup {
    io::Config cfg;
    fs::path out;
    SLProblem problem;
    int n_max = 64;
    int grid_size = 401;
    bool analytic = false;
};

Setup setup_from(const io::Config& cfg, const std::string& out_flag) {
    Setup s;
    s.cfg = cfg;
    s.out = !out_flag.empty() ? fs::path(out_flag) : fs::path(cfg.str("out", "out"));
    s.problem = problem_from(cfg);
    s.n_max = required_int(cfg, "n_max", 64, 1, 4096);
    s.grid_size = required_int(cfg, "grid_size", 401, 3, 1 << 20);
    require(s.grid_size % 2 == 1, ErrorKind::InvalidArgument, "grid_size must be odd (even number of intervals)");
    s.problem.validate(Grid(static_cast<std::size_t>(s.grid_size)));
    const std::string method = cfg.str("eigen.method", "auto");
    require(method == "auto" || method == "analytic" || method == "shooting", ErrorKind::InvalidArgument,
            "eigen.method must be auto, analytic or shooting");
    s.analytic = s.problem.constant_dirichlet() && s.problem.b1 == 1.0 && s.problem.a1 == 1.0 && method != "shooting";
    require(method != "analytic" || s.analytic, ErrorKind::InvalidArgument,
            "analytic eigensystem requires constant p, q, r = 1 and Dirichlet ends");
    return s;
}

EigenSystem eigensystem(const Setup& s) {
    if (s.analytic)
        return analytic_eigensystem(s.problem.p.constant_value(), -s.problem.q.constant_value(), s.n_max, s.grid_size);
    return shoot_eigensystem(s.problem, s.n_max, s.grid_size, s.cfg.num("eigen.tol", 1e-10));
}

void require_constant_dirichlet(const Setup& s) {
    require(s.analytic, ErrorKind::PreconditionViolation,
            "backstepping requires constant p, q with r = 1 and Dirichlet ends (a1 = b1 = 1)");
}

// ---------------------------------------------------------------------------
// Manifest

struct Manifest {
    json j;
    std::vector<std::string> outputs;

    Manifest(const std::string& command, const Setup& s) {
        j["command"] = command;
        j["version"] = kVersion;
        j["config_hash"] = io::fnv1a_hex(s.cfg.canonical());
        j["problem_hash"] = io::fnv1a_hex(problem_text(s.cfg));
        json c = json::object();
        for (const auto& [k, v] : s.cfg.values()) c[k] = v;
        j["config"] = c;
        j["n_max"] = s.n_max;
        j["grid_size"] = s.grid_size;
        j["eigen_method"] = s.analytic ? "analytic" : "shooting";
    }

    static std::string problem_text(const io::Config& cfg) {
        std::string t;
        for (const char* k : {"p", "q", "r", "a1", "a2", "b1", "b2"}) t += std::string(k) + "=" + cfg.str(k) + "\n";
        return t;
    }

    void write(const fs::path& dir, const std::string& name, const std::string& content) {
        io::write_atomic(dir / name, content);
        outputs.push_back(name);
    }

    void finish(const fs::path& dir) {
        j["outputs"] = outputs;
        io::write_atomic(dir / "manifest.json", dump(j));
    }
};

// ---------------------------------------------------------------------------
// eigen

int cmd_eigen(const Setup& s) {
    Manifest m("eigen", s);
    const auto sys = eigensystem(s);
    const auto gains = input_gains(sys);
    io::Csv csv({"n", "lambda", "phi1", "dphi1", "g_n"});
    for (std::size_t i = 0; i < sys.size(); ++i) {
        const auto& e = sys[i];
        csv.row({static_cast<double>(e.n), e.lambda, e.phi1, e.dphi1, gains[i]});
    }
    m.write(s.out, "eigen.csv", csv.str());
    for (const auto& e : sys.pairs) {
        io::Csv f({"z", "phi"});
        for (std::size_t i = 0; i < sys.grid.size(); ++i) f.row({sys.grid[i], e.phi[i]});
        char name[64];
        std::snprintf(name, sizeof name, "eigenfunctions/phi_%04d.csv", e.n);
        m.write(s.out, name, f.str());
    }

    const int n_tail = required_int(s.cfg, "eigen.n_tail", std::max(1, s.n_max / 2), 1, s.n_max);
    json rep;
    rep["method"] = s.analytic ? "analytic" : "shooting";
    std::optional<ValidationReport> vr;
    try {
        vr = validate_eigensystem(sys, n_tail);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::PreconditionViolation) throw;
        rep["precondition"] = e.what();
    }
    bool ok = true;
    if (vr) {
        rep["gram_max_deviation"] = vr->gram_max_deviation;
        rep["boundary_residual"] = vr->boundary_residual;
        rep["strictly_increasing"] = vr->strictly_increasing;
        rep["tail_start"] = vr->tail_start;
        rep["tail_exponent"] = num(vr->tail_exponent);
        rep["partial_sums"] = to_json(vr->partial_sums);
        ok = vr->strictly_increasing && vr->gram_max_deviation < 1e-6 && vr->boundary_residual < 1e-6;
    }
    if (!s.analytic) {
        std::vector<double> res;
        for (const auto& e : sys.pairs) res.push_back(ode_residual(e, sys.problem, sys.grid));
        rep["ode_residual"] = to_json(res);
    }
    rep["valid"] = ok;
    m.write(s.out, "eigen_report.json", dump(rep));
    m.finish(s.out);
    std::printf("lambda_1 = %.10g (%d modes, %s)\n", sys[0].lambda, s.n_max, s.analytic ? "analytic" : "shooting");
    if (!ok) {
        std::fprintf(stderr, "error: eigensystem failed validation (see eigen_report.json)\n");
        return 2;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// design

struct Design {
    std::string type = "none";
    std::optional<ReducedController> reduced;
    std::optional<BacksteppingController> back;
    double T_star = std::numeric_limits<double>::infinity();
};

TruncationPolicy parse_policy(const std::string& v) {
    if (v == "smallest") return TruncationPolicy::Smallest;
    if (v == "maxt") return TruncationPolicy::MaxT;
    throw Error(ErrorKind::InvalidArgument, "controller.policy must be smallest or maxt");
}

Design design(const Setup& s, const EigenSystem& sys) {
    Design d;
    d.type = s.cfg.str("controller.type", "none");
    if (d.type == "none") return d;
    if (d.type == "reduced") {
        ReducedOptions o;
        o.m = required_int(s.cfg, "controller.m", -1, -1, s.n_max - 1);
        o.poles = s.cfg.list("controller.poles");
        o.margin = s.cfg.num("controller.margin", 0.01);
        d.reduced = design_reduced(sys, o);
        d.T_star = d.reduced->bound.T_star;
        return d;
    }
    if (d.type == "backstepping") {
        require_constant_dirichlet(s);
        BacksteppingOptions o;
        o.c = s.cfg.num("controller.c", -1.0);
        o.sigma_frac = s.cfg.num("controller.sigma_frac", 0.5);
        require(o.sigma_frac > 0 && o.sigma_frac < 1, ErrorKind::InvalidArgument, "controller.sigma_frac must lie in (0, 1)");
        o.policy = parse_policy(s.cfg.str("controller.policy", "smallest"));
        o.grid_size = s.grid_size;
        o.available_modes = required_int(s.cfg, "controller.available_modes", 2048, 1, 1 << 16);
        const double p = s.problem.p.constant_value(), q = -s.problem.q.constant_value();
        if (s.cfg.has("controller.c")) require_kernel_domain(p, q, o.c);
        d.back = design_backstepping(p, q, o);
        d.T_star = d.back->T_star;
        return d;
    }
    throw Error(ErrorKind::InvalidArgument, "controller.type must be none, reduced or backstepping");
}

json design_json(const Design& d) {
    json j;
    j["type"] = d.type;
    if (d.reduced) {
        const auto& c = *d.reduced;
        j["m"] = c.m;
        j["k"] = to_json(c.k);
        j["g"] = to_json(c.g);
        j["lambdas"] = to_json(c.lambdas);
        j["poles"] = to_json(c.poles);
        j["T_star"] = num(c.bound.T_star);
        j["G"] = num(c.envelope.G);
        j["sigma"] = num(c.envelope.sigma);
        j["epsilon"] = num(c.envelope.epsilon);
        j["Gamma"] = num(c.Gamma);
    }
    if (d.back) {
        const auto& b = *d.back;
        j["p"] = b.p;
        j["q"] = b.q;
        j["c"] = b.c;
        j["N"] = b.truncation.N;
        j["N_min"] = b.N_min;
        j["policy"] = b.policy == TruncationPolicy::MaxT ? "maxt" : "smallest";
        j["gamma"] = b.target.gamma;
        j["G"] = b.target.G;
        j["sigma"] = b.target.sigma;
        j["mu1"] = b.target.mu1;
        j["K_tilde"] = b.norms.K_tilde;
        j["L_tilde"] = b.norms.L_tilde;
        j["k_norm"] = b.truncation.k_norm;
        j["tail_norm"] = b.truncation.tail_norm;
        j["bracket"] = b.bound.bracket;
        j["T_star"] = num(b.T_star);
        j["k_n"] = to_json(std::vector<double>(b.truncation.k_n.begin(), b.truncation.k_n.begin() + b.truncation.N));
    }
    return j;
}

void write_design(Manifest& m, const Setup& s, const EigenSystem& sys, const Design& d) {
    m.write(s.out, "controller.json", dump(design_json(d)));
    if (d.reduced && d.reduced->m > 0) {
        io::Csv k({"z", "kernel"});
        for (std::size_t i = 0; i < sys.grid.size(); ++i) k.row({sys.grid[i], d.reduced->kernel[i]});
        m.write(s.out, "kernel.csv", k.str());
    }
    if (d.back) {
        const auto& b = *d.back;
        io::Csv k({"s", "k"});
        for (std::size_t i = 0; i < b.grid.size(); ++i) k.row({b.grid[i], b.kernel_k[i]});
        m.write(s.out, "gain_kernel.csv", k.str());
        io::Csv K({"z", "s", "K"});
        for (std::size_t i = 0; i < b.grid.size(); ++i)
            for (std::size_t jj = 0; jj <= i; ++jj) K.row({b.grid[i], b.grid[jj], b.K_surface(i, jj)});
        m.write(s.out, "kernel_surface.csv", K.str());
    }
}

int cmd_design(const Setup& s) {
    Manifest m("design", s);
    const auto sys = eigensystem(s);
    const auto d = design(s, sys);
    write_design(m, s, sys, d);
    m.j["controller"] = d.type;
    m.finish(s.out);
    if (d.type == "none") std::printf("no controller\n");
    else std::printf("%s: T_star = %.10g\n", d.type.c_str(), d.T_star);
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

std::function<double(double)> initial_profile(const Setup& s, const EigenSystem& sys) {
    const std::string v = s.cfg.str("sim.x0", "default");
    if (v == "default") return [](double z) { return std::sin(kPi * z) + 0.5 * z * (1 - z); };
    if (v.rfind("mode:", 0) == 0) {
        const int n = std::stoi(v.substr(5));
        require(n >= 1 && n <= static_cast<int>(sys.size()), ErrorKind::InvalidArgument, "sim.x0 mode index out of range");
        auto es = std::make_shared<const EigenSystem>(sys);
        return [es, n](double z) { return es->phi_at(n, z); };
    }
    require(fs::exists(v), ErrorKind::InvalidArgument, "sim.x0 must be default, mode:<n> or a table path; not found: " + v);
    std::vector<double> z, x;
    io::read_table(v, z, x);
    auto sp = std::make_shared<const CubicSpline>(std::move(z), std::move(x));
    return [sp](double zz) { return (*sp)(zz); };
}

SamplingSchedule schedule_from(const Setup& s, double T_star, std::uint64_t seed) {
    const auto kind = parse_schedule_kind(s.cfg.str("schedule.kind", "periodic"));
    double T = 0;
    const std::string tv = s.cfg.str("schedule.T", "auto");
    if (tv == "auto") {
        require(std::isfinite(T_star), ErrorKind::InvalidArgument, "schedule.T = auto needs a controller with finite T_star");
        T = T_star * s.cfg.num("schedule.T_factor", 1.0);
    } else {
        T = s.cfg.num("schedule.T");
    }
    return make_schedule(kind, T, seed, kind == ScheduleKind::Explicit ? s.cfg.list("schedule.times") : std::vector<double>{});
}

struct Plant {
    EigenSystem sys;
    std::vector<double> gains;
    BoundaryLift lift;
    Design d;
    ControllerSpec spec;
};

Plant plant_from(const Setup& s) {
    Plant pl{eigensystem(s), {}, {}, {}, {}};
    pl.gains = input_gains(pl.sys);
    pl.lift = make_boundary_lift(pl.sys, pl.gains);
    pl.d = design(s, pl.sys);
    if (pl.d.reduced && pl.d.reduced->m > 0) pl.spec = reduced_controller_spec(*pl.d.reduced, pl.sys);
    if (pl.d.back) pl.spec = backstepping_controller_spec(*pl.d.back, pl.sys, pl.lift);
    return pl;
}

Trace run(const Plant& pl, const SamplingSchedule& sch, const std::vector<double>& x0, double t_end, double output_dt,
          SimOptions opt) {
    if (pl.d.back) {
        opt.diagnostics = true;
        opt.iss_sigma = pl.d.back->target.sigma;
        opt.y_norm = transformed_norm(*pl.d.back, pl.sys, pl.lift);
    } else if (!pl.spec.is_none()) {
        opt.diagnostics = true;
    }
    return simulate_closed_loop(pl.sys, pl.gains, pl.lift, pl.spec, sch, x0, t_end, output_dt, opt);
}

std::string trace_csv(const Trace& tr) {
    io::Csv c({"t", "norm_r", "u", "v", "w"});
    for (const auto& r : tr.rows) c.row({r.t, r.norm_r, r.u, r.v, r.w});
    return c.str();
}

int cmd_simulate(const Setup& s, std::optional<std::uint64_t> seed_flag, bool oracle_flag) {
    Manifest m("simulate", s);
    const auto pl = plant_from(s);
    const std::uint64_t seed = seed_flag ? *seed_flag : static_cast<std::uint64_t>(s.cfg.integer("schedule.seed", 0));
    const auto sch = schedule_from(s, pl.d.T_star, seed);
    const double t_end = s.cfg.num("sim.t_end", 1.0);
    const double output_dt = s.cfg.num("sim.output_dt", 0.01);
    require(t_end >= 0 && output_dt > 0, ErrorKind::InvalidArgument, "need sim.t_end >= 0 and sim.output_dt > 0");
    const auto x0f = initial_profile(s, pl.sys);
    const auto x0 = sample(pl.sys.grid, x0f);
    const bool oracle = oracle_flag || s.cfg.flag("oracle.enable", false);

    SimOptions opt;
    opt.snapshot_times = s.cfg.list("sim.snapshots");
    opt.snapshot_all_rows = oracle;
    const auto tr = run(pl, sch, x0, t_end, output_dt, opt);

    write_design(m, s, pl.sys, pl.d);
    m.write(s.out, "trace.csv", trace_csv(tr));
    if (pl.d.back || !pl.spec.is_none()) {
        io::Csv c({"t", "residual", "y_norm", "v_sup"});
        for (const auto& r : tr.rows) c.row({r.t, r.residual, r.y_norm, r.v_sup});
        m.write(s.out, "diagnostics.csv", c.str());
    }
    for (const double ts : opt.snapshot_times) {
        const auto it = std::find_if(tr.snapshots.begin(), tr.snapshots.end(),
                                     [&](const Snapshot& sn) { return std::abs(sn.t - ts) <= 1e-9; });
        if (it == tr.snapshots.end()) continue;
        io::Csv c({"z", "x"});
        for (std::size_t i = 0; i < pl.sys.grid.size(); ++i) c.row({pl.sys.grid[i], it->x[i]});
        m.write(s.out, "snapshot_t=" + io::fmt(ts) + ".csv", c.str());
    }
    if (oracle) {
        FDGrid fg;
        fg.M = required_int(s.cfg, "oracle.M", 400, 2, 1 << 20);
        fg.dt = s.cfg.num("oracle.dt", 1e-4);
        const auto fd = fd_simulate(pl.sys.problem, pl.spec.kernel, sch, x0f, t_end, output_dt, fg, pl.d.type);
        m.write(s.out, "trace_fd.csv", trace_csv(fd));
        const auto cmp = compare_traces(tr, fd);
        json cj;
        cj["max_snapshot_rel"] = cmp.max_snapshot_rel;
        cj["t_max_snapshot"] = cmp.t_max_snapshot;
        cj["max_norm_rel"] = cmp.max_norm_rel;
        cj["t_max_norm"] = cmp.t_max_norm;
        cj["M"] = fg.M;
        cj["dt"] = fg.dt;
        m.write(s.out, "comparison.json", dump(cj));
        std::printf("oracle: max relative snapshot difference %.3e at t = %g\n", cmp.max_snapshot_rel, cmp.t_max_snapshot);
    }
    m.j["controller"] = pl.d.type;
    m.j["schedule"] = sch.descriptor();
    m.j["seed"] = seed;
    m.j["T_star"] = num(pl.d.T_star);
    m.j["diverged"] = tr.diverged;
    m.j["reconstruction"] = "L2-trusted only near the actuated boundary during holds";
    m.finish(s.out);
    std::printf("final norm %.6e at t = %g%s\n", tr.rows.back().norm_r, tr.rows.back().t, tr.diverged ? " (diverged)" : "");
    return 0;
}

// ---------------------------------------------------------------------------
// sweep

int cmd_sweep(const Setup& s, std::optional<std::uint64_t> seed_flag, const std::vector<double>& T_flag) {
    Manifest m("sweep", s);
    const auto pl = plant_from(s);
    std::vector<double> Ts = T_flag.empty() ? s.cfg.list("sweep.T") : T_flag;
    if (Ts.empty()) throw UsageError("sweep needs a period list (sweep.T or --T)");
    for (double T : Ts) require(T > 0 && std::isfinite(T), ErrorKind::InvalidArgument, "sweep periods must be positive");
    std::sort(Ts.begin(), Ts.end());
    const std::uint64_t seed = seed_flag ? *seed_flag : static_cast<std::uint64_t>(s.cfg.integer("schedule.seed", 0));
    const auto kind = parse_schedule_kind(s.cfg.str("schedule.kind", "periodic"));
    require(kind != ScheduleKind::Explicit, ErrorKind::InvalidArgument, "sweeps need a periodic or jittered schedule");
    const double horizon = s.cfg.num("sweep.horizon", 20.0);
    const double output_dt = s.cfg.num("sim.output_dt", 0.01);
    require(horizon > 0 && output_dt > 0, ErrorKind::InvalidArgument, "need sweep.horizon > 0 and sim.output_dt > 0");
    const auto x0 = sample(pl.sys.grid, initial_profile(s, pl.sys));

    auto one = [&](double T) {
        SweepRow row;
        row.T = T;
        row.ratio = std::isfinite(pl.d.T_star) ? T / pl.d.T_star : kNaN;
        Trace tr;
        try {
            tr = run(pl, make_schedule(kind, T, seed), x0, horizon, output_dt, {});
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NumericFailure) throw;
            return row;
        }
        row.stable = bounded(tr);
        try {
            const auto f = fit_decay(tr);
            row.c_est = f.c_est;
            row.G_est = f.G_est;
        } catch (const Error&) {
        }
        return row;
    };

    const long threads = std::max<long>(1, s.cfg.integer("sweep.threads", std::max(1u, std::thread::hardware_concurrency())));
    std::vector<SweepRow> rows(Ts.size());
    for (std::size_t base = 0; base < Ts.size(); base += static_cast<std::size_t>(threads)) {
        std::vector<std::future<SweepRow>> jobs;
        for (std::size_t i = base; i < std::min(Ts.size(), base + static_cast<std::size_t>(threads)); ++i)
            jobs.push_back(std::async(std::launch::async, one, Ts[i]));
        for (std::size_t i = 0; i < jobs.size(); ++i) rows[base + i] = jobs[i].get();
    }

    io::Csv c({"T", "stable", "c_est", "G_est", "ratio"});
    for (const auto& r : rows)
        c.line({io::fmt(r.T), r.stable ? "1" : "0", io::fmt(r.c_est), io::fmt(r.G_est), io::fmt(r.ratio)});
    m.write(s.out, "sweep.csv", c.str());

    json sj;
    double last_stable = kNaN;
    for (const auto& r : rows) {
        if (!r.stable) break;
        last_stable = r.T;
    }
    sj["T_star"] = num(pl.d.T_star);
    sj["largest_stable_T_before_transition"] = num(last_stable);
    sj["ratio"] = num(std::isfinite(pl.d.T_star) ? last_stable / pl.d.T_star : kNaN);
    m.write(s.out, "sweep_summary.json", dump(sj));
    m.j["controller"] = pl.d.type;
    m.j["seed"] = seed;
    m.j["schedule_kind"] = to_string(kind);
    m.finish(s.out);
    std::printf("%zu periods swept\n", rows.size());
    return 0;
}

int exit_code(ErrorKind k) { return k == ErrorKind::NumericFailure ? 3 : 2; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sampled-data boundary control toolkit"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    bool oracle = false;
    std::vector<double> T_list;

    auto add_common = [&](CLI::App* sc) {
        sc->add_option("--config", config_path, "config file (key = value)")->required();
        sc->add_option("--out", out_dir, "output directory (overrides config key out)");
    };
    auto* eigen = app.add_subcommand("eigen", "compute and validate the eigensystem");
    add_common(eigen);
    auto* des = app.add_subcommand("design", "design a controller and export it");
    add_common(des);
    auto* sim = app.add_subcommand("simulate", "run the sampled closed loop");
    add_common(sim);
    sim->add_option("--seed", seed, "schedule seed (overrides schedule.seed)");
    sim->add_flag("--oracle", oracle, "also run the finite-difference reference and compare");
    auto* sw = app.add_subcommand("sweep", "sweep sampling periods");
    add_common(sw);
    sw->add_option("--seed", seed, "schedule seed (overrides schedule.seed)");
    sw->add_option("--T", T_list, "sampling periods (overrides sweep.T)")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 64;
    }

    try {
        io::Config cfg;
        try {
            cfg = io::Config::load(config_path);
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
        if (const auto unk = cfg.unknown(kKnownKeys); !unk.empty()) throw UsageError("unknown config key " + unk.front());
        const auto s = setup_from(cfg, out_dir);
        if (eigen->parsed()) return cmd_eigen(s);
        if (des->parsed()) return cmd_design(s);
        if (sim->parsed()) return cmd_simulate(s, seed, oracle);
        if (sw->parsed()) return cmd_sweep(s, seed, T_list);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 64;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 64;
}
