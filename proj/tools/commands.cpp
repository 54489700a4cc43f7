#include "commands.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "isomono/spectral.hpp"
#include "verify.hpp"

namespace isomono::cli {

namespace {

constexpr std::uint64_t kDefaultSeed = 20240601;
constexpr int kDefaultTrials = 20;

std::string fmt(cd z) {
    std::ostringstream os;
    os << std::setprecision(10);
    if (z.imag() == 0.0) os << z.real();
    else if (z.real() == 0.0) os << z.imag() << "i";
    else os << z.real() << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "i";
    return os.str();
}

std::string param_string(const ParamVector& p, int i) {
    if (!p.exact) return fmt(p.values[i]);
    if (p.im[i] == 0) return p.re[i].str();
    if (p.re[i] == 0) return p.im[i].str() + "i";
    return p.re[i].str() + (p.im[i] < 0 ? "" : "+") + p.im[i].str() + "i";
}

std::string root_string(const RootVector& d) {
    std::ostringstream os;
    os << "(";
    for (std::size_t k = 0; k < d.size(); ++k) os << (k ? "," : "") << d[k];
    os << ")";
    return os.str();
}

std::string params_string(const ParamVector& p) {
    std::string s = "(";
    for (int k = 0; k < p.size(); ++k) s += (k ? "," : "") + param_string(p, k);
    return s + ")";
}

json root_json(const RootVector& d) { return json(d); }

json params_json(const ParamVector& p) {
    json a = json::array();
    for (int k = 0; k < p.size(); ++k) a.push_back(param_json(p, k));
    return a;
}

void need(bool ok, const std::string& what) {
    if (!ok) throw InputError("", what);
}

Problem load(const CommandArgs& a) {
    need(!a.file.empty(), "this command needs --file");
    return load_problem(a.file);
}

void write_json(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw InputError(path, "cannot write output file");
    f << j.dump(2) << "\n";
}

std::uint64_t seed_of(const CommandArgs& a, const Problem* p) {
    if (a.seed) return *a.seed;
    if (p && p->options.seed) return *p->options.seed;
    return kDefaultSeed;
}

// ---- root calculus ----

int cmd_roots(const CommandArgs& a, std::ostream& out) {
    auto p = load(a);
    need(p.graph && p.dims, "roots needs graph and dims");
    const auto& g = p.graph->full;
    auto c = classify_root(g, *p.dims);
    const auto dd = cartan_form(g, *p.dims, *p.dims);
    out << "d = " << root_string(*p.dims) << "\n";
    if (c.kind == RootKind::NotARoot) out << "not a root\n";
    else out << (c.positive ? "" : "negative ") << to_string(c.kind) << ", Δ = " << delta_dim(g, *p.dims) << "\n";
    out << "(d,d) = " << dd << "\n";
    if (!a.output.empty())
        write_json(a.output, {{"version", kFormatVersion},
                              {"d", root_json(*p.dims)},
                              {"kind", to_string(c.kind)},
                              {"positive", c.positive},
                              {"cartan", dd},
                              {"delta", delta_dim(g, *p.dims)}});
    return kPass;
}

int cmd_reflect(const CommandArgs& a, std::ostream& out, std::ostream& err) {
    auto p = load(a);
    need(p.graph && p.dims && p.params, "reflect needs graph, dims and params");
    need(a.node.has_value(), "reflect needs --node");
    const auto& g = p.graph->full;
    const int i = *a.node;
    need(i >= 0 && i < g.size(), "node " + std::to_string(i) + " does not exist");
    if (p.params->is_zero(i)) {
        err << "refused: lambda_" << i << " = 0, so the reflection at node " << i << " is inadmissible\n";
        return kInputError;
    }
    auto l2 = reflect_param(g, i, *p.params);
    auto d2 = reflect_root(g, i, *p.dims);
    out << "node " << i << "\n";
    out << "lambda' = " << params_string(l2) << "\n";
    out << "d'      = " << root_string(d2) << "\n";
    out << "(d',d') = " << cartan_form(g, d2, d2) << ", lambda'.d' = " << fmt(pairing(l2, d2)) << "\n";
    if (!a.output.empty())
        write_json(a.output, {{"version", kFormatVersion}, {"node", i}, {"params", params_json(l2)}, {"dims", root_json(d2)}});
    return kPass;
}

int cmd_orbit(const CommandArgs& a, std::ostream& out) {
    auto p = load(a);
    need(p.graph && p.dims && p.params, "orbit needs graph, dims and params");
    need(a.depth >= 0, "depth must be nonnegative");
    const auto& g = p.graph->full;
    auto rows = weyl_orbit(g, *p.params, *p.dims, a.depth);
    const auto dd0 = cartan_form(g, *p.dims, *p.dims);
    const cd ld0 = pairing(*p.params, *p.dims);
    bool consistent = true;
    json arr = json::array();
    std::vector<std::array<std::string, 5>> table{{"word", "d", "(d,d)", "lambda.d", "lambda"}};
    std::vector<std::string> flags{""};
    for (const auto& r : rows) {
        const auto dd = cartan_form(g, r.d, r.d);
        const cd ld = pairing(r.lambda, r.d);
        consistent = consistent && dd == dd0 && std::abs(ld - ld0) <= 1e-9 * std::max(1.0, std::abs(ld0));
        std::string zeros;
        for (int i = 0; i < g.size(); ++i)
            if (r.lambda.is_zero(i)) zeros += (zeros.empty() ? "" : ",") + std::to_string(i);
        table.push_back({r.word.empty() ? "e" : word_string(g, r.word), root_string(r.d), std::to_string(dd), fmt(ld),
                         params_string(r.lambda)});
        flags.push_back(zeros.empty() ? "" : "  [lambda_i = 0 at " + zeros + ": inadmissible there]");
        arr.push_back({{"word", r.word}, {"d", root_json(r.d)}, {"params", params_json(r.lambda)}, {"cartan", dd}});
    }
    std::array<std::size_t, 5> width{};
    for (auto& row : table)
        for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size() + 2);
    for (std::size_t k = 0; k < table.size(); ++k) {
        for (std::size_t c = 0; c < 4; ++c) out << std::left << std::setw(static_cast<int>(width[c])) << table[k][c];
        out << table[k][4] << flags[k] << "\n";
    }
    out << rows.size() << " element" << (rows.size() == 1 ? "" : "s") << " up to depth " << a.depth << "\n";
    if (!a.output.empty()) write_json(a.output, {{"version", kFormatVersion}, {"depth", a.depth}, {"orbit", arr}});
    if (!consistent) {
        out << "invariants (d,d) and lambda.d differ across the orbit\n";
        return kFailure;
    }
    return kPass;
}

int cmd_exists(const CommandArgs& a, std::ostream& out) {
    auto p = load(a);
    need(p.graph && p.dims && p.params, "exists needs graph, dims and params");
    auto r = ds_exists(p.graph->full, *p.params, *p.dims);
    if (r.budgetExceeded) {
        out << "undecided: search budget exceeded after " << r.states << " states\n";
        return kNumericalAbort;
    }
    out << (r.nonempty ? "nonempty" : "empty") << "\n";
    out << "certificate: " << r.certificate << "\n";
    out << "Δ(d) = " << r.delta << "\n";
    if (!r.decomposition.empty()) {
        out << "decomposition (Δ sum " << r.bestSplit << "):";
        for (auto& b : r.decomposition) out << " " << root_string(b);
        out << "\n";
    }
    if (!a.output.empty()) {
        json dec = json::array();
        for (auto& b : r.decomposition) dec.push_back(root_json(b));
        write_json(a.output, {{"version", kFormatVersion},
                              {"nonempty", r.nonempty},
                              {"certificate", r.certificate},
                              {"delta", r.delta},
                              {"best_split", r.bestSplit},
                              {"decomposition", dec}});
    }
    return kPass;
}

int cmd_dim(const CommandArgs& a, std::ostream& out) {
    auto p = load(a);
    need((p.graph && p.dims) || !p.orbits.empty(), "dim needs graph and dims, or orbits");
    json j = {{"version", kFormatVersion}};
    if (p.graph && p.dims) {
        const auto& g = p.graph->full;
        const auto dd = cartan_form(g, *p.dims, *p.dims);
        out << "d = " << root_string(*p.dims) << "\n(d,d) = " << dd << "\nΔ(d) = 2 - (d,d) = " << delta_dim(g, *p.dims) << "\n";
        j["cartan"] = dd;
        j["delta"] = delta_dim(g, *p.dims);
    }
    json legs = json::array();
    for (std::size_t k = 0; k < p.orbits.size(); ++k) {
        auto o = p.orbits[k];
        o.jordan.canonicalize();
        Marking m = o.marking.xis.empty() ? minimal_marking(o.jordan) : o.marking;
        auto ld = marking_to_lambda_d(o.jordan, m);
        std::vector<cd> lam = ld.lambda;
        out << "orbit " << k << " " << to_string(o.jordan) << ": leg d = " << root_string(ld.d) << ", lambda = (";
        for (std::size_t q = 0; q < lam.size(); ++q) out << (q ? "," : "") << fmt(lam[q]);
        out << ")\n";
        json l = json::array();
        for (auto x : lam) l.push_back(complex_json(x));
        legs.push_back({{"d", root_json(ld.d)}, {"lambda", l}});
    }
    if (!legs.empty()) j["legs"] = legs;
    if (!a.output.empty()) write_json(a.output, j);
    return kPass;
}

int cmd_readings(const CommandArgs& a, std::ostream& out) {
    auto p = load(a);
    need(p.graph && p.dims, "readings needs graph and dims");
    auto rs = lax_readings(*p.graph, *p.dims);
    json arr = json::array();
    for (const auto& r : rs) {
        out << (r.partAtInfinity < 0 ? std::string("generic     ") : "part " + std::to_string(r.partAtInfinity) + " at ∞  ")
            << r.describe() << "\n";
        arr.push_back({{"part_at_infinity", r.partAtInfinity},
                       {"rank", r.rank},
                       {"simple_poles", r.simplePoles},
                       {"infinity_order", r.infinityOrder}});
    }
    if (!a.output.empty()) write_json(a.output, {{"version", kFormatVersion}, {"readings", arr}});
    return kPass;
}

int cmd_spectral(const CommandArgs& a, std::ostream& out) {
    auto p = load(a);
    need(p.phase.has_value(), "spectral needs phase data");
    auto poly = spectral_poly(*p.phase);
    poly.trim();
    out << "spectral polynomial: degree " << poly.deg_lambda() << " in lambda, " << poly.deg_z() << " in z\n";
    for (int m = 0; m <= poly.deg_lambda(); ++m)
        for (int n = 0; n <= poly.deg_z(); ++n) {
            cd c = poly.coeff(m, n);
            if (std::abs(c) > 1e-12 * std::max(1.0, poly.c.cwiseAbs().maxCoeff()))
                out << "  lambda^" << m << " z^" << n << ": " << fmt(c) << "\n";
        }
    if (!a.output.empty()) write_json(a.output, {{"version", kFormatVersion}, {"coefficients", matrix_json(poly.c)}});
    return kPass;
}

// ---- flows ----

IntegrateOptions flow_options(const CommandArgs& a, const Problem& p) {
    IntegrateOptions o;
    if (a.step) o.step = *a.step;
    else if (p.options.step) o.step = *p.options.step;
    if (p.options.monitorTol) o.monitorTol = *p.options.monitorTol;
    if (p.options.maxHalvings) o.maxHalvings = *p.options.maxHalvings;
    need(o.step > 0, "step must be positive");
    return o;
}

std::vector<TimeVec> path_of(const Problem& p) {
    std::vector<TimeVec> pts{p.phase->t};
    for (auto& t : p.path) pts.push_back(t);
    return pts;
}

std::string csv_path(const std::string& output) {
    std::filesystem::path f(output);
    if (f.extension() == ".json") return f.replace_extension(".csv").string();
    return output + ".csv";
}

int cmd_integrate(const CommandArgs& a, std::ostream& out) {
    auto p = load(a);
    need(p.phase.has_value(), "integrate needs phase data");
    auto o = flow_options(a, p);
    const auto& d0 = *p.phase;
    auto tr = integrate(FlowState{d0, 0.0}, PathSpec{path_of(p)}, o);

    const int powers = 3;
    auto l0 = lambdas(d0);
    auto t0 = residue_traces(d0, powers);
    json states = json::array();
    std::ostringstream csv;
    csv << "index,arc,lambda_drift,trace_drift,abs_log_tau\n";
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
        const auto& s = tr.states[k];
        auto l = lambdas(s.d);
        auto t = residue_traces(s.d, powers);
        double ld = 0, td = 0;
        json lj = json::array(), tj = json::array();
        for (std::size_t i = 0; i < l.size(); ++i) {
            ld = std::max(ld, (l[i] - l0[i]).norm() / std::max(1.0, l0[i].norm()));
            lj.push_back(matrix_json(l[i]));
        }
        for (std::size_t i = 0; i < t.size(); ++i) {
            td = std::max(td, std::abs(t[i] - t0[i]) / std::max(1.0, std::abs(t0[i])));
            tj.push_back(complex_json(t[i]));
        }
        Problem snap;
        snap.phase = s.d;
        json times = json::array();
        for (auto x : s.d.t) times.push_back(complex_json(x));
        states.push_back({{"arc", k < tr.arc.size() ? tr.arc[k] : 0.0},
                          {"times", times},
                          {"blocks", to_json(snap)["phase"]["blocks"]},
                          {"lambdas", lj},
                          {"residue_traces", tj},
                          {"log_tau", complex_json(s.logTau)}});
        csv << k << "," << (k < tr.arc.size() ? tr.arc[k] : 0.0) << "," << ld << "," << td << "," << std::abs(s.logTau) << "\n";
    }
    json j = {{"version", kFormatVersion},
              {"step", o.step},
              {"aborted", tr.aborted},
              {"message", tr.message},
              {"warnings", tr.warnings},
              {"monitors",
               {{"lambda_drift", tr.monitors.lambdaDrift},
                {"trace_drift", tr.monitors.traceDrift},
                {"min_separation", tr.monitors.minSeparation}}},
              {"states", states}};
    if (tr.states.size() == 1) j["input"] = to_json(p);
    if (!a.output.empty()) {
        write_json(a.output, j);
        std::ofstream f(csv_path(a.output));
        if (!f) throw InputError(csv_path(a.output), "cannot write output file");
        f << csv.str();
    }
    const auto& last = tr.states.back();
    out << tr.states.size() << " stored states, step " << o.step << "\n";
    out << "lambda drift " << tr.monitors.lambdaDrift << ", trace drift " << tr.monitors.traceDrift << ", min separation "
        << tr.monitors.minSeparation << "\n";
    out << "log tau at the end " << fmt(last.logTau) << "\n";
    for (auto& w : tr.warnings) out << "warning: " << w << "\n";
    if (tr.aborted) {
        out << "aborted: " << tr.message << "\n";
        return kNumericalAbort;
    }
    return tr.warnings.empty() ? kPass : kFailure;
}

int cmd_tau(const CommandArgs& a, std::ostream& out) {
    auto p = load(a);
    need(p.phase.has_value() && !p.path.empty(), "tau needs phase data and a path");
    auto o = flow_options(a, p);
    if (!a.step && !p.options.step) o.step = 1e-2;
    o.keepAll = false;
    std::vector<cd> g;
    json rows = json::array();
    for (int k = 0; k < 3; ++k) {
        IntegrateOptions ok = o;
        ok.step = o.step / std::pow(2.0, k);
        auto tr = integrate(FlowState{*p.phase, 0.0}, PathSpec{path_of(p)}, ok);
        if (tr.aborted) {
            out << "aborted at step " << ok.step << ": " << tr.message << "\n";
            return kNumericalAbort;
        }
        g.push_back(tr.states.back().logTau);
        out << "step " << std::setw(10) << ok.step << "  Δ log tau = " << fmt(g.back()) << "\n";
        rows.push_back({{"step", ok.step}, {"delta_log_tau", complex_json(g.back())}});
    }
    const double e1 = std::abs(g[0] - g[1]), e2 = std::abs(g[1] - g[2]);
    json j = {{"version", kFormatVersion}, {"runs", rows}};
    if (e2 > 0 && e1 > 0) {
        const double order = std::log2(e1 / e2);
        const cd rich = g[2] + (g[2] - g[1]) / (std::pow(2.0, order) - 1.0);
        out << "observed order " << std::setprecision(4) << order << ", Richardson estimate " << fmt(rich) << "\n";
        j["order"] = order;
        j["richardson"] = complex_json(rich);
    } else {
        out << "the three runs agree exactly\n";
        j["richardson"] = complex_json(g[2]);
    }
    if (!a.output.empty()) write_json(a.output, j);
    return kPass;
}

int cmd_verify(const CommandArgs& a, std::ostream& out, std::ostream& err) {
    std::optional<Problem> p;
    if (!a.file.empty()) p = load_problem(a.file);
    const std::uint64_t seed = seed_of(a, p ? &*p : nullptr);
    int trials = kDefaultTrials;
    if (a.trials) trials = *a.trials;
    else if (p && p->options.trials) trials = *p->options.trials;
    need(trials >= 0, "trials must be nonnegative");
    std::vector<CheckDef> checks;
    try {
        checks = checks_for(a.suite);
    } catch (const std::invalid_argument& e) {
        throw InputError("--suite", e.what());
    }
    if (trials == 0) err << "warning: zero trials, every check passes vacuously\n";
    const int threads = thread_count();
    bool ok = true;
    json arr = json::array();
    out << "suite " << a.suite << ", seed " << seed << ", " << trials << " trials, " << threads << " threads\n";
    for (const auto& c : checks) {
        auto t0 = std::chrono::steady_clock::now();
        auto r = run_check(c, seed, trials, threads);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ok = ok && r.passed;
        out << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(10) << r.suite << std::setw(42) << r.name
            << " worst " << std::setw(11) << std::setprecision(3) << r.worst << " tol " << std::setw(9) << r.tolerance
            << std::fixed << std::setprecision(2) << secs << "s" << std::defaultfloat;
        if (!r.note.empty()) out << "  (" << r.note << ")";
        out << "\n";
        arr.push_back({{"suite", r.suite},
                       {"name", r.name},
                       {"passed", r.passed},
                       {"worst", std::isfinite(r.worst) ? json(r.worst) : json("inf")},
                       {"tolerance", r.tolerance},
                       {"trials", r.trials},
                       {"note", r.note}});
    }
    if (!a.output.empty())
        write_json(a.output,
                   {{"version", kFormatVersion}, {"suite", a.suite}, {"seed", seed}, {"trials", trials}, {"passed", ok}, {"checks", arr}});
    return ok ? kPass : kFailure;
}

int dispatch(const std::string& name, const CommandArgs& a, std::ostream& out, std::ostream& err) {
    if (name == "roots") return cmd_roots(a, out);
    if (name == "reflect") return cmd_reflect(a, out, err);
    if (name == "orbit") return cmd_orbit(a, out);
    if (name == "exists") return cmd_exists(a, out);
    if (name == "dim") return cmd_dim(a, out);
    if (name == "readings") return cmd_readings(a, out);
    if (name == "spectral") return cmd_spectral(a, out);
    if (name == "integrate") return cmd_integrate(a, out);
    if (name == "tau") return cmd_tau(a, out);
    if (name == "verify") return cmd_verify(a, out, err);
    throw InputError("", "unknown command " + name);
}

} // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> n{"roots", "reflect", "orbit", "exists", "dim",
                                            "readings", "spectral", "integrate", "tau", "verify"};
    return n;
}

int run_command(const std::string& name, const CommandArgs& args, std::ostream& out, std::ostream& err) {
    try {
        return dispatch(name, args, out, err);
    } catch (const InputError& e) {
        err << "input error";
        if (!e.where.empty()) err << " at " << e.where;
        err << ": " << e.what() << "\n";
        return kInputError;
    } catch (const Error& e) {
        switch (e.kind) {
        case ErrorKind::BudgetExceeded:
        case ErrorKind::Pole:
        case ErrorKind::Abort:
            err << "numerical failure: " << e.what() << "\n";
            return kNumericalAbort;
        default:
            err << "input error: " << e.what() << "\n";
            return kInputError;
        }
    }
}

} // namespace isomono::cli
