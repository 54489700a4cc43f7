#include "problem.hpp"

#include <fstream>
#include <sstream>

namespace isomono::cli {

namespace {

using Ptr = json::json_pointer;

[[noreturn]] void bad(const Ptr& at, const std::string& msg) { throw InputError(at.to_string(), msg); }

const json& need(const json& j, const Ptr& at, const char* key) {
    if (!j.is_object() || !j.contains(key)) bad(at, std::string("missing field \"") + key + "\"");
    return j.at(key);
}

double num(const json& j, const Ptr& at) {
    if (!j.is_number()) bad(at, "expected a number");
    return j.get<double>();
}

std::int64_t integer(const json& j, const Ptr& at) {
    if (!j.is_number_integer()) bad(at, "expected an integer");
    return j.get<std::int64_t>();
}

const json& array(const json& j, const Ptr& at) {
    if (!j.is_array()) bad(at, "expected an array");
    return j;
}

cd complex_of(const json& j, const Ptr& at) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2) return {num(j[0], at / 0), num(j[1], at / 1)};
    bad(at, "expected a complex number: a number or [re, im]");
}

// one exact component: an integer or a "p/q" string
std::optional<Rational> exact_of(const json& j, const Ptr& at) {
    if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
    if (j.is_string()) {
        try {
            return Rational(j.get<std::string>());
        } catch (const std::exception&) {
            bad(at, "not a rational number: " + j.get<std::string>());
        }
    }
    return std::nullopt;
}

ParamVector params_of(const json& j, const Ptr& at) {
    array(j, at);
    std::vector<Rational> re, im;
    bool exact = true;
    for (std::size_t k = 0; k < j.size() && exact; ++k) {
        const json& e = j[k];
        if (e.is_array() && e.size() == 2) {
            auto a = exact_of(e[0], at / k / 0), b = exact_of(e[1], at / k / 1);
            if (a && b) {
                re.push_back(*a);
                im.push_back(*b);
            } else exact = false;
        } else if (auto a = exact_of(e, at / k)) {
            re.push_back(*a);
            im.push_back(0);
        } else exact = false;
    }
    if (exact) return ParamVector::from_rational(re, im);
    // integers fit either kind; report the first entry that contradicts the first non-integer one
    auto kind = [](const json& e) {
        auto one = [](const json& x) { return x.is_string() ? 1 : (x.is_number_float() ? 2 : 0); };
        if (!(e.is_array() && e.size() == 2)) return one(e);
        const int a = one(e[0]), b = one(e[1]);
        return a == 1 || b == 1 ? 1 : std::max(a, b);
    };
    int first = 0;
    for (std::size_t k = 0; k < j.size(); ++k) {
        const int c = kind(j[k]);
        if (c == 0) continue;
        if (first == 0) first = c;
        else if (c != first) bad(at / k, "mixing exact and floating-point entries in one parameter vector");
    }
    std::vector<cd> v;
    for (std::size_t k = 0; k < j.size(); ++k) v.push_back(complex_of(j[k], at / k));
    return ParamVector::from_complex(v);
}

TimeVec times_of(const json& j, const Ptr& at) {
    array(j, at);
    TimeVec v;
    for (std::size_t k = 0; k < j.size(); ++k) v.push_back(complex_of(j[k], at / k));
    return v;
}

Mat matrix_of(const json& j, const Ptr& at, int rows, int cols) {
    array(j, at);
    if (static_cast<int>(j.size()) != rows) bad(at, "expected " + std::to_string(rows) + " rows");
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const json& row = array(j[r], at / r);
        if (static_cast<int>(row.size()) != cols) bad(at / r, "expected " + std::to_string(cols) + " columns");
        for (int c = 0; c < cols; ++c) m(r, c) = complex_of(row[c], at / r / c);
    }
    return m;
}

FourierPoint point_of(const json& j, const Ptr& at) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return FourierPoint::inf();
        bad(at, "the only string allowed for a point is \"inf\"");
    }
    return FourierPoint::at(complex_of(j, at));
}

std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < byte && k < text.size(); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else ++col;
    }
    return std::to_string(line) + ":" + std::to_string(col);
}

void parse_phase(const json& j, const Ptr& at, Problem& p) {
    PhaseData d;
    const json& pts = array(need(j, at, "points"), at / "points");
    for (std::size_t k = 0; k < pts.size(); ++k) d.a.points.push_back(point_of(pts[k], at / "points" / k));

    std::vector<std::vector<int>> dims;
    if (j.contains("dims")) {
        const json& dj = array(j.at("dims"), at / "dims");
        for (std::size_t k = 0; k < dj.size(); ++k) {
            std::vector<int> part;
            const json& pj = array(dj[k], at / "dims" / k);
            for (std::size_t q = 0; q < pj.size(); ++q) {
                auto v = integer(pj[q], at / "dims" / k / q);
                if (v <= 0) bad(at / "dims" / k / q, "node dimensions must be positive");
                part.push_back(static_cast<int>(v));
            }
            dims.push_back(part);
        }
    } else {
        try {
            dims = core_dims(p);
        } catch (const InputError& e) {
            bad(at / "dims", e.what());
        }
    }
    if (dims.size() != d.a.points.size()) bad(at / "points", "one point per part required");
    for (std::size_t x = 0; x < d.a.points.size(); ++x)
        for (std::size_t y = x + 1; y < d.a.points.size(); ++y)
            if (d.a.points[x].same_as(d.a.points[y])) bad(at / "points" / y, "points must be distinct");
    try {
        d.g = GradedSpace(dims);
        d.a.validate();
    } catch (const Error& e) {
        bad(at, e.what());
    }

    const json& tj = need(j, at, "times");
    d.t = times_of(tj, at / "times");
    if (static_cast<int>(d.t.size()) != d.g.num_nodes())
        bad(at / "times", "expected one time per node (" + std::to_string(d.g.num_nodes()) + ")");
    for (int part = 0; part < d.g.num_parts(); ++part) {
        auto nodes = d.g.nodes_of_part(part);
        for (std::size_t x = 0; x < nodes.size(); ++x)
            for (std::size_t y = x + 1; y < nodes.size(); ++y)
                if (std::abs(d.t[nodes[x]] - d.t[nodes[y]]) == 0.0)
                    bad(at / "times" / nodes[y], "times must be distinct within a part");
    }

    d.gamma = Mat::Zero(d.g.size(), d.g.size());
    if (j.contains("blocks")) {
        const json& bj = array(j.at("blocks"), at / "blocks");
        for (std::size_t k = 0; k < bj.size(); ++k) {
            const Ptr b = at / "blocks" / k;
            auto row = integer(need(bj[k], b, "row"), b / "row");
            auto col = integer(need(bj[k], b, "col"), b / "col");
            if (row < 0 || row >= d.g.num_nodes()) bad(b / "row", "no such node");
            if (col < 0 || col >= d.g.num_nodes()) bad(b / "col", "no such node");
            const int r = static_cast<int>(row), c = static_cast<int>(col);
            if (d.g.node_part(r) == d.g.node_part(c)) bad(b, "blocks must join nodes of different parts");
            Mat m = matrix_of(need(bj[k], b, "matrix"), b / "matrix", d.g.node_dim(r), d.g.node_dim(c));
            d.gamma(d.g.node_indices(r), d.g.node_indices(c)) = m;
        }
    }
    p.phase = d;
}

void parse_orbits(const json& j, const Ptr& at, Problem& p) {
    array(j, at);
    for (std::size_t k = 0; k < j.size(); ++k) {
        const Ptr o = at / k;
        LegOrbit leg;
        const json& jd = array(need(j[k], o, "jordan"), o / "jordan");
        for (std::size_t q = 0; q < jd.size(); ++q) {
            const Ptr b = o / "jordan" / q;
            cd s = complex_of(need(jd[q], b, "eigenvalue"), b / "eigenvalue");
            Partition part;
            const json& pj = array(need(jd[q], b, "partition"), b / "partition");
            for (std::size_t r = 0; r < pj.size(); ++r) {
                auto v = integer(pj[r], b / "partition" / r);
                if (v <= 0) bad(b / "partition" / r, "partition entries must be positive");
                part.push_back(static_cast<int>(v));
                leg.jordan.n += static_cast<int>(v);
            }
            leg.jordan.blocks.emplace_back(s, part);
        }
        if (j[k].contains("marking")) leg.marking.xis = times_of(j[k].at("marking"), o / "marking");
        p.orbits.push_back(leg);
    }
}

void parse_options(const json& j, const Ptr& at, Problem& p) {
    if (!j.is_object()) bad(at, "expected an object");
    if (j.contains("step")) {
        double s = num(j.at("step"), at / "step");
        if (!(s > 0)) bad(at / "step", "step must be positive");
        p.options.step = s;
    }
    if (j.contains("seed")) {
        auto s = integer(j.at("seed"), at / "seed");
        if (s < 0) bad(at / "seed", "seed must be nonnegative");
        p.options.seed = static_cast<std::uint64_t>(s);
    }
    if (j.contains("trials")) {
        auto t = integer(j.at("trials"), at / "trials");
        if (t < 0) bad(at / "trials", "trials must be nonnegative");
        p.options.trials = static_cast<int>(t);
    }
    if (j.contains("monitor_tol")) p.options.monitorTol = num(j.at("monitor_tol"), at / "monitor_tol");
    if (j.contains("max_halvings")) p.options.maxHalvings = static_cast<int>(integer(j.at("max_halvings"), at / "max_halvings"));
}

std::string rational_string(const Rational& r) { return r.str(); }

} // namespace

std::vector<std::vector<int>> core_dims(const Problem& p) {
    if (!p.graph || !p.dims) throw InputError("", "phase dims are needed (no graph and dims to derive them from)");
    std::vector<std::vector<int>> out;
    for (int j = 0; j < p.graph->parts(); ++j) {
        std::vector<int> part;
        for (int i : p.graph->part_nodes(j)) {
            auto v = (*p.dims)[i];
            if (v <= 0) throw InputError("", "core node dimensions must be positive to build phase data");
            part.push_back(static_cast<int>(v));
        }
        out.push_back(part);
    }
    return out;
}

Problem parse_problem(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(line_col(text, e.byte), "JSON syntax error");
    }
    const Ptr root;
    if (!j.is_object()) bad(root, "the problem file must be a JSON object");
    Problem p;
    p.version = static_cast<int>(integer(need(j, root, "version"), root / "version"));
    if (p.version != kFormatVersion) bad(root / "version", "unsupported version " + std::to_string(p.version));

    static const std::vector<std::string> known{"version", "graph", "dims", "params", "phase", "path", "orbits", "options"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) bad(root / it.key(), "unknown field");

    if (j.contains("graph")) {
        const Ptr g = root / "graph";
        const json& gj = j.at("graph");
        const json& pj = array(need(gj, g, "parts"), g / "parts");
        for (std::size_t k = 0; k < pj.size(); ++k) p.parts.push_back(static_cast<int>(integer(pj[k], g / "parts" / k)));
        if (gj.contains("legs")) {
            const json& lj = array(gj.at("legs"), g / "legs");
            for (std::size_t k = 0; k < lj.size(); ++k) p.legs.push_back(static_cast<int>(integer(lj[k], g / "legs" / k)));
        } else {
            int n = 0;
            for (int x : p.parts) n += std::max(x, 0);
            p.legs.assign(n, 0);
        }
        try {
            p.graph = build_supernova(p.parts, p.legs);
        } catch (const Error& e) {
            bad(g, e.what());
        }
    }
    if (j.contains("dims")) {
        if (!p.graph) bad(root / "dims", "dims need a graph");
        const json& dj = array(j.at("dims"), root / "dims");
        if (static_cast<int>(dj.size()) != p.graph->full.size())
            bad(root / "dims", "expected " + std::to_string(p.graph->full.size()) + " entries (one per node)");
        RootVector d;
        for (std::size_t k = 0; k < dj.size(); ++k) d.push_back(integer(dj[k], root / "dims" / k));
        p.dims = d;
    }
    if (j.contains("params")) {
        if (!p.graph) bad(root / "params", "params need a graph");
        p.params = params_of(j.at("params"), root / "params");
        if (p.params->size() != p.graph->full.size())
            bad(root / "params", "expected " + std::to_string(p.graph->full.size()) + " entries (one per node)");
    }
    if (p.dims && p.params) {
        bool ok;
        if (p.params->exact) {
            Rational re = 0, im = 0;
            for (int k = 0; k < p.params->size(); ++k) {
                re += p.params->re[k] * (*p.dims)[k];
                im += p.params->im[k] * (*p.dims)[k];
            }
            ok = re == 0 && im == 0;
        } else ok = std::abs(pairing(*p.params, *p.dims)) <= 1e-10;
        if (!ok) bad(root / "params", "lambda . d must vanish");
    }
    if (j.contains("phase")) parse_phase(j.at("phase"), root / "phase", p);
    if (j.contains("path")) {
        if (!p.phase) bad(root / "path", "a path needs phase data");
        const json& pj = array(j.at("path"), root / "path");
        for (std::size_t k = 0; k < pj.size(); ++k) {
            auto t = times_of(pj[k], root / "path" / k);
            if (static_cast<int>(t.size()) != p.phase->g.num_nodes()) bad(root / "path" / k, "wrong number of times");
            p.path.push_back(t);
        }
    }
    if (j.contains("orbits")) parse_orbits(j.at("orbits"), root / "orbits", p);
    if (j.contains("options")) parse_options(j.at("options"), root / "options", p);
    return p;
}

Problem load_problem(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw InputError(file, "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_problem(ss.str());
    } catch (const InputError& e) {
        throw InputError(file + (e.where.empty() ? "" : ":" + e.where), e.what());
    }
}

json complex_json(cd z) { return json::array({z.real(), z.imag()}); }

json matrix_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_json(m(r, c)));
        rows.push_back(row);
    }
    return rows;
}

json param_json(const ParamVector& p, int i) {
    if (p.exact) return json::array({rational_string(p.re[i]), rational_string(p.im[i])});
    return complex_json(p.values[i]);
}

json to_json(const Problem& p) {
    json j;
    j["version"] = p.version;
    if (p.graph) j["graph"] = {{"parts", p.parts}, {"legs", p.legs}};
    if (p.dims) j["dims"] = *p.dims;
    if (p.params) {
        json a = json::array();
        for (int k = 0; k < p.params->size(); ++k) a.push_back(param_json(*p.params, k));
        j["params"] = a;
    }
    if (p.phase) {
        const auto& d = *p.phase;
        json ph;
        json pts = json::array();
        for (auto& pt : d.a.points) pts.push_back(pt.infinite ? json("inf") : complex_json(pt.value));
        ph["points"] = pts;
        ph["dims"] = d.g.dims;
        json t = json::array();
        for (auto x : d.t) t.push_back(complex_json(x));
        ph["times"] = t;
        json blocks = json::array();
        for (int r = 0; r < d.g.num_nodes(); ++r)
            for (int c = 0; c < d.g.num_nodes(); ++c) {
                if (d.g.node_part(r) == d.g.node_part(c)) continue;
                Mat m = d.gamma(d.g.node_indices(r), d.g.node_indices(c));
                if (m.norm() == 0.0) continue;
                blocks.push_back({{"row", r}, {"col", c}, {"matrix", matrix_json(m)}});
            }
        ph["blocks"] = blocks;
        j["phase"] = ph;
    }
    if (!p.path.empty()) {
        json a = json::array();
        for (auto& t : p.path) {
            json v = json::array();
            for (auto x : t) v.push_back(complex_json(x));
            a.push_back(v);
        }
        j["path"] = a;
    }
    if (!p.orbits.empty()) {
        json a = json::array();
        for (auto& o : p.orbits) {
            json blocks = json::array();
            for (auto& [s, part] : o.jordan.blocks) blocks.push_back({{"eigenvalue", complex_json(s)}, {"partition", part}});
            json e = {{"jordan", blocks}};
            if (!o.marking.xis.empty()) {
                json m = json::array();
                for (auto x : o.marking.xis) m.push_back(complex_json(x));
                e["marking"] = m;
            }
            a.push_back(e);
        }
        j["orbits"] = a;
    }
    json opt = json::object();
    if (p.options.step) opt["step"] = *p.options.step;
    if (p.options.seed) opt["seed"] = *p.options.seed;
    if (p.options.trials) opt["trials"] = *p.options.trials;
    if (p.options.monitorTol) opt["monitor_tol"] = *p.options.monitorTol;
    if (p.options.maxHalvings) opt["max_halvings"] = *p.options.maxHalvings;
    if (!opt.empty()) j["options"] = opt;
    return j;
}

} // namespace isomono::cli
