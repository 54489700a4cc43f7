#include "isomono/kac_moody.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <sstream>

namespace isomono {

bool Graph::adjacent(int i, int j) const {
    if (i > j) std::swap(i, j);
    return edges.count({i, j}) > 0;
}

std::vector<int> Graph::neighbours(int i) const {
    std::vector<int> out;
    for (auto& [a, b] : edges) {
        if (a == i) out.push_back(b);
        else if (b == i) out.push_back(a);
    }
    return out;
}

int Graph::index_of(const std::string& id) const {
    auto it = std::find(nodes.begin(), nodes.end(), id);
    return it == nodes.end() ? -1 : static_cast<int>(it - nodes.begin());
}

void Graph::add_edge(int i, int j) {
    if (i == j) fail(ErrorKind::Invalid, "self-loop at node " + nodes.at(i));
    if (i > j) std::swap(i, j);
    if (!edges.insert({i, j}).second)
        fail(ErrorKind::Invalid, "multiple edge between " + nodes[i] + " and " + nodes[j]);
}

std::vector<int> SupernovaGraph::part_nodes(int j) const {
    std::vector<int> out;
    for (int i = 0; i < core_size(); ++i)
        if (partOf[i] == j) out.push_back(i);
    return out;
}

ParamVector ParamVector::from_complex(std::vector<cd> v) {
    ParamVector p;
    p.values = std::move(v);
    return p;
}

ParamVector ParamVector::from_rational(std::vector<Rational> re, std::vector<Rational> im) {
    if (im.empty()) im.assign(re.size(), Rational(0));
    if (im.size() != re.size()) fail(ErrorKind::Invalid, "real and imaginary parts differ in length");
    ParamVector p;
    p.exact = true;
    p.re = std::move(re);
    p.im = std::move(im);
    for (std::size_t k = 0; k < p.re.size(); ++k)
        p.values.emplace_back(static_cast<double>(p.re[k]), static_cast<double>(p.im[k]));
    return p;
}

bool ParamVector::is_zero(int i, double tol) const {
    if (exact) return re[i] == 0 && im[i] == 0;
    return std::abs(values[i]) <= tol;
}

Graph build_kpartite(const std::vector<int>& parts) {
    if (parts.empty()) fail(ErrorKind::InvalidPartition, "empty partition");
    Graph g;
    std::vector<int> partOf;
    for (std::size_t j = 0; j < parts.size(); ++j) {
        if (parts[j] <= 0) fail(ErrorKind::InvalidPartition, "part " + std::to_string(j) + " is empty");
        for (int k = 0; k < parts[j]; ++k) {
            g.nodes.push_back("core:" + std::to_string(j) + ":" + std::to_string(k));
            partOf.push_back(static_cast<int>(j));
        }
    }
    for (int a = 0; a < g.size(); ++a)
        for (int b = a + 1; b < g.size(); ++b)
            if (partOf[a] != partOf[b]) g.add_edge(a, b);
    return g;
}

SupernovaGraph build_supernova(const std::vector<int>& parts, const std::vector<int>& legLengths) {
    SupernovaGraph s;
    s.core = build_kpartite(parts);
    s.partSizes = parts;
    for (std::size_t j = 0; j < parts.size(); ++j)
        for (int k = 0; k < parts[j]; ++k) s.partOf.push_back(static_cast<int>(j));
    int n = s.core.size();
    if (static_cast<int>(legLengths.size()) != n)
        fail(ErrorKind::Invalid, "leg lengths must be given for each of the " + std::to_string(n) + " core nodes");
    for (int l : legLengths)
        if (l < 0) fail(ErrorKind::Invalid, "negative leg length");
    s.legLengths = legLengths;
    s.full = s.core;
    s.legNodes.resize(n);
    for (int i = 0; i < n; ++i) {
        int prev = i;
        for (int m = 1; m <= legLengths[i]; ++m) {
            s.full.nodes.push_back("leg:" + std::to_string(i) + ":" + std::to_string(m));
            int id = s.full.size() - 1;
            s.full.add_edge(prev, id);
            s.legNodes[i].push_back(id);
            prev = id;
        }
    }
    return s;
}

static void check_dim(const Graph& g, std::size_t n) {
    if (static_cast<int>(n) != g.size())
        fail(ErrorKind::Invalid, "vector length " + std::to_string(n) + " does not match " +
                                     std::to_string(g.size()) + " nodes");
}

static void check_node(const Graph& g, int i) {
    if (i < 0 || i >= g.size()) fail(ErrorKind::Invalid, "unknown node index " + std::to_string(i));
}

// (u, e_i)
static std::int64_t form_with_simple(const Graph& g, const RootVector& u, int i) {
    std::int64_t s = 2 * u[i];
    for (int j : g.neighbours(i)) s -= u[j];
    return s;
}

std::int64_t cartan_form(const Graph& g, const RootVector& u, const RootVector& v) {
    check_dim(g, u.size());
    check_dim(g, v.size());
    std::int64_t s = 0;
    for (int i = 0; i < g.size(); ++i) s += 2 * u[i] * v[i];
    for (auto& [a, b] : g.edges) s -= u[a] * v[b] + u[b] * v[a];
    return s;
}

std::int64_t delta_dim(const Graph& g, const RootVector& d) { return 2 - cartan_form(g, d, d); }

RootVector reflect_root(const Graph& g, int i, const RootVector& beta) {
    check_node(g, i);
    check_dim(g, beta.size());
    RootVector out = beta;
    out[i] -= form_with_simple(g, beta, i);
    return out;
}

ParamVector reflect_param(const Graph& g, int i, const ParamVector& lambda) {
    check_node(g, i);
    check_dim(g, lambda.values.size());
    ParamVector out = lambda;
    // r_i(lambda)_j = lambda_j - lambda_i C_ij
    out.values[i] = -lambda.values[i];
    for (int j : g.neighbours(i)) out.values[j] = lambda.values[j] + lambda.values[i];
    if (lambda.exact) {
        out.re[i] = -lambda.re[i];
        out.im[i] = -lambda.im[i];
        for (int j : g.neighbours(i)) {
            out.re[j] = lambda.re[j] + lambda.re[i];
            out.im[j] = lambda.im[j] + lambda.im[i];
        }
    }
    return out;
}

cd pairing(const ParamVector& lambda, const RootVector& beta) {
    if (lambda.values.size() != beta.size()) fail(ErrorKind::Invalid, "pairing length mismatch");
    cd s = 0;
    for (std::size_t k = 0; k < beta.size(); ++k) s += lambda.values[k] * static_cast<double>(beta[k]);
    return s;
}

bool pairing_vanishes(const ParamVector& lambda, const RootVector& beta, double tol) {
    if (!lambda.exact) return std::abs(pairing(lambda, beta)) <= tol;
    Rational r = 0, m = 0;
    for (std::size_t k = 0; k < beta.size(); ++k) {
        r += lambda.re[k] * beta[k];
        m += lambda.im[k] * beta[k];
    }
    return r == 0 && m == 0;
}

static bool support_connected(const Graph& g, const RootVector& b) {
    std::vector<int> supp;
    for (int i = 0; i < g.size(); ++i)
        if (b[i] != 0) supp.push_back(i);
    if (supp.empty()) return false;
    std::vector<char> seen(g.size(), 0);
    std::vector<int> stack{supp[0]};
    seen[supp[0]] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int w : g.neighbours(v))
            if (b[w] != 0 && !seen[w]) {
                seen[w] = 1;
                ++count;
                stack.push_back(w);
            }
    }
    return count == supp.size();
}

RootClass classify_root(const Graph& g, const RootVector& beta) {
    check_dim(g, beta.size());
    bool anyPos = false, anyNeg = false;
    for (auto x : beta) {
        if (x > 0) anyPos = true;
        if (x < 0) anyNeg = true;
    }
    if (!anyPos && !anyNeg) fail(ErrorKind::Invalid, "zero vector cannot be classified");
    RootClass out;
    if (anyPos && anyNeg) return out;
    RootVector b = beta;
    if (anyNeg) {
        out.positive = false;
        for (auto& x : b) x = -x;
    }
    for (;;) {
        std::int64_t total = 0;
        int nz = 0;
        for (auto x : b) {
            total += x;
            if (x) ++nz;
        }
        if (nz == 1 && total == 1) {
            out.kind = RootKind::Real;
            return out;
        }
        int pick = -1;
        for (int i = 0; i < g.size(); ++i)
            if (form_with_simple(g, b, i) > 0) {
                pick = i;
                break;
            }
        if (pick < 0) {
            out.kind = support_connected(g, b) ? RootKind::Imaginary : RootKind::NotARoot;
            return out;
        }
        b[pick] -= form_with_simple(g, b, pick);
        if (b[pick] < 0) return out; // mixed signs or a negative multiple of a simple root
    }
}

std::string to_string(RootKind k) {
    switch (k) {
    case RootKind::Real: return "real root";
    case RootKind::Imaginary: return "imaginary root";
    default: return "not a root";
    }
}

namespace {

struct VecLess {
    bool operator()(const RootVector& a, const RootVector& b) const { return a < b; }
};

struct Splitter {
    const Graph& g;
    const std::vector<RootVector>& roots;
    std::vector<std::int64_t> deltas;
    std::size_t budget;
    std::size_t states = 0;
    bool exceeded = false;
    // best sum of deltas over decompositions of gamma into at least one root, and first root used
    std::map<RootVector, std::pair<std::optional<std::int64_t>, int>, VecLess> memo;

    std::optional<std::int64_t> best(const RootVector& gamma) {
        auto it = memo.find(gamma);
        if (it != memo.end()) return it->second.first;
        if (++states > budget) {
            exceeded = true;
            return std::nullopt;
        }
        std::optional<std::int64_t> val;
        int arg = -1;
        for (std::size_t r = 0; r < roots.size() && !exceeded; ++r) {
            const auto& b = roots[r];
            bool fits = true, equal = true;
            for (std::size_t k = 0; k < b.size(); ++k) {
                if (b[k] > gamma[k]) fits = false;
                if (b[k] != gamma[k]) equal = false;
            }
            if (!fits) continue;
            std::optional<std::int64_t> cand;
            if (equal) cand = deltas[r];
            else {
                RootVector rest = gamma;
                for (std::size_t k = 0; k < b.size(); ++k) rest[k] -= b[k];
                auto sub = best(rest);
                if (sub) cand = deltas[r] + *sub;
            }
            if (cand && (!val || *cand > *val)) {
                val = cand;
                arg = static_cast<int>(r);
            }
        }
        if (!exceeded) memo[gamma] = {val, arg};
        return val;
    }

    std::vector<RootVector> unwind(RootVector gamma) {
        std::vector<RootVector> out;
        while (true) {
            auto it = memo.find(gamma);
            if (it == memo.end() || it->second.second < 0) break;
            const auto& b = roots[it->second.second];
            out.push_back(b);
            bool done = (b == gamma);
            for (std::size_t k = 0; k < b.size(); ++k) gamma[k] -= b[k];
            if (done) break;
        }
        return out;
    }
};

} // namespace

DSResult ds_exists(const Graph& g, const ParamVector& lambda, const RootVector& d, std::size_t budget, double tol) {
    check_dim(g, d.size());
    check_dim(g, lambda.values.size());
    DSResult res;
    bool allZero = true;
    for (auto x : d) {
        if (x < 0) {
            res.certificate = "d is not a positive root (negative entry)";
            return res;
        }
        if (x) allZero = false;
    }
    if (allZero) {
        res.certificate = "d is zero";
        return res;
    }
    res.delta = delta_dim(g, d);
    auto cls = classify_root(g, d);
    if (cls.kind == RootKind::NotARoot) {
        res.certificate = "d is not a root";
        return res;
    }
    if (!pairing_vanishes(lambda, d, tol)) {
        res.certificate = "lambda.d != 0";
        return res;
    }

    // positive roots beta <= d with lambda.beta = 0
    std::vector<RootVector> roots;
    RootVector b(d.size(), 0);
    std::size_t visited = 0;
    std::function<void(std::size_t)> walk = [&](std::size_t k) {
        if (res.budgetExceeded) return;
        if (k == d.size()) {
            if (++visited > budget) {
                res.budgetExceeded = true;
                return;
            }
            bool zero = std::all_of(b.begin(), b.end(), [](auto x) { return x == 0; });
            if (zero) return;
            if (classify_root(g, b).kind != RootKind::NotARoot && pairing_vanishes(lambda, b, tol))
                roots.push_back(b);
            return;
        }
        for (std::int64_t v = 0; v <= d[k]; ++v) {
            b[k] = v;
            walk(k + 1);
        }
        b[k] = 0;
    };
    walk(0);
    if (res.budgetExceeded) {
        res.certificate = "budget exceeded while enumerating roots below d";
        return res;
    }

    Splitter sp{g, roots, {}, budget};
    for (auto& r : roots) sp.deltas.push_back(delta_dim(g, r));

    std::optional<std::int64_t> split;
    int arg = -1;
    for (std::size_t r = 0; r < roots.size() && !sp.exceeded; ++r) {
        if (roots[r] == d) continue;
        bool fits = true;
        for (std::size_t k = 0; k < d.size(); ++k)
            if (roots[r][k] > d[k]) fits = false;
        if (!fits) continue;
        RootVector rest = d;
        for (std::size_t k = 0; k < d.size(); ++k) rest[k] -= roots[r][k];
        auto sub = sp.best(rest);
        if (sub && (!split || sp.deltas[r] + *sub > *split)) {
            split = sp.deltas[r] + *sub;
            arg = static_cast<int>(r);
        }
    }
    res.states = sp.states;
    if (split && *split >= res.delta && arg >= 0) {
        res.bestSplit = *split;
        res.decomposition.push_back(roots[arg]);
        RootVector rest = d;
        for (std::size_t k = 0; k < d.size(); ++k) rest[k] -= roots[arg][k];
        auto tail = sp.unwind(rest);
        res.decomposition.insert(res.decomposition.end(), tail.begin(), tail.end());
        res.certificate = "decomposition with Delta(d) <= sum of Delta(d_k)";
        return res;
    }
    if (sp.exceeded) {
        res.budgetExceeded = true;
        res.certificate = "budget exceeded during decomposition search";
        return res;
    }
    if (split) res.bestSplit = *split;
    res.nonempty = true;
    res.certificate = split ? "all criteria hold" : "all criteria hold (no decomposition)";
    return res;
}

static std::string orbit_key(const ParamVector& l, const RootVector& d) {
    std::ostringstream os;
    for (auto x : d) os << x << ',';
    os << '|';
    if (l.exact) {
        for (std::size_t k = 0; k < l.re.size(); ++k) os << l.re[k] << ':' << l.im[k] << ',';
    } else {
        for (auto v : l.values)
            os << std::llround(v.real() * 1e9) << ':' << std::llround(v.imag() * 1e9) << ',';
    }
    return os.str();
}

std::vector<OrbitElement> weyl_orbit(const Graph& g, const ParamVector& lambda, const RootVector& d, int depth,
                                     double tol) {
    check_dim(g, d.size());
    check_dim(g, lambda.values.size());
    std::vector<OrbitElement> out{{lambda, d, {}}};
    std::set<std::string> seen{orbit_key(lambda, d)};
    std::size_t begin = 0;
    for (int level = 0; level < depth; ++level) {
        std::size_t end = out.size();
        for (std::size_t e = begin; e < end; ++e) {
            for (int i = 0; i < g.size(); ++i) {
                if (out[e].lambda.is_zero(i, tol)) continue;
                OrbitElement nx;
                nx.lambda = reflect_param(g, i, out[e].lambda);
                nx.d = reflect_root(g, i, out[e].d);
                if (!seen.insert(orbit_key(nx.lambda, nx.d)).second) continue;
                nx.word.push_back(i);
                nx.word.insert(nx.word.end(), out[e].word.begin(), out[e].word.end());
                out.push_back(std::move(nx));
            }
        }
        begin = end;
    }
    return out;
}

std::string word_string(const Graph& g, const std::vector<int>& word) {
    if (word.empty()) return "id";
    std::string s;
    for (std::size_t k = 0; k < word.size(); ++k) {
        if (k) s += ' ';
        s += "s[" + g.nodes.at(word[k]) + "]";
    }
    return s;
}

} // namespace isomono

namespace isomono {

std::string LaxReading::describe() const {
    std::ostringstream os;
    os << "rank " << rank << ": ";
    int total = simplePoles + (infinityOrder == 1 ? 1 : 0);
    if (infinityOrder == 1) os << total << " simple poles";
    else {
        if (simplePoles) os << simplePoles << " simple pole" << (simplePoles > 1 ? "s" : "") << " + ";
        os << "order-" << infinityOrder << " pole at infinity";
    }
    return os.str();
}

std::vector<LaxReading> lax_readings(const SupernovaGraph& s, const RootVector& d) {
    check_dim(s.full, d.size());
    std::vector<LaxReading> out;
    for (int inf = -1; inf < s.parts(); ++inf) {
        LaxReading r;
        r.partAtInfinity = inf;
        int finiteParts = 0, finiteNodes = 0;
        for (int j = 0; j < s.parts(); ++j) {
            if (j == inf) continue;
            bool used = false;
            for (int i : s.part_nodes(j))
                if (d[i] > 0) {
                    r.rank += d[i];
                    ++finiteNodes;
                    used = true;
                }
            if (used) ++finiteParts;
        }
        if (inf >= 0)
            for (int i : s.part_nodes(inf))
                if (d[i] > 0) ++r.simplePoles;
        if (r.rank == 0) continue;
        if (finiteParts >= 2) r.infinityOrder = 3;
        else if (finiteNodes >= 2) r.infinityOrder = 2;
        else r.infinityOrder = 1;
        out.push_back(r);
    }
    return out;
}

} // namespace isomono
