#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "isomono/common.hpp"

namespace isomono {

using Rational = boost::multiprecision::cpp_rational;
using RootVector = std::vector<std::int64_t>;

struct Graph {
    std::vector<std::string> nodes;
    std::set<std::pair<int, int>> edges; // stored with first < second

    int size() const { return static_cast<int>(nodes.size()); }
    bool adjacent(int i, int j) const;
    std::vector<int> neighbours(int i) const;
    int index_of(const std::string& id) const; // -1 if absent
    void add_edge(int i, int j);
};

// Complete k-partite core with a type A leg glued on each core node.
struct SupernovaGraph {
    Graph core;
    Graph full;
    std::vector<int> partSizes;
    std::vector<int> partOf;     // per core node
    std::vector<int> legLengths; // per core node
    std::vector<std::vector<int>> legNodes; // full-graph indices, walking outward

    int core_size() const { return core.size(); }
    int parts() const { return static_cast<int>(partSizes.size()); }
    std::vector<int> part_nodes(int j) const;
};

// Complex parameters, optionally carried exactly as Gaussian rationals.
struct ParamVector {
    std::vector<cd> values;
    bool exact = false;
    std::vector<Rational> re, im;

    static ParamVector from_complex(std::vector<cd> v);
    static ParamVector from_rational(std::vector<Rational> re, std::vector<Rational> im = {});
    int size() const { return static_cast<int>(values.size()); }
    bool is_zero(int i, double tol = 1e-12) const;
};

Graph build_kpartite(const std::vector<int>& parts);
SupernovaGraph build_supernova(const std::vector<int>& parts, const std::vector<int>& legLengths);

std::int64_t cartan_form(const Graph& g, const RootVector& u, const RootVector& v);
std::int64_t delta_dim(const Graph& g, const RootVector& d);

RootVector reflect_root(const Graph& g, int i, const RootVector& beta);
ParamVector reflect_param(const Graph& g, int i, const ParamVector& lambda);

// pairing lambda . beta
cd pairing(const ParamVector& lambda, const RootVector& beta);
bool pairing_vanishes(const ParamVector& lambda, const RootVector& beta, double tol = 1e-12);

enum class RootKind { Real, Imaginary, NotARoot };

struct RootClass {
    RootKind kind = RootKind::NotARoot;
    bool positive = true;
};

RootClass classify_root(const Graph& g, const RootVector& beta);
std::string to_string(RootKind k);

struct DSResult {
    bool nonempty = false;
    std::string certificate;                // violated criterion or "all criteria hold"
    std::vector<RootVector> decomposition;  // witnessing decomposition when criterion 3 fails
    std::int64_t delta = 0;
    std::int64_t bestSplit = 0;             // best sum over decompositions, if any
    bool budgetExceeded = false;
    std::size_t states = 0;
};

DSResult ds_exists(const Graph& g, const ParamVector& lambda, const RootVector& d,
                   std::size_t budget = 1000000, double tol = 1e-12);

struct OrbitElement {
    ParamVector lambda;
    RootVector d;
    std::vector<int> word; // left to right; the rightmost letter acts first
};

std::vector<OrbitElement> weyl_orbit(const Graph& g, const ParamVector& lambda, const RootVector& d,
                                     int depth, double tol = 1e-12);

std::string word_string(const Graph& g, const std::vector<int>& word);

// One way of reading a core as a space of connections on a trivial bundle.
struct LaxReading {
    int partAtInfinity = -1;   // -1 for the generic reading
    std::int64_t rank = 0;
    int simplePoles = 0;       // finite Fuchsian poles
    int infinityOrder = 1;     // pole order at infinity (1 means Fuchsian there)
    std::string describe() const;
};

// d is indexed by the full node set; only core entries matter. Readings of rank 0 are dropped.
std::vector<LaxReading> lax_readings(const SupernovaGraph& s, const RootVector& d);

} // namespace isomono
