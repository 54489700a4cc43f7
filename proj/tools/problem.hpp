#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "isomono/isoflow.hpp"
#include "isomono/kac_moody.hpp"
#include "isomono/orbit.hpp"

namespace isomono::cli {

using json = nlohmann::json;

// malformed or inconsistent problem file; where is a JSON pointer or line:column
struct InputError : std::runtime_error {
    std::string where;
    InputError(std::string w, const std::string& msg) : std::runtime_error(msg), where(std::move(w)) {}
};

struct LegOrbit {
    JordanData jordan;
    Marking marking;
};

struct Options {
    std::optional<double> step;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<double> monitorTol;
    std::optional<int> maxHalvings;
};

struct Problem {
    int version = 1;
    std::vector<int> parts, legs;          // empty when there is no graph block
    std::optional<SupernovaGraph> graph;
    std::optional<RootVector> dims;        // full node order: core nodes, then legs
    std::optional<ParamVector> params;
    std::optional<PhaseData> phase;
    std::vector<TimeVec> path;
    std::vector<LegOrbit> orbits;
    Options options;
};

constexpr int kFormatVersion = 1;

Problem parse_problem(const std::string& text);
Problem load_problem(const std::string& file);
json to_json(const Problem& p);

json complex_json(cd z);
json matrix_json(const Mat& m);
json param_json(const ParamVector& p, int i);

// phase dims taken from the core part of the graph when the phase block does not list them
std::vector<std::vector<int>> core_dims(const Problem& p);

} // namespace isomono::cli
