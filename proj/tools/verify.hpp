#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "isomono/isoflow.hpp"

namespace isomono::cli {

// one seeded check; a trial returns a residual already divided by its scale
struct CheckDef {
    std::string suite, name;
    double tolerance = 0.0;
    std::function<double(std::uint64_t seed)> trial;
};

struct CheckResult {
    std::string suite, name;
    double tolerance = 0.0;
    double worst = 0.0;
    int trials = 0;
    bool passed = true;
    std::string note; // first failure message, if any
};

const std::vector<std::string>& suite_names(); // without "all"
std::vector<CheckDef> checks_for(const std::string& suite);
const CheckDef& find_check(const std::string& name);

// trials run on a worker pool; results are aggregated in trial order
CheckResult run_check(const CheckDef& c, std::uint64_t seed, int trials, int threads);

// worker count from ISOFLOW_THREADS, else the hardware concurrency
int thread_count();

// seeded generators shared with the acceptance run
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
PhaseData random_instance(std::uint64_t seed, int maxDim, int maxNodeDim = 2, bool allowInf = true);
PhaseData random_jmms(std::uint64_t seed);
PhaseData random_schlesinger(std::uint64_t seed); // rank two, four poles at infinity
Mobius random_mobius(std::mt19937_64& rng);
TimeVec random_times(std::mt19937_64& rng, const PhaseData& d);

} // namespace isomono::cli
