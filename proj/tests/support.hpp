#pragma once

#include <random>
#include <vector>

#include "isomono/kac_moody.hpp"

namespace fixtures {

using namespace isomono;

inline cd crand(std::mt19937_64& rng, double s = 1.0) {
    std::normal_distribution<double> n(0.0, s);
    return {n(rng), n(rng)};
}

inline Mat mrand(std::mt19937_64& rng, int r, int c, double s = 1.0) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = crand(rng, s);
    return m;
}

// triangle with a leg of length one on core:0:0
inline SupernovaGraph a2pp() { return build_supernova({1, 1, 1}, {1, 0, 0}); }

// conventional labels 1..4 (foot, middle, two more triangle nodes) to canonical indices
inline int a2pp_node(int label) {
    static const int map[5] = {-1, 3, 0, 1, 2};
    return map[label];
}

inline RootVector a2pp_vec(std::initializer_list<std::int64_t> labelled) {
    RootVector out(4, 0);
    int l = 1;
    for (auto x : labelled) out[a2pp_node(l++)] = x;
    return out;
}

// affine D4: three feet in one part, the centre in another, a one-node leg on the centre
inline SupernovaGraph affine_d4() { return build_supernova({3, 1}, {0, 0, 0, 1}); }
inline RootVector affine_d4_delta() { return {1, 1, 1, 2, 1}; }

inline SupernovaGraph triangle() { return build_supernova({1, 1, 1}, {0, 0, 0}); }
inline SupernovaGraph square() { return build_supernova({2, 2}, {0, 0, 0, 0}); }

} // namespace fixtures
