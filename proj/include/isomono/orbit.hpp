#pragma once

#include <utility>
#include <vector>

#include "isomono/common.hpp"
#include "isomono/kac_moody.hpp"

namespace isomono {

using Partition = std::vector<int>;

// Jordan type: one partition per eigenvalue.
struct JordanData {
    std::vector<std::pair<cd, Partition>> blocks;
    int n = 0;

    void canonicalize(double tol = 1e-10); // merge equal eigenvalues, sort, drop empty partitions
    Partition partition_of(cd s, double tol = 1e-10) const;
    bool same_as(const JordanData& o, double tol = 1e-10) const;
    int parts_at(cd s, double tol = 1e-10) const { return static_cast<int>(partition_of(s, tol).size()); }
};

struct Marking {
    std::vector<cd> xis;
    bool special(double tol = 0.0) const { return !xis.empty() && std::abs(xis[0]) <= tol; }
};

struct LegData {
    std::vector<cd> lambda;
    RootVector d;
};

struct LegChain {
    std::vector<int> dims;
    std::vector<Mat> p; // p[i] : V_i -> V_{i+1}
    std::vector<Mat> q; // q[i] : V_{i+1} -> V_i
    Mat Lambda;
};

// Jordan matrix, blocks ordered as in the data, upper bidiagonal
Mat jordan_matrix(const JordanData& j);

// rank of prod (A - xi_k) for A in the orbit, from the partitions alone
int orbit_product_rank(const JordanData& j, const std::vector<cd>& xis, double tol = 1e-10);

bool marking_annihilates(const JordanData& j, const Marking& m, double tol = 1e-10);
Marking minimal_marking(const JordanData& j);

LegData marking_to_lambda_d(const JordanData& orbit, const Marking& marking, double tol = 1e-10);
LegChain realize_leg(const JordanData& orbit, const Marking& marking, double tol = 1e-10);

JordanData contract_orbit(const JordanData& qp, double zeroTol = 0.0); // eigenvalues within zeroTol of 0 count as 0
JordanData expand_orbit(const JordanData& pq, int targetDim);

Marking specialize_marking(const Marking& m);

struct ShiftedOrbits {
    std::vector<JordanData> orbits;
    JordanData residual;
};

ShiftedOrbits scalar_shift(const std::vector<JordanData>& orbits, const JordanData& residual,
                           const std::vector<cd>& shifts);

// Jordan type of a float matrix: eigenvalues clustered at ctol, block sizes from ranks of powers
JordanData jordan_numeric(const Mat& m, double ctol = 1e-6, double rankTol = 1e-8);

struct RatMatrix {
    int rows = 0, cols = 0;
    std::vector<Rational> a;

    RatMatrix() = default;
    RatMatrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, Rational(0)) {}
    static RatMatrix identity(int n);
    Rational& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    const Rational& operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
    Mat to_complex() const;
};

RatMatrix rat_mul(const RatMatrix& x, const RatMatrix& y);
int rat_rank(RatMatrix m);

// Jordan type of a rational matrix with integer spectrum, decided exactly
JordanData jordan_exact(const RatMatrix& m);

std::string to_string(const JordanData& j);

// Integer P : U -> V surjective and Q : V -> U injective with QP conjugate to the Jordan matrix
// of qp (integer eigenvalues). Conjugation and the V-side change of basis are random unimodular.
struct PQPair {
    RatMatrix P, Q;
};
PQPair random_pq_pair(const JordanData& qp, std::uint64_t seed);

// random Jordan data with integer eigenvalues in [-emax, emax], n in [1, nmax]
JordanData random_integer_jordan(std::uint64_t seed, int nmax, int emax = 2);

} // namespace isomono
