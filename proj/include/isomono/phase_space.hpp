#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "isomono/common.hpp"

namespace isomono {

// a point of the Fourier sphere
struct FourierPoint {
    bool infinite = false;
    cd value{};

    static FourierPoint inf() { return {true, {}}; }
    static FourierPoint at(cd v) { return {false, v}; }
    bool same_as(const FourierPoint& o, double tol = 1e-12) const;
};

struct FourierConfig {
    std::vector<FourierPoint> points; // one per part

    int size() const { return static_cast<int>(points.size()); }
    int infinity_part() const; // -1 if none
    cd phi(int j, int k) const;
    void validate() const;
};

// parts J, each a list of node dimensions; nodes are numbered part by part
struct GradedSpace {
    std::vector<std::vector<int>> dims;

    GradedSpace() = default;
    explicit GradedSpace(std::vector<std::vector<int>> d);

    int size() const { return n_; }
    int num_parts() const { return static_cast<int>(dims.size()); }
    int num_nodes() const { return static_cast<int>(nodePart_.size()); }
    int node_part(int i) const { return nodePart_[i]; }
    int node_offset(int i) const { return nodeOffset_[i]; }
    int node_dim(int i) const { return nodeDim_[i]; }
    int part_offset(int j) const { return partOffset_[j]; }
    int part_dim(int j) const;
    std::vector<int> nodes_of_part(int j) const;

    std::vector<int> part_indices(int j) const;
    std::vector<int> complement_indices(int j) const; // U_j
    std::vector<int> node_indices(int i) const;

private:
    int n_ = 0;
    std::vector<int> nodePart_, nodeOffset_, nodeDim_, partOffset_;
};

// Gamma with zero diagonal part-blocks, times t_i per node, points a_j per part
struct PhaseData {
    FourierConfig a;
    GradedSpace g;
    Mat gamma;
    std::vector<cd> t;

    void validate() const;
    Mat xi() const;
    Mat T_hat() const;
    Mat T_hat(const std::vector<cd>& dt) const;
};

// blocks with respect to V = W_inf + U_inf
struct InfinityBlocks {
    std::vector<int> W, U;
    Mat P, Q, B, X, C, T, A;
};

InfinityBlocks infinity_blocks(const PhaseData& d);

// phi_{part(r),part(c)} at every entry
Mat phi_matrix(const FourierConfig& a, const GradedSpace& g);
Mat apply_phi(const FourierConfig& a, const GradedSpace& g, const Mat& m);
Mat apply_phi_inverse(const FourierConfig& a, const GradedSpace& g, const Mat& m);
Mat part_diagonal(const GradedSpace& g, const Mat& m);
Mat off_part(const GradedSpace& g, const Mat& m);
Mat node_diagonal(const GradedSpace& g, const Mat& m);
Mat diag_of_nodes(const GradedSpace& g, const std::vector<cd>& perNode);
Mat diag_of_parts(const GradedSpace& g, const std::vector<cd>& perPart);

// alpha d + beta z - gamma with alpha, beta block scalars
struct WeylMatrix {
    Mat alpha, beta, gamma;
};

WeylMatrix assemble(const PhaseData& d);

struct Normalized {
    PhaseData data;
    Mat left, right; // assemble(data) = left * input * right for alpha, beta and gamma
};

Normalized normalize(const Mat& alpha, const Mat& beta, const Mat& gamma, double tol = 1e-9);

cd omega(const FourierConfig& a, const GradedSpace& g, const Mat& u, const Mat& v);

struct Mobius {
    cd a{1.0}, b{0.0}, c{0.0}, d{1.0};

    static Mobius identity() { return {}; }
    static Mobius scaling(cd s) { return {1.0 / s, 0.0, 0.0, s}; }
    static Mobius shear(cd s) { return {1.0, s, 0.0, 1.0}; }
    static Mobius fourier_laplace() { return {0.0, -1.0, 1.0, 0.0}; }
    Mobius operator*(const Mobius& o) const; // matrix product; (g*h) acts as g then h
    Mobius inverse() const;
    cd det() const { return a * d - b * c; }
};

struct SL2Action {
    FourierConfig a;
    std::vector<cd> multipliers; // per part; Gamma' = N Gamma, T' = N T
};

SL2Action sl2_multipliers(const Mobius& g, const FourierConfig& a);
PhaseData sl2_act(const Mobius& g, const PhaseData& d);
Mat sl2_tangent(const Mobius& g, const PhaseData& d, const Mat& u);

struct NodeResidue {
    std::vector<int> U; // indices of U_i in V
    Mat Q, P, R, Lambda;
};

std::vector<NodeResidue> residues(const PhaseData& d);

struct Stability {
    bool reducible = false;
    int node = -1;                // node of the generating vector
    std::vector<Mat> witness;     // per-node basis of the invariant subspace
    bool dual = false;            // witness found as annihilator of a dual closure
    int algebraDim = 0;           // dimension of the algebra generated by Gamma and the idempotents
};

// irreducible iff the generated algebra is all of End(V); witnesses come from closures of random vectors
Stability is_stable(const PhaseData& d, int trials = 16, std::uint64_t seed = 1, double tol = 1e-9);
bool is_invariant(const PhaseData& d, const std::vector<Mat>& basis, double tol = 1e-9);

// Az + B + T + Q (z - C)^-1 P on U_inf
Mat connection_matrix(const PhaseData& d, cd z);

// oriented core edges (tail node, head node)
struct Orientation {
    std::vector<std::pair<int, int>> edges;
};

Orientation default_orientation(const GradedSpace& g);
Mat cotangent_twist(const PhaseData& d, const Orientation& o);
Mat cotangent_moment(const GradedSpace& g, const Orientation& o, const Mat& rho, int node);
cd cotangent_omega(const GradedSpace& g, const Orientation& o, const Mat& u, const Mat& v);
cd edge_phi(const FourierConfig& a, const GradedSpace& g, int tail, int head);

// random off-part-diagonal Gamma, times with a margin inside each part
PhaseData random_phase(std::uint64_t seed, const std::vector<FourierPoint>& points,
                       const std::vector<std::vector<int>>& dims, double scale = 1.0);

} // namespace isomono
