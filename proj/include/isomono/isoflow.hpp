#pragma once

#include <functional>
#include <string>
#include <vector>

#include "isomono/phase_space.hpp"

namespace isomono {

// a tangent vector to the space of times: one velocity per node
using TimeVec = std::vector<cd>;

struct FlowState {
    PhaseData d;
    cd logTau{0.0};
};

// ad_T^-1 [dT, R] on the index set idx of V; R must be part-block-diagonal there
Mat tilde(const PhaseData& d, const std::vector<int>& idx, const Mat& R, const TimeVec& dt);
Mat tilde(const PhaseData& d, const Mat& R, const TimeVec& dt);

// the Hamiltonian one-form and its pieces
cd varpi(const PhaseData& d, const TimeVec& dt);
cd varpi1(const PhaseData& d, const TimeVec& dt);
cd varpi_infinity(const PhaseData& d, const TimeVec& dt);
// residues at the simple poles plus the contribution at infinity
cd varpi_residue_form(const PhaseData& d, const TimeVec& dt);
// H_i = varpi(e_i)
cd hamiltonian(const PhaseData& d, int node);

// dGamma along dt, from the Gamma/Xi form of the equations
Mat vector_field(const PhaseData& d, const TimeVec& dt);
// the same field assembled from the equations for Q, P and B
Mat vector_field_qpb(const PhaseData& d, const TimeVec& dt);
// the same field assembled block by block over pairs of parts
Mat vector_field_blocks(const PhaseData& d, const TimeVec& dt);
// the two-part equations for (Q, P) with parts {infinity, 0}
Mat vector_field_jmms(const PhaseData& d, const TimeVec& dt);
cd varpi_jmms(const PhaseData& d, const TimeVec& dt);

// omega-Hamiltonian flow of a function on the fibre, by central differences
Mat hamiltonian_flow(const PhaseData& d, const std::function<cd(const PhaseData&)>& f, double h = 1e-5);

struct ConnectionEval {
    Mat Bz;              // dz component on U_inf
    std::vector<Mat> Bt; // dt_i components, one per node
};

// value of the full connection on the tangent (dz, dt)
Mat full_connection_form(const PhaseData& d, cd z, cd dz, const TimeVec& dt);
ConnectionEval full_connection(const PhaseData& d, cd z);

// connection on U_i whose horizontal sections are Q_i (and dual ones P_i)
Mat local_connection(const PhaseData& d, int node, const TimeVec& dt);
// restriction of the full connection to z = t_i without the singular term, for i at infinity
Mat restricted_connection(const PhaseData& d, int node, const TimeVec& dt);

// ---- normal form at infinity ----
struct NormalFormData {
    Mat X, R, Lambda, Y1, L2, h1, g1;
    Mat A1;                       // resonant correction, zero when nonresonant
    std::vector<bool> resonant;   // per U_inf node
    bool anyResonant = false;
};

NormalFormData leading_term(const PhaseData& d, double resonanceTol = 1e-8);

struct SeriesCheck {
    Mat g1;
    bool g1Determined = false; // the truncated system fixes g1 uniquely
    double residual = 0.0;     // least-squares residual of the truncated system
};

// solve the gauge recursion to normal form up to the given order as one linear system
SeriesCheck gauge_series(const PhaseData& d, int order = 3);

// ---- gauge terms ----
// Tr(Gamma Xi theta), theta = lambda T dT with lambda constant on each part
cd gauge_term(const PhaseData& d, const std::vector<cd>& lambda, const TimeVec& dt);
// [theta, Gamma]
Mat gauge_field(const PhaseData& d, const std::vector<cd>& lambda, const TimeVec& dt);

// ---- specialisations ----
// parts {infinity, 0}: (W_inf, W_0, P, Q, C, T_0) -> (W_0, W_inf, Q, -P, T_0, -C)
PhaseData harnad_dual(const PhaseData& d);
TimeVec harnad_dual_times(const PhaseData& d, const TimeVec& dt);
Mat harnad_dual_tangent(const PhaseData& d, const Mat& u);

// data on U_inf seen by the projected equations
struct ReducedData {
    PhaseData shape;          // supplies grading, points and times
    Mat B;                    // on U_inf
    std::vector<int> poles;   // nodes of the part at infinity
    std::vector<Mat> R;       // residue per pole, on U_inf
};

ReducedData reduce(const PhaseData& d);

struct ProjectedField {
    Mat dB;
    std::vector<Mat> dR;
};

ProjectedField projected_field(const ReducedData& r, const TimeVec& dt);
ProjectedField projected_field(const PhaseData& d, const TimeVec& dt);

// equations when no part sits at infinity
Mat master_field(const PhaseData& d, const TimeVec& dt);

// ---- integration ----
struct PathSpec {
    std::vector<TimeVec> points; // waypoints; the first is the start
};

struct Monitors {
    double lambdaDrift = 0.0;
    double traceDrift = 0.0;
    double minSeparation = 0.0;
};

struct Trajectory {
    std::vector<FlowState> states;
    std::vector<double> arc; // parameter along the path for each state
    Monitors monitors;
    bool aborted = false;
    std::string message;
    std::vector<std::string> warnings;
};

struct IntegrateOptions {
    double step = 1e-3;
    double monitorTol = 1e-4;
    int maxHalvings = 0;   // halve the step on a monitor breach this many times
    bool keepAll = true;   // store every step rather than only waypoints
    // optional extra field added to the flow (e.g. a gauge term)
    std::function<Mat(const PhaseData&, const TimeVec&)> extra;
};

Trajectory integrate(const FlowState& s, const PathSpec& path, const IntegrateOptions& opt = {});

// flow Gamma to new times along a straight segment with a fixed number of RK4 steps
FlowState flow_to(const FlowState& s, const TimeVec& target, int steps);

struct IntegrabilityResiduals {
    cd f;          // dH_j/dt_i - dH_i/dt_j + {H_i, H_j}
    cd symmetry;   // dH_i/dt_j - dH_j/dt_i
    cd bracket;    // {H_i, H_j}
};

IntegrabilityResiduals integrability_residuals(const PhaseData& d, int i, int j, double h = 1e-4);

// curvature of the full connection along a solution by central differences
Mat curvature_times(const PhaseData& d, int i, int j, double h, cd z);
Mat curvature_z(const PhaseData& d, int i, double h, cd z);

// conserved quantities
std::vector<Mat> lambdas(const PhaseData& d);
std::vector<cd> residue_traces(const PhaseData& d, int maxPower);

TimeVec unit_time(const PhaseData& d, int node);

} // namespace isomono
