#include "verify.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "isomono/kac_moody.hpp"
#include "isomono/orbit.hpp"
#include "isomono/spectral.hpp"

namespace isomono::cli {

namespace {

const FourierPoint INF = FourierPoint::inf();
FourierPoint at(cd v) { return FourierPoint::at(v); }

cd crand(std::mt19937_64& rng, double s = 1.0) {
    std::normal_distribution<double> n(0.0, s);
    return {n(rng), n(rng)};
}

Mat mrand(std::mt19937_64& rng, int r, int c) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = crand(rng);
    return m;
}

Mat comm(const Mat& x, const Mat& y) { return x * y - y * x; }

double rel(const Mat& got, const Mat& want) { return (got - want).norm() / std::max(1.0, want.norm()); }
double rel(cd got, cd want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

// quartic quantities in Gamma are compared against this
double quartic(const PhaseData& d) { return std::pow(std::max(1.0, d.gamma.cwiseAbs().maxCoeff()), 4); }

Mat dT_on(const PhaseData& d, const std::vector<int>& idx, const TimeVec& dt) { return diag_of_nodes(d.g, dt)(idx, idx); }

TimeVec pole_times(std::mt19937_64& rng, const PhaseData& d) {
    TimeVec v = random_times(rng, d);
    const int inf = d.a.infinity_part();
    for (int i = 0; i < d.g.num_nodes(); ++i)
        if (d.g.node_part(i) != inf) v[i] = 0.0;
    return v;
}

TimeVec scaled_times(const Mobius& g, const PhaseData& d, const TimeVec& dt) {
    auto N = sl2_multipliers(g, d.a).multipliers;
    TimeVec out(dt.size());
    for (int i = 0; i < d.g.num_nodes(); ++i) out[i] = N[d.g.node_part(i)] * dt[i];
    return out;
}

// ---- algebraic ----

double jmms_trial(std::uint64_t s) {
    auto d = random_jmms(s);
    std::mt19937_64 rng(s);
    auto dt = random_times(rng, d);
    return std::max(rel(vector_field(d, dt), vector_field_jmms(d, dt)), rel(varpi(d, dt), varpi_jmms(d, dt)) / quartic(d));
}

double schlesinger_trial(std::uint64_t s) {
    auto d = random_schlesinger(s);
    std::mt19937_64 rng(s);
    auto dt = pole_times(rng, d);
    auto b = infinity_blocks(d);
    double r = 0.0;
    Mat PQ = b.P * b.Q;
    r = std::max(r, rel(varpi(d, dt), 0.5 * (PQ * tilde(d, b.W, PQ, dt)).trace()));
    const cd z = crand(rng, 3.0), dz = crand(rng);
    Mat delta = Mat::Zero(b.W.size(), b.W.size());
    for (std::size_t k = 0; k < b.W.size(); ++k) delta(k, k) = (dz - dt[k]) / (z - d.t[k]);
    r = std::max(r, rel(full_connection_form(d, z, dz, dt), b.Q * delta * b.P));
    auto poles = d.g.nodes_of_part(d.a.infinity_part());
    auto red = reduce(d);
    auto pf = projected_field(d, dt);
    Mat v = vector_field(d, dt);
    for (std::size_t x = 0; x < poles.size(); ++x) {
        const int i = poles[x];
        Mat om = Mat::Zero(b.U.size(), b.U.size()), dR = om;
        for (std::size_t y = 0; y < poles.size(); ++y) {
            if (y == x) continue;
            const cd f = (dt[i] - dt[poles[y]]) / (d.t[i] - d.t[poles[y]]);
            om += red.R[y] * f;
            dR -= comm(red.R[x], red.R[y]) * f;
        }
        r = std::max(r, rel(local_connection(d, i, dt), om));
        r = std::max(r, rel(pf.dR[x], dR));
        // the lifted flow moves R_i by the same amount
        auto vi = d.g.node_indices(i);
        Mat lifted = v(b.U, vi) * d.gamma(vi, b.U) + d.gamma(b.U, vi) * v(vi, b.U);
        r = std::max(r, rel(lifted, dR));
    }
    return r;
}

double dual_schlesinger_trial(std::uint64_t s) {
    std::mt19937_64 rng(s);
    auto d = random_phase(s, {INF, at(0.0)}, {{2}, {1, 1, 1}});
    d.t[0] = 0.0;
    auto dt = random_times(rng, d);
    dt[0] = 0.0;
    auto U = infinity_blocks(d).U;
    Mat R = reduce(d).R[0];
    Mat expect = comm(tilde(d, U, R, dt), R);
    Mat v = vector_field(d, dt);
    auto vi = d.g.node_indices(0);
    Mat lifted = v(U, vi) * d.gamma(vi, U) + d.gamma(U, vi) * v(vi, U);
    return std::max(rel(projected_field(d, dt).dR[0], expect), rel(lifted, expect));
}

double master_trial(std::uint64_t s) {
    std::mt19937_64 rng(s);
    auto d = random_phase(s, {at(crand(rng)), at(crand(rng)), at(crand(rng))}, {{1, 1}, {2}, {1}});
    auto dt = random_times(rng, d);
    double r = rel(master_field(d, dt), vector_field(d, dt));
    // bipartite J = {0, 1}
    auto e = random_phase(s + 1, {at(0.0), at(1.0)}, {{1, 1}, {1, 2}});
    auto et = random_times(rng, e);
    auto W0 = e.g.part_indices(0), W1 = e.g.part_indices(1);
    Mat R = e.gamma(W0, W1), S = e.gamma(W1, W0);
    Mat T0 = dT_on(e, W0, e.t), T1 = dT_on(e, W1, e.t), dT0 = dT_on(e, W0, et), dT1 = dT_on(e, W1, et);
    Mat RSt = tilde(e, W0, R * S, et), SRt = tilde(e, W1, S * R, et);
    Mat dS = S * RSt + SRt * S + T1 * S * dT0 + dT1 * S * T0 - (S * T0 * dT0 + T1 * dT1 * S);
    Mat mdR = R * SRt + RSt * R + T0 * R * dT1 + dT0 * R * T1 - (R * T1 * dT1 + T0 * dT0 * R);
    Mat m = master_field(e, et);
    r = std::max(r, rel(m(W1, W0), dS));
    r = std::max(r, rel(-m(W0, W1), mdR));
    return r;
}

double forms_trial(std::uint64_t s) {
    auto d = random_instance(s, 6);
    std::mt19937_64 rng(s);
    auto dt = random_times(rng, d);
    Mat v = vector_field(d, dt);
    return std::max(rel(vector_field_qpb(d, dt), v), rel(vector_field_blocks(d, dt), v));
}

double harnad_trial(std::uint64_t s) {
    auto d = random_jmms(s);
    std::mt19937_64 rng(s);
    auto dt = random_times(rng, d);
    auto du = harnad_dual(d);
    const auto dt2 = harnad_dual_times(d, dt);
    const Mat pushed = harnad_dual_tangent(d, vector_field(d, dt));
    double r = std::max(rel(vector_field(du, dt2), pushed), rel(vector_field_jmms(du, dt2), pushed));
    // the Fourier-Laplace inverse followed by reordering the parts
    auto fl = sl2_act(Mobius::fourier_laplace().inverse(), d);
    std::vector<int> perm = d.g.part_indices(1), w0 = d.g.part_indices(0);
    perm.insert(perm.end(), w0.begin(), w0.end());
    r = std::max(r, rel(Mat(fl.gamma(perm, perm)), du.gamma));
    return r;
}

double residue_form_trial(std::uint64_t s) {
    auto d = random_instance(s, 6, 2, true);
    if (d.a.infinity_part() < 0) d = random_phase(s, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}});
    std::mt19937_64 rng(s);
    auto dt = random_times(rng, d);
    return std::abs(varpi(d, dt) - varpi_residue_form(d, dt)) / quartic(d);
}

double tilde_trial(std::uint64_t s) {
    auto d = random_instance(s, 6);
    std::mt19937_64 rng(s);
    const int n = d.g.size();
    auto u = random_times(rng, d), w = random_times(rng, d);
    Mat Fu = part_diagonal(d.g, mrand(rng, n, n)), Fw = part_diagonal(d.g, mrand(rng, n, n));
    Mat R = part_diagonal(d.g, mrand(rng, n, n));
    cd lhs = ((tilde(d, Fw, u) - tilde(d, Fu, w)) * R).trace();
    cd rhs = -((Fu * tilde(d, R, w)).trace() - (Fw * tilde(d, R, u)).trace());
    return rel(lhs, rhs);
}

// ---- flow ----

PhaseData flow_instance(std::uint64_t s) {
    if (s % 2) return random_jmms(s);
    return random_phase(s, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}});
}

double hamiltonian_trial(std::uint64_t s) {
    auto d = flow_instance(s);
    std::mt19937_64 rng(s);
    auto dt = random_times(rng, d);
    Mat v = vector_field(d, dt);
    Mat h = hamiltonian_flow(d, [&](const PhaseData& p) { return varpi(p, dt); });
    return (v - h).norm() / std::max(1e-300, v.norm());
}

double bracket_trial(std::uint64_t s) {
    auto d = flow_instance(s);
    double r = 0.0;
    for (int i = 0; i < d.g.num_nodes(); ++i)
        for (int j = i + 1; j < d.g.num_nodes(); ++j) r = std::max(r, std::abs(integrability_residuals(d, i, j, 1e-4).bracket));
    return r / quartic(d);
}

double symmetry_trial(std::uint64_t s) {
    auto d = flow_instance(s);
    double r = 0.0;
    for (int i = 0; i < d.g.num_nodes(); ++i)
        for (int j = i + 1; j < d.g.num_nodes(); ++j) r = std::max(r, std::abs(integrability_residuals(d, i, j, 1e-4).symmetry));
    return r / quartic(d);
}

double conservation_trial(std::uint64_t s) {
    PhaseData d = s % 2 ? random_schlesinger(s) : random_jmms(s);
    std::mt19937_64 rng(s);
    TimeVec end = d.t;
    const int inf = d.a.infinity_part();
    // move one node of each part
    for (int j = 0; j < d.g.num_parts(); ++j) end[d.g.nodes_of_part(j)[0]] += 0.1 * crand(rng);
    (void)inf;
    IntegrateOptions o;
    o.keepAll = false;
    auto tr = integrate(FlowState{d, 0.0}, PathSpec{{d.t, end}}, o);
    if (tr.aborted) throw std::runtime_error("trajectory aborted: " + tr.message);
    return std::max(tr.monitors.lambdaDrift, tr.monitors.traceDrift);
}

double restriction_trial(std::uint64_t s) {
    auto d = random_phase(s, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}});
    std::mt19937_64 rng(s);
    auto U = infinity_blocks(d).U;
    double r = 0.0;
    for (int i : d.g.nodes_of_part(d.a.infinity_part())) {
        auto dt = random_times(rng, d);
        Mat avg = Mat::Zero(U.size(), U.size());
        for (int k = 0; k < 4; ++k) {
            cd eps = 1e-3 * std::pow(cd(0.0, 1.0), k);
            avg += full_connection_form(d, d.t[i] + eps, dt[i], dt);
        }
        r = std::max(r, rel(Mat(avg / 4.0), local_connection(d, i, dt)));
    }
    return r;
}

double series_trial(std::uint64_t s) {
    auto d = random_phase(s, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2, 1}, {1}});
    auto nf = leading_term(d);
    if (nf.anyResonant) throw std::runtime_error("resonant instance");
    auto sc = gauge_series(d, 3);
    if (!sc.g1Determined) throw std::runtime_error("g1 not fixed by the truncated series");
    std::mt19937_64 rng(s);
    auto dt = random_times(rng, d);
    auto U = infinity_blocks(d).U;
    double r = rel(sc.g1, nf.g1);
    r = std::max(r, rel(varpi_infinity(d, dt), (sc.g1 * dT_on(d, U, dt)).trace()));
    return r;
}

// ---- sl2 ----

double omega_trial(std::uint64_t s) {
    auto d = random_instance(s, 9, 3);
    std::mt19937_64 rng(s);
    const int n = d.g.size();
    Mat u = off_part(d.g, mrand(rng, n, n)), v = off_part(d.g, mrand(rng, n, n));
    const cd w0 = omega(d.a, d.g, u, v);
    double r = 0.0;
    for (const Mobius& g : {Mobius::scaling(crand(rng)), Mobius::shear(crand(rng)), Mobius::fourier_laplace(),
                            Mobius::fourier_laplace().inverse()}) {
        auto e = sl2_act(g, d);
        r = std::max(r, rel(omega(e.a, e.g, sl2_tangent(g, d, u), sl2_tangent(g, d, v)), w0));
    }
    return r;
}

double spectral_trial(std::uint64_t s) {
    auto d = random_instance(s, 5);
    std::mt19937_64 rng(s);
    Mobius g = random_mobius(rng);
    return relative_mismatch(gl2_transform_poly(g, spectral_poly(d)), spectral_poly(sl2_act(g, d)));
}

double transport_trial(std::uint64_t s) {
    auto d = random_phase(s, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}});
    std::mt19937_64 rng(s);
    auto dt = random_times(rng, d);
    Mat v = vector_field(d, dt);
    Mobius g = random_mobius(rng);
    auto gd = sl2_act(g, d);
    auto dt2 = scaled_times(g, d, dt);
    Mat D = vector_field(gd, dt2) - sl2_tangent(g, d, v);
    const int k = gd.g.num_parts();
    Mat M(D.size(), k);
    for (int j = 0; j < k; ++j) {
        std::vector<cd> l(k, 0.0);
        l[j] = 1.0;
        Mat f = gauge_field(gd, l, dt2);
        M.col(j) = Eigen::Map<const Vec>(f.data(), f.size());
    }
    Vec b = Eigen::Map<const Vec>(D.data(), D.size());
    Vec x = M.colPivHouseholderQr().solve(b);
    return (M * x - b).norm() / std::max(1.0, v.norm());
}

double shear_trial(std::uint64_t s) {
    auto d = random_phase(s, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}});
    std::mt19937_64 rng(s);
    auto dt = random_times(rng, d);
    const cd c = crand(rng);
    auto sh = Mobius::shear(c);
    auto e = sl2_act(sh, d);
    auto b = infinity_blocks(d);
    cd diff = varpi1(e, scaled_times(sh, d, dt)) - varpi1(d, dt);
    cd expect = -c * (b.P * b.Q * b.C * dT_on(d, b.W, dt)).trace();
    return std::abs(diff - expect) / std::pow(std::max(1.0, d.gamma.cwiseAbs().maxCoeff()), 2);
}

// ---- spectral ----

double schur_trial(std::uint64_t s) {
    auto d = random_instance(s, 5);
    if (d.a.infinity_part() < 0) d = random_phase(s, {INF, at(0.0), at(1.5)}, {{1}, {1}, {1}});
    auto p = spectral_poly(d);
    std::mt19937_64 rng(s);
    double r = 0.0;
    for (int k = 0; k < 5; ++k) {
        cd l = crand(rng, 2.0), z = crand(rng, 2.0);
        cd v = p.eval(l, z);
        r = std::max(r, std::abs(schur_determinant(d, l, z) - v) / std::max(1.0, std::abs(v)));
    }
    return r;
}

double spectral_poisson_trial(std::uint64_t s) {
    auto d = random_instance(s, 4);
    auto p = spectral_poly(d);
    return spectral_poisson_residual(d) / std::pow(std::max(1.0, p.c.cwiseAbs().maxCoeff()), 2);
}

// ---- orbits ----

double orbit_duality_trial(std::uint64_t s) {
    auto j = random_integer_jordan(s, 6);
    auto pr = random_pq_pair(j, mix_seed(s, 1));
    auto jqp = jordan_exact(rat_mul(pr.Q, pr.P));
    auto jpq = jordan_exact(rat_mul(pr.P, pr.Q));
    bool ok = jqp.same_as(j, 0.0) && rat_rank(pr.P) == pr.P.rows && rat_rank(pr.Q) == pr.Q.cols &&
              jpq.same_as(contract_orbit(jqp), 0.0);
    return ok ? 0.0 : 1.0;
}

double expand_trial(std::uint64_t s) {
    auto j = random_integer_jordan(s, 6);
    return expand_orbit(contract_orbit(j), j.n).same_as(j, 0.0) ? 0.0 : 1.0;
}

double ds_reflection_trial(std::uint64_t s) {
    std::mt19937_64 rng(s);
    auto g = build_supernova({1, 1, 1}, {1, 1, 0}).full;
    const int n = g.size();
    std::uniform_int_distribution<int> ent(0, 2), pick(0, n - 1), q(-9, 9);
    RootVector d(n);
    do {
        for (auto& x : d) x = ent(rng);
    } while (std::all_of(d.begin(), d.end(), [](auto x) { return x == 0; }));
    std::vector<Rational> re, im;
    for (int k = 0; k < n; ++k) {
        re.emplace_back(q(rng), 1 + std::abs(q(rng)));
        im.emplace_back(q(rng), 1 + std::abs(q(rng)));
    }
    int atn = 0;
    while (d[atn] == 0) ++atn;
    Rational sr = 0, si = 0;
    for (int k = 0; k < n; ++k)
        if (k != atn) {
            sr += re[k] * d[k];
            si += im[k] * d[k];
        }
    re[atn] = -sr / d[atn];
    im[atn] = -si / d[atn];
    auto lam = ParamVector::from_rational(re, im);
    auto base = ds_exists(g, lam, d);
    int i = pick(rng);
    for (int k = 0; k < n && lam.is_zero(i); ++k) i = (i + 1) % n;
    if (lam.is_zero(i)) return 0.0;
    auto other = ds_exists(g, reflect_param(g, i, lam), reflect_root(g, i, d));
    return base.nonempty == other.nonempty ? 0.0 : 1.0;
}

std::vector<CheckDef> all_checks() {
    return {
        {"algebraic", "JMMS specialisation", 1e-12, jmms_trial},
        {"algebraic", "Schlesinger specialisation", 1e-12, schlesinger_trial},
        {"algebraic", "dual Schlesinger specialisation", 1e-12, dual_schlesinger_trial},
        {"algebraic", "master equations", 1e-12, master_trial},
        {"algebraic", "three forms of the vector field", 1e-11, forms_trial},
        {"algebraic", "Harnad duality", 1e-12, harnad_trial},
        {"algebraic", "tilde pairing identity", 1e-12, tilde_trial},
        {"flow", "Hamiltonian form of the flow", 1e-5, hamiltonian_trial},
        {"flow", "Poisson commuting Hamiltonians", 1e-6, bracket_trial},
        {"flow", "symmetry of time derivatives", 1e-6, symmetry_trial},
        {"flow", "varpi residue form", 1e-8, residue_form_trial},
        {"flow", "normal form series oracle", 1e-9, series_trial},
        {"flow", "restriction of the full connection", 1e-10, restriction_trial},
        {"flow", "conservation along trajectories", 1e-8, conservation_trial},
        {"sl2", "omega equivariance", 1e-10, omega_trial},
        {"sl2", "spectral invariance", 1e-8, spectral_trial},
        {"sl2", "flow transport up to gauge", 1e-10, transport_trial},
        {"sl2", "shear change of varpi", 1e-10, shear_trial},
        {"spectral", "spectral invariance", 1e-8, spectral_trial},
        {"spectral", "Schur determinant identity", 1e-8, schur_trial},
        {"spectral", "Poisson commuting coefficients", 1e-6, spectral_poisson_trial},
        {"orbits", "orbit duality", 0.0, orbit_duality_trial},
        {"orbits", "expand after contract", 0.0, expand_trial},
        {"orbits", "Deligne-Simpson reflection invariance", 0.0, ds_reflection_trial},
    };
}

} // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    // splitmix64 of a combined word
    std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

PhaseData random_instance(std::uint64_t seed, int maxDim, int maxNodeDim, bool allowInf) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> parts(2, 3), coin(0, 1);
    const int k = parts(rng);
    std::vector<FourierPoint> pts;
    if (allowInf && coin(rng)) pts.push_back(INF);
    while (static_cast<int>(pts.size()) < k) pts.push_back(at(crand(rng, 2.0)));
    std::vector<std::vector<int>> dims(k);
    int total = 0;
    for (auto& p : dims) {
        p.push_back(1);
        ++total;
    }
    std::uniform_int_distribution<int> pick(0, k - 1);
    std::uniform_int_distribution<int> extra(0, std::max(0, maxDim - total));
    for (int e = extra(rng); e > 0 && total < maxDim; --e) {
        auto& p = dims[pick(rng)];
        if (coin(rng) || p.back() >= maxNodeDim) p.push_back(1);
        else ++p.back();
        ++total;
    }
    return random_phase(seed + 1000, pts, dims);
}

PhaseData random_jmms(std::uint64_t seed) { return random_phase(seed, {INF, at(0.0)}, {{1, 2}, {1, 1}}); }

PhaseData random_schlesinger(std::uint64_t seed) {
    auto d = random_phase(seed, {INF, at(0.0)}, {{1, 1, 1, 1}, {2}}, 0.5);
    d.t = {0.5, cd(2.5, 1.0), cd(-2.0, -1.0), cd(-0.5, 2.0), 0.0};
    return d;
}

Mobius random_mobius(std::mt19937_64& rng) {
    Mobius g{crand(rng), crand(rng), crand(rng), crand(rng)};
    cd s = std::sqrt(g.det());
    return {g.a / s, g.b / s, g.c / s, g.d / s};
}

TimeVec random_times(std::mt19937_64& rng, const PhaseData& d) {
    TimeVec v(d.g.num_nodes());
    for (auto& x : v) x = crand(rng);
    return v;
}

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"algebraic", "flow", "sl2", "spectral", "orbits"};
    return names;
}

std::vector<CheckDef> checks_for(const std::string& suite) {
    std::vector<CheckDef> out;
    for (auto& c : all_checks())
        if (suite == "all" || c.suite == suite) out.push_back(c);
    if (out.empty()) throw std::invalid_argument("unknown suite " + suite);
    return out;
}

const CheckDef& find_check(const std::string& name) {
    static const std::vector<CheckDef> checks = all_checks();
    for (auto& c : checks)
        if (c.name == name) return c;
    throw std::invalid_argument("unknown check " + name);
}

int thread_count() {
    if (const char* env = std::getenv("ISOFLOW_THREADS")) {
        try {
            int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (const std::exception&) {
        }
        return 1;
    }
    return static_cast<int>(std::max(1u, std::min(8u, std::thread::hardware_concurrency())));
}

CheckResult run_check(const CheckDef& c, std::uint64_t seed, int trials, int threads) {
    CheckResult r{c.suite, c.name, c.tolerance, 0.0, trials, true, ""};
    if (trials <= 0) return r;
    std::vector<double> res(trials, 0.0);
    std::vector<std::string> notes(trials);
    // per-check stream of seeds, so suites can be run separately
    std::uint64_t base = seed;
    for (char ch : c.name) base = mix_seed(base, static_cast<unsigned char>(ch));
    std::atomic<int> next{0};
    auto work = [&] {
        for (int k = next++; k < trials; k = next++) {
            try {
                res[k] = c.trial(mix_seed(base, static_cast<std::uint64_t>(k)) % 1000000007ULL);
            } catch (const std::exception& e) {
                res[k] = std::numeric_limits<double>::infinity();
                notes[k] = e.what();
            }
        }
    };
    const int n = std::max(1, std::min(threads, trials));
    std::vector<std::thread> pool;
    for (int w = 1; w < n; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    for (int k = 0; k < trials; ++k) {
        const double v = std::isnan(res[k]) ? std::numeric_limits<double>::infinity() : res[k];
        r.worst = std::max(r.worst, v);
        if (!(v <= c.tolerance) && r.passed) {
            r.passed = false;
            r.note = "trial " + std::to_string(k) + (notes[k].empty() ? "" : ": " + notes[k]);
        }
    }
    return r;
}

} // namespace isomono::cli
