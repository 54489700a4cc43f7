#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "isomono/isoflow.hpp"
#include "isomono/orbit.hpp"
#include "isomono/spectral.hpp"
#include "support.hpp"

using namespace isomono;
using namespace fixtures;

namespace {

const FourierPoint INF = FourierPoint::inf();
FourierPoint at(cd v) { return FourierPoint::at(v); }

TimeVec rtime(std::mt19937_64& rng, const PhaseData& d) {
    TimeVec v(d.g.num_nodes());
    for (auto& x : v) x = crand(rng);
    return v;
}

Mat comm(const Mat& x, const Mat& y) { return x * y - y * x; }

double mag(const Mat& m) { return std::max(1.0, m.cwiseAbs().maxCoeff()); }

Mat dT_on(const PhaseData& d, const std::vector<int>& idx, const TimeVec& dt) {
    return diag_of_nodes(d.g, dt)(idx, idx);
}

// one node of dimension two at 0, three rank-one poles at infinity; t at the finite node is 0
PhaseData schlesinger(std::uint64_t seed, double s = 0.5) {
    auto d = random_phase(seed, {INF, at(0.0)}, {{1, 1, 1}, {2}}, s);
    d.t = {0.5, cd(2.5, 1.0), cd(-2.0, -1.0), 0.0};
    return d;
}

// times moving only at the poles
TimeVec pole_times(std::mt19937_64& rng, const PhaseData& d) {
    TimeVec v = rtime(rng, d);
    const int inf = d.a.infinity_part();
    for (int i = 0; i < d.g.num_nodes(); ++i)
        if (d.g.node_part(i) != inf) v[i] = 0.0;
    return v;
}

PhaseData jmms(std::uint64_t seed) { return random_phase(seed, {INF, at(0.0)}, {{1, 2}, {1, 1}}); }

Mobius unimodular(Mobius g) {
    cd s = std::sqrt(g.det());
    return {g.a / s, g.b / s, g.c / s, g.d / s};
}

TimeVec scaled_times(const Mobius& g, const PhaseData& d, const TimeVec& dt) {
    auto N = sl2_multipliers(g, d.a).multipliers;
    TimeVec out(dt.size());
    for (int i = 0; i < d.g.num_nodes(); ++i) out[i] = N[d.g.node_part(i)] * dt[i];
    return out;
}

// least squares fit of D by gauge fields with one multiplier per part
std::pair<std::vector<cd>, double> fit_gauge(const PhaseData& d, const TimeVec& dt, const Mat& D) {
    const int k = d.g.num_parts();
    Mat M(D.size(), k);
    for (int j = 0; j < k; ++j) {
        std::vector<cd> l(k, 0.0);
        l[j] = 1.0;
        Mat f = gauge_field(d, l, dt);
        M.col(j) = Eigen::Map<const Vec>(f.data(), f.size());
    }
    Vec b = Eigen::Map<const Vec>(D.data(), D.size());
    Vec x = M.colPivHouseholderQr().solve(b);
    return {std::vector<cd>(x.data(), x.data() + k), (M * x - b).norm()};
}

double slope(const std::vector<double>& h, const std::vector<double>& r) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(h.size());
    for (std::size_t k = 0; k < h.size(); ++k) {
        double x = std::log(h[k]), y = std::log(r[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace

TEST_CASE("tilde") {
    std::mt19937_64 rng(1);
    auto d = random_phase(1, {INF, at(0.3), at(-1.0)}, {{1, 2}, {1, 1, 1}, {2}});
    auto dt = rtime(rng, d);
    const int n = d.g.size();

    Mat diag = diag_of_nodes(d.g, rtime(rng, d));
    CHECK(tilde(d, diag, dt).norm() == 0.0);

    PhaseData two = random_phase(2, {at(0.0), at(1.0)}, {{1, 1}, {1}});
    two.t = {0.0, 1.0, 0.0};
    Mat r = Mat::Zero(3, 3);
    r(0, 1) = cd(1.5, -0.5);
    auto tl = tilde(two, r, TimeVec{1.0, 0.0, 0.0});
    CHECK(std::abs(tl(0, 1) + r(0, 1)) < 1e-15);
    CHECK(std::abs(tl(1, 0)) == 0.0);

    // as two-forms, with F a one-form and R a function
    for (int k = 0; k < 10; ++k) {
        auto u = rtime(rng, d), w = rtime(rng, d);
        Mat Fu = part_diagonal(d.g, mrand(rng, n, n)), Fw = part_diagonal(d.g, mrand(rng, n, n));
        Mat R = part_diagonal(d.g, mrand(rng, n, n));
        Mat Ft = tilde(d, Fw, u) - tilde(d, Fu, w);
        cd lhs = (Ft * R).trace();
        cd rhs = -((Fu * tilde(d, R, w)).trace() - (Fw * tilde(d, R, u)).trace());
        CHECK(std::abs(lhs - rhs) < 1e-12 * std::max(1.0, std::abs(lhs)));
    }

    Mat cross = Mat::Zero(n, n);
    cross(0, n - 1) = 1.0;
    try {
        tilde(d, cross, dt);
        CHECK_MESSAGE(false, "expected a precondition failure");
    } catch (const Error& e) {
        CHECK(e.kind == ErrorKind::Precondition);
    }
}

TEST_CASE("varpi at the origin and its residue form") {
    std::mt19937_64 rng(2);
    auto d = random_phase(3, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}});
    auto dt = rtime(rng, d);
    PhaseData z = d;
    z.gamma.setZero();
    CHECK(std::abs(varpi(z, dt)) == 0.0);
    CHECK(std::abs(varpi_residue_form(z, dt)) == 0.0);
    CHECK(vector_field(z, dt).norm() == 0.0);

    for (std::uint64_t s = 0; s < 20; ++s) {
        auto e = random_phase(100 + s, {INF, at(cd(0.2, 0.1)), at(-1.3)}, {{1, 2}, {1, 1}, {2}});
        auto v = rtime(rng, e);
        const double sc = mag(e.gamma);
        const double tol = 1e-8 * sc * sc * sc * sc;
        CHECK(std::abs(varpi(e, v) - varpi_residue_form(e, v)) < tol);

        auto nf = leading_term(e);
        REQUIRE(!nf.anyResonant);
        auto U = infinity_blocks(e).U;
        CHECK(std::abs(varpi_infinity(e, v) - (nf.g1 * dT_on(e, U, v)).trace()) < 1e-8 * sc * sc * sc * sc);
    }
}

TEST_CASE("JMMS specialisation") {
    std::mt19937_64 rng(3);
    for (std::uint64_t s = 0; s < 50; ++s) {
        auto d = jmms(200 + s);
        auto dt = rtime(rng, d);
        const double sc = mag(d.gamma);
        Mat v = vector_field(d, dt);
        CHECK((v - vector_field_jmms(d, dt)).norm() < 1e-12 * sc * sc * sc * 10);
        CHECK(std::abs(varpi(d, dt) - varpi_jmms(d, dt)) < 1e-12 * sc * sc * sc * sc * 10);
    }
    auto bad = random_phase(1, {INF, at(0.5)}, {{1}, {1}});
    CHECK_THROWS_AS(vector_field_jmms(bad, TimeVec{1.0, 0.0}), Error);
}

TEST_CASE("three evaluations of the vector field") {
    std::mt19937_64 rng(4);
    for (std::uint64_t s = 0; s < 20; ++s) {
        std::vector<FourierPoint> pts = {INF, at(crand(rng)), at(crand(rng))};
        if (s % 2) pts[0] = at(crand(rng, 2.0));
        auto d = random_phase(300 + s, pts, {{1, 1}, {2, 1}, {1}});
        auto dt = rtime(rng, d);
        Mat v = vector_field(d, dt);
        const double tol = 1e-11 * std::max(1.0, v.norm());
        CHECK((v - vector_field_qpb(d, dt)).norm() < tol);
        CHECK((v - vector_field_blocks(d, dt)).norm() < tol);
    }
}

TEST_CASE("the vector field is Hamiltonian for varpi") {
    std::mt19937_64 rng(5);
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto d = random_phase(400 + s, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}});
        auto dt = rtime(rng, d);
        Mat v = vector_field(d, dt);
        Mat h = hamiltonian_flow(d, [&](const PhaseData& p) { return varpi(p, dt); });
        CHECK((v - h).norm() < 1e-5 * v.norm());
    }
}

TEST_CASE("full connection") {
    std::mt19937_64 rng(6);
    auto d = random_phase(7, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}});
    auto b = infinity_blocks(d);
    const cd z(0.3, 1.7);

    PhaseData zero = d;
    zero.gamma.setZero();
    auto e0 = full_connection(zero, z);
    auto bz = infinity_blocks(zero);
    CHECK((e0.Bz - (bz.A * z + bz.T)).norm() < 1e-14);
    for (int i = 0; i < d.g.num_nodes(); ++i)
        CHECK((e0.Bt[i] - z * dT_on(zero, bz.U, unit_time(zero, i))).norm() < 1e-14);

    auto e = full_connection(d, z);
    CHECK((e.Bz - connection_matrix(d, z)).norm() < 1e-12);
    CHECK_THROWS_AS(full_connection(d, d.t[0]), Error);

    // pull back to z = t_i, so dz = dt_i and the pole term cancels; averaged over a small circle
    for (int i : d.g.nodes_of_part(d.a.infinity_part())) {
        auto dt = rtime(rng, d);
        Mat avg = Mat::Zero(b.U.size(), b.U.size());
        const cd I(0.0, 1.0);
        for (int k = 0; k < 4; ++k) {
            cd eps = 1e-3 * std::pow(I, k);
            avg += full_connection_form(d, d.t[i] + eps, dt[i], dt);
        }
        avg /= 4.0;
        Mat om = local_connection(d, i, dt);
        CHECK((avg - om).norm() < 1e-10 * std::max(1.0, om.norm()));
        CHECK((restricted_connection(d, i, dt) - om).norm() < 1e-12 * std::max(1.0, om.norm()));
    }
}


TEST_CASE("Schlesinger specialisation") {
    std::mt19937_64 rng(7);
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto d = schlesinger(500 + s);
        auto dt = pole_times(rng, d);
        auto b = infinity_blocks(d);
        Mat PQ = b.P * b.Q;
        cd expect = 0.5 * (PQ * tilde(d, b.W, PQ, dt)).trace();
        CHECK(std::abs(varpi(d, dt) - expect) < 1e-12);
        CHECK(std::abs(varpi_residue_form(d, dt) - expect) < 1e-12);

        // Omega = Q dlog(z - T_inf) P
        const cd z(0.7, -0.4), dz(0.2, 0.9);
        Mat delta = Mat::Zero(b.W.size(), b.W.size());
        for (std::size_t k = 0; k < b.W.size(); ++k) delta(k, k) = (dz - dt[k]) / (z - d.t[k]);
        CHECK((full_connection_form(d, z, dz, dt) - b.Q * delta * b.P).norm() < 1e-12);

        auto poles = d.g.nodes_of_part(d.a.infinity_part());
        auto red = reduce(d);
        auto pf = projected_field(d, dt);
        for (std::size_t x = 0; x < poles.size(); ++x) {
            const int i = poles[x];
            Mat om = Mat::Zero(2, 2), dR = Mat::Zero(2, 2);
            for (std::size_t y = 0; y < poles.size(); ++y) {
                if (y == x) continue;
                const int j = poles[y];
                const cd f = (dt[i] - dt[j]) / (d.t[i] - d.t[j]);
                om += red.R[y] * f;
                dR -= comm(red.R[x], red.R[y]) * f;
            }
            CHECK((local_connection(d, i, dt) - om).norm() < 1e-12);
            CHECK((pf.dR[x] - dR).norm() < 1e-12);
        }
    }
}

TEST_CASE("dual Schlesinger projected equations") {
    std::mt19937_64 rng(8);
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto d = random_phase(600 + s, {INF, at(0.0)}, {{2}, {1, 1, 1}});
        d.t[0] = 0.0;
        auto dt = rtime(rng, d);
        dt[0] = 0.0;
        auto red = reduce(d);
        auto U = infinity_blocks(d).U;
        Mat R = red.R[0];
        Mat expect = comm(tilde(d, U, R, dt), R);
        CHECK((projected_field(d, dt).dR[0] - expect).norm() < 1e-12 * mag(R) * mag(R));
    }
}

TEST_CASE("projected field") {
    std::mt19937_64 rng(9);
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto d = random_phase(700 + s, {INF, at(0.4), at(-1.1)}, {{2, 1}, {1, 1}, {1}});
        auto dt = rtime(rng, d);
        auto b = infinity_blocks(d);
        auto pf = projected_field(d, dt);

        // another lift of the same residues
        PhaseData e = d;
        auto v0 = d.g.node_indices(0);
        Mat S = mrand(rng, 2, 2) + 2.0 * Mat::Identity(2, 2);
        e.gamma(b.U, v0) = d.gamma(b.U, v0) * S;
        e.gamma(v0, b.U) = S.inverse() * d.gamma(v0, b.U);
        auto pe = projected_field(e, dt);
        CHECK((pf.dB - pe.dB).norm() < 1e-12 * std::max(1.0, pf.dB.norm()));
        for (std::size_t k = 0; k < pf.dR.size(); ++k)
            CHECK((pf.dR[k] - pe.dR[k]).norm() < 1e-12 * std::max(1.0, pf.dR[k].norm()));

        // agrees with the lifted flow
        Mat v = vector_field(d, dt);
        CHECK((v(b.U, b.U) - pf.dB).norm() < 1e-12 * std::max(1.0, v.norm()));
        auto poles = d.g.nodes_of_part(d.a.infinity_part());
        for (std::size_t k = 0; k < poles.size(); ++k) {
            auto vi = d.g.node_indices(poles[k]);
            Mat dR = v(b.U, vi) * d.gamma(vi, b.U) + d.gamma(b.U, vi) * v(vi, b.U);
            CHECK((dR - pf.dR[k]).norm() < 1e-12 * std::max(1.0, v.norm() * d.gamma.norm()));
        }
    }
}

TEST_CASE("local connections along a trajectory") {
    auto d = random_phase(11, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}}, 0.7);
    std::mt19937_64 rng(10);
    TimeVec v = rtime(rng, d);
    for (auto& x : v) x *= 0.05;
    TimeVec end = d.t;
    for (std::size_t k = 0; k < end.size(); ++k) end[k] += v[k];
    IntegrateOptions o;
    o.step = 1e-4;
    auto tr = integrate(FlowState{d, 0.0}, PathSpec{{d.t, end}}, o);
    REQUIRE(!tr.aborted);
    const std::size_t n = tr.states.size();
    REQUIRE(n > 10);
    const std::size_t m = n / 2;
    const double ds = 1.0 / static_cast<double>(n - 1);
    const auto& mid = tr.states[m].d;
    auto rp = residues(tr.states[m + 1].d), rm = residues(tr.states[m - 1].d), r0 = residues(mid);
    for (int i = 0; i < d.g.num_nodes(); ++i) {
        Mat om = local_connection(mid, i, v);
        Mat dQ = (rp[i].Q - rm[i].Q) / (2 * ds), dP = (rp[i].P - rm[i].P) / (2 * ds), dR = (rp[i].R - rm[i].R) / (2 * ds);
        CHECK((dQ - om * r0[i].Q).norm() < 1e-6);
        CHECK((dP + r0[i].P * om).norm() < 1e-6);
        CHECK((dR - comm(om, r0[i].R)).norm() < 1e-6);
    }
}

TEST_CASE("integration") {
    auto d = schlesinger(800);
    FlowState s{d, 0.0};

    auto same = integrate(s, PathSpec{{d.t}});
    REQUIRE(same.states.size() == 1);
    CHECK((same.states[0].d.gamma - d.gamma).norm() == 0.0);
    CHECK(same.states[0].logTau == cd(0.0));
    auto still = integrate(s, PathSpec{{d.t, d.t}});
    CHECK(still.states.size() == 1);

    SUBCASE("Schlesinger conservation over a unit path") {
        TimeVec end = d.t;
        end[0] += 1.0;
        IntegrateOptions o;
        o.step = 1e-3;
        o.keepAll = false;
        auto tr = integrate(s, PathSpec{{d.t, end}}, o);
        REQUIRE(!tr.aborted);
        CHECK(tr.monitors.lambdaDrift < 1e-8);
        CHECK(tr.monitors.traceDrift < 1e-8);
        CHECK(tr.warnings.empty());
        auto l0 = lambdas(d), l1 = lambdas(tr.states.back().d);
        for (std::size_t i = 0; i < l0.size(); ++i) CHECK((l0[i] - l1[i]).norm() < 1e-8 * std::max(1.0, l0[i].norm()));
    }

    SUBCASE("tau around a closed loop") {
        auto e = random_phase(3, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}});
        auto t0 = e.t;
        PathSpec p;
        p.points.push_back(t0);
        TimeVec a = t0;
        a[0] += 0.1;
        TimeVec b = a;
        b[2] += cd(0.0, 0.1);
        TimeVec c = b;
        c[0] -= 0.1;
        c[3] += 0.05;
        p.points = {t0, a, b, c, t0};
        std::vector<double> steps{0.01, 0.005, 0.0025}, gaps;
        for (double h : steps) {
            IntegrateOptions o;
            o.step = h;
            o.keepAll = false;
            auto tr = integrate(FlowState{e, 0.0}, p, o);
            REQUIRE(!tr.aborted);
            gaps.push_back(std::abs(tr.states.back().logTau));
        }
        const double order = slope(steps, gaps);
        INFO("loop order " << order);
        CHECK(order >= 3.5);
    }

    SUBCASE("leaving the space of times") {
        TimeVec end = d.t;
        end[0] = d.t[1] + 0.3;
        end[1] = d.t[0];
        TimeVec mid = d.t;
        mid[0] = d.t[1];
        IntegrateOptions o;
        o.step = 1e-2;
        auto tr = integrate(s, PathSpec{{d.t, mid, end}}, o);
        CHECK(tr.aborted);
        CHECK(tr.states.size() > 1);
        CHECK(!tr.message.empty());
    }

    CHECK_THROWS_AS(integrate(s, PathSpec{{TimeVec(d.t.size(), 5.0)}}), Error);
    IntegrateOptions bad;
    bad.step = 0.0;
    CHECK_THROWS_AS(integrate(s, PathSpec{{d.t}}, bad), Error);
}

TEST_CASE("monitors warn and the step halves") {
    auto d = random_phase(12, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}});
    TimeVec end = d.t;
    end[0] += 0.2;
    IntegrateOptions o;
    o.step = 0.1;
    o.monitorTol = 1e-14;
    o.keepAll = false;
    auto tr = integrate(FlowState{d, 0.0}, PathSpec{{d.t, end}}, o);
    CHECK(!tr.warnings.empty());
    o.maxHalvings = 2;
    auto th = integrate(FlowState{d, 0.0}, PathSpec{{d.t, end}}, o);
    CHECK(th.monitors.lambdaDrift <= tr.monitors.lambdaDrift);
}

TEST_CASE("integrability residuals") {
    auto z = jmms(900);
    z.gamma.setZero();
    auto r0 = integrability_residuals(z, 0, 2);
    CHECK(std::abs(r0.f) == 0.0);
    CHECK(std::abs(r0.symmetry) == 0.0);
    CHECK(std::abs(r0.bracket) == 0.0);

    for (std::uint64_t s = 0; s < 5; ++s) {
        auto d = jmms(910 + s);
        const double sc = std::pow(mag(d.gamma), 4);
        for (int i = 0; i < d.g.num_nodes(); ++i)
            for (int j = i + 1; j < d.g.num_nodes(); ++j) {
                auto r = integrability_residuals(d, i, j, 1e-4);
                CHECK(std::abs(r.f) < 1e-6 * sc);
                CHECK(std::abs(r.symmetry) < 1e-6 * sc);
                CHECK(std::abs(r.bracket) < 1e-6 * sc);
            }
    }
    auto d = random_phase(920, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}});
    auto r = integrability_residuals(d, 0, 3, 1e-4);
    CHECK(std::abs(r.symmetry) < 1e-6 * std::pow(mag(d.gamma), 4));
}

TEST_CASE("leading term of the normal form") {
    const cd b(0.7, -0.2), c(-1.3, 0.4);
    auto d = random_phase(1, {at(0.0), at(1.0)}, {{1}, {1}});
    d.gamma.setZero();
    d.gamma(0, 1) = b;
    d.gamma(1, 0) = c;
    auto nf = leading_term(d);
    Mat X(2, 2), L(2, 2);
    X << 0.0, -b, c, 0.0;
    L << -b * c, 0.0, 0.0, b * c;
    CHECK((nf.X - X).norm() < 1e-15);
    CHECK((nf.Lambda - L).norm() < 1e-15);

    PhaseData zero = d;
    zero.gamma.setZero();
    auto nz = leading_term(zero);
    for (const Mat* m : {&nz.X, &nz.R, &nz.Lambda, &nz.Y1, &nz.L2, &nz.h1, &nz.g1}) CHECK(m->norm() == 0.0);

    for (std::uint64_t s = 0; s < 10; ++s) {
        auto e = random_phase(1000 + s, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2, 1}, {1}});
        auto n = leading_term(e);
        REQUIRE(!n.anyResonant);
        auto bl = infinity_blocks(e);
        CHECK((comm(bl.A, n.X) - bl.B).norm() < 1e-13 * mag(bl.B));
        CHECK((n.g1 - (n.h1 + n.Y1 + n.X)).norm() == 0.0);
        auto series = gauge_series(e, 3);
        CHECK(series.g1Determined);
        CHECK((series.g1 - n.g1).norm() < 1e-9 * std::max(1.0, n.g1.norm()));

        // Lambda on a finite node is -P_i Q_i
        auto res = residues(e);
        for (int i = 0; i < e.g.num_nodes(); ++i) {
            if (e.g.node_part(i) == e.a.infinity_part()) continue;
            std::vector<int> loc;
            for (std::size_t k = 0; k < bl.U.size(); ++k)
                for (int r : e.g.node_indices(i))
                    if (bl.U[k] == r) loc.push_back(static_cast<int>(k));
            CHECK((n.Lambda(loc, loc) - res[i].Lambda).norm() < 1e-12 * std::max(1.0, res[i].Lambda.norm()));
        }
    }
}

TEST_CASE("resonant leading term") {
    auto d = random_phase(2, {INF, at(0.0)}, {{1, 1}, {2}});
    auto b = infinity_blocks(d);
    Mat Q = Mat::Identity(2, 2), P = Mat::Zero(2, 2);
    P(1, 1) = 1.0;
    P(0, 1) = cd(0.3, 0.2);
    d.gamma(b.U, b.W) = Q;
    d.gamma(b.W, b.U) = P;
    auto nf = leading_term(d);
    CHECK(nf.anyResonant);
    Mat L = nf.Lambda;
    CHECK(std::abs(L(0, 0)) < 1e-14);
    CHECK(std::abs(L(1, 1) - 1.0) < 1e-14);
    // h1 solves the shifted equation once the resonant part is removed
    CHECK((nf.h1 + comm(L, nf.h1) - (nf.L2 - nf.A1)).norm() < 1e-12);
    CHECK(nf.A1.norm() > 0.0);
    auto dt = TimeVec{0.3, -0.2, 0.0};
    CHECK(std::abs(varpi(d, dt) - varpi_residue_form(d, dt)) < 1e-12);
}

TEST_CASE("gauge terms") {
    std::mt19937_64 rng(12);
    auto d = random_phase(13, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}});
    auto dt = rtime(rng, d);
    auto b = infinity_blocks(d);
    Mat dC = dT_on(d, b.W, dt);
    CHECK(std::abs(gauge_term(d, {0.0, 0.0, 0.0}, dt)) == 0.0);
    const cd li(0.8, 0.3);
    CHECK(std::abs(gauge_term(d, {li, 0.0, 0.0}, dt) - li * (b.P * b.Q * b.C * dC).trace()) < 1e-12);
    CHECK_THROWS_AS(gauge_term(d, {1.0}, dt), Error);

    for (std::uint64_t s = 0; s < 10; ++s) {
        auto e = random_phase(1100 + s, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}});
        auto v = rtime(rng, e);
        const cd c(0.6, -0.25);
        auto sh = Mobius::shear(c);
        auto es = sl2_act(sh, e);
        auto vs = scaled_times(sh, e, v);
        auto eb = infinity_blocks(e);
        cd diff = varpi1(es, vs) - varpi1(e, v);
        cd expect = -c * (eb.P * eb.Q * eb.C * dT_on(e, eb.W, v)).trace();
        CHECK(std::abs(diff - expect) < 1e-10 * std::pow(mag(e.gamma), 2));

        // the gauge field is minus the Hamiltonian field of the gauge term
        std::vector<cd> lam{crand(rng), crand(rng), crand(rng)};
        Mat gf = gauge_field(e, lam, v);
        Mat hf = hamiltonian_flow(e, [&](const PhaseData& p) { return gauge_term(p, lam, v); });
        CHECK((gf + hf).norm() < 1e-6 * std::max(1.0, gf.norm()));
    }
}

TEST_CASE("Harnad duality") {
    std::mt19937_64 rng(13);
    for (std::uint64_t s = 0; s < 50; ++s) {
        auto d = jmms(1200 + s);
        auto dt = rtime(rng, d);
        auto du = harnad_dual(d);
        Mat lhs = vector_field(du, harnad_dual_times(d, dt));
        Mat rhs = harnad_dual_tangent(d, vector_field(d, dt));
        CHECK((lhs - rhs).norm() < 1e-12 * std::max(1.0, rhs.norm()));
        CHECK(std::abs(varpi(du, harnad_dual_times(d, dt)) - varpi(d, dt)) < 1e-12 * std::pow(mag(d.gamma), 4));
    }

    auto d = jmms(1300);
    auto twice = harnad_dual(harnad_dual(d));
    CHECK((twice.gamma + d.gamma).norm() == 0.0);
    for (std::size_t i = 0; i < d.t.size(); ++i) CHECK(twice.t[i] == -d.t[i]);
    auto l0 = lambdas(d), l2 = lambdas(twice);
    for (std::size_t i = 0; i < l0.size(); ++i) CHECK((l0[i] - l2[i]).norm() < 1e-14);
    // symplectic: omega is preserved
    Mat u = off_part(d.g, mrand(rng, 5, 5)), w = off_part(d.g, mrand(rng, 5, 5));
    auto du = harnad_dual(d);
    cd o1 = omega(d.a, d.g, u, w), o2 = omega(du.a, du.g, harnad_dual_tangent(d, u), harnad_dual_tangent(d, w));
    CHECK(std::abs(o1 - o2) < 1e-12 * std::max(1.0, std::abs(o1)));

    // the Fourier-Laplace inverse followed by reordering the parts
    auto fl = sl2_act(Mobius::fourier_laplace().inverse(), d);
    REQUIRE(fl.a.infinity_part() == 1);
    std::vector<int> perm = d.g.part_indices(1), w0 = d.g.part_indices(0);
    perm.insert(perm.end(), w0.begin(), w0.end());
    CHECK((fl.gamma(perm, perm) - du.gamma).norm() < 1e-14);
    std::vector<int> nodes = d.g.nodes_of_part(1), n0 = d.g.nodes_of_part(0);
    nodes.insert(nodes.end(), n0.begin(), n0.end());
    for (std::size_t k = 0; k < nodes.size(); ++k) CHECK(std::abs(fl.t[nodes[k]] - du.t[k]) < 1e-14);

    auto three = random_phase(1, {INF, at(0.0), at(1.0)}, {{1}, {1}, {1}});
    CHECK_THROWS_AS(harnad_dual(three), Error);
    auto off = random_phase(1, {INF, at(2.0)}, {{1}, {1}});
    CHECK_THROWS_AS(harnad_dual(off), Error);
}

TEST_CASE("master equations") {
    std::mt19937_64 rng(14);
    auto z = random_phase(1, {at(0.0), at(1.0), at(-2.0)}, {{1}, {2}, {1}});
    z.gamma.setZero();
    CHECK(master_field(z, rtime(rng, z)).norm() == 0.0);
    CHECK_THROWS_AS(master_field(random_phase(1, {INF, at(1.0)}, {{1}, {1}}), TimeVec{1.0, 1.0}), Error);

    for (std::uint64_t s = 0; s < 20; ++s) {
        auto d = random_phase(1400 + s, {at(crand(rng)), at(crand(rng)), at(crand(rng))}, {{1, 1}, {2}, {1}});
        auto dt = rtime(rng, d);
        Mat v = vector_field(d, dt);
        CHECK((master_field(d, dt) - v).norm() < 1e-12 * std::max(1.0, v.norm()));
    }

    // bipartite J = {0, 1}: B = [[0, R], [S, 0]]
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto d = random_phase(1500 + s, {at(0.0), at(1.0)}, {{1, 1}, {1, 2}});
        auto dt = rtime(rng, d);
        auto W0 = d.g.part_indices(0), W1 = d.g.part_indices(1);
        Mat R = d.gamma(W0, W1), S = d.gamma(W1, W0);
        Mat T0 = dT_on(d, W0, d.t), T1 = dT_on(d, W1, d.t), dT0 = dT_on(d, W0, dt), dT1 = dT_on(d, W1, dt);
        Mat RSt = tilde(d, W0, R * S, dt), SRt = tilde(d, W1, S * R, dt);
        Mat dS = S * RSt + SRt * S + T1 * S * dT0 + dT1 * S * T0 - (S * T0 * dT0 + T1 * dT1 * S);
        Mat mdR = R * SRt + RSt * R + T0 * R * dT1 + dT0 * R * T1 - (R * T1 * dT1 + T0 * dT0 * R);
        Mat m = master_field(d, dt);
        const double tol = 1e-12 * std::max(1.0, m.norm());
        CHECK((m(W1, W0) - dS).norm() < tol);
        CHECK((m(W0, W1) + mdR).norm() < tol);
    }
}

TEST_CASE("SL2 transport of the flow") {
    std::mt19937_64 rng(15);
    auto d = random_phase(3, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}});
    auto dt = rtime(rng, d);
    Mat v = vector_field(d, dt);
    std::vector<Mobius> gs{Mobius::shear(0.7), Mobius::scaling(cd(1.2, 0.3)), Mobius::fourier_laplace(),
                           unimodular({cd(1.1, 0.2), cd(0.3, -0.4), cd(0.5, 0.1), 0.0})};
    for (const auto& g : gs) {
        auto gd = sl2_act(g, d);
        auto dt2 = scaled_times(g, d, dt);
        Mat D = vector_field(gd, dt2) - sl2_tangent(g, d, v);
        auto [lam, res] = fit_gauge(gd, dt2, D);
        CHECK(res < 1e-10 * std::max(1.0, v.norm()));
        if (gd.a.infinity_part() < 0) {
            Mat m = master_field(gd, dt2) - sl2_tangent(g, d, v) - gauge_field(gd, lam, dt2);
            CHECK(m.norm() < 1e-10 * std::max(1.0, v.norm()));
        }
    }
    // the shear multiplier at infinity is the shear parameter
    auto gd = sl2_act(Mobius::shear(0.7), d);
    auto dt2 = scaled_times(Mobius::shear(0.7), d, dt);
    auto [lam, res] = fit_gauge(gd, dt2, vector_field(gd, dt2) - sl2_tangent(Mobius::shear(0.7), d, v));
    CHECK(std::abs(lam[0] - 0.7) < 1e-10);
}

TEST_CASE("conservation along trajectories") {
    for (std::uint64_t s = 0; s < 4; ++s) {
        auto d = random_phase(1600 + s, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}}, 0.6);
        std::mt19937_64 rng(s);
        TimeVec end = d.t;
        for (auto& x : end) x += 0.2 * crand(rng);
        IntegrateOptions o;
        o.keepAll = false;
        auto tr = integrate(FlowState{d, 0.0}, PathSpec{{d.t, end}}, o);
        REQUIRE(!tr.aborted);
        double len = 0.0;
        for (std::size_t k = 0; k < end.size(); ++k) len = std::max(len, std::abs(end[k] - d.t[k]));
        CHECK(tr.monitors.lambdaDrift < 1e-8 * std::max(1.0, len));
        CHECK(tr.monitors.traceDrift < 1e-8 * std::max(1.0, len));
    }
}

TEST_CASE("flatness of the full connection") {
    auto d = random_phase(17, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}}, 0.7);
    const cd z(0.9, 1.3);
    std::vector<double> hs{1e-2, 5e-3, 2.5e-3};
    for (auto [i, j] : std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {2, 3}}) {
        std::vector<double> r;
        for (double h : hs) r.push_back(curvature_times(d, i, j, h, z).norm());
        INFO("times " << i << "," << j << " residuals " << r[0] << " " << r[1] << " " << r[2]);
        CHECK(slope(hs, r) >= 1.9);
    }
    for (int i = 0; i < d.g.num_nodes(); ++i) {
        std::vector<double> r;
        for (double h : hs) r.push_back(curvature_z(d, i, h, z).norm());
        INFO("z," << i << " residuals " << r[0] << " " << r[1] << " " << r[2]);
        CHECK(slope(hs, r) >= 1.9);
    }
}

TEST_CASE("Hamiltonian vector fields of residue Hamiltonians") {
    auto d = random_phase(18, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}});
    const cd z(0.9, 1.3);
    const double eps = 1e-5;
    auto U = infinity_blocks(d).U;
    for (int i : d.g.nodes_of_part(d.a.infinity_part())) {
        auto H = [&](const PhaseData& p) { return varpi_residue_form(p, unit_time(p, i)); };
        Mat v = hamiltonian_flow(d, H);
        PhaseData p = d, m = d;
        p.gamma += eps * v;
        m.gamma -= eps * v;
        Mat dB = (connection_matrix(p, z) - connection_matrix(m, z)) / (2 * eps);
        auto vi = d.g.node_indices(i);
        Mat Ri = d.gamma(U, vi) * d.gamma(vi, U);
        Mat expect = comm(connection_matrix(d, z), Ri / (z - d.t[i]));
        CHECK((dB - expect).norm() < 1e-5 * std::max(1.0, expect.norm()));
    }
}

TEST_CASE("SL2 invariance of the reduced flow") {
    auto d = random_phase(19, {INF, at(0.4), at(-1.1)}, {{1, 1}, {2}, {1}}, 0.6);
    std::mt19937_64 rng(19);
    TimeVec end = d.t;
    for (auto& x : end) x += 0.15 * crand(rng);
    IntegrateOptions o;
    o.keepAll = false;
    auto base = integrate(FlowState{d, 0.0}, PathSpec{{d.t, end}}, o);
    REQUIRE(!base.aborted);
    const auto& fin = base.states.back().d;
    for (const auto& g : {Mobius::shear(0.7), Mobius::fourier_laplace(), unimodular({cd(1.1, 0.2), cd(0.3, -0.4), cd(0.5, 0.1), 0.0})}) {
        auto gd = sl2_act(g, d);
        TimeVec probe = rtime(rng, d);
        auto p2 = scaled_times(g, d, probe);
        auto [lam, res] = fit_gauge(gd, p2, vector_field(gd, p2) - sl2_tangent(g, d, vector_field(d, probe)));
        IntegrateOptions og = o;
        og.extra = [lam = lam](const PhaseData& p, const TimeVec& v) -> Mat { return -gauge_field(p, lam, v); };
        TimeVec gend = scaled_times(g, d, end);
        auto tr = integrate(FlowState{gd, 0.0}, PathSpec{{gd.t, gend}}, og);
        REQUIRE(!tr.aborted);
        auto expect = sl2_act(g, fin);
        const auto& got = tr.states.back().d;
        CHECK((got.gamma - expect.gamma).norm() < 1e-6 * std::max(1.0, expect.gamma.norm()));
        auto le = lambdas(expect), lg = lambdas(got);
        auto re = residues(expect), rg = residues(got);
        for (std::size_t i = 0; i < le.size(); ++i) {
            CHECK((le[i] - lg[i]).norm() < 1e-6);
            auto je = jordan_numeric(re[i].R), jg = jordan_numeric(rg[i].R);
            CHECK(je.same_as(jg, 1e-6));
        }
    }
}
