#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "isomono/orbit.hpp"
#include "isomono/phase_space.hpp"
#include "support.hpp"

using namespace isomono;
using namespace fixtures;

namespace {

const FourierPoint INF = FourierPoint::inf();
FourierPoint at(cd v) { return FourierPoint::at(v); }

Mat random_tangent(std::mt19937_64& rng, const GradedSpace& g) {
    return off_part(g, mrand(rng, g.size(), g.size()));
}

PhaseData jmms(std::uint64_t seed, int w, int u) {
    // W_inf split into w one-dimensional nodes, W_0 into u one-dimensional nodes
    return random_phase(seed, {INF, at(0.0)}, {std::vector<int>(w, 1), std::vector<int>(u, 1)});
}

} // namespace

TEST_CASE("phi constants and skew-adjointness") {
    FourierConfig a{{INF, at(0.0), at(2.0)}};
    CHECK(a.phi(0, 1) == cd(-1));
    CHECK(a.phi(1, 0) == cd(1));
    CHECK(a.phi(1, 1) == cd(0));
    CHECK(std::abs(a.phi(1, 2) - cd(-0.5)) < 1e-15);
    GradedSpace g({{1, 2}, {2}, {1, 1}});
    std::mt19937_64 rng(3);
    for (int k = 0; k < 10; ++k) {
        Mat e = mrand(rng, g.size(), g.size()), f = mrand(rng, g.size(), g.size());
        cd lhs = (apply_phi(a, g, e) * f).trace(), rhs = -(e * apply_phi(a, g, f)).trace();
        CHECK(std::abs(lhs - rhs) < 1e-12);
    }
    FourierConfig bad{{at(1.0), at(1.0)}};
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("normalize") {
    // alpha = Id, beta = 0: single part at 0
    auto n1 = normalize(Mat::Identity(2, 2), Mat::Zero(2, 2), Mat::Zero(2, 2));
    REQUIRE(n1.data.a.size() == 1);
    CHECK(!n1.data.a.points[0].infinite);
    CHECK(std::abs(n1.data.a.points[0].value) < 1e-14);
    CHECK(n1.data.a.infinity_part() == -1);

    Mat al = Mat::Zero(2, 2), be = Mat::Zero(2, 2);
    al(1, 1) = 1.0;
    be(0, 0) = 1.0;
    be(1, 1) = -3.0;
    auto n2 = normalize(al, be, Mat::Zero(2, 2));
    REQUIRE(n2.data.a.size() == 2);
    CHECK(n2.data.a.points[0].infinite);
    CHECK(std::abs(n2.data.a.points[1].value - 3.0) < 1e-12);
    CHECK(n2.data.g.part_dim(0) == 1);

    // random 4-dim example with three ratios, conjugated
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        Mat da = Mat::Zero(4, 4), db = Mat::Zero(4, 4);
        cd p1 = crand(rng), p2 = crand(rng);
        da(0, 0) = 0.0, db(0, 0) = 2.0;     // infinity
        da(1, 1) = 2.0, db(1, 1) = -2.0 * p1;
        da(2, 2) = 0.5, db(2, 2) = -0.5 * p1; // same ratio as row 1
        da(3, 3) = 1.0, db(3, 3) = -p2;
        Mat s = mrand(rng, 4, 4);
        Mat alpha = s * da * s.inverse(), beta = s * db * s.inverse();
        Mat gamma = mrand(rng, 4, 4);
        auto nd = normalize(alpha, beta, gamma);
        CHECK(nd.data.a.size() == 3);
        CHECK(nd.data.a.points[0].infinite);
        CHECK(nd.data.g.part_dim(0) == 1);
        auto w = assemble(nd.data);
        const double sc = scale_of(gamma);
        CHECK((w.alpha - nd.left * alpha * nd.right).norm() < 1e-8 * sc);
        CHECK((w.beta - nd.left * beta * nd.right).norm() < 1e-8 * sc);
        CHECK((w.gamma - nd.left * gamma * nd.right).norm() < 1e-8 * sc * scale_of(nd.left));
        nd.data.validate();
    }

    Mat nc = Mat::Zero(2, 2);
    nc(0, 1) = 1.0;
    CHECK_THROWS_AS(normalize(Mat::Identity(2, 2) + nc, Mat::Identity(2, 2) + nc.transpose(), Mat::Zero(2, 2)), Error);
    Mat ker = Mat::Identity(2, 2);
    ker(1, 1) = 0.0;
    CHECK_THROWS_AS(normalize(ker, ker, Mat::Zero(2, 2)), Error);
    Mat jb = Mat::Zero(2, 2);
    jb(0, 1) = 1.0; // nilpotent diagonal block
    CHECK_THROWS_AS(normalize(Mat::Identity(2, 2), Mat::Zero(2, 2), jb), Error);
}

TEST_CASE("omega") {
    auto d = jmms(5, 2, 3);
    auto b = infinity_blocks(d);
    std::mt19937_64 rng(7);
    for (int k = 0; k < 10; ++k) {
        Mat u = random_tangent(rng, d.g), v = random_tangent(rng, d.g);
        Mat uP = u(b.W, b.U), uQ = u(b.U, b.W), vP = v(b.W, b.U), vQ = v(b.U, b.W);
        cd expect = (uQ * vP).trace() - (vQ * uP).trace();
        CHECK(std::abs(omega(d.a, d.g, u, v) - expect) < 1e-12);
        CHECK(std::abs(omega(d.a, d.g, u, u)) < 1e-12);
    }

    // Gram matrix on the off-part coordinates is nondegenerate
    auto e = random_phase(9, {INF, at(0.0), at(1.5)}, {{1}, {1, 1}, {2}});
    std::vector<Mat> basis;
    for (int r = 0; r < e.g.size(); ++r)
        for (int c = 0; c < e.g.size(); ++c) {
            Mat u = Mat::Zero(e.g.size(), e.g.size());
            u(r, c) = 1.0;
            if (off_part(e.g, u).norm() > 0) basis.push_back(u);
        }
    Mat gram(basis.size(), basis.size());
    for (std::size_t i = 0; i < basis.size(); ++i)
        for (std::size_t j = 0; j < basis.size(); ++j) gram(i, j) = omega(e.a, e.g, basis[i], basis[j]);
    CHECK(numeric_rank(gram) == static_cast<int>(basis.size()));
    CHECK_THROWS_AS(omega(e.a, e.g, Mat::Zero(2, 2), Mat::Zero(2, 2)), Error);
}

TEST_CASE("sl2 action") {
    std::mt19937_64 rng(13);
    auto d = random_phase(17, {INF, at(0.0), at(cd(1.0, 0.5))}, {{1, 1}, {2}, {1}});
    auto id = sl2_act(Mobius::identity(), d);
    CHECK((id.gamma - d.gamma).norm() == 0.0);

    // scalings and shears on the points
    auto sc = sl2_act(Mobius::scaling(2.0), d);
    CHECK(sc.a.points[0].infinite);
    CHECK(std::abs(sc.a.points[2].value - 4.0 * cd(1.0, 0.5)) < 1e-14);
    auto sh = sl2_act(Mobius::shear(0.25), d);
    CHECK(std::abs(sh.a.points[1].value + 0.25) < 1e-15);
    CHECK((sh.gamma - d.gamma).norm() == 0.0);
    // Fourier-Laplace: a -> -1/a, infinity <-> 0, eps = diag(1, -1, -1/a)
    auto fl = sl2_act(Mobius::fourier_laplace(), d);
    CHECK(std::abs(fl.a.points[0].value) < 1e-15);
    CHECK(fl.a.points[1].infinite);
    CHECK(std::abs(fl.a.points[2].value + 1.0 / cd(1.0, 0.5)) < 1e-14);
    Mat eps = diag_of_parts(d.g, {1.0, -1.0, -1.0 / cd(1.0, 0.5)});
    CHECK((fl.gamma - eps * d.gamma).norm() < 1e-14);
    CHECK((fl.xi() - d.xi() * eps.inverse()).norm() < 1e-12);

    std::vector<Mobius> gens = {Mobius::scaling(crand(rng)), Mobius::shear(crand(rng)),
                                Mobius::fourier_laplace(), Mobius::fourier_laplace().inverse()};
    for (int trial = 0; trial < 20; ++trial) {
        auto e = random_phase(100 + trial, {INF, at(crand(rng)), at(crand(rng))}, {{1, 2}, {1}, {2, 1}});
        Mat u = random_tangent(rng, e.g), v = random_tangent(rng, e.g);
        cd w0 = omega(e.a, e.g, u, v);
        for (const auto& g : gens) {
            auto e2 = sl2_act(g, e);
            cd w1 = omega(e2.a, e2.g, sl2_tangent(g, e, u), sl2_tangent(g, e, v));
            CHECK(std::abs(w1 - w0) < 1e-10 * std::max(1.0, std::abs(w0)));
            // g then g^-1
            auto back = sl2_act(g.inverse(), e2);
            CHECK((back.gamma - e.gamma).norm() < 1e-10 * scale_of(e.gamma));
            for (int j = 0; j < e.g.num_parts(); ++j) CHECK(back.a.points[j].same_as(e.a.points[j], 1e-10));
            // residue data
            auto r0 = residues(e), r1 = residues(e2);
            for (std::size_t i = 0; i < r0.size(); ++i) {
                CHECK((r0[i].Lambda - r1[i].Lambda).norm() < 1e-10 * scale_of(r0[i].Lambda));
                CHECK(jordan_numeric(r0[i].R).same_as(jordan_numeric(r1[i].R), 1e-6));
            }
        }
        // closed form agrees with composing generators
        Mobius g1 = Mobius::shear(crand(rng)), g2 = Mobius::scaling(crand(rng));
        auto seq = sl2_act(Mobius::fourier_laplace(), sl2_act(g2, sl2_act(g1, e)));
        auto prod = sl2_act(g1 * g2 * Mobius::fourier_laplace(), e);
        CHECK((seq.gamma - prod.gamma).norm() < 1e-10 * scale_of(e.gamma));
    }
}

TEST_CASE("Harnad permutation from the Fourier-Laplace transform") {
    auto d = jmms(23, 2, 3);
    auto b = infinity_blocks(d);
    // the inverse transform realises (W_inf, W_0, Q, -P, -T_inf, T_0) exactly
    auto h = sl2_act(Mobius::fourier_laplace().inverse(), d);
    REQUIRE(h.a.points[0].same_as(FourierPoint::at(0.0)));
    REQUIRE(h.a.points[1].infinite);
    auto hb = infinity_blocks(h);
    CHECK((hb.P - b.Q).norm() < 1e-14);
    CHECK((hb.Q + b.P).norm() < 1e-14);
    CHECK((hb.C - b.T).norm() < 1e-14);
    Mat t0 = h.T_hat()(hb.U, hb.U);
    CHECK((t0 + b.C).norm() < 1e-14);
    // the forward transform differs by (P, Q) -> (-P, -Q)
    auto f = infinity_blocks(sl2_act(Mobius::fourier_laplace(), d));
    CHECK((f.P + b.Q).norm() < 1e-14);
    CHECK((f.Q - b.P).norm() < 1e-14);
}

TEST_CASE("residues") {
    auto z = random_phase(1, {INF, at(0.0)}, {{1, 1}, {2}});
    z.gamma.setZero();
    for (auto& r : residues(z)) {
        CHECK(r.R.norm() == 0.0);
        CHECK(r.Lambda.norm() == 0.0);
    }
    // JMMS: R_i = Q Id_i P
    auto d = random_phase(2, {INF, at(0.0)}, {{1, 2}, {3}});
    auto b = infinity_blocks(d);
    auto rs = residues(d);
    for (int i = 0; i < 2; ++i) {
        Mat id = Mat::Zero(3, 3);
        for (int r : d.g.node_indices(i)) id(r, r) = 1.0;
        CHECK((rs[i].R - b.Q * id * b.P).norm() < 1e-12);
    }
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto e = random_phase(s, {INF, at(1.0), at(-2.0), at(0.5)}, {{1}, {2, 1}, {1}, {1, 1}});
        cd tr = 0.0;
        for (auto& r : residues(e)) tr += r.Lambda.trace();
        CHECK(std::abs(tr) < 1e-12 * scale_of(e.gamma) * scale_of(e.gamma));
        CHECK(std::abs((e.xi() * e.gamma).trace()) < 1e-12 * e.gamma.squaredNorm());
    }
}

TEST_CASE("stability") {
    auto d = random_phase(3, {at(0.0), at(1.0), at(2.0)}, {{1}, {1}, {1}});
    CHECK(!is_stable(d).reducible);
    auto z = d;
    z.gamma.setZero();
    auto sz = is_stable(z);
    CHECK(sz.reducible);
    CHECK(is_invariant(z, sz.witness));

    // nothing leaves node 2, so it spans a subrepresentation on its own
    auto t = random_phase(4, {at(0.0), at(1.0), at(2.0)}, {{1}, {1}, {1}});
    t.gamma(0, 2) = 0.0; // node 2 -> node 0
    t.gamma(1, 2) = 0.0; // node 2 -> node 1
    auto st = is_stable(t);
    REQUIRE(st.reducible);
    CHECK(is_invariant(t, st.witness));
    int dim = 0;
    for (auto& w : st.witness) dim += static_cast<int>(w.cols());
    CHECK(dim > 0);
    CHECK(dim < 3);
    std::vector<Mat> w{Mat(1, 0), Mat(1, 0), Mat::Identity(1, 1)};
    CHECK(is_invariant(t, w));
    std::vector<Mat> w2{Mat::Identity(1, 1), Mat::Identity(1, 1), Mat(1, 0)};
    CHECK(!is_invariant(t, w2));

    // a subrepresentation (a line at each node) that contains no whole node space
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto h = random_phase(60 + seed, {at(0.0), at(1.0)}, {{2}, {2}});
        h.gamma(3, 0) = 0.0; // e0 -> span f0
        h.gamma(1, 2) = 0.0; // f0 -> span e0
        std::mt19937_64 r2(seed);
        Mat s0 = mrand(r2, 2, 2), s1 = mrand(r2, 2, 2);
        Mat s = Mat::Zero(4, 4);
        s.block(0, 0, 2, 2) = s0;
        s.block(2, 2, 2, 2) = s1;
        h.gamma = s * h.gamma * s.inverse();
        auto sh = is_stable(h);
        CHECK(sh.algebraDim < 16);
        REQUIRE(sh.reducible);
        REQUIRE(!sh.witness.empty());
        CHECK(is_invariant(h, sh.witness));
    }

    // injective Q_i, surjective P_i and the orbit relation on generic points
    for (std::uint64_t seed = 30; seed < 40; ++seed) {
        auto e = random_phase(seed, {INF, at(0.0), at(1.0)}, {{1, 1}, {2}, {1}});
        REQUIRE(!is_stable(e).reducible);
        for (auto& r : residues(e)) {
            CHECK(numeric_rank(r.Q) == r.Q.cols());
            CHECK(numeric_rank(r.P) == r.P.rows());
            auto jr = jordan_numeric(r.R);
            auto jl = jordan_numeric(-r.Lambda);
            INFO(to_string(jr), " / ", to_string(jl));
            CHECK(contract_orbit(jr, 1e-8).same_as(jl, 1e-6));
        }
    }
}

TEST_CASE("connection matrix") {
    auto d = random_phase(5, {INF, at(0.0), at(1.0)}, {{1, 1}, {2}, {1}});
    auto b = infinity_blocks(d);
    auto z0 = d;
    z0.gamma.setZero();
    cd z(0.3, -0.7);
    CHECK((connection_matrix(z0, z) - (b.A * z + b.T)).norm() < 1e-14);
    auto rs = residues(d);
    for (int i : d.g.nodes_of_part(0)) {
        cd ti = d.t[i];
        // (z - t) B(z) -> R; averaging over z - t = eps i^k removes the orders eps .. eps^3
        Mat est = Mat::Zero(rs[i].R.rows(), rs[i].R.cols());
        for (int k = 0; k < 4; ++k) {
            cd e = 1e-3 * std::pow(cd(0, 1), k);
            est += 0.25 * e * connection_matrix(d, ti + e);
        }
        CHECK((est - rs[i].R).norm() < 1e-10 * scale_of(rs[i].R));
        CHECK_THROWS_AS(connection_matrix(d, ti), Error);
    }
    // JMMS shape
    auto j = jmms(6, 2, 2);
    auto jb = infinity_blocks(j);
    Mat expect = jb.T + jb.Q * (z * Mat::Identity(2, 2) - jb.C).inverse() * jb.P;
    CHECK((connection_matrix(j, z) - expect).norm() < 1e-12);
}

TEST_CASE("cotangent twist") {
    auto j = jmms(7, 1, 1);
    Orientation up{{{1, 0}}};  // 0 -> infinity
    Orientation down{{{0, 1}}}; // infinity -> 0
    Mat a = cotangent_twist(j, up), b = cotangent_twist(j, down);
    CHECK((a - j.gamma).norm() < 1e-15);
    CHECK(std::abs(b(0, 1) - j.gamma(0, 1)) < 1e-15);
    CHECK(std::abs(b(1, 0) + j.gamma(1, 0)) < 1e-15);

    std::mt19937_64 rng(19);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto d = random_phase(seed, {at(crand(rng)), INF, at(crand(rng))}, {{1, 2}, {2}, {1}});
        auto o = default_orientation(d.g);
        if (seed % 2) std::swap(o.edges[1].first, o.edges[1].second);
        Mat rho = cotangent_twist(d, o);
        auto rs = residues(d);
        for (int i = 0; i < d.g.num_nodes(); ++i)
            CHECK((cotangent_moment(d.g, o, rho, i) - rs[i].Lambda).norm() < 1e-12 * scale_of(d.gamma) * 10);
        Mat u = random_tangent(rng, d.g), v = random_tangent(rng, d.g);
        cd w0 = omega(d.a, d.g, u, v);
        cd w1 = cotangent_omega(d.g, o, cotangent_twist({d.a, d.g, u, d.t}, o), cotangent_twist({d.a, d.g, v, d.t}, o));
        CHECK(std::abs(w0 - w1) < 1e-12 * std::max(1.0, std::abs(w0)));
    }
    Orientation partial{{{0, 1}}};
    auto d = random_phase(1, {at(0.0), at(1.0), at(2.0)}, {{1}, {1}, {1}});
    CHECK_THROWS_AS(cotangent_twist(d, partial), Error);
}
