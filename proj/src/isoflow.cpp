#include "isomono/isoflow.hpp"

#include <algorithm>
#include <cmath>

#include "isomono/spectral.hpp"

namespace isomono {

namespace {

std::vector<int> index_nodes(const GradedSpace& g) {
    std::vector<int> out(g.size());
    for (int i = 0; i < g.num_nodes(); ++i)
        for (int k = 0; k < g.node_dim(i); ++k) out[g.node_offset(i) + k] = i;
    return out;
}

Mat sub(const Mat& m, const std::vector<int>& r, const std::vector<int>& c) { return m(r, c); }

Mat comm(const Mat& x, const Mat& y) { return x * y - y * x; }

// block-diagonal part of m (indexed by idx) with respect to parts
Mat delta_on(const GradedSpace& g, const std::vector<int>& idx, const Mat& m) {
    Mat out = Mat::Zero(m.rows(), m.cols());
    auto node = index_nodes(g);
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            if (g.node_part(node[idx[r]]) == g.node_part(node[idx[c]])) out(r, c) = m(r, c);
    return out;
}

// block-diagonal part of m with respect to nodes
Mat pi_h(const GradedSpace& g, const std::vector<int>& idx, const Mat& m) {
    Mat out = Mat::Zero(m.rows(), m.cols());
    auto node = index_nodes(g);
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            if (node[idx[r]] == node[idx[c]]) out(r, c) = m(r, c);
    return out;
}

Mat diag_on(const GradedSpace& g, const std::vector<int>& idx, const std::vector<cd>& perNode) {
    auto node = index_nodes(g);
    Mat out = Mat::Zero(idx.size(), idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) out(r, r) = perNode[node[idx[r]]];
    return out;
}

void check_times(const PhaseData& d, const TimeVec& dt) {
    if (static_cast<int>(dt.size()) != d.g.num_nodes())
        fail(ErrorKind::Invalid, "one time velocity per node required");
}

std::vector<int> all_indices(int n) {
    std::vector<int> v(n);
    for (int k = 0; k < n; ++k) v[k] = k;
    return v;
}

struct Blocks {
    InfinityBlocks b;
    Mat dT, dC;
};

Blocks blocks(const PhaseData& d, const TimeVec& dt) {
    Blocks out{infinity_blocks(d), Mat(), Mat()};
    out.dT = diag_on(d.g, out.b.U, dt);
    out.dC = diag_on(d.g, out.b.W, dt);
    return out;
}

} // namespace

TimeVec unit_time(const PhaseData& d, int node) {
    TimeVec v(d.g.num_nodes(), 0.0);
    v.at(node) = 1.0;
    return v;
}

Mat tilde(const PhaseData& d, const std::vector<int>& idx, const Mat& R, const TimeVec& dt) {
    check_times(d, dt);
    const auto n = static_cast<Eigen::Index>(idx.size());
    if (R.rows() != n || R.cols() != n) fail(ErrorKind::Invalid, "tilde: size mismatch");
    auto node = index_nodes(d.g);
    const double thr = 1e-12 * std::max(1.0, R.cwiseAbs().maxCoeff());
    Mat out = Mat::Zero(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) {
            const int a = node[idx[r]], b = node[idx[c]];
            if (d.g.node_part(a) != d.g.node_part(b)) {
                if (std::abs(R(r, c)) > thr)
                    fail(ErrorKind::Precondition, "tilde needs a part-block-diagonal argument");
                continue;
            }
            if (a == b) continue;
            out(r, c) = R(r, c) * (dt[a] - dt[b]) / (d.t[a] - d.t[b]);
        }
    return out;
}

Mat tilde(const PhaseData& d, const Mat& R, const TimeVec& dt) { return tilde(d, all_indices(d.g.size()), R, dt); }

cd varpi1(const PhaseData& d, const TimeVec& dt) {
    auto [b, dT, dC] = blocks(d, dt);
    cd s = (b.X * b.X * b.T * dT).trace();
    if (!b.W.empty()) s += (b.P * b.A * b.Q * b.C * dC).trace();
    return s;
}

cd varpi(const PhaseData& d, const TimeVec& dt) {
    check_times(d, dt);
    Mat xi = d.xi();
    Mat m = part_diagonal(d.g, xi * d.gamma);
    Mat gam = d.gamma + d.T_hat();
    Mat dTh = d.T_hat(dt);
    cd w0 = 0.5 * (tilde(d, m, dt) * m).trace() - (xi * gam * xi * dTh).trace();
    return w0 + varpi1(d, dt);
}

cd hamiltonian(const PhaseData& d, int node) { return varpi(d, unit_time(d, node)); }

cd varpi_infinity(const PhaseData& d, const TimeVec& dt) {
    auto [b, dT, dC] = blocks(d, dt);
    const auto& U = b.U;
    Mat QP = b.W.empty() ? Mat::Zero(U.size(), U.size()) : Mat(b.Q * b.P);
    Mat dqp = delta_on(d.g, U, QP), dxb = delta_on(d.g, U, b.X * b.B);
    Mat tqp = tilde(d, U, dqp, dt), txb = tilde(d, U, dxb, dt);
    cd s = 0.0;
    if (!b.W.empty()) s += (b.Q * b.C * b.P * dT).trace();
    s -= (b.X * b.T * b.X * dT).trace();
    s += (b.X * b.X * b.T * dT).trace();
    s += (comm(b.X, QP) * dT).trace();
    s -= (b.X * b.B * b.X * dT).trace();
    s += 0.5 * (tqp * dqp).trace() + (tqp * dxb).trace() + 0.5 * (txb * dxb).trace();
    return s;
}

cd varpi_residue_form(const PhaseData& d, const TimeVec& dt) {
    check_times(d, dt);
    cd s = varpi_infinity(d, dt);
    const int inf = d.a.infinity_part();
    if (inf < 0) return s;
    auto b = infinity_blocks(d);
    auto poles = d.g.nodes_of_part(inf);
    std::vector<Mat> R;
    for (int i : poles) {
        std::vector<int> cols;
        for (int k = 0; k < d.g.node_dim(i); ++k) cols.push_back(d.g.node_offset(i) - d.g.part_offset(inf) + k);
        R.push_back(b.Q(Eigen::all, cols) * b.P(cols, Eigen::all));
    }
    for (std::size_t x = 0; x < poles.size(); ++x) {
        const int i = poles[x];
        Mat reg = b.A * d.t[i] + b.B + b.T;
        for (std::size_t y = 0; y < poles.size(); ++y)
            if (y != x) reg += R[y] / (d.t[i] - d.t[poles[y]]);
        s += (R[x] * reg).trace() * dt[i];
    }
    return s;
}

Mat vector_field(const PhaseData& d, const TimeVec& dt) {
    check_times(d, dt);
    const auto& g = d.g;
    Mat xi = d.xi();
    Mat gam = d.gamma + d.T_hat();
    Mat dTh = d.T_hat(dt);
    Mat m = part_diagonal(g, xi * d.gamma);
    Mat e = comm(tilde(d, m, dt), d.gamma);
    e += off_part(g, gam * xi * dTh + dTh * xi * gam);
    e -= apply_phi_inverse(d.a, g, off_part(g, xi * dTh * xi));
    auto [b, dT, dC] = blocks(d, dt);
    if (!b.W.empty()) {
        e(b.W, b.U) += -b.C * dC * b.P * b.A;
        e(b.U, b.W) += b.A * b.Q * b.C * dC;
    }
    e(b.U, b.U) += -b.T * dT * b.X - b.X * b.T * dT;
    return off_part(g, e);
}

Mat vector_field_qpb(const PhaseData& d, const TimeVec& dt) {
    auto [b, dT, dC] = blocks(d, dt);
    const auto& U = b.U;
    const auto& W = b.W;
    Mat QP = W.empty() ? Mat::Zero(U.size(), U.size()) : Mat(b.Q * b.P);
    Mat R = delta_on(d.g, U, QP + b.X * b.B);
    Mat Rt = tilde(d, U, R, dt);
    Mat dTX = comm(dT, b.X);
    Mat out = Mat::Zero(d.g.size(), d.g.size());
    if (!W.empty()) {
        Mat PQt = tilde(d, W, b.P * b.Q, dt);
        Mat dQ = b.Q * PQt + Rt * b.Q + dTX * b.Q + (b.B + b.T) * b.Q * dC + dT * b.Q * b.C +
                 b.A * b.Q * b.C * dC;
        Mat mdP = PQt * b.P + b.P * Rt + b.P * dTX + dC * b.P * (b.B + b.T) + b.C * b.P * dT +
                  b.C * dC * b.P * b.A;
        out(U, W) = dQ;
        out(W, U) = -mdP;
    }
    Mat QdCP = W.empty() ? Mat::Zero(U.size(), U.size()) : Mat(b.Q * dC * b.P);
    Mat dB = comm(Rt, b.B) + comm(dT, QP) + b.B * b.X * dT + dT * b.X * b.B +
             comm(b.A, QdCP - b.X * dT * b.X) + comm(b.T, comm(b.X, dT));
    out(U, U) = dB - delta_on(d.g, U, dB);
    return out;
}

Mat vector_field_blocks(const PhaseData& d, const TimeVec& dt) {
    check_times(d, dt);
    const auto& g = d.g;
    const int k = g.num_parts();
    const int inf = d.a.infinity_part();
    Mat xi = d.xi();
    std::vector<std::vector<int>> idx(k);
    std::vector<Mat> T(k), dT(k);
    for (int j = 0; j < k; ++j) {
        idx[j] = g.part_indices(j);
        T[j] = diag_on(g, idx[j], d.t);
        dT[j] = diag_on(g, idx[j], dt);
    }
    auto Bb = [&](int i, int j) { return sub(d.gamma, idx[i], idx[j]); };
    auto Xb = [&](int i, int j) { return sub(xi, idx[i], idx[j]); };
    // tilde of sum_k X_ik B_ki on W_i
    std::vector<Mat> left(k);
    for (int i = 0; i < k; ++i) {
        Mat s = Mat::Zero(idx[i].size(), idx[i].size());
        for (int q = 0; q < k; ++q)
            if (q != i) s += Xb(i, q) * Bb(q, i);
        left[i] = tilde(d, idx[i], s, dt);
    }
    std::vector<Mat> right(k);
    for (int j = 0; j < k; ++j) {
        Mat s = Mat::Zero(idx[j].size(), idx[j].size());
        for (int q = 0; q < k; ++q)
            if (q != j) s += Bb(j, q) * Xb(q, j);
        right[j] = tilde(d, idx[j], s, dt);
    }
    Mat out = Mat::Zero(g.size(), g.size());
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            if (i == j) continue;
            Mat Bij = Bb(i, j), Xij = Xb(i, j);
            Mat r = left[i] * Bij + Bij * right[j];
            for (int q = 0; q < k; ++q) {
                if (q != i) r += dT[i] * Xb(i, q) * Bb(q, j);
                if (q != j) r += Bb(i, q) * Xb(q, j) * dT[j];
                if (q != i && q != j) r -= Xb(i, q) * dT[q] * Xb(q, j) / d.a.phi(i, j);
            }
            r += dT[i] * Xij * T[j] + T[i] * Xij * dT[j];
            if (i != inf && j != inf)
                r -= T[i] * dT[i] * Xij + Xij * T[j] * dT[j];
            else if (i == inf)
                r -= T[i] * dT[i] * Bij * d.a.points[j].value;
            else
                r += d.a.points[i].value * Bij * T[j] * dT[j];
            out(idx[i], idx[j]) = r;
        }
    return out;
}

namespace {

struct JmmsShape {
    std::vector<int> W, U;
};

JmmsShape jmms_shape(const PhaseData& d) {
    const int inf = d.a.infinity_part();
    if (d.g.num_parts() != 2 || inf < 0) fail(ErrorKind::Invalid, "needs exactly two parts, one at infinity");
    const int zero = 1 - inf;
    if (std::abs(d.a.points[zero].value) > 1e-14) fail(ErrorKind::Invalid, "the finite part must sit at 0");
    return {d.g.part_indices(inf), d.g.part_indices(zero)};
}

} // namespace

Mat vector_field_jmms(const PhaseData& d, const TimeVec& dt) {
    auto s = jmms_shape(d);
    Mat P = sub(d.gamma, s.W, s.U), Q = sub(d.gamma, s.U, s.W);
    Mat T0 = diag_on(d.g, s.U, d.t), dT0 = diag_on(d.g, s.U, dt);
    Mat Ti = diag_on(d.g, s.W, d.t), dTi = diag_on(d.g, s.W, dt);
    Mat pq = tilde(d, s.W, P * Q, dt), qp = tilde(d, s.U, Q * P, dt);
    Mat out = Mat::Zero(d.g.size(), d.g.size());
    out(s.U, s.W) = Q * pq + qp * Q + T0 * Q * dTi + dT0 * Q * Ti;
    out(s.W, s.U) = -(P * qp + pq * P + Ti * P * dT0 + dTi * P * T0);
    return out;
}

cd varpi_jmms(const PhaseData& d, const TimeVec& dt) {
    auto s = jmms_shape(d);
    Mat P = sub(d.gamma, s.W, s.U), Q = sub(d.gamma, s.U, s.W);
    Mat T0 = diag_on(d.g, s.U, d.t), dT0 = diag_on(d.g, s.U, dt);
    Mat Ti = diag_on(d.g, s.W, d.t), dTi = diag_on(d.g, s.W, dt);
    Mat pq = tilde(d, s.W, P * Q, dt), qp = tilde(d, s.U, Q * P, dt);
    return 0.5 * (Q * pq * P).trace() + 0.5 * (P * qp * Q).trace() + (P * T0 * Q * dTi).trace() +
           (Q * Ti * P * dT0).trace();
}

Mat hamiltonian_flow(const PhaseData& d, const std::function<cd(const PhaseData&)>& f, double h) {
    // d/dt Gamma = v with omega(v, u) = df(u)
    return hamiltonian_field(d.a, d.g, fd_gradient(d, f, h));
}

Mat full_connection_form(const PhaseData& d, cd z, cd dz, const TimeVec& dt) {
    auto [b, dT, dC] = blocks(d, dt);
    const auto& U = b.U;
    Mat out = (b.A * z + b.B + b.T) * dz + z * dT;
    if (!b.W.empty()) {
        const auto w = b.C.rows();
        Mat mid = Mat::Zero(w, w);
        for (Eigen::Index k = 0; k < w; ++k) {
            cd c = b.C(k, k);
            if (std::abs(z - c) <= 1e-12 * std::max(1.0, std::abs(c)))
                fail(ErrorKind::Pole, "connection evaluated at a pole");
            mid(k, k) = (dz - dC(k, k)) / (z - c);
        }
        out += b.Q * mid * b.P;
    }
    Mat QP = b.W.empty() ? Mat::Zero(U.size(), U.size()) : Mat(b.Q * b.P);
    out += comm(dT, b.X) + tilde(d, U, delta_on(d.g, U, b.X * b.B), dt) + tilde(d, U, delta_on(d.g, U, QP), dt);
    return out;
}

ConnectionEval full_connection(const PhaseData& d, cd z) {
    ConnectionEval e;
    TimeVec zero(d.g.num_nodes(), 0.0);
    e.Bz = full_connection_form(d, z, 1.0, zero);
    for (int i = 0; i < d.g.num_nodes(); ++i) e.Bt.push_back(full_connection_form(d, z, 0.0, unit_time(d, i)));
    return e;
}

Mat restricted_connection(const PhaseData& d, int node, const TimeVec& dt) {
    const int inf = d.a.infinity_part();
    if (inf < 0 || d.g.node_part(node) != inf) fail(ErrorKind::Invalid, "node is not at infinity");
    auto [b, dT, dC] = blocks(d, dt);
    const auto& U = b.U;
    const cd ti = d.t[node];
    Mat out = Mat::Zero(U.size(), U.size());
    for (int j : d.g.nodes_of_part(inf)) {
        if (j == node) continue;
        auto vj = d.g.node_indices(j);
        Mat Qj = sub(d.gamma, U, vj), Pj = sub(d.gamma, vj, U);
        out += Qj * Pj * (dt[node] - dt[j]) / (ti - d.t[j]);
    }
    Mat QP = b.Q * b.P;
    out += tilde(d, U, delta_on(d.g, U, QP + b.X * b.B), dt) + comm(dT, b.X) + ti * dT + dt[node] * b.T +
           (b.A * ti + b.B) * dt[node];
    return out;
}

Mat local_connection(const PhaseData& d, int node, const TimeVec& dt) {
    check_times(d, dt);
    const auto& g = d.g;
    const int k = g.node_part(node);
    const int inf = d.a.infinity_part();
    const int n = g.size();
    auto Uk = g.complement_indices(k);
    auto node_of = index_nodes(g);
    const cd ti = d.t[node], dti = dt[node];
    Mat xi = d.xi();
    Mat out = Mat::Zero(Uk.size(), Uk.size());
    for (int j : g.nodes_of_part(k)) {
        if (j == node) continue;
        auto vj = g.node_indices(j);
        Mat Qj = sub(d.gamma, Uk, vj), Pj = -sub(xi, vj, Uk);
        out += Qj * Pj * (dti - dt[j]) / (ti - d.t[j]);
    }
    Mat phik = Mat::Zero(n, n), phikInv = Mat::Zero(n, n), Ci = Mat::Zero(n, n);
    for (int r = 0; r < n; ++r) {
        const int j = g.node_part(node_of[r]);
        cd f = j == k ? cd(1.0) : d.a.phi(j, k);
        phik(r, r) = f;
        phikInv(r, r) = 1.0 / f;
        const cd tr = d.t[node_of[r]], dtr = dt[node_of[r]];
        if (k == inf) {
            if (j != inf) Ci(r, r) = d.a.points[j].value * ti * dti;
        } else if (j == inf) {
            Ci(r, r) = d.a.points[k].value * tr * dtr;
        } else {
            Ci(r, r) = -ti * dti - tr * dtr;
        }
    }
    Mat Th = d.T_hat(), dTh = d.T_hat(dt);
    Mat m = tilde(d, part_diagonal(g, xi * d.gamma), dt) + dTh * xi +
            (d.gamma * dti - phikInv * xi * dTh + dti * Th + ti * dTh + Ci) * phik;
    out += sub(m, Uk, Uk);
    return out;
}

// ---- normal form ----

namespace {

// solve h + [L, h] = rhs on one node block; returns the resonant component removed from rhs
struct ShiftedSolve {
    Mat h, removed;
};

Mat ad_matrix(const Mat& L) {
    const auto m = L.rows();
    Mat I = Mat::Identity(m, m);
    Mat K = Mat::Zero(m * m, m * m);
    // vec column-major: vec(L h - h L) = (I kron L - L^T kron I) vec h
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b)
            for (Eigen::Index c = 0; c < m; ++c)
                for (Eigen::Index e = 0; e < m; ++e) {
                    cd v = I(a, b) * L(c, e) - L(b, a) * I(c, e);
                    K(a * m + c, b * m + e) += v;
                }
    return K;
}

Vec vec(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }
Mat unvec(const Vec& v, Eigen::Index m) { return Eigen::Map<const Mat>(v.data(), m, m); }

ShiftedSolve shifted_solve(const Mat& L, const Mat& rhs, bool resonant) {
    const auto m = L.rows();
    Mat N = Mat::Identity(m * m, m * m) + ad_matrix(L);
    Vec b = vec(rhs);
    ShiftedSolve out;
    out.removed = Mat::Zero(m, m);
    if (!resonant) {
        out.h = unvec(N.partialPivLu().solve(b), m);
        return out;
    }
    // generalised kernel of N splits off; solve on the complementary invariant subspace
    Mat Np = N;
    for (Eigen::Index k = 1; k < m * m; ++k) {
        Np = Np * N;
        const double s = Np.norm();
        if (s > 0) Np /= s;
    }
    Eigen::JacobiSVD<Mat> svd(Np, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int r = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv(k) > 1e-8 * sv(0)) ++r;
    Mat img = svd.matrixU().leftCols(r);
    Mat ker = svd.matrixV().rightCols(m * m - r);
    Mat basis(m * m, m * m);
    basis << img, ker;
    Vec coef = basis.partialPivLu().solve(b);
    Vec a1 = ker * coef.tail(m * m - r);
    out.removed = unvec(a1, m);
    Vec rest = b - a1;
    // N restricted to the image is invertible
    Mat Nimg = img.adjoint() * N * img;
    Vec y = Nimg.partialPivLu().solve(img.adjoint() * rest);
    out.h = unvec(img * y, m);
    return out;
}

} // namespace

NormalFormData leading_term(const PhaseData& d, double resonanceTol) {
    auto b = infinity_blocks(d);
    const auto& g = d.g;
    const auto& U = b.U;
    const auto u = static_cast<Eigen::Index>(U.size());
    NormalFormData nf;
    nf.X = b.X;
    Mat QP = b.W.empty() ? Mat::Zero(u, u) : Mat(b.Q * b.P);
    Mat QCP = b.W.empty() ? Mat::Zero(u, u) : Mat(b.Q * b.C * b.P);
    nf.R = delta_on(g, U, QP + comm(b.X, b.B) / 2.0);
    nf.Lambda = pi_h(g, U, nf.R);
    nf.Y1 = Mat::Zero(u, u);
    auto node = index_nodes(g);
    Mat diff = nf.R - nf.Lambda;
    for (Eigen::Index r = 0; r < u; ++r)
        for (Eigen::Index c = 0; c < u; ++c) {
            const int a = node[U[r]], e = node[U[c]];
            if (a != e && g.node_part(a) == g.node_part(e)) nf.Y1(r, c) = diff(r, c) / (d.t[a] - d.t[e]);
        }
    const Mat& X = b.X;
    Mat R2 = QCP + comm(X, QP) + comm(X, comm(X, b.T)) / 2.0 + comm(X, comm(X, b.B)) / 3.0;
    nf.L2 = pi_h(g, U, R2 + comm(nf.Y1, nf.R) / 2.0);
    nf.h1 = Mat::Zero(u, u);
    nf.A1 = Mat::Zero(u, u);
    // node blocks inside U
    std::vector<int> seen;
    for (Eigen::Index r = 0; r < u; ++r) {
        const int i = node[U[r]];
        if (std::find(seen.begin(), seen.end(), i) != seen.end()) continue;
        seen.push_back(i);
        std::vector<int> loc;
        for (Eigen::Index c = 0; c < u; ++c)
            if (node[U[c]] == i) loc.push_back(static_cast<int>(c));
        Mat L = nf.Lambda(loc, loc);
        Eigen::ComplexEigenSolver<Mat> es(L, false);
        bool res = false;
        const auto& ev = es.eigenvalues();
        for (Eigen::Index x = 0; x < ev.size(); ++x)
            for (Eigen::Index y = 0; y < ev.size(); ++y) {
                cd dlt = ev(x) - ev(y);
                double k = std::round(dlt.real());
                if (k != 0.0 && std::abs(dlt - k) < resonanceTol) res = true;
            }
        nf.resonant.push_back(res);
        nf.anyResonant = nf.anyResonant || res;
        auto sol = shifted_solve(L, nf.L2(loc, loc), res);
        nf.h1(loc, loc) = sol.h;
        nf.A1(loc, loc) = sol.removed;
    }
    nf.g1 = nf.h1 + nf.Y1 + X;
    return nf;
}

SeriesCheck gauge_series(const PhaseData& d, int order) {
    auto b = infinity_blocks(d);
    const auto& U = b.U;
    const auto u = static_cast<Eigen::Index>(U.size());
    const int K = order;
    Mat QP = b.W.empty() ? Mat::Zero(u, u) : Mat(b.Q * b.P);
    Mat Lam = pi_h(d.g, U, QP + b.X * b.B);
    std::vector<Mat> S(K + 2, Mat::Zero(u, u)); // S_k = Q C^(k-1) P
    if (!b.W.empty()) {
        Mat Ck = Mat::Identity(b.C.rows(), b.C.cols());
        for (int k = 1; k <= K + 1; ++k) {
            S[k] = b.Q * Ck * b.P;
            Ck = Ck * b.C;
        }
    }
    // residuals of the order-m equations for m = 0..K, given g_1..g_{K+1} (g_0 = 1 if withConst)
    auto residual = [&](const std::vector<Mat>& gs, bool withConst) {
        auto G = [&](int m) -> Mat {
            if (m < 0) return Mat::Zero(u, u);
            if (m == 0) return withConst ? Mat(Mat::Identity(u, u)) : Mat(Mat::Zero(u, u));
            return gs[m - 1];
        };
        Vec out(u * u * (K + 1));
        for (int m = 0; m <= K; ++m) {
            Mat e = comm(b.A, G(m + 1)) + comm(b.T, G(m)) - G(m) * b.B + Lam * G(m - 1) + double(m - 1) * G(m - 1);
            for (int k = 1; k <= m; ++k) e -= G(m - k) * S[k];
            out.segment(m * u * u, u * u) = vec(e);
        }
        return out;
    };
    const Eigen::Index nUnk = u * u * (K + 1);
    std::vector<Mat> zero(K + 1, Mat::Zero(u, u));
    Vec c = residual(zero, true);
    Mat M(nUnk, nUnk);
    for (Eigen::Index col = 0; col < nUnk; ++col) {
        auto gs = zero;
        gs[col / (u * u)](col % (u * u) % u, col % (u * u) / u) = 1.0;
        M.col(col) = residual(gs, false);
    }
    Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double tol = 1e-10 * std::max(1.0, sv(0));
    int rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv(k) > tol) ++rank;
    Mat ker = svd.matrixV().rightCols(nUnk - rank);
    SeriesCheck out;
    out.g1Determined = ker.rows() == 0 || ker.cols() == 0 || ker.topRows(u * u).norm() < 1e-8;
    svd.setThreshold(tol / std::max(1.0, sv(0)));
    Vec x = svd.solve(-c);
    out.residual = (M * x + c).norm();
    out.g1 = unvec(x.head(u * u), u);
    return out;
}

// ---- gauge terms ----

namespace {
Mat theta(const PhaseData& d, const std::vector<cd>& lambda, const TimeVec& dt) {
    if (static_cast<int>(lambda.size()) != d.g.num_parts()) fail(ErrorKind::Invalid, "one multiplier per part required");
    check_times(d, dt);
    TimeVec v(d.g.num_nodes());
    for (int i = 0; i < d.g.num_nodes(); ++i) v[i] = lambda[d.g.node_part(i)] * d.t[i] * dt[i];
    return diag_of_nodes(d.g, v);
}
} // namespace

cd gauge_term(const PhaseData& d, const std::vector<cd>& lambda, const TimeVec& dt) {
    return (d.gamma * d.xi() * theta(d, lambda, dt)).trace();
}

Mat gauge_field(const PhaseData& d, const std::vector<cd>& lambda, const TimeVec& dt) {
    return comm(theta(d, lambda, dt), d.gamma);
}

// ---- Harnad duality ----

namespace {
struct DualMap {
    std::vector<int> oldIdx;   // new index -> old index
    std::vector<int> oldNode;  // new node -> old node
    std::vector<double> sign;  // per new node: +1 for old finite nodes, -1 for old infinite nodes
    PhaseData shape;
};

DualMap dual_map(const PhaseData& d) {
    const int inf = d.a.infinity_part();
    jmms_shape(d);
    const int zero = 1 - inf;
    DualMap m;
    for (int j : {zero, inf})
        for (int i : d.g.nodes_of_part(j)) {
            m.oldNode.push_back(i);
            m.sign.push_back(j == inf ? -1.0 : 1.0);
            for (int r : d.g.node_indices(i)) m.oldIdx.push_back(r);
        }
    m.shape.a.points = {FourierPoint::inf(), FourierPoint::at(0.0)};
    m.shape.g = GradedSpace({d.g.dims[zero], d.g.dims[inf]});
    return m;
}
} // namespace

Mat harnad_dual_tangent(const PhaseData& d, const Mat& u) {
    auto m = dual_map(d);
    const int inf = d.a.infinity_part();
    auto W = d.g.part_indices(inf);
    Mat v = u;
    v(W, Eigen::all) *= -1.0; // rows of P pick up the sign
    return v(m.oldIdx, m.oldIdx);
}

TimeVec harnad_dual_times(const PhaseData& d, const TimeVec& dt) {
    auto m = dual_map(d);
    TimeVec out;
    for (std::size_t k = 0; k < m.oldNode.size(); ++k) out.push_back(m.sign[k] * dt[m.oldNode[k]]);
    return out;
}

PhaseData harnad_dual(const PhaseData& d) {
    auto m = dual_map(d);
    PhaseData out = m.shape;
    out.gamma = harnad_dual_tangent(d, d.gamma);
    out.t = harnad_dual_times(d, d.t);
    return out;
}

// ---- projected equations ----

ReducedData reduce(const PhaseData& d) {
    ReducedData r;
    r.shape = d;
    auto b = infinity_blocks(d);
    r.B = b.B;
    const int inf = d.a.infinity_part();
    if (inf < 0) return r;
    r.poles = d.g.nodes_of_part(inf);
    for (int i : r.poles) {
        auto vi = d.g.node_indices(i);
        r.R.push_back(sub(d.gamma, b.U, vi) * sub(d.gamma, vi, b.U));
    }
    return r;
}

ProjectedField projected_field(const ReducedData& r, const TimeVec& dt) {
    const auto& d = r.shape;
    check_times(d, dt);
    auto b = infinity_blocks(d);
    const auto& U = b.U;
    const auto u = static_cast<Eigen::Index>(U.size());
    // X from B alone
    Mat X = Mat::Zero(u, u);
    for (Eigen::Index p = 0; p < u; ++p)
        for (Eigen::Index q = 0; q < u; ++q)
            if (b.A(p, p) != b.A(q, q)) X(p, q) = r.B(p, q) / (b.A(p, p) - b.A(q, q));
    Mat dT = diag_on(d.g, U, dt);
    Mat QP = Mat::Zero(u, u), QdCP = Mat::Zero(u, u);
    for (std::size_t k = 0; k < r.poles.size(); ++k) {
        QP += r.R[k];
        QdCP += r.R[k] * dt[r.poles[k]];
    }
    Mat Rt = tilde(d, U, delta_on(d.g, U, QP + X * r.B), dt);
    Mat dB = comm(Rt, r.B) + comm(dT, QP) + r.B * X * dT + dT * X * r.B + comm(b.A, QdCP - X * dT * X) +
             comm(b.T, comm(X, dT));
    ProjectedField out;
    out.dB = dB - delta_on(d.g, U, dB);
    Mat dTX = comm(dT, X);
    for (std::size_t k = 0; k < r.poles.size(); ++k) {
        const int i = r.poles[k];
        const cd ti = d.t[i];
        Mat om = Rt + dTX + ti * dT + dt[i] * b.T + (b.A * ti + r.B) * dt[i];
        for (std::size_t l = 0; l < r.poles.size(); ++l)
            if (l != k) om += r.R[l] * (dt[i] - dt[r.poles[l]]) / (ti - d.t[r.poles[l]]);
        out.dR.push_back(comm(om, r.R[k]));
    }
    return out;
}

ProjectedField projected_field(const PhaseData& d, const TimeVec& dt) { return projected_field(reduce(d), dt); }

Mat master_field(const PhaseData& d, const TimeVec& dt) {
    if (d.a.infinity_part() >= 0) fail(ErrorKind::Invalid, "master equations need every part at finite distance");
    auto [b, dT, dC] = blocks(d, dt);
    const auto& U = b.U;
    Mat dB = comm(tilde(d, U, delta_on(d.g, U, b.X * b.B), dt), b.B);
    Mat s = comm(comm(dT, b.X), b.B + b.T);
    dB += s - delta_on(d.g, U, s);
    return dB;
}

// ---- integration ----

namespace {

double min_separation(const PhaseData& d, const TimeVec& t) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < d.g.num_parts(); ++j) {
        auto nodes = d.g.nodes_of_part(j);
        for (std::size_t x = 0; x < nodes.size(); ++x)
            for (std::size_t y = x + 1; y < nodes.size(); ++y)
                best = std::min(best, std::abs(t[nodes[x]] - t[nodes[y]]));
    }
    return best;
}

TimeVec lerp(const TimeVec& a, const TimeVec& v, double s) {
    TimeVec out(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] + s * v[k];
    return out;
}

struct Deriv {
    Mat dg;
    cd dtau;
};

Deriv deriv(const PhaseData& d, const TimeVec& v, const IntegrateOptions* opt) {
    Deriv r{vector_field(d, v), varpi(d, v)};
    if (opt && opt->extra) r.dg += opt->extra(d, v);
    return r;
}

// one RK4 step of size h in the path parameter
void rk4(FlowState& s, const TimeVec& t0, const TimeVec& v, double s0, double h, const IntegrateOptions* opt) {
    auto at = [&](double sp, const Mat& g) {
        PhaseData p = s.d;
        p.gamma = g;
        p.t = lerp(t0, v, sp);
        return p;
    };
    const Mat& g0 = s.d.gamma;
    auto k1 = deriv(at(s0, g0), v, opt);
    auto k2 = deriv(at(s0 + h / 2, g0 + (h / 2) * k1.dg), v, opt);
    auto k3 = deriv(at(s0 + h / 2, g0 + (h / 2) * k2.dg), v, opt);
    auto k4 = deriv(at(s0 + h, g0 + h * k3.dg), v, opt);
    s.d.gamma = g0 + (h / 6) * (k1.dg + 2.0 * k2.dg + 2.0 * k3.dg + k4.dg);
    s.d.t = lerp(t0, v, s0 + h);
    s.logTau += (h / 6) * (k1.dtau + 2.0 * k2.dtau + 2.0 * k3.dtau + k4.dtau);
}

double max_abs(const TimeVec& v) {
    double m = 0.0;
    for (auto x : v) m = std::max(m, std::abs(x));
    return m;
}

Trajectory integrate_once(const FlowState& s, const PathSpec& path, const IntegrateOptions& opt, double step) {
    Trajectory tr;
    tr.states.push_back(s);
    tr.arc.push_back(0.0);
    const auto l0 = lambdas(s.d);
    int maxPow = 0;
    for (int i = 0; i < s.d.g.num_nodes(); ++i) maxPow = std::max(maxPow, s.d.g.node_dim(i));
    const auto tr0 = residue_traces(s.d, maxPow);
    double lscale = 1.0, tscale = 1.0;
    for (auto& m : l0) lscale = std::max(lscale, m.norm());
    for (auto x : tr0) tscale = std::max(tscale, std::abs(x));
    tr.monitors.minSeparation = min_separation(s.d, s.d.t);
    FlowState cur = s;
    double arc = 0.0;
    for (std::size_t seg = 1; seg < path.points.size(); ++seg) {
        const TimeVec& a = path.points[seg - 1];
        TimeVec v(a.size());
        for (std::size_t k = 0; k < a.size(); ++k) v[k] = path.points[seg][k] - a[k];
        const double speed = max_abs(v);
        if (speed == 0.0) continue;
        const int n = std::max(1, static_cast<int>(std::ceil(speed / step - 1e-9)));
        const double h = 1.0 / n;
        for (int k = 0; k < n; ++k) {
            const double sep = std::min(min_separation(cur.d, lerp(a, v, k * h)), min_separation(cur.d, lerp(a, v, (k + 1) * h)));
            tr.monitors.minSeparation = std::min(tr.monitors.minSeparation, sep);
            if (!(sep > 10.0 * h * speed)) {
                tr.aborted = true;
                tr.message = "path leaves the space of times (coinciding times within a part)";
                return tr;
            }
            rk4(cur, a, v, k * h, h, &opt);
            arc += h * speed;
            const auto l = lambdas(cur.d);
            for (std::size_t i = 0; i < l.size(); ++i)
                tr.monitors.lambdaDrift = std::max(tr.monitors.lambdaDrift, (l[i] - l0[i]).norm() / lscale);
            const auto trs = residue_traces(cur.d, maxPow);
            for (std::size_t i = 0; i < trs.size(); ++i)
                tr.monitors.traceDrift = std::max(tr.monitors.traceDrift, std::abs(trs[i] - tr0[i]) / tscale);
            if (opt.keepAll || k + 1 == n) {
                tr.states.push_back(cur);
                tr.arc.push_back(arc);
            }
        }
    }
    if (tr.monitors.lambdaDrift > opt.monitorTol || tr.monitors.traceDrift > opt.monitorTol)
        tr.warnings.push_back("conservation monitor exceeded tolerance");
    return tr;
}

} // namespace

Trajectory integrate(const FlowState& s, const PathSpec& path, const IntegrateOptions& opt) {
    if (!(opt.step > 0.0)) fail(ErrorKind::Invalid, "step must be positive");
    if (path.points.empty()) fail(ErrorKind::Invalid, "path has no points");
    for (const auto& p : path.points)
        if (static_cast<int>(p.size()) != s.d.g.num_nodes()) fail(ErrorKind::Invalid, "path point has the wrong size");
    for (std::size_t k = 0; k < s.d.t.size(); ++k)
        if (std::abs(path.points[0][k] - s.d.t[k]) > 1e-12 * std::max(1.0, std::abs(s.d.t[k])))
            fail(ErrorKind::Invalid, "path must start at the current times");
    double step = opt.step;
    Trajectory tr = integrate_once(s, path, opt, step);
    for (int k = 0; k < opt.maxHalvings && !tr.aborted && !tr.warnings.empty(); ++k) {
        step /= 2;
        tr = integrate_once(s, path, opt, step);
    }
    return tr;
}

FlowState flow_to(const FlowState& s, const TimeVec& target, int steps) {
    FlowState cur = s;
    TimeVec a = s.d.t, v(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) v[k] = target[k] - a[k];
    const double h = 1.0 / steps;
    for (int k = 0; k < steps; ++k) rk4(cur, a, v, k * h, h, nullptr);
    cur.d.t = target;
    return cur;
}

IntegrabilityResiduals integrability_residuals(const PhaseData& d, int i, int j, double h) {
    auto H = [&](const PhaseData& p, int k) { return hamiltonian(p, k); };
    auto dH = [&](int k, int along) {
        PhaseData p = d, m = d;
        p.t[along] += h;
        m.t[along] -= h;
        return (H(p, k) - H(m, k)) / (2 * h);
    };
    const cd djdi = dH(j, i), didj = dH(i, j);
    Mat vi = hamiltonian_flow(d, [&](const PhaseData& p) { return H(p, i); }, h);
    Mat vj = hamiltonian_flow(d, [&](const PhaseData& p) { return H(p, j); }, h);
    IntegrabilityResiduals r;
    r.bracket = omega(d.a, d.g, vi, vj);
    r.symmetry = didj - djdi;
    r.f = djdi - didj + r.bracket;
    return r;
}

namespace {
Mat omega_at(const PhaseData& d, int node, cd z) { return full_connection_form(d, z, 0.0, unit_time(d, node)); }

PhaseData shifted(const PhaseData& d, int node, double h, int steps) {
    TimeVec t = d.t;
    t[node] += h;
    return flow_to(FlowState{d, 0.0}, t, steps).d;
}
} // namespace

Mat curvature_times(const PhaseData& d, int i, int j, double h, cd z) {
    const int steps = 8;
    auto ip = shifted(d, i, h, steps), im = shifted(d, i, -h, steps);
    auto jp = shifted(d, j, h, steps), jm = shifted(d, j, -h, steps);
    Mat diOj = (omega_at(ip, j, z) - omega_at(im, j, z)) / (2 * h);
    Mat djOi = (omega_at(jp, i, z) - omega_at(jm, i, z)) / (2 * h);
    Mat Oi = omega_at(d, i, z), Oj = omega_at(d, j, z);
    return diOj - djOi - comm(Oi, Oj);
}

Mat curvature_z(const PhaseData& d, int i, double h, cd z) {
    const int steps = 8;
    auto ip = shifted(d, i, h, steps), im = shifted(d, i, -h, steps);
    Mat diB = (connection_matrix(ip, z) - connection_matrix(im, z)) / (2 * h);
    Mat dzBi = (omega_at(d, i, z + h) - omega_at(d, i, z - h)) / (2 * h);
    return diB - dzBi + comm(connection_matrix(d, z), omega_at(d, i, z));
}

std::vector<Mat> lambdas(const PhaseData& d) {
    std::vector<Mat> out;
    for (auto& r : residues(d)) out.push_back(r.Lambda);
    return out;
}

std::vector<cd> residue_traces(const PhaseData& d, int maxPower) {
    std::vector<cd> out;
    for (auto& r : residues(d)) {
        Mat p = r.R;
        for (int k = 1; k <= maxPower; ++k) {
            out.push_back(p.trace());
            p = p * r.R;
        }
    }
    return out;
}

} // namespace isomono
