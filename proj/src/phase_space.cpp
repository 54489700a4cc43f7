#include "isomono/phase_space.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

namespace isomono {

bool FourierPoint::same_as(const FourierPoint& o, double tol) const {
    if (infinite || o.infinite) return infinite == o.infinite;
    return std::abs(value - o.value) <= tol * std::max(1.0, std::abs(value));
}

int FourierConfig::infinity_part() const {
    for (int j = 0; j < size(); ++j)
        if (points[j].infinite) return j;
    return -1;
}

cd FourierConfig::phi(int j, int k) const {
    if (j == k) return 0.0;
    if (points[j].infinite) return -1.0;
    if (points[k].infinite) return 1.0;
    return 1.0 / (points[j].value - points[k].value);
}

void FourierConfig::validate() const {
    for (int j = 0; j < size(); ++j)
        for (int k = j + 1; k < size(); ++k)
            if (points[j].same_as(points[k], 1e-14))
                fail(ErrorKind::Invalid, "Fourier points of parts " + std::to_string(j) + " and " +
                                             std::to_string(k) + " coincide");
}

GradedSpace::GradedSpace(std::vector<std::vector<int>> d) : dims(std::move(d)) {
    for (int j = 0; j < num_parts(); ++j) {
        partOffset_.push_back(n_);
        for (int x : dims[j]) {
            if (x < 0) fail(ErrorKind::Invalid, "negative node dimension");
            nodePart_.push_back(j);
            nodeOffset_.push_back(n_);
            nodeDim_.push_back(x);
            n_ += x;
        }
    }
}

int GradedSpace::part_dim(int j) const {
    return std::accumulate(dims[j].begin(), dims[j].end(), 0);
}

std::vector<int> GradedSpace::nodes_of_part(int j) const {
    std::vector<int> out;
    for (int i = 0; i < num_nodes(); ++i)
        if (nodePart_[i] == j) out.push_back(i);
    return out;
}

std::vector<int> GradedSpace::part_indices(int j) const {
    std::vector<int> out(part_dim(j));
    std::iota(out.begin(), out.end(), partOffset_[j]);
    return out;
}

std::vector<int> GradedSpace::complement_indices(int j) const {
    std::vector<int> out;
    for (int r = 0; r < n_; ++r)
        if (r < partOffset_[j] || r >= partOffset_[j] + part_dim(j)) out.push_back(r);
    return out;
}

std::vector<int> GradedSpace::node_indices(int i) const {
    std::vector<int> out(nodeDim_[i]);
    std::iota(out.begin(), out.end(), nodeOffset_[i]);
    return out;
}

namespace {

std::vector<int> part_of_index(const GradedSpace& g) {
    std::vector<int> p(g.size());
    for (int i = 0; i < g.num_nodes(); ++i)
        for (int r : g.node_indices(i)) p[r] = g.node_part(i);
    return p;
}

std::vector<int> node_of_index(const GradedSpace& g) {
    std::vector<int> p(g.size());
    for (int i = 0; i < g.num_nodes(); ++i)
        for (int r : g.node_indices(i)) p[r] = i;
    return p;
}

Mat sub(const Mat& m, const std::vector<int>& r, const std::vector<int>& c) {
    Mat out(r.size(), c.size());
    for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = 0; j < c.size(); ++j) out(i, j) = m(r[i], c[j]);
    return out;
}

// orthonormal basis of the column space, singular values above an absolute threshold
Mat basis_abs(const Mat& m, double threshold) {
    if (m.cols() == 0 || m.rows() == 0) return Mat(m.rows(), 0);
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU);
    int r = 0;
    for (int k = 0; k < svd.singularValues().size(); ++k)
        if (svd.singularValues()(k) > threshold) ++r;
    return svd.matrixU().leftCols(r);
}

} // namespace

void PhaseData::validate() const {
    a.validate();
    if (a.size() != g.num_parts()) fail(ErrorKind::Invalid, "one Fourier point per part required");
    if (gamma.rows() != g.size() || gamma.cols() != g.size())
        fail(ErrorKind::Invalid, "Gamma has the wrong shape");
    if (static_cast<int>(t.size()) != g.num_nodes()) fail(ErrorKind::Invalid, "one time per node required");
    if (part_diagonal(g, gamma).norm() > 1e-12 * scale_of(gamma))
        fail(ErrorKind::Invalid, "Gamma has nonzero diagonal part-blocks");
    for (int j = 0; j < g.num_parts(); ++j) {
        auto nodes = g.nodes_of_part(j);
        for (std::size_t x = 0; x < nodes.size(); ++x)
            for (std::size_t y = x + 1; y < nodes.size(); ++y)
                if (t[nodes[x]] == t[nodes[y]])
                    fail(ErrorKind::Invalid, "times coincide within part " + std::to_string(j));
    }
}

Mat PhaseData::xi() const { return apply_phi(a, g, gamma); }

Mat PhaseData::T_hat() const { return diag_of_nodes(g, t); }

Mat PhaseData::T_hat(const std::vector<cd>& dt) const { return diag_of_nodes(g, dt); }

Mat phi_matrix(const FourierConfig& a, const GradedSpace& g) {
    auto p = part_of_index(g);
    const int n = g.size();
    Mat f(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) f(r, c) = a.phi(p[r], p[c]);
    return f;
}

Mat apply_phi(const FourierConfig& a, const GradedSpace& g, const Mat& m) {
    return phi_matrix(a, g).cwiseProduct(m);
}

Mat apply_phi_inverse(const FourierConfig& a, const GradedSpace& g, const Mat& m) {
    Mat f = phi_matrix(a, g);
    Mat out = Mat::Zero(m.rows(), m.cols());
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            if (f(r, c) != cd(0)) out(r, c) = m(r, c) / f(r, c);
    return out;
}

Mat part_diagonal(const GradedSpace& g, const Mat& m) {
    auto p = part_of_index(g);
    Mat out = Mat::Zero(m.rows(), m.cols());
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            if (p[r] == p[c]) out(r, c) = m(r, c);
    return out;
}

Mat off_part(const GradedSpace& g, const Mat& m) { return m - part_diagonal(g, m); }

Mat node_diagonal(const GradedSpace& g, const Mat& m) {
    auto p = node_of_index(g);
    Mat out = Mat::Zero(m.rows(), m.cols());
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            if (p[r] == p[c]) out(r, c) = m(r, c);
    return out;
}

Mat diag_of_nodes(const GradedSpace& g, const std::vector<cd>& perNode) {
    Mat out = Mat::Zero(g.size(), g.size());
    for (int i = 0; i < g.num_nodes(); ++i)
        for (int r : g.node_indices(i)) out(r, r) = perNode[i];
    return out;
}

Mat diag_of_parts(const GradedSpace& g, const std::vector<cd>& perPart) {
    Mat out = Mat::Zero(g.size(), g.size());
    auto p = part_of_index(g);
    for (int r = 0; r < g.size(); ++r) out(r, r) = perPart[p[r]];
    return out;
}

InfinityBlocks infinity_blocks(const PhaseData& d) {
    InfinityBlocks b;
    const int inf = d.a.infinity_part();
    if (inf >= 0) {
        b.W = d.g.part_indices(inf);
        b.U = d.g.complement_indices(inf);
    } else {
        b.U.resize(d.g.size());
        std::iota(b.U.begin(), b.U.end(), 0);
    }
    b.P = sub(d.gamma, b.W, b.U);
    b.Q = sub(d.gamma, b.U, b.W);
    b.B = sub(d.gamma, b.U, b.U);
    Mat th = d.T_hat();
    b.C = sub(th, b.W, b.W);
    b.T = sub(th, b.U, b.U);
    auto p = part_of_index(d.g);
    const int u = static_cast<int>(b.U.size());
    b.A = Mat::Zero(u, u);
    for (int r = 0; r < u; ++r) b.A(r, r) = d.a.points[p[b.U[r]]].value;
    b.X = Mat::Zero(u, u);
    for (int r = 0; r < u; ++r)
        for (int c = 0; c < u; ++c)
            if (p[b.U[r]] != p[b.U[c]]) b.X(r, c) = b.B(r, c) / (b.A(r, r) - b.A(c, c));
    return b;
}

WeylMatrix assemble(const PhaseData& d) {
    const int n = d.g.size();
    WeylMatrix w{Mat::Zero(n, n), Mat::Zero(n, n), d.gamma + d.T_hat()};
    auto p = part_of_index(d.g);
    for (int r = 0; r < n; ++r) {
        const auto& pt = d.a.points[p[r]];
        if (pt.infinite) {
            w.beta(r, r) = 1.0;
        } else {
            w.alpha(r, r) = 1.0;
            w.beta(r, r) = -pt.value;
        }
    }
    return w;
}

namespace {

bool lex_less(cd x, cd y) {
    if (x.real() != y.real()) return x.real() < y.real();
    return x.imag() < y.imag();
}

// eigen decomposition that must be diagonal after conjugation
Mat diagonalizing_basis(const Mat& m, double tol, const char* what) {
    Eigen::ComplexEigenSolver<Mat> es(m);
    Mat s = es.eigenvectors();
    Eigen::JacobiSVD<Mat> svd(s);
    const auto& sv = svd.singularValues();
    if (sv.size() && sv(sv.size() - 1) < 1e-10 * sv(0)) fail(ErrorKind::Invalid, what);
    Mat d = s.inverse() * m * s;
    Mat off = d;
    off.diagonal().setZero();
    if (off.norm() > tol * 1e3 * scale_of(m)) fail(ErrorKind::Invalid, what);
    return s;
}

} // namespace

Normalized normalize(const Mat& alpha, const Mat& beta, const Mat& gamma, double tol) {
    const int n = static_cast<int>(alpha.rows());
    if (alpha.cols() != n || beta.rows() != n || beta.cols() != n || gamma.rows() != n || gamma.cols() != n)
        fail(ErrorKind::Invalid, "alpha, beta, gamma must be square of equal size");
    const double sc = std::max(scale_of(alpha), scale_of(beta));
    if ((alpha * beta - beta * alpha).norm() > tol * sc * sc)
        fail(ErrorKind::Invalid, "alpha and beta do not commute");

    const cd kappa(0.5772156649, 0.3183098862);
    Mat s = diagonalizing_basis(alpha + kappa * beta, tol, "alpha, beta not simultaneously diagonalizable");
    Mat sInv = s.inverse();
    Mat da = sInv * alpha * s, db = sInv * beta * s;

    std::vector<FourierPoint> pts(n);
    for (int k = 0; k < n; ++k) {
        cd al = da(k, k), be = db(k, k);
        if (std::abs(al) <= tol * sc && std::abs(be) <= tol * sc)
            fail(ErrorKind::Invalid, "alpha and beta have a common kernel");
        pts[k] = std::abs(al) <= tol * std::abs(be) ? FourierPoint::inf() : FourierPoint::at(-be / al);
    }
    // group joint eigenvectors by point: infinity first, then lexicographic
    std::vector<FourierPoint> parts;
    for (const auto& p : pts) {
        bool found = false;
        for (const auto& q : parts) found = found || q.same_as(p, 1e-7);
        if (!found) parts.push_back(p);
    }
    std::sort(parts.begin(), parts.end(), [](const FourierPoint& x, const FourierPoint& y) {
        if (x.infinite != y.infinite) return x.infinite;
        return lex_less(x.value, y.value);
    });
    std::vector<int> order;
    std::vector<int> partOf;
    std::vector<int> partSize(parts.size(), 0);
    for (std::size_t j = 0; j < parts.size(); ++j)
        for (int k = 0; k < n; ++k)
            if (parts[j].same_as(pts[k], 1e-7)) {
                order.push_back(k);
                partOf.push_back(static_cast<int>(j));
                ++partSize[j];
            }

    Mat perm = Mat::Zero(n, n); // columns of s in the new order
    for (int r = 0; r < n; ++r) perm(order[r], r) = 1.0;
    Mat right = s * perm;
    Mat left = perm.transpose() * sInv;
    for (int r = 0; r < n; ++r) {
        const int k = order[r];
        cd m = parts[partOf[r]].infinite ? 1.0 / db(k, k) : 1.0 / da(k, k);
        left.row(r) *= m;
    }

    // diagonalize each part-diagonal block of gamma and group equal eigenvalues into nodes
    Mat g1 = left * gamma * right;
    Mat f = Mat::Zero(n, n);
    std::vector<std::vector<int>> dims(parts.size());
    std::vector<cd> times;
    int off = 0;
    for (std::size_t j = 0; j < parts.size(); ++j) {
        const int w = partSize[j];
        Mat blk = g1.block(off, off, w, w);
        Mat fj = diagonalizing_basis(blk, tol, "diagonal part-block of gamma is not semisimple");
        Mat dj = fj.inverse() * blk * fj;
        std::vector<int> idx(w);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int x, int y) { return lex_less(dj(x, x), dj(y, y)); });
        const double bs = scale_of(blk);
        for (int c = 0; c < w; ++c) {
            f.block(off, off + c, w, 1) = fj.col(idx[c]);
            cd ev = dj(idx[c], idx[c]);
            if (c > 0 && std::abs(ev - times.back()) <= 1e-7 * bs) {
                ++dims[j].back();
            } else {
                dims[j].push_back(1);
                times.push_back(ev);
            }
        }
        off += w;
    }
    Mat fInv = f.inverse();
    left = fInv * left;
    right = right * f;

    Normalized out;
    out.data.g = GradedSpace(dims);
    out.data.a.points = parts;
    Mat g2 = left * gamma * right;
    // cluster means as node times
    for (int i = 0; i < out.data.g.num_nodes(); ++i) {
        cd mean = 0.0;
        for (int r : out.data.g.node_indices(i)) mean += g2(r, r);
        out.data.t.push_back(mean / double(out.data.g.node_dim(i)));
    }
    out.data.gamma = off_part(out.data.g, g2);
    out.left = left;
    out.right = right;
    return out;
}

cd omega(const FourierConfig& a, const GradedSpace& g, const Mat& u, const Mat& v) {
    if (u.rows() != g.size() || u.cols() != g.size() || v.rows() != g.size() || v.cols() != g.size())
        fail(ErrorKind::Invalid, "tangent vectors do not match the graded space");
    Mat f = phi_matrix(a, g);
    return 0.5 * ((f.cwiseProduct(u) * v).trace() - (f.cwiseProduct(v) * u).trace());
}

Mobius Mobius::operator*(const Mobius& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
}

Mobius Mobius::inverse() const {
    cd k = det();
    return {d / k, -b / k, -c / k, a / k};
}

SL2Action sl2_multipliers(const Mobius& g, const FourierConfig& a) {
    SL2Action out;
    for (const auto& p : a.points) {
        cd al = p.infinite ? cd(0) : cd(1);
        cd be = p.infinite ? cd(1) : -p.value;
        cd al2 = g.a * al + g.c * be;
        cd be2 = g.b * al + g.d * be;
        if (std::abs(al2) <= 1e-14 * (std::abs(al2) + std::abs(be2))) {
            out.a.points.push_back(FourierPoint::inf());
            out.multipliers.push_back(1.0 / be2);
        } else {
            out.a.points.push_back(FourierPoint::at(-be2 / al2));
            out.multipliers.push_back(1.0 / al2);
        }
    }
    return out;
}

PhaseData sl2_act(const Mobius& g, const PhaseData& d) {
    auto act = sl2_multipliers(g, d.a);
    PhaseData out = d;
    out.a = act.a;
    out.gamma = diag_of_parts(d.g, act.multipliers) * d.gamma;
    for (int i = 0; i < d.g.num_nodes(); ++i) out.t[i] = act.multipliers[d.g.node_part(i)] * d.t[i];
    return out;
}

Mat sl2_tangent(const Mobius& g, const PhaseData& d, const Mat& u) {
    return diag_of_parts(d.g, sl2_multipliers(g, d.a).multipliers) * u;
}

std::vector<NodeResidue> residues(const PhaseData& d) {
    std::vector<NodeResidue> out;
    Mat xi = d.xi();
    for (int i = 0; i < d.g.num_nodes(); ++i) {
        NodeResidue r;
        r.U = d.g.complement_indices(d.g.node_part(i));
        auto vi = d.g.node_indices(i);
        r.Q = sub(d.gamma, r.U, vi);
        r.P = -sub(xi, vi, r.U);
        r.R = r.Q * r.P;
        r.Lambda = -r.P * r.Q;
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

// smallest graded subspace containing the node components of the columns of start, closed under m
std::vector<Mat> closure(const GradedSpace& g, const Mat& m, const Mat& start, double threshold) {
    std::vector<Mat> s(g.num_nodes());
    for (int i = 0; i < g.num_nodes(); ++i) s[i] = basis_abs(start(g.node_indices(i), Eigen::all), threshold);
    bool changed = true;
    while (changed) {
        changed = false;
        for (int a = 0; a < g.num_nodes(); ++a) {
            if (s[a].cols() == 0) continue;
            for (int b = 0; b < g.num_nodes(); ++b) {
                if (g.node_part(a) == g.node_part(b) || g.node_dim(b) == 0) continue;
                Mat img = sub(m, g.node_indices(b), g.node_indices(a)) * s[a];
                Mat both(g.node_dim(b), s[b].cols() + img.cols());
                both << s[b], img;
                Mat nb = basis_abs(both, threshold);
                if (nb.cols() > s[b].cols()) {
                    s[b] = nb;
                    changed = true;
                }
            }
        }
    }
    return s;
}

int total_cols(const std::vector<Mat>& s) {
    int k = 0;
    for (const auto& x : s) k += static_cast<int>(x.cols());
    return k;
}

// dimension of the algebra generated by gamma and the node idempotents
int algebra_dimension(const GradedSpace& g, const Mat& gamma, double tol) {
    const int n = g.size();
    std::vector<Mat> gens;
    for (int i = 0; i < g.num_nodes(); ++i) {
        if (g.node_dim(i) == 0) continue;
        Mat id = Mat::Zero(n, n);
        for (int r : g.node_indices(i)) id(r, r) = 1.0;
        gens.push_back(id);
    }
    const double gn = gamma.norm();
    if (gn > 0) gens.push_back(gamma / gn);
    std::vector<Vec> basis;
    std::vector<Mat> queue;
    auto add = [&](const Mat& m) {
        const double nm = m.norm();
        if (nm < 1e-12) return;
        Vec v = Eigen::Map<const Vec>(m.data(), m.size()) / nm;
        for (const auto& b : basis) v -= b * b.dot(v);
        for (const auto& b : basis) v -= b * b.dot(v);
        if (v.norm() <= tol) return;
        basis.push_back(v.normalized());
        queue.push_back(m / nm);
    };
    for (const auto& x : gens) add(x);
    for (std::size_t k = 0; k < queue.size() && static_cast<int>(basis.size()) < n * n; ++k)
        for (const auto& y : gens) {
            Mat prod = queue[k] * y;
            add(prod);
        }
    return static_cast<int>(basis.size());
}

std::vector<Mat> annihilator(const GradedSpace& g, const std::vector<Mat>& c) {
    std::vector<Mat> out;
    for (int k = 0; k < g.num_nodes(); ++k) {
        const int dk = g.node_dim(k);
        if (c[k].cols() == 0) {
            out.push_back(Mat::Identity(dk, dk));
            continue;
        }
        Eigen::JacobiSVD<Mat> svd(c[k].transpose(), Eigen::ComputeFullV);
        out.push_back(svd.matrixV().rightCols(dk - c[k].cols()));
    }
    return out;
}

} // namespace

bool is_invariant(const PhaseData& d, const std::vector<Mat>& basis, double tol) {
    const auto& g = d.g;
    if (static_cast<int>(basis.size()) != g.num_nodes()) return false;
    const double thr = tol * scale_of(d.gamma);
    for (int a = 0; a < g.num_nodes(); ++a) {
        if (basis[a].cols() == 0) continue;
        for (int b = 0; b < g.num_nodes(); ++b) {
            if (g.node_part(a) == g.node_part(b) || g.node_dim(b) == 0) continue;
            Mat img = sub(d.gamma, g.node_indices(b), g.node_indices(a)) * basis[a];
            Mat ob = basis_abs(basis[b], 1e-12);
            Mat res = img - ob * (ob.adjoint() * img);
            if (res.norm() > thr * std::max(1.0, img.norm())) return false;
        }
    }
    return true;
}

Stability is_stable(const PhaseData& d, int trials, std::uint64_t seed, double tol) {
    if (trials < 1) fail(ErrorKind::Invalid, "trials must be at least 1");
    const auto& g = d.g;
    const int n = g.size();
    Stability out;
    if (n == 0) return out;
    const double thr = tol * scale_of(d.gamma);
    out.algebraDim = algebra_dimension(g, d.gamma, 1e-8);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    auto rvec = [&](int m) {
        Vec v(m);
        for (int r = 0; r < m; ++r) v(r) = cd(nd(rng), nd(rng));
        return v;
    };
    Mat dual = d.gamma.transpose();
    auto accept = [&](const std::vector<Mat>& c, bool isDual, int node) {
        const int dim = total_cols(c);
        if (dim == n || dim == 0) return false;
        out.reducible = true;
        out.node = node;
        out.dual = isDual;
        out.witness = isDual ? annihilator(g, c) : c;
        return true;
    };
    // random vectors at single nodes, on both sides
    for (int trial = 0; trial < trials; ++trial)
        for (int i = 0; i < g.num_nodes(); ++i) {
            if (g.node_dim(i) == 0) continue;
            for (int side = 0; side < 2; ++side) {
                Mat start = Mat::Zero(n, 1);
                auto idx = g.node_indices(i);
                Vec v = rvec(g.node_dim(i));
                for (std::size_t r = 0; r < idx.size(); ++r) start(idx[r], 0) = v(r);
                if (accept(closure(g, side == 0 ? d.gamma : dual, start, thr), side == 1, i)) return out;
            }
        }
    if (out.algebraDim == n * n) return out;
    // the algebra is proper, so a subrepresentation exists: search eigenvectors of random words
    Mat id = Mat::Identity(n, n);
    for (int trial = 0; trial < 50 * trials; ++trial) {
        Mat w = Mat::Zero(n, n), pw = id;
        for (int k = 0; k < 4; ++k) {
            Vec c = rvec(g.num_nodes());
            w += pw * diag_of_nodes(g, std::vector<cd>(c.data(), c.data() + c.size()));
            pw = pw * d.gamma / std::max(1.0, d.gamma.norm());
        }
        Eigen::ComplexEigenSolver<Mat> es(w);
        for (int k = 0; k < n; ++k) {
            for (int side = 0; side < 2; ++side) {
                Mat shifted = (side == 0 ? w : Mat(w.transpose())) - es.eigenvalues()(k) * id;
                Eigen::JacobiSVD<Mat> svd(shifted, Eigen::ComputeFullV);
                Mat start = svd.matrixV().rightCols(1);
                if (accept(closure(g, side == 0 ? d.gamma : dual, start, thr), side == 1, -1)) return out;
            }
        }
    }
    out.reducible = true; // certified by the algebra dimension, no explicit witness found
    return out;
}

Mat connection_matrix(const PhaseData& d, cd z) {
    auto b = infinity_blocks(d);
    const int w = static_cast<int>(b.W.size());
    Mat res = b.A * z + b.B + b.T;
    if (w == 0) return res;
    Mat mid = Mat::Zero(w, w);
    for (int k = 0; k < w; ++k) {
        cd c = b.C(k, k);
        if (std::abs(z - c) <= 1e-12 * std::max(1.0, std::abs(c)))
            fail(ErrorKind::Pole, "connection evaluated at a pole");
        mid(k, k) = 1.0 / (z - c);
    }
    return res + b.Q * mid * b.P;
}

Orientation default_orientation(const GradedSpace& g) {
    Orientation o;
    for (int i = 0; i < g.num_nodes(); ++i)
        for (int k = i + 1; k < g.num_nodes(); ++k)
            if (g.node_part(i) != g.node_part(k)) o.edges.push_back({i, k});
    return o;
}

cd edge_phi(const FourierConfig& a, const GradedSpace& g, int tail, int head) {
    return a.phi(g.node_part(head), g.node_part(tail));
}

namespace {

void check_orientation(const GradedSpace& g, const Orientation& o) {
    std::set<std::pair<int, int>> seen;
    for (auto [t, h] : o.edges) {
        if (t < 0 || h < 0 || t >= g.num_nodes() || h >= g.num_nodes() || g.node_part(t) == g.node_part(h))
            fail(ErrorKind::Invalid, "orientation contains a non-edge");
        if (!seen.insert({std::min(t, h), std::max(t, h)}).second)
            fail(ErrorKind::Invalid, "edge oriented twice");
    }
    for (int i = 0; i < g.num_nodes(); ++i)
        for (int k = i + 1; k < g.num_nodes(); ++k)
            if (g.node_part(i) != g.node_part(k) && !seen.count({i, k}))
                fail(ErrorKind::Invalid, "orientation misses an edge");
}

Mat block(const GradedSpace& g, const Mat& m, int rowNode, int colNode) {
    return sub(m, g.node_indices(rowNode), g.node_indices(colNode));
}

} // namespace

Mat cotangent_twist(const PhaseData& d, const Orientation& o) {
    check_orientation(d.g, o);
    Mat rho = d.gamma;
    for (auto [t, h] : o.edges) {
        cd f = edge_phi(d.a, d.g, t, h);
        for (int r : d.g.node_indices(h))
            for (int c : d.g.node_indices(t)) rho(r, c) *= -f;
    }
    return rho;
}

Mat cotangent_moment(const GradedSpace& g, const Orientation& o, const Mat& rho, int node) {
    check_orientation(g, o);
    const int di = g.node_dim(node);
    Mat m = Mat::Zero(di, di);
    for (auto [t, h] : o.edges) {
        if (t == node) m += block(g, rho, node, h) * block(g, rho, h, node);
        if (h == node) m -= block(g, rho, node, t) * block(g, rho, t, node);
    }
    return m;
}

cd cotangent_omega(const GradedSpace& g, const Orientation& o, const Mat& u, const Mat& v) {
    check_orientation(g, o);
    cd s = 0.0;
    for (auto [t, h] : o.edges) {
        s += (block(g, u, t, h) * block(g, v, h, t)).trace();
        s -= (block(g, v, t, h) * block(g, u, h, t)).trace();
    }
    return s;
}

PhaseData random_phase(std::uint64_t seed, const std::vector<FourierPoint>& points,
                       const std::vector<std::vector<int>>& dims, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    auto cr = [&] { return cd(nd(rng), nd(rng)); };
    PhaseData d;
    d.a.points = points;
    d.g = GradedSpace(dims);
    const int n = d.g.size();
    Mat m(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) m(r, c) = scale * cr();
    d.gamma = off_part(d.g, m);
    d.t.resize(d.g.num_nodes());
    for (int j = 0; j < d.g.num_parts(); ++j) {
        auto nodes = d.g.nodes_of_part(j);
        for (std::size_t x = 0; x < nodes.size(); ++x) {
            for (;;) {
                cd c = 1.5 * cr();
                bool ok = true;
                for (std::size_t y = 0; y < x; ++y) ok = ok && std::abs(c - d.t[nodes[y]]) > 0.5;
                if (ok) {
                    d.t[nodes[x]] = c;
                    break;
                }
            }
        }
    }
    return d;
}

} // namespace isomono
