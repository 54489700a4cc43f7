#include "isomono/orbit.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace isomono {

static bool ceq(cd a, cd b, double tol) { return std::abs(a - b) <= tol; }

static bool cless(cd a, cd b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
}

void JordanData::canonicalize(double tol) {
    std::vector<std::pair<cd, Partition>> merged;
    for (auto& [s, p] : blocks) {
        auto it = std::find_if(merged.begin(), merged.end(), [&](auto& e) { return ceq(e.first, s, tol); });
        if (it == merged.end()) merged.push_back({s, p});
        else it->second.insert(it->second.end(), p.begin(), p.end());
    }
    for (auto& e : merged) {
        e.second.erase(std::remove_if(e.second.begin(), e.second.end(), [](int x) { return x <= 0; }),
                       e.second.end());
        std::sort(e.second.begin(), e.second.end(), std::greater<int>());
    }
    merged.erase(std::remove_if(merged.begin(), merged.end(), [](auto& e) { return e.second.empty(); }),
                 merged.end());
    std::sort(merged.begin(), merged.end(), [](auto& a, auto& b) { return cless(a.first, b.first); });
    blocks = std::move(merged);
}

Partition JordanData::partition_of(cd s, double tol) const {
    Partition out;
    for (auto& [e, p] : blocks)
        if (ceq(e, s, tol)) out.insert(out.end(), p.begin(), p.end());
    std::sort(out.begin(), out.end(), std::greater<int>());
    return out;
}

bool JordanData::same_as(const JordanData& o, double tol) const {
    if (n != o.n) return false;
    JordanData a = *this, b = o;
    a.canonicalize(tol);
    b.canonicalize(tol);
    if (a.blocks.size() != b.blocks.size()) return false;
    for (std::size_t k = 0; k < a.blocks.size(); ++k) {
        if (!ceq(a.blocks[k].first, b.blocks[k].first, tol)) return false;
        if (a.blocks[k].second != b.blocks[k].second) return false;
    }
    return true;
}

Mat jordan_matrix(const JordanData& j) {
    Mat m = Mat::Zero(j.n, j.n);
    int at = 0;
    for (auto& [s, p] : j.blocks)
        for (int b : p) {
            for (int k = 0; k < b; ++k) {
                m(at + k, at + k) = s;
                if (k + 1 < b) m(at + k, at + k + 1) = 1.0;
            }
            at += b;
        }
    if (at != j.n) fail(ErrorKind::Invalid, "Jordan data sizes do not sum to n");
    return m;
}

int orbit_product_rank(const JordanData& j, const std::vector<cd>& xis, double tol) {
    int r = 0;
    for (auto& [s, p] : j.blocks) {
        int m = 0;
        for (auto x : xis)
            if (ceq(x, s, tol)) ++m;
        for (int b : p) r += std::max(b - m, 0);
    }
    return r;
}

bool marking_annihilates(const JordanData& j, const Marking& m, double tol) {
    return orbit_product_rank(j, m.xis, tol) == 0;
}

Marking minimal_marking(const JordanData& j) {
    Marking m;
    for (auto& [s, p] : j.blocks) {
        int deg = p.empty() ? 0 : *std::max_element(p.begin(), p.end());
        for (int k = 0; k < deg; ++k) m.xis.push_back(s);
    }
    return m;
}

LegData marking_to_lambda_d(const JordanData& orbit, const Marking& marking, double tol) {
    if (!marking_annihilates(orbit, marking, tol))
        fail(ErrorKind::InvalidMarking, "marking does not annihilate the orbit");
    LegData out;
    std::vector<cd> prefix;
    cd prev = 0;
    for (auto x : marking.xis) {
        out.lambda.push_back(x - prev);
        out.d.push_back(orbit_product_rank(orbit, prefix, tol));
        prefix.push_back(x);
        prev = x;
    }
    return out;
}

LegChain realize_leg(const JordanData& orbit, const Marking& marking, double tol) {
    LegData ld = marking_to_lambda_d(orbit, marking, tol);
    LegChain c;
    c.Lambda = jordan_matrix(orbit);
    const int n = orbit.n;
    for (auto x : ld.d) c.dims.push_back(static_cast<int>(x));
    Mat E = Mat::Identity(n, n);
    for (std::size_t i = 0; i + 1 < marking.xis.size(); ++i) {
        Mat img = (c.Lambda - marking.xis[i] * Mat::Identity(n, n)) * E;
        int dn = c.dims[i + 1];
        Mat En(n, dn);
        if (dn > 0 && img.cols() > 0) {
            Eigen::JacobiSVD<Mat> svd(img, Eigen::ComputeThinU);
            En = svd.matrixU().leftCols(dn);
        }
        c.p.push_back(En.adjoint() * img);
        c.q.push_back(E.adjoint() * En);
        E = En;
    }
    return c;
}

JordanData contract_orbit(const JordanData& qp, double zeroTol) {
    JordanData out;
    out.n = qp.n;
    for (auto& [s, p] : qp.blocks) {
        if (std::abs(s) <= zeroTol) {
            Partition np;
            for (int b : p) {
                out.n -= 1;
                if (b > 1) np.push_back(b - 1);
            }
            if (!np.empty()) out.blocks.push_back({cd(0), np});
        } else {
            out.blocks.push_back({s, p});
        }
    }
    out.canonicalize(0.0);
    return out;
}

JordanData expand_orbit(const JordanData& pq, int targetDim) {
    int col = targetDim - pq.n;
    Partition zero = pq.partition_of(cd(0), 0.0);
    if (col < static_cast<int>(zero.size()))
        fail(ErrorKind::Invalid, "target dimension " + std::to_string(targetDim) +
                                     " cannot host a first column longer than the zero partition");
    JordanData out;
    out.n = targetDim;
    Partition np;
    for (int b : zero) np.push_back(b + 1);
    for (int k = static_cast<int>(zero.size()); k < col; ++k) np.push_back(1);
    for (auto& [s, p] : pq.blocks)
        if (s != cd(0)) out.blocks.push_back({s, p});
    if (!np.empty()) out.blocks.push_back({cd(0), np});
    out.canonicalize(0.0);
    return out;
}

Marking specialize_marking(const Marking& m) {
    Marking out;
    out.xis.push_back(0.0);
    for (auto x : m.xis) out.xis.push_back(-x);
    return out;
}

ShiftedOrbits scalar_shift(const std::vector<JordanData>& orbits, const JordanData& residual,
                           const std::vector<cd>& shifts) {
    if (shifts.size() != orbits.size()) fail(ErrorKind::Invalid, "one shift per orbit expected");
    ShiftedOrbits out;
    cd total = 0;
    for (std::size_t i = 0; i < orbits.size(); ++i) {
        JordanData j = orbits[i];
        for (auto& b : j.blocks) b.first += shifts[i];
        out.orbits.push_back(j);
        total += shifts[i];
    }
    out.residual = residual;
    for (auto& b : out.residual.blocks) b.first += total;
    return out;
}

JordanData jordan_numeric(const Mat& m, double ctol, double rankTol) {
    const int n = static_cast<int>(m.rows());
    JordanData out;
    out.n = n;
    if (n == 0) return out;
    Eigen::ComplexEigenSolver<Mat> es(m, false);
    Vec ev = es.eigenvalues();
    double sc = scale_of(m);
    // single-linkage clustering
    std::vector<int> label(n, -1);
    int nl = 0;
    for (int a = 0; a < n; ++a) {
        if (label[a] >= 0) continue;
        label[a] = nl;
        std::vector<int> stack{a};
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int b = 0; b < n; ++b)
                if (label[b] < 0 && std::abs(ev(v) - ev(b)) <= ctol * sc) {
                    label[b] = nl;
                    stack.push_back(b);
                }
        }
        ++nl;
    }
    for (int l = 0; l < nl; ++l) {
        cd s = 0;
        int mult = 0;
        for (int a = 0; a < n; ++a)
            if (label[a] == l) {
                s += ev(a);
                ++mult;
            }
        s /= double(mult);
        Mat shifted = m - s * Mat::Identity(n, n);
        std::vector<int> ranks{n};
        Mat pw = Mat::Identity(n, n);
        double base = std::max(1.0, shifted.norm()), thr = rankTol;
        for (int k = 1; k <= mult; ++k) {
            pw = pw * shifted;
            thr *= base;
            ranks.push_back(numeric_rank_abs(pw, thr));
        }
        // blocks of size >= k: ranks[k-1] - ranks[k]
        Partition p;
        for (int k = mult; k >= 1; --k) {
            int atLeast = ranks[k - 1] - ranks[k];
            int atLeastNext = (k + 1 <= mult) ? ranks[k] - ranks[k + 1] : 0;
            for (int c = 0; c < atLeast - atLeastNext; ++c) p.push_back(k);
        }
        out.blocks.push_back({s, p});
    }
    out.canonicalize(ctol * sc);
    return out;
}

RatMatrix RatMatrix::identity(int n) {
    RatMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1;
    return m;
}

Mat RatMatrix::to_complex() const {
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = static_cast<double>((*this)(i, j));
    return m;
}

RatMatrix rat_mul(const RatMatrix& x, const RatMatrix& y) {
    if (x.cols != y.rows) fail(ErrorKind::Invalid, "rational product shape mismatch");
    RatMatrix c(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int l = 0; l < x.cols; ++l) {
            if (x(i, l) == 0) continue;
            for (int j = 0; j < y.cols; ++j) c(i, j) += x(i, l) * y(l, j);
        }
    return c;
}

int rat_rank(RatMatrix m) {
    int r = 0;
    for (int c = 0; c < m.cols && r < m.rows; ++c) {
        int piv = -1;
        for (int i = r; i < m.rows; ++i)
            if (m(i, c) != 0) {
                piv = i;
                break;
            }
        if (piv < 0) continue;
        if (piv != r)
            for (int k = 0; k < m.cols; ++k) std::swap(m(piv, k), m(r, k));
        for (int i = r + 1; i < m.rows; ++i) {
            if (m(i, c) == 0) continue;
            Rational f = m(i, c) / m(r, c);
            for (int k = c; k < m.cols; ++k) m(i, k) -= f * m(r, k);
        }
        ++r;
    }
    return r;
}

JordanData jordan_exact(const RatMatrix& m) {
    const int n = m.rows;
    JordanData out;
    out.n = n;
    if (n == 0) return out;
    Eigen::ComplexEigenSolver<Mat> es(m.to_complex(), false);
    std::vector<long long> cands;
    for (int k = 0; k < n; ++k) {
        long long c = std::llround(es.eigenvalues()(k).real());
        if (std::find(cands.begin(), cands.end(), c) == cands.end()) cands.push_back(c);
    }
    int total = 0;
    for (long long s : cands) {
        RatMatrix sh = m;
        for (int i = 0; i < n; ++i) sh(i, i) -= Rational(s);
        std::vector<int> ranks{n};
        RatMatrix pw = sh;
        for (int k = 1; k <= n; ++k) {
            ranks.push_back(rat_rank(pw));
            if (ranks[k] == ranks[k - 1]) break;
            pw = rat_mul(pw, sh);
        }
        int K = static_cast<int>(ranks.size()) - 1;
        int mult = n - ranks[K];
        if (mult == 0) continue;
        total += mult;
        Partition p;
        for (int k = K; k >= 1; --k) {
            int atLeast = ranks[k - 1] - ranks[k];
            int atLeastNext = (k + 1 <= K) ? ranks[k] - ranks[k + 1] : 0;
            for (int c = 0; c < atLeast - atLeastNext; ++c) p.push_back(k);
        }
        out.blocks.push_back({cd(double(s), 0.0), p});
    }
    if (total != n) fail(ErrorKind::Invalid, "spectrum is not integral; exact Jordan type unavailable");
    out.canonicalize(0.0);
    return out;
}

namespace {

// product of random elementary matrices
RatMatrix random_unimodular(std::mt19937_64& rng, int n) {
    RatMatrix m = RatMatrix::identity(n);
    if (n < 2) return m;
    std::uniform_int_distribution<int> pick(0, n - 1), coef(-2, 2);
    for (int step = 0; step < 3 * n; ++step) {
        int i = pick(rng), j = pick(rng);
        if (i == j) continue;
        int c = coef(rng);
        for (int k = 0; k < n; ++k) m(i, k) += c * m(j, k);
    }
    return m;
}

RatMatrix inverse_unimodular(const RatMatrix& m) {
    const int n = m.rows;
    RatMatrix a = m, inv = RatMatrix::identity(n);
    for (int c = 0; c < n; ++c) {
        int piv = c;
        while (a(piv, c) == 0) ++piv;
        for (int k = 0; k < n; ++k) {
            std::swap(a(piv, k), a(c, k));
            std::swap(inv(piv, k), inv(c, k));
        }
        Rational d = a(c, c);
        for (int k = 0; k < n; ++k) {
            a(c, k) /= d;
            inv(c, k) /= d;
        }
        for (int i = 0; i < n; ++i) {
            if (i == c || a(i, c) == 0) continue;
            Rational f = a(i, c);
            for (int k = 0; k < n; ++k) {
                a(i, k) -= f * a(c, k);
                inv(i, k) -= f * inv(c, k);
            }
        }
    }
    return inv;
}

} // namespace

PQPair random_pq_pair(const JordanData& qp, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int n = qp.n;
    Mat jf = jordan_matrix(qp);
    RatMatrix J(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double v = jf(i, j).real();
            if (std::abs(jf(i, j).imag()) > 0 || v != std::round(v))
                fail(ErrorKind::Invalid, "random_pq_pair needs integer eigenvalues");
            J(i, j) = static_cast<long long>(v);
        }
    // J = Jc * Sel, Jc the nonzero columns of J
    std::vector<int> nz;
    for (int j = 0; j < n; ++j) {
        bool any = false;
        for (int i = 0; i < n; ++i)
            if (J(i, j) != 0) any = true;
        if (any) nz.push_back(j);
    }
    const int r = static_cast<int>(nz.size());
    RatMatrix Jc(n, r), Sel(r, n);
    for (int c = 0; c < r; ++c) {
        for (int i = 0; i < n; ++i) Jc(i, c) = J(i, nz[c]);
        Sel(c, nz[c]) = 1;
    }
    RatMatrix S = random_unimodular(rng, n), Si = inverse_unimodular(S);
    RatMatrix G = random_unimodular(rng, r), Gi = inverse_unimodular(G);
    PQPair out;
    out.Q = rat_mul(rat_mul(S, Jc), G);
    out.P = rat_mul(rat_mul(Gi, Sel), Si);
    return out;
}

JordanData random_integer_jordan(std::uint64_t seed, int nmax, int emax) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dn(1, nmax), ev(-emax, emax), coin(0, 2);
    JordanData j;
    j.n = dn(rng);
    int left = j.n;
    while (left > 0) {
        std::uniform_int_distribution<int> bs(1, left);
        int b = bs(rng);
        // bias towards zero so that the nilpotent part is exercised
        int s = coin(rng) == 0 ? 0 : ev(rng);
        j.blocks.push_back({cd(double(s), 0.0), {b}});
        left -= b;
    }
    j.canonicalize(0.0);
    return j;
}

std::string to_string(const JordanData& j) {
    std::ostringstream os;
    os << "gl" << j.n << "{";
    bool first = true;
    for (auto& [s, p] : j.blocks) {
        if (!first) os << ", ";
        first = false;
        if (s.imag() == 0) os << s.real();
        else os << s.real() << (s.imag() < 0 ? "-" : "+") << std::abs(s.imag()) << "i";
        os << ":(";
        for (std::size_t k = 0; k < p.size(); ++k) os << (k ? "," : "") << p[k];
        os << ")";
    }
    os << "}";
    return os.str();
}

} // namespace isomono
