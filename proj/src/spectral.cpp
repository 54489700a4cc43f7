#include "isomono/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace isomono {

cd BivarPoly::coeff(int m, int n) const {
    if (m < 0 || n < 0 || m >= c.rows() || n >= c.cols()) return 0.0;
    return c(m, n);
}

cd BivarPoly::eval(cd lambda, cd z) const {
    cd out = 0.0, lp = 1.0;
    for (int m = 0; m < c.rows(); ++m) {
        cd row = 0.0, zp = 1.0;
        for (int n = 0; n < c.cols(); ++n) {
            row += c(m, n) * zp;
            zp *= z;
        }
        out += row * lp;
        lp *= lambda;
    }
    return out;
}

void BivarPoly::trim(double tol) {
    const double thr = tol * c.cwiseAbs().maxCoeff();
    int rows = static_cast<int>(c.rows()), cols = static_cast<int>(c.cols());
    while (rows > 1 && c.row(rows - 1).head(cols).cwiseAbs().maxCoeff() <= thr) --rows;
    while (cols > 1 && c.col(cols - 1).head(rows).cwiseAbs().maxCoeff() <= thr) --cols;
    c = Mat(c.topLeftCorner(rows, cols));
}

BivarPoly operator*(const BivarPoly& p, const BivarPoly& q) {
    BivarPoly out;
    out.c = Mat::Zero(p.c.rows() + q.c.rows() - 1, p.c.cols() + q.c.cols() - 1);
    for (int i = 0; i < p.c.rows(); ++i)
        for (int j = 0; j < p.c.cols(); ++j) {
            if (p.c(i, j) == cd(0)) continue;
            out.c.block(i, j, q.c.rows(), q.c.cols()) += p.c(i, j) * q.c;
        }
    return out;
}

BivarPoly operator+(const BivarPoly& p, const BivarPoly& q) {
    BivarPoly out;
    out.c = Mat::Zero(std::max(p.c.rows(), q.c.rows()), std::max(p.c.cols(), q.c.cols()));
    out.c.topLeftCorner(p.c.rows(), p.c.cols()) += p.c;
    out.c.topLeftCorner(q.c.rows(), q.c.cols()) += q.c;
    return out;
}

BivarPoly operator*(cd s, const BivarPoly& p) {
    BivarPoly out = p;
    out.c *= s;
    return out;
}

BivarPoly spectral_poly(const Mat& alpha, const Mat& beta, const Mat& gamma) {
    const auto n = alpha.rows();
    if (alpha.cols() != n || beta.rows() != n || beta.cols() != n || gamma.rows() != n || gamma.cols() != n)
        fail(ErrorKind::Invalid, "spectral_poly needs square matrices of one size");
    BivarPoly out;
    if (n == 0) return out;
    // degrees in lambda and z are at most n, so n + 1 roots of unity per variable suffice
    const int N = static_cast<int>(n) + 1;
    std::vector<cd> w(N);
    for (int k = 0; k < N; ++k) w[k] = std::polar(1.0, 2.0 * std::numbers::pi * k / N);
    Mat vals(N, N);
    for (int p = 0; p < N; ++p)
        for (int q = 0; q < N; ++q)
            vals(p, q) = (alpha * w[p] + beta * w[q] - gamma).partialPivLu().determinant();
    out.c = Mat::Zero(N, N);
    for (int m = 0; m < N; ++m)
        for (int k = 0; k < N; ++k) {
            cd s = 0.0;
            for (int p = 0; p < N; ++p)
                for (int q = 0; q < N; ++q) s += vals(p, q) * std::conj(w[(p * m) % N] * w[(q * k) % N]);
            out.c(m, k) = s / double(N * N);
        }
    out.trim();
    return out;
}

BivarPoly spectral_poly(const PhaseData& d) {
    auto w = assemble(d);
    return spectral_poly(w.alpha, w.beta, w.gamma);
}

BivarPoly gl2_transform_poly(const Mobius& g, const BivarPoly& p) {
    BivarPoly x, y;
    x.c = Mat::Zero(2, 2);
    x.c(1, 0) = g.a;
    x.c(0, 1) = g.b;
    y.c = Mat::Zero(2, 2);
    y.c(1, 0) = g.c;
    y.c(0, 1) = g.d;
    BivarPoly out;
    out.c = Mat::Zero(1, 1);
    BivarPoly xm; // x^m
    for (int m = 0; m < p.c.rows(); ++m) {
        BivarPoly term = xm;
        for (int n = 0; n < p.c.cols(); ++n) {
            if (p.c(m, n) != cd(0)) out = out + p.c(m, n) * term;
            term = term * y;
        }
        xm = xm * x;
    }
    out.trim(0.0);
    return out;
}

cd fit_constant(const BivarPoly& p, const BivarPoly& q) {
    Eigen::Index r = 0, c = 0;
    p.c.cwiseAbs().maxCoeff(&r, &c);
    if (p.c(r, c) == cd(0)) fail(ErrorKind::Invalid, "cannot fit a constant to the zero polynomial");
    return q.coeff(static_cast<int>(r), static_cast<int>(c)) / p.c(r, c);
}

double relative_mismatch(const BivarPoly& p, const BivarPoly& q) {
    cd k = fit_constant(p, q);
    BivarPoly diff = q + (-k) * p;
    const double nq = q.c.norm();
    return nq == 0.0 ? diff.c.norm() : diff.c.norm() / nq;
}

cd schur_determinant(const PhaseData& d, cd lambda, cd z) {
    auto b = infinity_blocks(d);
    const auto w = b.C.rows();
    Mat zc = z * Mat::Identity(w, w) - b.C;
    Mat m = lambda * Mat::Identity(b.A.rows(), b.A.cols()) - connection_matrix(d, z);
    return zc.partialPivLu().determinant() * m.partialPivLu().determinant();
}

Mat fd_gradient(const PhaseData& d, const std::function<cd(const PhaseData&)>& f, double h) {
    const int n = d.g.size();
    Mat grad = Mat::Zero(n, n);
    Mat mask = off_part(d.g, Mat::Ones(n, n));
    PhaseData e = d;
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            if (mask(j, k) == cd(0)) continue;
            const cd x = d.gamma(j, k);
            e.gamma(j, k) = x + h;
            cd fp = f(e);
            e.gamma(j, k) = x - h;
            cd fm = f(e);
            e.gamma(j, k) = x;
            grad(k, j) = (fp - fm) / (2.0 * h);
        }
    return grad;
}

Mat hamiltonian_field(const FourierConfig& a, const GradedSpace& g, const Mat& grad) {
    return apply_phi_inverse(a, g, off_part(g, grad));
}

cd poisson_bracket(const FourierConfig& a, const GradedSpace& g, const Mat& gradF, const Mat& gradG) {
    return omega(a, g, hamiltonian_field(a, g, gradF), hamiltonian_field(a, g, gradG));
}

double spectral_poisson_residual(const PhaseData& d, double h) {
    const auto base = spectral_poly(d);
    const int rows = static_cast<int>(base.c.rows()), cols = static_cast<int>(base.c.cols());
    // one gradient per coefficient, from the same finite-difference sweep
    const int n = d.g.size();
    std::vector<Mat> grads(rows * cols, Mat::Zero(n, n));
    Mat mask = off_part(d.g, Mat::Ones(n, n));
    PhaseData e = d;
    auto coeffs = [&](const PhaseData& x) {
        auto p = spectral_poly(x);
        Mat c = Mat::Zero(rows, cols);
        const auto r = std::min<Eigen::Index>(rows, p.c.rows()), s = std::min<Eigen::Index>(cols, p.c.cols());
        c.topLeftCorner(r, s) = p.c.topLeftCorner(r, s);
        return c;
    };
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            if (mask(j, k) == cd(0)) continue;
            const cd x = d.gamma(j, k);
            e.gamma(j, k) = x + h;
            Mat cp = coeffs(e);
            e.gamma(j, k) = x - h;
            Mat cm = coeffs(e);
            e.gamma(j, k) = x;
            for (int i = 0; i < rows * cols; ++i) grads[i](k, j) = (cp(i % rows, i / rows) - cm(i % rows, i / rows)) / (2.0 * h);
        }
    double worst = 0.0;
    for (std::size_t i = 0; i < grads.size(); ++i)
        for (std::size_t j = i + 1; j < grads.size(); ++j)
            worst = std::max(worst, std::abs(poisson_bracket(d.a, d.g, grads[i], grads[j])));
    return worst;
}

} // namespace isomono
