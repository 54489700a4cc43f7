#pragma once

#include <functional>

#include "isomono/phase_space.hpp"

namespace isomono {

// sum of c(m, n) lambda^m z^n
struct BivarPoly {
    Mat c = Mat::Ones(1, 1);

    int deg_lambda() const { return static_cast<int>(c.rows()) - 1; }
    int deg_z() const { return static_cast<int>(c.cols()) - 1; }
    cd coeff(int m, int n) const;
    cd eval(cd lambda, cd z) const;
    // drop trailing rows and columns below tol * max |c|
    void trim(double tol = 1e-12);
};

BivarPoly operator*(const BivarPoly& p, const BivarPoly& q);
BivarPoly operator+(const BivarPoly& p, const BivarPoly& q);
BivarPoly operator*(cd s, const BivarPoly& p);

// det(alpha lambda + beta z - gamma) by interpolation on roots of unity
BivarPoly spectral_poly(const Mat& alpha, const Mat& beta, const Mat& gamma);
BivarPoly spectral_poly(const PhaseData& d);

// q(lambda, z) = p(a lambda + b z, c lambda + d z)
BivarPoly gl2_transform_poly(const Mobius& g, const BivarPoly& p);

// k with q ~ k p, read off the largest coefficient of p
cd fit_constant(const BivarPoly& p, const BivarPoly& q);
// |q - k p| / |q| with the fitted k
double relative_mismatch(const BivarPoly& p, const BivarPoly& q);

// det(z - C) det(lambda - B(z))
cd schur_determinant(const PhaseData& d, cd lambda, cd z);

// G with f(Gamma + u) = f(Gamma) + Tr(G u) + ..., off-part entries only, central differences
Mat fd_gradient(const PhaseData& d, const std::function<cd(const PhaseData&)>& f, double h = 1e-5);
// omega-Hamiltonian field of a function with gradient G: omega(v, u) = Tr(G u)
Mat hamiltonian_field(const FourierConfig& a, const GradedSpace& g, const Mat& grad);
// {f, g} = omega(v_f, v_g)
cd poisson_bracket(const FourierConfig& a, const GradedSpace& g, const Mat& gradF, const Mat& gradG);

// largest |{c_mn, c_m'n'}| over coefficient pairs of the spectral polynomial
double spectral_poisson_residual(const PhaseData& d, double h = 1e-5);

} // namespace isomono
