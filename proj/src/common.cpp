#include "isomono/common.hpp"

namespace isomono {

int numeric_rank(const Mat& m, double rel) {
    if (m.rows() == 0 || m.cols() == 0) return 0;
    Eigen::JacobiSVD<Mat> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    int r = 0;
    for (int k = 0; k < s.size(); ++k)
        if (s(k) > rel * s(0)) ++r;
    return r;
}

int numeric_rank_abs(const Mat& m, double threshold) {
    if (m.rows() == 0 || m.cols() == 0) return 0;
    Eigen::JacobiSVD<Mat> svd(m);
    int r = 0;
    for (int k = 0; k < svd.singularValues().size(); ++k)
        if (svd.singularValues()(k) > threshold) ++r;
    return r;
}

Mat column_basis(const Mat& m, double rel) {
    if (m.rows() == 0 || m.cols() == 0) return Mat(m.rows(), 0);
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU);
    const auto& s = svd.singularValues();
    int r = 0;
    if (s.size() > 0 && s(0) > 0.0)
        for (int k = 0; k < s.size(); ++k)
            if (s(k) > rel * s(0)) ++r;
    return svd.matrixU().leftCols(r);
}

double scale_of(const Mat& m) {
    double s = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
    return s > 1.0 ? s : 1.0;
}

} // namespace isomono
