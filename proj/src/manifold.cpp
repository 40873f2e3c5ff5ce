#include "fastssm/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fastssm {

TangentFit fit_tangent_space(const Eigen::MatrixXd& y, int d) {
    if (d < 1) throw ConfigError("fit_tangent_space: d must be >= 1");
    if (d > std::min(y.rows(), y.cols())) {
        std::ostringstream msg;
        msg << "fit_tangent_space: d=" << d << " exceeds the snapshot matrix size " << y.rows() << "x" << y.cols();
        throw RankError(msg.str());
    }
    if (y.norm() == 0.0) throw DataError("fit_tangent_space: snapshot matrix is zero");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double tiny = std::numeric_limits<double>::epsilon() * std::max(y.rows(), y.cols()) * sv(0);
    for (int j = 0; j < d; ++j) {
        if (!(sv(j) > tiny)) {
            std::ostringstream msg;
            msg << "fit_tangent_space: singular value " << j + 1 << " of " << d
                << " vanishes; the data has rank " << j << " < d";
            throw RankError(msg.str());
        }
    }

    TangentFit fit;
    fit.singular_values = sv;
    fit.left_vectors = svd.matrixU().leftCols(d);
    Eigen::MatrixXd right = svd.matrixV().leftCols(d);
    for (int j = 0; j < d; ++j) {
        Eigen::Index imax = 0;
        fit.left_vectors.col(j).cwiseAbs().maxCoeff(&imax);
        if (fit.left_vectors(imax, j) < 0.0) {
            fit.left_vectors.col(j) *= -1.0;
            right.col(j) *= -1.0;
        }
    }
    fit.column_scale.resize(d);
    fit.tangent.resize(y.rows(), d);
    for (int j = 0; j < d; ++j) {
        fit.column_scale(j) = right.col(j).cwiseAbs().maxCoeff();
        fit.tangent.col(j) = fit.left_vectors.col(j) / (sv(j) * fit.column_scale(j));
    }
    const double total = sv.squaredNorm();
    fit.energy = sv.head(d).squaredNorm() / total;
    return fit;
}

Eigen::MatrixXd reduce(const Eigen::MatrixXd& y, const Eigen::MatrixXd& tangent) {
    if (y.rows() != tangent.rows()) {
        std::ostringstream msg;
        msg << "reduce: data has " << y.rows() << " rows, tangent space has " << tangent.rows();
        throw ShapeError(msg.str());
    }
    return tangent.transpose() * y;
}

ParametrizationFit fit_parametrization(const Eigen::MatrixXd& y, const Eigen::MatrixXd& xi, int m,
                                       const FitOptions& options) {
    if (m < 1) throw ConfigError("fit_parametrization: manifold order m must be >= 1");
    if (xi.cols() != y.cols()) throw ShapeError("fit_parametrization: Xi and Y sample counts differ");
    MonomialBasis basis(static_cast<int>(xi.rows()), 1, m);
    if (static_cast<std::size_t>(y.cols()) < basis.size()) {
        std::ostringstream msg;
        msg << "fit_parametrization: " << y.cols() << " samples for " << basis.size()
            << " monomials; lower the manifold order m";
        throw DataError(msg.str());
    }
    auto features = eval_monomials(basis, xi);
    auto fit = fit_polynomial(y, features, options);
    ParametrizationFit out{RealMap(basis, fit.coefficients), fit.relative_residual, fit.warnings};
    return out;
}

Eigen::MatrixXd lift(const RealMap& parametrization, const Eigen::MatrixXd& xi) {
    if (xi.rows() != parametrization.input_dim()) {
        throw ShapeError("lift: reduced coordinates do not match the manifold dimension");
    }
    return parametrization.eval(xi);
}

Eigen::VectorXd principal_angles(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows()) throw ShapeError("principal_angles: ambient dimensions differ");
    Eigen::HouseholderQR<Eigen::MatrixXd> qa(a);
    Eigen::HouseholderQR<Eigen::MatrixXd> qb(b);
    Eigen::MatrixXd ua = qa.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
    Eigen::MatrixXd ub = qb.householderQ() * Eigen::MatrixXd::Identity(b.rows(), b.cols());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ua.transpose() * ub);
    Eigen::VectorXd s = svd.singularValues();
    // sines from the orthogonal residual keep small angles accurate
    Eigen::MatrixXd residual = ub - ua * (ua.transpose() * ub);
    Eigen::JacobiSVD<Eigen::MatrixXd> rsvd(residual);
    const Eigen::VectorXd& r = rsvd.singularValues();
    const Eigen::Index k = s.size();
    Eigen::VectorXd angles(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double sine = (k - 1 - i) < r.size() ? r(k - 1 - i) : 0.0;
        angles(i) = std::atan2(sine, s(i));
    }
    std::sort(angles.begin(), angles.end());
    return angles;
}

Warnings check_folding(const Eigen::MatrixXd& xi, const Eigen::MatrixXd& y, Eigen::Index max_points) {
    Warnings out;
    const Eigen::Index n = xi.cols();
    if (n < 3) return out;
    const Eigen::Index step = std::max<Eigen::Index>(1, n / max_points);
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; i += step) idx.push_back(i);
    std::vector<double> ratios;
    ratios.reserve(idx.size());
    for (Eigen::Index i : idx) {
        double best = std::numeric_limits<double>::infinity();
        Eigen::Index nn = -1;
        for (Eigen::Index j : idx) {
            if (j == i) continue;
            const double dist = (xi.col(i) - xi.col(j)).squaredNorm();
            if (dist < best && dist > 0.0) {
                best = dist;
                nn = j;
            }
        }
        if (nn < 0) continue;
        ratios.push_back((y.col(i) - y.col(nn)).norm() / std::sqrt(best));
    }
    if (ratios.size() < 3) return out;
    std::vector<double> sorted = ratios;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    const auto worst = *std::max_element(ratios.begin(), ratios.end());
    if (median > 0.0 && worst > 100.0 * median) {
        std::ostringstream msg;
        msg << "manifold may fold over its tangent space: reduced-space neighbours are up to " << worst / median
            << "x further apart in observable space than typical";
        out.push_back(msg.str());
    }
    return out;
}

SsmModel fit_ssm(const Eigen::MatrixXd& y, int d, int m, const SsmFitOptions& options) {
    auto tangent = fit_tangent_space(y, d);
    Eigen::MatrixXd xi = reduce(y, tangent.tangent);
    auto param = fit_parametrization(y, xi, m, options.regression);
    SsmModel model{tangent.tangent, tangent.column_scale, param.map, tangent.singular_values, tangent.energy,
                   param.reconstruction_error, 0.0, param.warnings};
    model.principal_angle = principal_angles(param.map.block(1), tangent.left_vectors).maxCoeff();
    if (model.principal_angle > options.angle_warning) {
        std::ostringstream msg;
        msg << "linear block of the parametrization deviates from the SVD subspace by " << model.principal_angle
            << " rad";
        model.warnings.push_back(msg.str());
    }
    if (options.check_folding) {
        auto w = check_folding(xi, y);
        model.warnings.insert(model.warnings.end(), w.begin(), w.end());
    }
    return model;
}

}  // namespace fastssm
