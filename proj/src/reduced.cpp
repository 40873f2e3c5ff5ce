#include "fastssm/reduced.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fastssm {

std::vector<double> fornberg_weights(int derivative, double x0, const std::vector<double>& points) {
    const int n = static_cast<int>(points.size());
    if (derivative < 0) throw ConfigError("fornberg_weights: negative derivative order");
    if (n <= derivative) throw ConfigError("fornberg_weights: need more points than the derivative order");
    const int m = derivative;
    // delta[k][j]: weight of point j for the k-th derivative using the first i+1 points
    std::vector<std::vector<double>> delta(m + 1, std::vector<double>(n, 0.0));
    delta[0][0] = 1.0;
    double c1 = 1.0;
    for (int i = 1; i < n; ++i) {
        double c2 = 1.0;
        const int kmax = std::min(i, m);
        for (int j = 0; j < i; ++j) {
            const double c3 = points[i] - points[j];
            c2 *= c3;
            // the new point's weights need point i-1's weights before they are updated
            if (j == i - 1) {
                for (int k = kmax; k >= 0; --k) {
                    const double lower = k > 0 ? delta[k - 1][i - 1] : 0.0;
                    delta[k][i] = c1 * (k * lower - (points[i - 1] - x0) * delta[k][i - 1]) / c2;
                }
            }
            for (int k = kmax; k >= 0; --k) {
                const double lower = k > 0 ? delta[k - 1][j] : 0.0;
                delta[k][j] = ((points[i] - x0) * delta[k][j] - k * lower) / c3;
            }
        }
        c1 = c2;
    }
    return delta[m];
}

const std::vector<double>& central_stencil_9() {
    static const std::vector<double> weights = fornberg_weights(1, 0.0, {-4, -3, -2, -1, 0, 1, 2, 3, 4});
    return weights;
}

Derivative differentiate(const Eigen::MatrixXd& xi, double dt) {
    if (!(dt > 0.0)) throw ConfigError("differentiate: sampling time must be positive");
    const Eigen::Index n = xi.cols();
    if (n < 9) {
        std::ostringstream msg;
        msg << "differentiate: " << n << " samples; the 9-point stencil needs at least 9";
        throw DataError(msg.str());
    }
    const auto& w = central_stencil_9();
    Derivative out;
    out.first = 4;
    out.last = n - 4;
    const Eigen::Index m = out.last - out.first;
    out.values = Eigen::MatrixXd::Zero(xi.rows(), m);
    for (int s = 0; s < 9; ++s) {
        if (w[s] == 0.0) continue;
        out.values += w[s] * xi.middleCols(s, m);
    }
    out.values /= dt;
    out.retained = xi.middleCols(out.first, m);
    return out;
}

DynamicsFit fit_reduced_dynamics(const Eigen::MatrixXd& xi, const Eigen::MatrixXd& xi_dot, int r,
                                 const FitOptions& options) {
    if (r < 1) throw ConfigError("fit_reduced_dynamics: order r must be >= 1");
    if (xi.cols() != xi_dot.cols() || xi.rows() != xi_dot.rows()) {
        throw ShapeError("fit_reduced_dynamics: Xi and its derivative have different shapes");
    }
    MonomialBasis basis(static_cast<int>(xi.rows()), 1, r);
    if (static_cast<std::size_t>(xi.cols()) < basis.size()) {
        std::ostringstream msg;
        msg << "fit_reduced_dynamics: " << xi.cols() << " samples for " << basis.size()
            << " monomials; lower the reduced-dynamics order r";
        throw DataError(msg.str());
    }
    auto fit = fit_polynomial(xi_dot, eval_monomials(basis, xi), options);
    return {RealMap(basis, fit.coefficients), fit.relative_residual, fit.warnings};
}

namespace {

bool is_pair(Complex a, Complex b, double tol) {
    return std::abs(a - std::conj(b)) <= tol * std::max(1.0, std::abs(a));
}

}  // namespace

std::vector<int> conjugate_pairs(const Eigen::VectorXcd& eigenvalues) {
    std::vector<int> firsts;
    const Eigen::Index n = eigenvalues.size();
    if (n % 2 != 0) throw UnsupportedError("eigenvalues do not form complex conjugate pairs (odd dimension)");
    for (Eigen::Index i = 0; i < n; i += 2) {
        const Complex a = eigenvalues(i);
        const Complex b = eigenvalues(i + 1);
        if (a.imag() == 0.0 || a != std::conj(b)) {
            throw UnsupportedError("eigenvalues do not form complex conjugate pairs");
        }
        firsts.push_back(static_cast<int>(i));
    }
    return firsts;
}

ReducedModel modalize(const RealMap& dynamics, const ModalizeOptions& options) {
    const int d = dynamics.input_dim();
    if (dynamics.output_dim() != d) throw ShapeError("modalize: reduced dynamics must map R^d to R^d");
    if (dynamics.basis().order_lo() != 1) throw ShapeError("modalize: dynamics must start at order 1");
    if (options.mode_shapes && options.mode_shapes->cols() != d) {
        throw ShapeError("modalize: mode shape matrix must have d columns");
    }
    const Eigen::MatrixXd r1 = dynamics.block(1);
    Eigen::EigenSolver<Eigen::MatrixXd> es(r1, true);
    if (es.info() != Eigen::Success) throw NumericalError("modalize: eigen decomposition failed");
    const Eigen::VectorXcd lam = es.eigenvalues();
    const Eigen::MatrixXcd vec = es.eigenvectors();

    // group conjugate pairs and real eigenvalues
    struct Group {
        std::vector<int> members;
        double key_re;
        double key_im;
    };
    std::vector<Group> groups;
    std::vector<bool> used(d, false);
    for (int i = 0; i < d; ++i) {
        if (used[i]) continue;
        used[i] = true;
        Group g{{i}, std::abs(lam(i).real()), std::abs(lam(i).imag())};
        if (lam(i).imag() != 0.0) {
            int partner = -1;
            for (int j = 0; j < d; ++j) {
                if (!used[j] && is_pair(lam(i), lam(j), options.pair_tolerance)) {
                    partner = j;
                    break;
                }
            }
            if (partner >= 0) {
                used[partner] = true;
                if (lam(i).imag() > 0.0) {
                    g.members.push_back(partner);
                } else {
                    g.members.insert(g.members.begin(), partner);
                }
            }
        }
        groups.push_back(g);
    }
    std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
        if (a.key_re != b.key_re) return a.key_re < b.key_re;
        return a.key_im < b.key_im;
    });

    Eigen::VectorXcd eigenvalues(d);
    Eigen::MatrixXcd w(d, d);
    auto normalize = [&](Eigen::VectorXcd v) {
        Eigen::VectorXcd image = options.mode_shapes ? Eigen::VectorXcd(options.mode_shapes->cast<Complex>() * v) : v;
        Eigen::Index imax = 0;
        image.cwiseAbs().maxCoeff(&imax);
        const Complex pivot = image(imax);
        const double norm = image.norm();
        if (norm == 0.0) throw ConditioningError("modalize: eigenvector has a vanishing observable image");
        v *= std::conj(pivot) / (std::abs(pivot) * norm);
        return v;
    };
    int col = 0;
    for (const auto& g : groups) {
        if (g.members.size() == 2) {
            const int i = g.members[0];
            const Complex l = Complex(lam(i).real(), std::abs(lam(i).imag()));
            Eigen::VectorXcd v = vec.col(i);
            if (lam(i).imag() < 0.0) v = v.conjugate();
            v = normalize(v);
            eigenvalues(col) = l;
            eigenvalues(col + 1) = std::conj(l);
            w.col(col) = v;
            w.col(col + 1) = v.conjugate();
            col += 2;
        } else {
            const int i = g.members[0];
            Eigen::VectorXcd v = vec.col(i);
            if (lam(i).imag() == 0.0) {
                // real eigenvector up to a complex factor
                Eigen::Index imax = 0;
                v.cwiseAbs().maxCoeff(&imax);
                v *= std::conj(v(imax)) / std::abs(v(imax));
                v = v.real().cast<Complex>();
            }
            eigenvalues(col) = lam(i).imag() == 0.0 ? Complex(lam(i).real(), 0.0) : lam(i);
            w.col(col) = normalize(v);
            col += 1;
        }
    }

    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(w);
    const auto& s = svd.singularValues();
    const double cond = s(d - 1) > 0.0 ? s(0) / s(d - 1) : std::numeric_limits<double>::infinity();
    if (!(cond <= options.max_condition)) {
        std::ostringstream msg;
        msg << "modalize: eigenvector matrix is near-defective (condition number " << cond << " > "
            << options.max_condition << ")";
        throw ConditioningError(msg.str());
    }
    const Eigen::MatrixXcd winv = w.inverse();

    ComplexMap linear(MonomialBasis(d, 1, 1), w);
    const int r = dynamics.basis().order_hi();
    ComplexMap composed = compose(dynamics.to_complex(), linear, r);
    Eigen::MatrixXcd g = winv * composed.coefficients();
    g.leftCols(d) = eigenvalues.asDiagonal();

    ReducedModel out{dynamics, w, eigenvalues, ComplexMap(composed.basis(), g), cond, 0.0};
    return out;
}

}  // namespace fastssm
