#include "fastssm/polybasis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fastssm {

namespace {

void append_degree(int dim, int degree, MultiIndex& prefix, std::vector<MultiIndex>& out) {
    const int pos = static_cast<int>(prefix.size());
    if (pos == dim - 1) {
        prefix.push_back(degree);
        out.push_back(prefix);
        prefix.pop_back();
        return;
    }
    for (int first = degree; first >= 0; --first) {
        prefix.push_back(first);
        append_degree(dim, degree - first, prefix, out);
        prefix.pop_back();
    }
}

// Rank of k among multi-indices of the same length and degree, descending lex.
std::size_t rank_within_degree(const MultiIndex& k, int degree) {
    std::size_t rank = 0;
    int remaining = degree;
    const int dim = static_cast<int>(k.size());
    for (int pos = 0; pos + 1 < dim; ++pos) {
        for (int c = remaining; c > k[pos]; --c) {
            rank += monomial_count(dim - pos - 1, remaining - c);
        }
        remaining -= k[pos];
    }
    return rank;
}

}  // namespace

std::size_t monomial_count(int dim, int degree) {
    if (degree < 0 || dim < 0) return 0;
    if (dim == 0) return degree == 0 ? 1 : 0;
    // binomial(degree + dim - 1, dim - 1), computed exactly in integers
    std::size_t n = static_cast<std::size_t>(degree + dim - 1);
    std::size_t k = static_cast<std::size_t>(dim - 1);
    k = std::min(k, n - k);
    std::size_t result = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        result = result * (n - k + i) / i;
    }
    return result;
}

MonomialBasis::MonomialBasis(int dim, int order_lo, int order_hi) : dim_(dim), lo_(order_lo), hi_(order_hi) {
    if (dim < 1) throw ConfigError("monomial basis dimension must be >= 1");
    if (order_lo < 0 || order_lo > order_hi) {
        std::ostringstream msg;
        msg << "invalid monomial order range [" << order_lo << ", " << order_hi << "]";
        throw ConfigError(msg.str());
    }
    for (int degree = lo_; degree <= hi_; ++degree) {
        degree_start_.push_back(exps_.size());
        MultiIndex prefix;
        append_degree(dim_, degree, prefix, exps_);
        degrees_.resize(exps_.size(), degree);
    }
    degree_start_.push_back(exps_.size());
}

long MonomialBasis::index_of(const MultiIndex& k) const {
    if (static_cast<int>(k.size()) != dim_) return -1;
    int degree = 0;
    for (int e : k) {
        if (e < 0) return -1;
        degree += e;
    }
    if (degree < lo_ || degree > hi_) return -1;
    return static_cast<long>(degree_start_[degree - lo_] + rank_within_degree(k, degree));
}

std::pair<std::size_t, std::size_t> MonomialBasis::degree_range(int degree) const {
    if (degree < lo_ || degree > hi_) return {0, 0};
    return {degree_start_[degree - lo_], degree_start_[degree - lo_ + 1]};
}

MonomialBasis enumerate_monomials(int dim, int order_lo, int order_hi) {
    if (order_lo < 1) throw ConfigError("monomial order_lo must be >= 1");
    return MonomialBasis(dim, order_lo, order_hi);
}

namespace {

template <typename Mat>
Mat eval_monomials_impl(const MonomialBasis& basis, const Mat& points) {
    using Scalar = typename Mat::Scalar;
    if (points.rows() != basis.dim()) {
        std::ostringstream msg;
        msg << "eval_monomials: points have " << points.rows() << " rows, basis dimension is " << basis.dim();
        throw ShapeError(msg.str());
    }
    const Eigen::Index n = points.cols();
    const int dim = basis.dim();
    const int hi = basis.order_hi();
    Mat out(static_cast<Eigen::Index>(basis.size()), n);
    // powers[v * (hi + 1) + e] = x_v^e for the current point
    std::vector<Scalar> powers(static_cast<std::size_t>(dim) * (hi + 1));
    for (Eigen::Index c = 0; c < n; ++c) {
        for (int v = 0; v < dim; ++v) {
            Scalar acc(1);
            for (int e = 0; e <= hi; ++e) {
                powers[v * (hi + 1) + e] = acc;
                acc *= points(v, c);
            }
        }
        for (std::size_t i = 0; i < basis.size(); ++i) {
            const MultiIndex& k = basis.exponent(i);
            Scalar value(1);
            for (int v = 0; v < dim; ++v) {
                if (k[v] != 0) value *= powers[v * (hi + 1) + k[v]];
            }
            out(static_cast<Eigen::Index>(i), c) = value;
        }
    }
    return out;
}

}  // namespace

Eigen::MatrixXd eval_monomials(const MonomialBasis& basis, const Eigen::MatrixXd& points) {
    return eval_monomials_impl(basis, points);
}

Eigen::MatrixXcd eval_monomials(const MonomialBasis& basis, const Eigen::MatrixXcd& points) {
    return eval_monomials_impl(basis, points);
}

// ---------------------------------------------------------------------------
// PolynomialMap

template <typename Scalar>
PolynomialMap<Scalar>::PolynomialMap(MonomialBasis basis, Matrix coefficients)
    : basis_(std::move(basis)), coeffs_(std::move(coefficients)) {
    if (static_cast<std::size_t>(coeffs_.cols()) != basis_.size()) {
        std::ostringstream msg;
        msg << "polynomial map has " << coeffs_.cols() << " coefficient columns for " << basis_.size()
            << " monomials";
        throw ShapeError(msg.str());
    }
}

template <typename Scalar>
PolynomialMap<Scalar> PolynomialMap<Scalar>::zero(MonomialBasis basis, int outputs) {
    const auto cols = static_cast<Eigen::Index>(basis.size());
    return PolynomialMap(std::move(basis), Matrix::Zero(outputs, cols));
}

template <typename Scalar>
typename PolynomialMap<Scalar>::Matrix PolynomialMap<Scalar>::block(int degree) const {
    auto [first, last] = basis_.degree_range(degree);
    return coeffs_.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(last - first));
}

template <typename Scalar>
typename PolynomialMap<Scalar>::Matrix PolynomialMap<Scalar>::eval(const Matrix& points) const {
    return coeffs_ * eval_monomials(basis_, points);
}

template <typename Scalar>
typename PolynomialMap<Scalar>::Vector PolynomialMap<Scalar>::eval(const Vector& point) const {
    Matrix pts = point;
    return coeffs_ * eval_monomials(basis_, pts);
}

template <typename Scalar>
typename PolynomialMap<Scalar>::Matrix PolynomialMap<Scalar>::jacobian(const Vector& point) const {
    const int dim = basis_.dim();
    if (point.size() != dim) throw ShapeError("jacobian: point dimension does not match the map input");
    // dmono(i, v) = d/dx_v of monomial i at the point
    Matrix dmono = Matrix::Zero(static_cast<Eigen::Index>(basis_.size()), dim);
    for (std::size_t i = 0; i < basis_.size(); ++i) {
        const MultiIndex& k = basis_.exponent(i);
        for (int v = 0; v < dim; ++v) {
            if (k[v] == 0) continue;
            Scalar value(static_cast<double>(k[v]));
            for (int w = 0; w < dim; ++w) {
                const int e = (w == v) ? k[w] - 1 : k[w];
                for (int p = 0; p < e; ++p) value *= point(w);
            }
            dmono(static_cast<Eigen::Index>(i), v) = value;
        }
    }
    return coeffs_ * dmono;
}

template <typename Scalar>
PolynomialMap<Scalar> PolynomialMap<Scalar>::rebase(int lo, int hi) const {
    MonomialBasis target(basis_.dim(), lo, hi);
    Matrix out = Matrix::Zero(coeffs_.rows(), static_cast<Eigen::Index>(target.size()));
    for (std::size_t i = 0; i < basis_.size(); ++i) {
        const long j = target.index_of(basis_.exponent(i));
        if (j >= 0) out.col(j) = coeffs_.col(static_cast<Eigen::Index>(i));
    }
    return PolynomialMap(std::move(target), std::move(out));
}

template <typename Scalar>
PolynomialMap<Complex> PolynomialMap<Scalar>::to_complex() const {
    return PolynomialMap<Complex>(basis_, coeffs_.template cast<Complex>());
}

template class PolynomialMap<double>;
template class PolynomialMap<Complex>;

// ---------------------------------------------------------------------------
// Least squares

namespace {

template <typename Scalar>
FitResult<Scalar> fit_impl(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& targets,
                           const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& features,
                           const FitOptions& options) {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (targets.cols() != features.cols()) {
        std::ostringstream msg;
        msg << "fit_polynomial: " << targets.cols() << " target samples vs " << features.cols()
            << " feature samples";
        throw ShapeError(msg.str());
    }
    if (features.cols() == 0) throw DataError("fit_polynomial: no samples");

    const Eigen::Index nf = features.rows();
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(nf);
    Matrix scaled = features;
    if (options.scale_features) {
        for (Eigen::Index i = 0; i < nf; ++i) {
            const double m = features.row(i).cwiseAbs().maxCoeff();
            if (m > 0.0) {
                scale(i) = m;
                scaled.row(i) /= Scalar(m);
            }
        }
    }

    // C * F = T  <=>  F^H C^H = T^H ; solve with the pseudo-inverse of F^H.
    Matrix a = scaled.adjoint();
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    const double cutoff = options.rcond * smax;
    long rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff && sv(i) > 0.0) ++rank;
    }

    FitResult<Scalar> result;
    result.singular_values = sv;
    result.rank = rank;

    Matrix rhs = svd.matrixU().leftCols(rank).adjoint() * targets.adjoint();
    for (long i = 0; i < rank; ++i) rhs.row(i) /= Scalar(sv(i));
    Matrix ch = svd.matrixV().leftCols(rank) * rhs;  // nf x outputs
    Matrix coeffs = ch.adjoint();
    for (Eigen::Index i = 0; i < nf; ++i) coeffs.col(i) /= Scalar(scale(i));
    result.coefficients = coeffs;

    if (rank < std::min<Eigen::Index>(nf, features.cols())) {
        std::ostringstream msg;
        msg << "fit_polynomial: feature matrix is rank deficient (rank " << rank << " of " << nf
            << "); returning the minimum-norm solution";
        result.warnings.push_back(msg.str());
    } else if (features.cols() < nf) {
        result.warnings.push_back("fit_polynomial: fewer samples than features; minimum-norm solution");
    }

    result.residual = (targets - result.coefficients * features).norm();
    const double tnorm = targets.norm();
    result.relative_residual = tnorm > 0.0 ? result.residual / tnorm : 0.0;
    return result;
}

}  // namespace

FitResult<double> fit_polynomial(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& features,
                                 const FitOptions& options) {
    return fit_impl<double>(targets, features, options);
}

FitResult<Complex> fit_polynomial(const Eigen::MatrixXcd& targets, const Eigen::MatrixXcd& features,
                                  const FitOptions& options) {
    return fit_impl<Complex>(targets, features, options);
}

// ---------------------------------------------------------------------------
// Truncated algebra and composition

TruncatedAlgebra::TruncatedAlgebra(int dim, int max_order)
    : dim_(dim), max_order_(max_order), basis_(dim, 0, max_order) {
    const std::size_t n = basis_.size();
    mul_.assign(n * n, -1);
    MultiIndex sum(static_cast<std::size_t>(dim));
    for (std::size_t a = 0; a < n; ++a) {
        const auto& ka = basis_.exponent(a);
        for (std::size_t b = 0; b < n; ++b) {
            if (basis_.degree(a) + basis_.degree(b) > max_order) continue;
            const auto& kb = basis_.exponent(b);
            for (int v = 0; v < dim; ++v) sum[v] = ka[v] + kb[v];
            mul_[a * n + b] = basis_.index_of(sum);
        }
    }
    deriv_.assign(static_cast<std::size_t>(dim) * n, -1);
    for (int v = 0; v < dim; ++v) {
        for (std::size_t a = 0; a < n; ++a) {
            MultiIndex k = basis_.exponent(a);
            if (k[v] == 0) continue;
            k[v] -= 1;
            deriv_[v * n + a] = basis_.index_of(k);
        }
    }
}

TruncatedAlgebra::Poly TruncatedAlgebra::constant(Complex c) const {
    Poly p = zero();
    p(0) = c;
    return p;
}

TruncatedAlgebra::Poly TruncatedAlgebra::variable(int i) const {
    Poly p = zero();
    MultiIndex k(static_cast<std::size_t>(dim_), 0);
    k[i] = 1;
    p(basis_.index_of(k)) = 1.0;
    return p;
}

TruncatedAlgebra::Poly TruncatedAlgebra::multiply(const Poly& a, const Poly& b) const {
    const std::size_t n = size();
    Poly out = zero();
    std::vector<std::size_t> nzb;
    nzb.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (b(static_cast<Eigen::Index>(j)) != Complex(0.0)) nzb.push_back(j);
    }
    if (nzb.empty()) return out;
    const int min_deg_b = basis_.degree(nzb.front());
    for (std::size_t i = 0; i < n; ++i) {
        const Complex ai = a(static_cast<Eigen::Index>(i));
        if (ai == Complex(0.0)) continue;
        if (basis_.degree(i) + min_deg_b > max_order_) break;
        const long* row = &mul_[i * n];
        for (std::size_t j : nzb) {
            const long idx = row[j];
            // nzb is graded, so every later entry is truncated as well
            if (idx < 0) break;
            out(idx) += ai * b(static_cast<Eigen::Index>(j));
        }
    }
    return out;
}

TruncatedAlgebra::Poly TruncatedAlgebra::derivative(const Poly& a, int i) const {
    const std::size_t n = size();
    Poly out = zero();
    for (std::size_t j = 0; j < n; ++j) {
        const long idx = deriv_[static_cast<std::size_t>(i) * n + j];
        if (idx < 0) continue;
        const Complex aj = a(static_cast<Eigen::Index>(j));
        if (aj == Complex(0.0)) continue;
        out(idx) += aj * static_cast<double>(basis_.exponent(j)[i]);
    }
    return out;
}

std::vector<TruncatedAlgebra::Poly> TruncatedAlgebra::from_map(const ComplexMap& map) const {
    if (map.input_dim() != dim_) throw ShapeError("TruncatedAlgebra::from_map: dimension mismatch");
    std::vector<Poly> out(static_cast<std::size_t>(map.output_dim()), zero());
    const auto& b = map.basis();
    for (std::size_t i = 0; i < b.size(); ++i) {
        const long idx = basis_.index_of(b.exponent(i));
        if (idx < 0) continue;
        for (int r = 0; r < map.output_dim(); ++r) {
            out[r](idx) = map.coefficients()(r, static_cast<Eigen::Index>(i));
        }
    }
    return out;
}

ComplexMap TruncatedAlgebra::to_map(const std::vector<Poly>& polys, int lo, int hi) const {
    MonomialBasis target(dim_, lo, hi);
    Eigen::MatrixXcd coeffs =
        Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(polys.size()), static_cast<Eigen::Index>(target.size()));
    for (std::size_t i = 0; i < target.size(); ++i) {
        const long idx = basis_.index_of(target.exponent(i));
        if (idx < 0) continue;
        for (std::size_t r = 0; r < polys.size(); ++r) {
            coeffs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = polys[r](idx);
        }
    }
    return ComplexMap(std::move(target), std::move(coeffs));
}

std::vector<TruncatedAlgebra::Poly> TruncatedAlgebra::compose(const ComplexMap& outer,
                                                              const std::vector<Poly>& inner) const {
    if (static_cast<int>(inner.size()) != outer.input_dim()) {
        throw ShapeError("compose: outer input dimension does not match inner output dimension");
    }
    const int outer_dim = outer.input_dim();
    MonomialBasis powers_basis(outer_dim, 0, outer.basis().order_hi());
    // Lowest degree present in each inner component bounds which powers survive truncation.
    int min_inner_degree = max_order_ + 1;
    for (const auto& p : inner) {
        for (Eigen::Index j = 0; j < p.size(); ++j) {
            if (p(j) != Complex(0.0)) {
                min_inner_degree = std::min(min_inner_degree, basis_.degree(static_cast<std::size_t>(j)));
                break;
            }
        }
    }
    std::vector<Poly> powers(powers_basis.size());
    powers[0] = constant(1.0);
    for (std::size_t idx = 1; idx < powers_basis.size(); ++idx) {
        const int deg = powers_basis.degree(idx);
        if (min_inner_degree >= 1 && deg * min_inner_degree > max_order_) {
            powers[idx] = zero();
            continue;
        }
        MultiIndex k = powers_basis.exponent(idx);
        int v = 0;
        while (k[v] == 0) ++v;
        k[v] -= 1;
        const long prev = powers_basis.index_of(k);
        powers[idx] = multiply(powers[prev], inner[v]);
    }
    std::vector<Poly> out(static_cast<std::size_t>(outer.output_dim()), zero());
    const auto& ob = outer.basis();
    for (std::size_t i = 0; i < ob.size(); ++i) {
        const long pidx = powers_basis.index_of(ob.exponent(i));
        const Poly& pw = powers[pidx];
        for (int r = 0; r < outer.output_dim(); ++r) {
            const Complex c = outer.coefficients()(r, static_cast<Eigen::Index>(i));
            if (c != Complex(0.0)) out[r] += c * pw;
        }
    }
    return out;
}

template <>
PolynomialMap<Complex> compose(const PolynomialMap<Complex>& outer, const PolynomialMap<Complex>& inner,
                               int truncation_order) {
    if (outer.input_dim() != inner.output_dim()) {
        std::ostringstream msg;
        msg << "compose: outer expects " << outer.input_dim() << " inputs, inner produces " << inner.output_dim();
        throw ShapeError(msg.str());
    }
    if (truncation_order < 1) throw ConfigError("compose: truncation order must be >= 1");
    TruncatedAlgebra algebra(inner.input_dim(), truncation_order);
    auto inner_polys = algebra.from_map(inner);
    auto result = algebra.compose(outer, inner_polys);
    return algebra.to_map(result, 1, truncation_order);
}

template <>
PolynomialMap<double> compose(const PolynomialMap<double>& outer, const PolynomialMap<double>& inner,
                              int truncation_order) {
    auto c = compose<Complex>(outer.to_complex(), inner.to_complex(), truncation_order);
    return PolynomialMap<double>(c.basis(), c.coefficients().real());
}

}  // namespace fastssm
