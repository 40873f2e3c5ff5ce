#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fastssm/error.hpp"

namespace fastssm {

using Complex = std::complex<double>;
using MultiIndex = std::vector<int>;

/// Name of the monomial ordering convention, recorded in serialized models.
inline constexpr const char* kMonomialOrdering = "graded-lex-desc";

/// Ordered set of d-variate monomials with total degree in [order_lo, order_hi].
///
/// Ordering is graded (lower total degree first); inside one degree the
/// exponent vectors are sorted lexicographically descending, so variable 1
/// dominates. For d=2, orders 1..3 this gives
/// x1, x2, x1^2, x1 x2, x2^2, x1^3, x1^2 x2, x1 x2^2, x2^3.
class MonomialBasis {
public:
    MonomialBasis(int dim, int order_lo, int order_hi);

    int dim() const { return dim_; }
    int order_lo() const { return lo_; }
    int order_hi() const { return hi_; }
    std::size_t size() const { return exps_.size(); }

    const MultiIndex& exponent(std::size_t i) const { return exps_[i]; }
    const std::vector<MultiIndex>& exponents() const { return exps_; }
    int degree(std::size_t i) const { return degrees_[i]; }

    /// Index of a multi-index, or -1 if it is not part of the basis.
    long index_of(const MultiIndex& k) const;

    /// Column range [first, last) holding the monomials of one total degree.
    std::pair<std::size_t, std::size_t> degree_range(int degree) const;

    bool operator==(const MonomialBasis& other) const {
        return dim_ == other.dim_ && lo_ == other.lo_ && hi_ == other.hi_;
    }

private:
    int dim_;
    int lo_;
    int hi_;
    std::vector<MultiIndex> exps_;
    std::vector<int> degrees_;
    std::vector<std::size_t> degree_start_;  // indexed by degree - lo, plus end
};

/// binomial(i + d - 1, d - 1): number of d-variate monomials of degree i.
std::size_t monomial_count(int dim, int degree);

MonomialBasis enumerate_monomials(int dim, int order_lo, int order_hi);

/// Rows = monomials, columns = points. `points` holds one state vector per column.
Eigen::MatrixXd eval_monomials(const MonomialBasis& basis, const Eigen::MatrixXd& points);
Eigen::MatrixXcd eval_monomials(const MonomialBasis& basis, const Eigen::MatrixXcd& points);

/// Polynomial map  x -> C * x^{lo:hi}, one output per row of C.
template <typename Scalar>
class PolynomialMap {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    PolynomialMap(MonomialBasis basis, Matrix coefficients);

    /// All-zero map with `outputs` rows.
    static PolynomialMap zero(MonomialBasis basis, int outputs);

    const MonomialBasis& basis() const { return basis_; }
    const Matrix& coefficients() const { return coeffs_; }
    Matrix& coefficients() { return coeffs_; }

    int input_dim() const { return basis_.dim(); }
    int output_dim() const { return static_cast<int>(coeffs_.rows()); }

    /// Columns of the coefficient matrix belonging to one total degree.
    Matrix block(int degree) const;

    Matrix eval(const Matrix& points) const;
    Vector eval(const Vector& point) const;

    /// Exact analytic Jacobian (outputs x inputs).
    Matrix jacobian(const Vector& point) const;

    /// Same map expressed over orders [lo, hi]; new columns are zero and
    /// dropped columns must be discarded by the caller's intent.
    PolynomialMap rebase(int lo, int hi) const;

    PolynomialMap<Complex> to_complex() const;

private:
    MonomialBasis basis_;
    Matrix coeffs_;
};

using RealMap = PolynomialMap<double>;
using ComplexMap = PolynomialMap<Complex>;

struct FitOptions {
    double rcond = 1e-12;        // relative singular-value cutoff
    bool scale_features = false;  // normalize each feature row by its max |value|
};

template <typename Scalar>
struct FitResult {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> coefficients;
    Eigen::VectorXd singular_values;
    long rank = 0;
    double residual = 0.0;           // Frobenius norm of targets - C * features
    double relative_residual = 0.0;  // residual / ||targets||_F (0 if targets vanish)
    Warnings warnings;
};

/// Least-squares C minimizing ||targets - C * features||_F through an SVD
/// pseudo-inverse. One column per sample in both matrices.
FitResult<double> fit_polynomial(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& features,
                                 const FitOptions& options = {});
FitResult<Complex> fit_polynomial(const Eigen::MatrixXcd& targets, const Eigen::MatrixXcd& features,
                                  const FitOptions& options = {});

/// outer(inner(x)) with every monomial above `truncation_order` discarded.
/// The result is over orders 1..truncation_order of inner's input.
template <typename Scalar>
PolynomialMap<Scalar> compose(const PolynomialMap<Scalar>& outer, const PolynomialMap<Scalar>& inner,
                              int truncation_order);

template <typename Scalar>
typename PolynomialMap<Scalar>::Matrix jacobian(const PolynomialMap<Scalar>& map,
                                                const typename PolynomialMap<Scalar>::Vector& point) {
    return map.jacobian(point);
}

/// Truncated polynomial algebra in d variables over orders 0..max_order.
///
/// Polynomials are dense coefficient vectors over MonomialBasis(d, 0, max_order)
/// (index 0 is the constant). Products and derivatives use precomputed index
/// tables, which makes repeated composition cheap at the sizes used here.
class TruncatedAlgebra {
public:
    using Poly = Eigen::VectorXcd;

    TruncatedAlgebra(int dim, int max_order);

    int dim() const { return dim_; }
    int max_order() const { return max_order_; }
    std::size_t size() const { return basis_.size(); }
    const MonomialBasis& basis() const { return basis_; }

    Poly zero() const { return Poly::Zero(static_cast<Eigen::Index>(size())); }
    Poly constant(Complex c) const;
    Poly variable(int i) const;

    /// Truncated product.
    Poly multiply(const Poly& a, const Poly& b) const;
    /// Partial derivative in variable i (degree drops by one, so no truncation loss).
    Poly derivative(const Poly& a, int i) const;

    /// Embed map coefficients (basis lo..hi, lo >= 1) as one Poly per output row.
    std::vector<Poly> from_map(const ComplexMap& map) const;
    /// Restrict polys to orders lo..hi and pack them into a map.
    ComplexMap to_map(const std::vector<Poly>& polys, int lo, int hi) const;

    /// Evaluate `outer` at the polynomial vector `inner` (size outer.input_dim()).
    std::vector<Poly> compose(const ComplexMap& outer, const std::vector<Poly>& inner) const;

private:
    int dim_;
    int max_order_;
    MonomialBasis basis_;
    // mul_[a * size + b] = index of monomial a*b, or -1 when above max_order.
    std::vector<long> mul_;
    // deriv_[i * size + a] = index of d/dx_i of monomial a (or -1 if it vanishes).
    std::vector<long> deriv_;
};

}  // namespace fastssm
