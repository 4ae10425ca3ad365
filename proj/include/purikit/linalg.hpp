#pragma once

#include <complex>
#include <vector>

#include <cstddef>

namespace purikit {

// Small dense row-major matrix. Everything in the pipeline that needs one
// is at most latent-dimension (16) or atom-count (16) sized, so the solvers
// below are plain O(n^3) routines with no blocking.
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

Matrix matmul(const Matrix& x, const Matrix& y);
std::vector<double> matvec(const Matrix& m, const std::vector<double>& v);
// v^T M v for square M.
double quadratic_form(const Matrix& m, const std::vector<double>& v);
double frobenius_norm(const Matrix& m);

// Lower Cholesky factor of a symmetric positive definite matrix. Returns
// false when a pivot drops below a tiny relative floor.
bool cholesky_lower(const Matrix& sym, Matrix& lower);
// Inverse via the Cholesky factor; ok=false when factorization fails.
Matrix cholesky_inverse(const Matrix& sym, bool& ok);

// Cyclic Jacobi eigendecomposition of a symmetric matrix:
// sym = V * diag(eigenvalues) * V^T, eigenvalues ascending.
void jacobi_eigh(const Matrix& sym, std::vector<double>& eigenvalues, Matrix& eigenvectors);

// Moore-Penrose pseudo-inverse of a symmetric PSD matrix from its
// eigendecomposition; eigenvalues <= cutoff are treated as zero.
Matrix sym_pseudo_inverse(const std::vector<double>& eigenvalues, const Matrix& eigenvectors, double cutoff);

// In-place Cholesky of a Hermitian positive definite matrix (row-major,
// n x n); then forward/back substitution for one right-hand side.
bool hermitian_cholesky(std::vector<std::complex<double>>& a, int n);
void hermitian_cholesky_solve(const std::vector<std::complex<double>>& chol, int n, std::complex<double>* rhs);

}  // namespace purikit
