#include "purikit/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace purikit {

Matrix matmul(const Matrix& x, const Matrix& y) {
    if (x.cols != y.rows) throw std::invalid_argument("matmul: inner dimensions disagree");
    Matrix out(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) {
            const double v = x.at(i, k);
            if (v == 0.0) continue;
            for (int j = 0; j < y.cols; ++j) out.at(i, j) += v * y.at(k, j);
        }
    return out;
}

std::vector<double> matvec(const Matrix& m, const std::vector<double>& v) {
    if (static_cast<std::size_t>(m.cols) != v.size()) throw std::invalid_argument("matvec: dimension mismatch");
    std::vector<double> out(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double acc = 0.0;
        for (int j = 0; j < m.cols; ++j) acc += m.at(i, j) * v[j];
        out[i] = acc;
    }
    return out;
}

double quadratic_form(const Matrix& m, const std::vector<double>& v) {
    const std::vector<double> mv = matvec(m, v);
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) acc += v[i] * mv[i];
    return acc;
}

double frobenius_norm(const Matrix& m) {
    double acc = 0.0;
    for (double x : m.a) acc += x * x;
    return std::sqrt(acc);
}

bool cholesky_lower(const Matrix& sym, Matrix& lower) {
    const int n = sym.rows;
    if (sym.cols != n) throw std::invalid_argument("cholesky: matrix not square");
    double max_diag = 0.0;
    for (int i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(sym.at(i, i)));
    const double floor = max_diag * 1e-14;

    lower = Matrix(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double acc = sym.at(i, j);
            for (int k = 0; k < j; ++k) acc -= lower.at(i, k) * lower.at(j, k);
            if (i == j) {
                if (!(acc > floor)) return false;
                lower.at(i, i) = std::sqrt(acc);
            } else {
                lower.at(i, j) = acc / lower.at(j, j);
            }
        }
    }
    return true;
}

Matrix cholesky_inverse(const Matrix& sym, bool& ok) {
    const int n = sym.rows;
    Matrix lower;
    ok = cholesky_lower(sym, lower);
    if (!ok) return Matrix(n, n);

    // Invert column by column: solve L L^T x = e_i.
    Matrix inv(n, n);
    std::vector<double> y(n);
    for (int col = 0; col < n; ++col) {
        for (int i = 0; i < n; ++i) {
            double acc = (i == col) ? 1.0 : 0.0;
            for (int k = 0; k < i; ++k) acc -= lower.at(i, k) * y[k];
            y[i] = acc / lower.at(i, i);
        }
        for (int i = n - 1; i >= 0; --i) {
            double acc = y[i];
            for (int k = i + 1; k < n; ++k) acc -= lower.at(k, i) * inv.at(k, col);
            inv.at(i, col) = acc / lower.at(i, i);
        }
    }
    // Symmetrize to wash out rounding skew.
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double v = 0.5 * (inv.at(i, j) + inv.at(j, i));
            inv.at(i, j) = v;
            inv.at(j, i) = v;
        }
    return inv;
}

void jacobi_eigh(const Matrix& sym, std::vector<double>& eigenvalues, Matrix& eigenvectors) {
    const int n = sym.rows;
    if (sym.cols != n) throw std::invalid_argument("jacobi_eigh: matrix not square");
    Matrix a = sym;
    Matrix v = Matrix::identity(n);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a.at(i, j) * a.at(i, j);
        if (off < 1e-28) break;

        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (apq == 0.0) continue;
                const double app = a.at(p, p), aqq = a.at(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (int k = 0; k < n; ++k) {
                    const double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    eigenvalues.assign(n, 0.0);
    for (int i = 0; i < n; ++i) eigenvalues[i] = a.at(i, i);

    // Sort ascending, carrying eigenvector columns along.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (eigenvalues[order[j]] < eigenvalues[order[i]]) std::swap(order[i], order[j]);

    std::vector<double> sorted_vals(n);
    Matrix sorted_vecs(n, n);
    for (int i = 0; i < n; ++i) {
        sorted_vals[i] = eigenvalues[order[i]];
        for (int k = 0; k < n; ++k) sorted_vecs.at(k, i) = v.at(k, order[i]);
    }
    eigenvalues = std::move(sorted_vals);
    eigenvectors = std::move(sorted_vecs);
}

Matrix sym_pseudo_inverse(const std::vector<double>& eigenvalues, const Matrix& eigenvectors, double cutoff) {
    const int n = eigenvectors.rows;
    Matrix out(n, n);
    for (int e = 0; e < n; ++e) {
        if (!(eigenvalues[e] > cutoff)) continue;
        const double inv = 1.0 / eigenvalues[e];
        for (int i = 0; i < n; ++i) {
            const double vi = eigenvectors.at(i, e) * inv;
            if (vi == 0.0) continue;
            for (int j = 0; j < n; ++j) out.at(i, j) += vi * eigenvectors.at(j, e);
        }
    }
    return out;
}

bool hermitian_cholesky(std::vector<std::complex<double>>& a, int n) {
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            std::complex<double> acc = a[static_cast<std::size_t>(i) * n + j];
            for (int k = 0; k < j; ++k)
                acc -= a[static_cast<std::size_t>(i) * n + k] * std::conj(a[static_cast<std::size_t>(j) * n + k]);
            if (i == j) {
                const double d = acc.real();
                if (!(d > 0.0)) return false;
                a[static_cast<std::size_t>(i) * n + i] = {std::sqrt(d), 0.0};
            } else {
                a[static_cast<std::size_t>(i) * n + j] = acc / a[static_cast<std::size_t>(j) * n + j];
            }
        }
        for (int j = i + 1; j < n; ++j) a[static_cast<std::size_t>(i) * n + j] = {0.0, 0.0};
    }
    return true;
}

void hermitian_cholesky_solve(const std::vector<std::complex<double>>& chol, int n, std::complex<double>* rhs) {
    // L y = b
    for (int i = 0; i < n; ++i) {
        std::complex<double> acc = rhs[i];
        for (int k = 0; k < i; ++k) acc -= chol[static_cast<std::size_t>(i) * n + k] * rhs[k];
        rhs[i] = acc / chol[static_cast<std::size_t>(i) * n + i];
    }
    // L^H x = y
    for (int i = n - 1; i >= 0; --i) {
        std::complex<double> acc = rhs[i];
        for (int k = i + 1; k < n; ++k) acc -= std::conj(chol[static_cast<std::size_t>(k) * n + i]) * rhs[k];
        rhs[i] = acc / chol[static_cast<std::size_t>(i) * n + i];
    }
}

}  // namespace purikit
