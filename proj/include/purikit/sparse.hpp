#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "purikit/tensor.hpp"

namespace purikit {

// Convolutional dictionary: atom_count kernels of size
// filter_size x filter_size x channels, each with l2 norm at most 1.
struct Dictionary {
    int atom_count = 0;
    int filter_size = 0;
    int channels = 0;
    std::vector<Tensor> atoms;

    void validate() const;
    // Largest atom l2 norm; the learning constraint keeps this <= 1.
    double max_atom_norm() const;
};

// One spatial map per atom, each the size of the coded image. Coefficients
// code all channels jointly. Sparsity is a property of the solve, not an
// enforced invariant.
struct CoefficientMaps {
    std::vector<Grid> maps;

    double l1_norm() const;
    // Fraction of entries with magnitude below eps.
    double sparsity(double eps = 1e-8) const;
};

struct AdmmConfig {
    double rho = 0.0;  // <= 0 selects the default 10 * lambda_l1 + 0.1
    int max_iters = 200;
    double tol_primal = 1e-4;
    double tol_dual = 1e-4;
    // Residual balancing: double/halve rho when one normalized residual
    // exceeds the other tenfold.
    bool rho_adapt = true;

    void validate() const;
};

// Non-convergence is reported here rather than thrown; purification must
// always emit an image.
struct AdmmDiagnostics {
    bool converged = false;
    int iterations = 0;
    double final_objective = 0.0;
    double final_primal = 0.0;  // normalized primal residual at termination
    double final_dual = 0.0;    // normalized dual residual at termination
    std::vector<double> objective;
    std::vector<double> primal_residual;
    std::vector<double> dual_residual;
};

// Elementwise prox of the l1 norm: sign(v) * max(|v| - kappa, 0).
std::vector<double> soft_threshold(const std::vector<double>& v, double kappa);
void soft_threshold_inplace(std::vector<double>& v, double kappa);

// Convolutional basis pursuit denoising for a fixed dictionary:
//   min over maps  1/2 ||sum_m d_m * r_m - x||^2 + lambda * sum_m ||r_m||_1
// ADMM with a frequency-domain solve of the quadratic subproblem
// (Sherman-Morrison over the atoms, iterated across channels) and
// soft-thresholding for the l1 subproblem. The returned maps are the
// thresholded iterate, so exact zeros stay exact.
std::pair<CoefficientMaps, AdmmDiagnostics> cbpdn(const Dictionary& dict, const Tensor& x,
                                                  double lambda_l1, const AdmmConfig& cfg);

// Smallest lambda for which the all-zero maps are optimal:
// max_m ||correlate(d_m, x)||_inf.
double cbpdn_lambda_max(const Dictionary& dict, const Tensor& x);

// Objective value of the CBPDN functional at the given maps.
double cbpdn_objective(const Dictionary& dict, const CoefficientMaps& maps, const Tensor& x,
                       double lambda_l1);

struct CdlDiagnostics {
    std::vector<double> objective;  // functional after each outer iteration
};

// Convolutional dictionary learning by alternating minimization: a sparse
// coding pass over all images (warm-started CBPDN) followed by a consensus
// ADMM dictionary update that projects every atom onto its spatial support
// and the unit l2 ball. Atoms are initialized from seeded unit-normalized
// Gaussian noise. The norm constraint holds after every outer iteration.
Dictionary learn_dictionary(const std::vector<Tensor>& images, int atom_count, int filter_size,
                            double lambda_l1, const AdmmConfig& cfg, std::uint64_t seed,
                            int outer_iters = 20, CdlDiagnostics* diag = nullptr);

// sum_m circular_convolve(maps.r_m, dict.d_m), channel by channel.
Tensor reconstruct(const Dictionary& dict, const CoefficientMaps& maps);

}  // namespace purikit
