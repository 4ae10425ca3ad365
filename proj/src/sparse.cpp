#include "purikit/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "purikit/fft.hpp"
#include "purikit/linalg.hpp"
#include "purikit/parallel.hpp"
#include "purikit/rng.hpp"

namespace purikit {

namespace {

double frob(const std::vector<Grid>& grids) {
    double acc = 0.0;
    for (const auto& g : grids)
        for (double v : g.v) acc += v * v;
    return std::sqrt(acc);
}

double frob_diff(const std::vector<Grid>& a, const std::vector<Grid>& b) {
    double acc = 0.0;
    for (std::size_t m = 0; m < a.size(); ++m)
        for (std::size_t i = 0; i < a[m].v.size(); ++i) {
            const double d = a[m].v[i] - b[m].v[i];
            acc += d * d;
        }
    return std::sqrt(acc);
}

// Frequency spectra of the zero-padded atoms, indexed [m * channels + c].
std::vector<Spectrum> atom_spectra(const Dictionary& dict, const FrequencyPlan& plan) {
    std::vector<Spectrum> dhat(static_cast<std::size_t>(dict.atom_count) * dict.channels);
    Grid padded(plan.height(), plan.width());
    for (int m = 0; m < dict.atom_count; ++m) {
        for (int c = 0; c < dict.channels; ++c) {
            std::fill(padded.v.begin(), padded.v.end(), 0.0);
            for (int r = 0; r < dict.filter_size; ++r)
                for (int q = 0; q < dict.filter_size; ++q) padded.at(r, q) = dict.atoms[m].at(r, q, c);
            dhat[static_cast<std::size_t>(m) * dict.channels + c] = plan.forward(padded);
        }
    }
    return dhat;
}

std::vector<Spectrum> channel_spectra(const Tensor& x, const FrequencyPlan& plan) {
    std::vector<Spectrum> shat(x.channels);
    Grid channel(x.height, x.width);
    for (int c = 0; c < x.channels; ++c) {
        for (int y = 0; y < x.height; ++y)
            for (int q = 0; q < x.width; ++q) channel.at(y, q) = x.at(y, q, c);
        shat[c] = plan.forward(channel);
    }
    return shat;
}

// Solves (rho I + sum_c a_c a_c^H) out = rhs for one frequency bin by
// iterated Sherman-Morrison over the rank-one channel terms.
void solve_rank_updates(double rho, const std::vector<std::vector<std::complex<double>>>& a,
                        std::vector<std::complex<double>>& out,
                        std::vector<std::vector<std::complex<double>>>& z) {
    const std::size_t channels = a.size();
    const std::size_t m = out.size();
    const double inv_rho = 1.0 / rho;
    for (auto& v : out) v *= inv_rho;
    for (std::size_t c = 0; c < channels; ++c) {
        z[c] = a[c];
        for (auto& v : z[c]) v *= inv_rho;
    }
    for (std::size_t j = 0; j < channels; ++j) {
        std::complex<double> denom = {1.0, 0.0};
        for (std::size_t i = 0; i < m; ++i) denom += std::conj(a[j][i]) * z[j][i];
        std::complex<double> proj = {0.0, 0.0};
        for (std::size_t i = 0; i < m; ++i) proj += std::conj(a[j][i]) * out[i];
        proj /= denom;
        for (std::size_t i = 0; i < m; ++i) out[i] -= proj * z[j][i];
        for (std::size_t k = j + 1; k < channels; ++k) {
            std::complex<double> pk = {0.0, 0.0};
            for (std::size_t i = 0; i < m; ++i) pk += std::conj(a[j][i]) * z[k][i];
            pk /= denom;
            for (std::size_t i = 0; i < m; ++i) z[k][i] -= pk * z[j][i];
        }
    }
}

// Data fidelity 1/2 ||D r - x||^2 evaluated in the frequency domain via
// Parseval (forward transform is unnormalized).
double data_term_freq(const std::vector<Spectrum>& dhat, const std::vector<Spectrum>& rhat,
                      const std::vector<Spectrum>& shat, int channels) {
    const std::size_t bins = shat[0].size();
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
        for (std::size_t t = 0; t < bins; ++t) {
            std::complex<double> sum = {0.0, 0.0};
            for (std::size_t m = 0; m < rhat.size(); ++m)
                sum += dhat[m * channels + c][t] * rhat[m][t];
            sum -= shat[c][t];
            acc += std::norm(sum);
        }
    }
    return 0.5 * acc / static_cast<double>(bins);
}

double l1_of(const std::vector<Grid>& grids) {
    double acc = 0.0;
    for (const auto& g : grids)
        for (double v : g.v) acc += std::abs(v);
    return acc;
}

// Shared ADMM core; y and u persist across calls for warm starts.
AdmmDiagnostics cbpdn_core(const FrequencyPlan& plan, const std::vector<Spectrum>& dhat,
                           const std::vector<Spectrum>& shat, int channels, double lambda,
                           const AdmmConfig& cfg, std::vector<Grid>& y, std::vector<Grid>& u) {
    const std::size_t atom_count = dhat.size() / channels;
    const std::size_t bins = plan.bins();
    double rho = cfg.rho > 0.0 ? cfg.rho : 10.0 * lambda + 0.1;

    // D^H s per atom; fixed across iterations.
    std::vector<Spectrum> bhat(atom_count, Spectrum(bins, {0.0, 0.0}));
    for (std::size_t m = 0; m < atom_count; ++m)
        for (int c = 0; c < channels; ++c) {
            const Spectrum& d = dhat[m * channels + c];
            const Spectrum& s = shat[c];
            for (std::size_t t = 0; t < bins; ++t) bhat[m][t] += std::conj(d[t]) * s[t];
        }

    AdmmDiagnostics diag;
    std::vector<Grid> x(atom_count, Grid(plan.height(), plan.width()));
    std::vector<Spectrum> xhat(atom_count, Spectrum(bins));
    std::vector<Grid> y_prev = y;

    std::vector<std::vector<std::complex<double>>> a(channels,
                                                     std::vector<std::complex<double>>(atom_count));
    std::vector<std::vector<std::complex<double>>> z(channels,
                                                     std::vector<std::complex<double>>(atom_count));
    std::vector<std::complex<double>> rhs(atom_count);

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        // Quadratic subproblem: per-bin Sherman-Morrison solve of
        // (rho I + D^H D) xhat = D^H s + rho (yhat - uhat).
        std::vector<Spectrum> vhat(atom_count);
        {
            Grid diff(plan.height(), plan.width());
            for (std::size_t m = 0; m < atom_count; ++m) {
                for (std::size_t i = 0; i < diff.v.size(); ++i) diff.v[i] = y[m].v[i] - u[m].v[i];
                vhat[m] = plan.forward(diff);
            }
        }
        for (std::size_t t = 0; t < bins; ++t) {
            for (int c = 0; c < channels; ++c)
                for (std::size_t m = 0; m < atom_count; ++m)
                    a[c][m] = std::conj(dhat[m * channels + c][t]);
            for (std::size_t m = 0; m < atom_count; ++m) rhs[m] = bhat[m][t] + rho * vhat[m][t];
            solve_rank_updates(rho, a, rhs, z);
            for (std::size_t m = 0; m < atom_count; ++m) xhat[m][t] = rhs[m];
        }
        for (std::size_t m = 0; m < atom_count; ++m) x[m] = plan.inverse_real(xhat[m]);

        // l1 subproblem and dual update.
        y_prev = y;
        const double kappa = lambda / rho;
        for (std::size_t m = 0; m < atom_count; ++m)
            for (std::size_t i = 0; i < x[m].v.size(); ++i) {
                const double v = x[m].v[i] + u[m].v[i];
                const double mag = std::abs(v) - kappa;
                y[m].v[i] = mag > 0.0 ? (v > 0.0 ? mag : -mag) : 0.0;
                u[m].v[i] += x[m].v[i] - y[m].v[i];
            }

        // Residuals normalized by the iterate scales; when a scale vanishes
        // (for example u = 0 with lambda = 0) the unnormalized residual is
        // used instead so the adaptation cannot spiral.
        const double r_norm = frob_diff(x, y);
        const double s_norm = rho * frob_diff(y, y_prev);
        const double x_mag = frob(x), y_mag = frob(y), u_mag = rho * frob(u);
        const double rscale = std::max(x_mag, y_mag);
        const double sscale = u_mag;
        const double rn = rscale > 1e-8 ? r_norm / rscale : r_norm;
        const double sn = sscale > 1e-8 ? s_norm / sscale : s_norm;

        diag.objective.push_back(data_term_freq(dhat, xhat, shat, channels) + lambda * l1_of(y));
        diag.primal_residual.push_back(rn);
        diag.dual_residual.push_back(sn);
        diag.iterations = iter + 1;
        diag.final_primal = rn;
        diag.final_dual = sn;

        if (rn <= cfg.tol_primal && sn <= cfg.tol_dual) {
            diag.converged = true;
            break;
        }
        if (cfg.rho_adapt) {
            if (rn > 10.0 * sn && rho < 1e8) {
                rho *= 2.0;
                for (auto& g : u)
                    for (double& v : g.v) v *= 0.5;
            } else if (sn > 10.0 * rn && rho > 1e-8) {
                rho *= 0.5;
                for (auto& g : u)
                    for (double& v : g.v) v *= 2.0;
            }
        }
    }

    // Exact functional at the returned (thresholded) iterate.
    std::vector<Spectrum> yhat(atom_count);
    for (std::size_t m = 0; m < atom_count; ++m) yhat[m] = plan.forward(y[m]);
    diag.final_objective = data_term_freq(dhat, yhat, shat, channels) + lambda * l1_of(y);
    if (!diag.objective.empty()) diag.objective.back() = diag.final_objective;
    return diag;
}

void check_dict_fits(const Dictionary& dict, const Tensor& x) {
    if (dict.channels != x.channels)
        throw std::invalid_argument("cbpdn: dictionary has " + std::to_string(dict.channels) +
                                    " channels but image has " + std::to_string(x.channels));
    if (dict.filter_size > x.height || dict.filter_size > x.width)
        throw std::invalid_argument("cbpdn: atoms larger than the image");
}

}  // namespace

void Dictionary::validate() const {
    if (atom_count < 1) throw std::invalid_argument("dictionary: atom_count must be positive");
    if (static_cast<int>(atoms.size()) != atom_count)
        throw std::invalid_argument("dictionary: atom list does not match atom_count");
    for (const auto& a : atoms)
        if (a.height != filter_size || a.width != filter_size || a.channels != channels)
            throw std::invalid_argument("dictionary: atom shape mismatch");
}

double Dictionary::max_atom_norm() const {
    double worst = 0.0;
    for (const auto& a : atoms) {
        double acc = 0.0;
        for (double v : a.data) acc += v * v;
        worst = std::max(worst, std::sqrt(acc));
    }
    return worst;
}

double CoefficientMaps::l1_norm() const { return l1_of(maps); }

double CoefficientMaps::sparsity(double eps) const {
    std::size_t zeros = 0, total = 0;
    for (const auto& g : maps) {
        total += g.v.size();
        for (double v : g.v)
            if (std::abs(v) < eps) ++zeros;
    }
    return total == 0 ? 1.0 : static_cast<double>(zeros) / static_cast<double>(total);
}

void AdmmConfig::validate() const {
    if (max_iters < 1) throw std::invalid_argument("admm: max_iters must be at least 1");
    if (!(tol_primal > 0.0) || !(tol_dual > 0.0))
        throw std::invalid_argument("admm: tolerances must be positive");
}

std::vector<double> soft_threshold(const std::vector<double>& v, double kappa) {
    std::vector<double> out = v;
    soft_threshold_inplace(out, kappa);
    return out;
}

void soft_threshold_inplace(std::vector<double>& v, double kappa) {
    if (kappa < 0.0) throw std::invalid_argument("soft_threshold: kappa must be nonnegative");
    for (double& x : v) {
        const double mag = std::abs(x) - kappa;
        x = mag > 0.0 ? (x > 0.0 ? mag : -mag) : 0.0;
    }
}

std::pair<CoefficientMaps, AdmmDiagnostics> cbpdn(const Dictionary& dict, const Tensor& x,
                                                  double lambda_l1, const AdmmConfig& cfg) {
    dict.validate();
    cfg.validate();
    check_dict_fits(dict, x);
    if (lambda_l1 < 0.0) throw std::invalid_argument("cbpdn: lambda_l1 must be nonnegative");

    FrequencyPlan plan(x.height, x.width);
    const std::vector<Spectrum> dhat = atom_spectra(dict, plan);
    const std::vector<Spectrum> shat = channel_spectra(x, plan);

    std::vector<Grid> y(dict.atom_count, Grid(x.height, x.width));
    std::vector<Grid> u(dict.atom_count, Grid(x.height, x.width));
    AdmmDiagnostics diag = cbpdn_core(plan, dhat, shat, x.channels, lambda_l1, cfg, y, u);

    CoefficientMaps maps;
    maps.maps = std::move(y);
    return {std::move(maps), std::move(diag)};
}

double cbpdn_lambda_max(const Dictionary& dict, const Tensor& x) {
    dict.validate();
    check_dict_fits(dict, x);
    FrequencyPlan plan(x.height, x.width);
    const std::vector<Spectrum> dhat = atom_spectra(dict, plan);
    const std::vector<Spectrum> shat = channel_spectra(x, plan);
    double worst = 0.0;
    for (int m = 0; m < dict.atom_count; ++m) {
        Spectrum corr(plan.bins(), {0.0, 0.0});
        for (int c = 0; c < dict.channels; ++c) {
            const Spectrum& d = dhat[static_cast<std::size_t>(m) * dict.channels + c];
            for (std::size_t t = 0; t < corr.size(); ++t) corr[t] += std::conj(d[t]) * shat[c][t];
        }
        const Grid spatial = plan.inverse_real(corr);
        for (double v : spatial.v) worst = std::max(worst, std::abs(v));
    }
    return worst;
}

double cbpdn_objective(const Dictionary& dict, const CoefficientMaps& maps, const Tensor& x,
                       double lambda_l1) {
    const Tensor recon = reconstruct(dict, maps);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double d = recon.data[i] - x.data[i];
        acc += d * d;
    }
    return 0.5 * acc + lambda_l1 * maps.l1_norm();
}

Tensor reconstruct(const Dictionary& dict, const CoefficientMaps& maps) {
    dict.validate();
    if (static_cast<int>(maps.maps.size()) != dict.atom_count)
        throw std::invalid_argument("reconstruct: map count does not match dictionary");
    const int h = maps.maps[0].rows, w = maps.maps[0].cols;
    for (const auto& g : maps.maps)
        if (g.rows != h || g.cols != w) throw std::invalid_argument("reconstruct: map shapes disagree");
    if (dict.filter_size > h || dict.filter_size > w)
        throw std::invalid_argument("reconstruct: atoms larger than the maps");

    FrequencyPlan plan(h, w);
    const std::vector<Spectrum> dhat = atom_spectra(dict, plan);
    std::vector<Spectrum> acc(dict.channels, Spectrum(plan.bins(), {0.0, 0.0}));
    for (int m = 0; m < dict.atom_count; ++m) {
        const Spectrum rhat = plan.forward(maps.maps[m]);
        for (int c = 0; c < dict.channels; ++c) {
            const Spectrum& d = dhat[static_cast<std::size_t>(m) * dict.channels + c];
            for (std::size_t t = 0; t < rhat.size(); ++t) acc[c][t] += d[t] * rhat[t];
        }
    }
    Tensor out(h, w, dict.channels);
    for (int c = 0; c < dict.channels; ++c) {
        const Grid plane = plan.inverse_real(acc[c]);
        for (int y = 0; y < h; ++y)
            for (int q = 0; q < w; ++q) out.at(y, q, c) = plane.at(y, q);
    }
    return out;
}

namespace {

// Consensus ADMM dictionary update: minimizes the coding residual over the
// padded dictionary d with a split copy g constrained to the filter support
// and the unit l2 ball. Returns g, so the constraint holds exactly.
struct DictUpdateState {
    std::vector<Grid> g;  // [m * channels + c], image-sized, support-constrained
    std::vector<Grid> h;  // scaled duals, same layout
    double sigma = 0.0;   // persisted penalty; h is the scaled dual for it
};

void project_atoms(std::vector<Grid>& g, int atom_count, int channels, int filter_size) {
    for (int m = 0; m < atom_count; ++m) {
        double norm_sq = 0.0;
        for (int c = 0; c < channels; ++c) {
            Grid& plane = g[static_cast<std::size_t>(m) * channels + c];
            for (int r = 0; r < plane.rows; ++r)
                for (int q = 0; q < plane.cols; ++q) {
                    if (r >= filter_size || q >= filter_size) {
                        plane.at(r, q) = 0.0;
                    } else {
                        norm_sq += plane.at(r, q) * plane.at(r, q);
                    }
                }
        }
        if (norm_sq > 1.0) {
            const double scale = 1.0 / std::sqrt(norm_sq);
            for (int c = 0; c < channels; ++c)
                for (double& v : g[static_cast<std::size_t>(m) * channels + c].v) v *= scale;
        }
    }
}

Dictionary crop_dictionary(const std::vector<Grid>& g, int atom_count, int channels, int filter_size) {
    Dictionary dict;
    dict.atom_count = atom_count;
    dict.channels = channels;
    dict.filter_size = filter_size;
    dict.atoms.reserve(atom_count);
    for (int m = 0; m < atom_count; ++m) {
        Tensor atom(filter_size, filter_size, channels);
        for (int c = 0; c < channels; ++c)
            for (int r = 0; r < filter_size; ++r)
                for (int q = 0; q < filter_size; ++q)
                    atom.at(r, q, c) = g[static_cast<std::size_t>(m) * channels + c].at(r, q);
        dict.atoms.push_back(std::move(atom));
    }
    return dict;
}

void dictionary_update(const FrequencyPlan& plan, const std::vector<std::vector<Spectrum>>& rhat,
                       const std::vector<std::vector<Spectrum>>& xhat, int atom_count, int channels,
                       int filter_size, const AdmmConfig& cfg, DictUpdateState& state) {
    const std::size_t bins = plan.bins();
    const std::size_t image_count = rhat.size();
    const int m_count = atom_count;

    // Per-bin Gram of the coefficient-map operator (shared by all channels)
    // and the data part of the right-hand side, indexed [t * m_count + i].
    std::vector<std::vector<std::complex<double>>> gram(bins);
    std::vector<std::vector<std::complex<double>>> rhs0(
        channels, std::vector<std::complex<double>>(bins * m_count, {0.0, 0.0}));
    for (std::size_t t = 0; t < bins; ++t) gram[t].assign(static_cast<std::size_t>(m_count) * m_count, {0.0, 0.0});

    for (std::size_t s = 0; s < image_count; ++s) {
        for (std::size_t t = 0; t < bins; ++t) {
            auto& g = gram[t];
            for (int i = 0; i < m_count; ++i) {
                const std::complex<double> bi = std::conj(rhat[s][i][t]);
                for (int j = 0; j <= i; ++j)
                    g[static_cast<std::size_t>(i) * m_count + j] += bi * rhat[s][j][t];
                for (int c = 0; c < channels; ++c)
                    rhs0[c][t * m_count + i] += bi * xhat[s][c][t];
            }
        }
    }
    for (std::size_t t = 0; t < bins; ++t)
        for (int i = 0; i < m_count; ++i)
            for (int j = i + 1; j < m_count; ++j)
                gram[t][static_cast<std::size_t>(i) * m_count + j] =
                    std::conj(gram[t][static_cast<std::size_t>(j) * m_count + i]);

    if (state.sigma <= 0.0)
        state.sigma = cfg.rho > 0.0 ? cfg.rho : std::max<double>(1.0, static_cast<double>(image_count));
    double& sigma = state.sigma;

    std::vector<std::vector<std::complex<double>>> factors(bins);
    auto refactor = [&]() {
        for (std::size_t t = 0; t < bins; ++t) {
            factors[t] = gram[t];
            for (int i = 0; i < m_count; ++i)
                factors[t][static_cast<std::size_t>(i) * m_count + i] += sigma;
            if (!hermitian_cholesky(factors[t], m_count))
                throw std::runtime_error("dictionary update: per-bin system not positive definite");
        }
    };
    refactor();

    std::vector<Grid>& g = state.g;
    std::vector<Grid>& h = state.h;
    std::vector<Grid> d(static_cast<std::size_t>(m_count) * channels, Grid(plan.height(), plan.width()));
    std::vector<Grid> g_prev;
    std::vector<std::complex<double>> rhs(m_count);

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        // d-step: per-bin, per-channel Cholesky solve.
        std::vector<Spectrum> ghhat(static_cast<std::size_t>(m_count) * channels);
        {
            Grid diff(plan.height(), plan.width());
            for (std::size_t i = 0; i < ghhat.size(); ++i) {
                for (std::size_t p = 0; p < diff.v.size(); ++p) diff.v[p] = g[i].v[p] - h[i].v[p];
                ghhat[i] = plan.forward(diff);
            }
        }
        std::vector<Spectrum> dhat(static_cast<std::size_t>(m_count) * channels, Spectrum(bins));
        for (std::size_t t = 0; t < bins; ++t) {
            for (int c = 0; c < channels; ++c) {
                for (int i = 0; i < m_count; ++i)
                    rhs[i] = rhs0[c][t * m_count + i] +
                             sigma * ghhat[static_cast<std::size_t>(i) * channels + c][t];
                hermitian_cholesky_solve(factors[t], m_count, rhs.data());
                for (int i = 0; i < m_count; ++i)
                    dhat[static_cast<std::size_t>(i) * channels + c][t] = rhs[i];
            }
        }
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = plan.inverse_real(dhat[i]);

        // g-step: project d + h onto the support/norm constraint set.
        g_prev = g;
        for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t p = 0; p < g[i].v.size(); ++p) g[i].v[p] = d[i].v[p] + h[i].v[p];
        project_atoms(g, m_count, channels, filter_size);
        for (std::size_t i = 0; i < h.size(); ++i)
            for (std::size_t p = 0; p < h[i].v.size(); ++p) h[i].v[p] += d[i].v[p] - g[i].v[p];

        const double r_norm = frob_diff(d, g);
        const double s_norm = sigma * frob_diff(g, g_prev);
        const double rscale = std::max(frob(d), frob(g));
        const double sscale = sigma * frob(h);
        const double rn = rscale > 1e-8 ? r_norm / rscale : r_norm;
        const double sn = sscale > 1e-8 ? s_norm / sscale : s_norm;
        if (rn <= cfg.tol_primal && sn <= cfg.tol_dual) break;
        if (cfg.rho_adapt) {
            if (rn > 10.0 * sn && sigma < 1e8) {
                sigma *= 2.0;
                for (auto& grid : h)
                    for (double& v : grid.v) v *= 0.5;
                refactor();
            } else if (sn > 10.0 * rn && sigma > 1e-8) {
                sigma *= 0.5;
                for (auto& grid : h)
                    for (double& v : grid.v) v *= 2.0;
                refactor();
            }
        }
    }
}

}  // namespace

Dictionary learn_dictionary(const std::vector<Tensor>& images, int atom_count, int filter_size,
                            double lambda_l1, const AdmmConfig& cfg, std::uint64_t seed,
                            int outer_iters, CdlDiagnostics* diag) {
    if (images.empty()) throw std::invalid_argument("learn_dictionary: empty training set");
    if (atom_count < 1) throw std::invalid_argument("learn_dictionary: atom_count must be positive");
    if (outer_iters < 1) throw std::invalid_argument("learn_dictionary: outer_iters must be positive");
    cfg.validate();
    const int h = images[0].height, w = images[0].width, channels = images[0].channels;
    for (const auto& img : images)
        if (img.height != h || img.width != w || img.channels != channels)
            throw std::invalid_argument("learn_dictionary: images must share one shape");
    if (filter_size < 1 || filter_size > h || filter_size > w)
        throw std::invalid_argument("learn_dictionary: filter_size must fit inside the images");
    if (lambda_l1 < 0.0) throw std::invalid_argument("learn_dictionary: lambda_l1 must be nonnegative");

    // Seeded unit-normalized Gaussian atoms.
    Dictionary dict;
    dict.atom_count = atom_count;
    dict.filter_size = filter_size;
    dict.channels = channels;
    for (int m = 0; m < atom_count; ++m) {
        Rng rng(derive_seed(seed, 0x6474, static_cast<std::uint64_t>(m)));
        Tensor atom(filter_size, filter_size, channels);
        double norm_sq = 0.0;
        for (double& v : atom.data) {
            v = rng.normal();
            norm_sq += v * v;
        }
        const double scale = norm_sq > 0.0 ? 1.0 / std::sqrt(norm_sq) : 1.0;
        for (double& v : atom.data) v *= scale;
        dict.atoms.push_back(std::move(atom));
    }

    FrequencyPlan plan(h, w);
    std::vector<std::vector<Spectrum>> xhat(images.size());
    for (std::size_t s = 0; s < images.size(); ++s) xhat[s] = channel_spectra(images[s], plan);

    // Warm-started coding state per image.
    std::vector<std::vector<Grid>> y(images.size(), std::vector<Grid>(atom_count, Grid(h, w)));
    std::vector<std::vector<Grid>> u(images.size(), std::vector<Grid>(atom_count, Grid(h, w)));

    DictUpdateState dstate;
    dstate.g.assign(static_cast<std::size_t>(atom_count) * channels, Grid(h, w));
    dstate.h.assign(static_cast<std::size_t>(atom_count) * channels, Grid(h, w));
    for (int m = 0; m < atom_count; ++m)
        for (int c = 0; c < channels; ++c)
            for (int r = 0; r < filter_size; ++r)
                for (int q = 0; q < filter_size; ++q)
                    dstate.g[static_cast<std::size_t>(m) * channels + c].at(r, q) = dict.atoms[m].at(r, q, c);

    std::vector<std::vector<Spectrum>> rhat(images.size(),
                                            std::vector<Spectrum>(atom_count));
    for (int outer = 0; outer < outer_iters; ++outer) {
        // Sparse coding pass with the dictionary fixed.
        const std::vector<Spectrum> dhat = atom_spectra(dict, plan);
        parallel_for(images.size(), [&](std::size_t s) {
            cbpdn_core(plan, dhat, xhat[s], channels, lambda_l1, cfg, y[s], u[s]);
            for (int m = 0; m < atom_count; ++m) rhat[s][m] = plan.forward(y[s][m]);
        });

        // Dictionary update with the maps fixed.
        dictionary_update(plan, rhat, xhat, atom_count, channels, filter_size, cfg, dstate);
        dict = crop_dictionary(dstate.g, atom_count, channels, filter_size);

        if (diag) {
            const std::vector<Spectrum> dhat_new = atom_spectra(dict, plan);
            double objective = 0.0;
            for (std::size_t s = 0; s < images.size(); ++s) {
                objective += data_term_freq(dhat_new, rhat[s], xhat[s], channels);
                for (const auto& g : y[s])
                    for (double v : g.v) objective += lambda_l1 * std::abs(v);
            }
            diag->objective.push_back(objective);
        }
    }
    return dict;
}

}  // namespace purikit
