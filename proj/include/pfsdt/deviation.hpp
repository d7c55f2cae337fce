// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

#include "detection.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "grid.hpp"

namespace pfsdt {

/*!
 * First-order Born-rule deviation of "2+4" detection for a pure state,
 *   m4 * kappa * [int_I |Psi|^4 - int_I |Psi|^2 * int |Psi|^4],
 * with m4 the coefficient fourth-moment factor of the modulus model
 * (1 for phase_only, 2 for gaussian).
 */
inline double delta_closed_form(WaveFunction const& psi,
                                Region const& region,
                                double kappa,
                                ModulusModel model = ModulusModel::phase_only)
{
    detail::require(kappa > 0.0, "kappa must be positive");
    Region const full = Region::full(psi.grid());
    double const quartic_in = power4(psi.field(), region);
    double const born_in = power2(psi.field(), region);
    double const quartic_all = power4(psi.field(), full);
    return fourth_moment_factor(model) * kappa
           * (quartic_in - born_in * quartic_all);
}

//! Piecewise-constant state H on [-L/2, 0), kH on [0, L/2).
struct StepState
{
    double H;
    double k;

    StepState(double height, double ratio) : H{height}, k{ratio}
    {
        detail::require(H > 0.0 && k > 0.0, "step state needs H, k > 0");
    }

    //! Support length from the unit-norm condition L H^2 (k^2 + 1) / 2 = 1.
    double L() const noexcept { return 2.0 / (H * H * (k * k + 1.0)); }
    double left_value() const noexcept { return H; }
    double right_value() const noexcept { return k * H; }
};

inline constexpr double step_min_cells = 16.0;

//! Grid on [-L/2, L/2] with n points; n odd puts x = 0 on a grid point.
inline Grid1D step_state_grid(StepState const& s, std::size_t n)
{
    return Grid1D{-0.5 * s.L(), 0.5 * s.L(), n};
}

//! The amplitude-H side [-L/2, 0] of a step state.
inline Region step_left_region(StepState const& s, Grid1D const& grid)
{
    return Region{grid, {{-0.5 * s.L(), 0.0}}};
}

/*!
 * Gridded step state. Cells x_j in [-L/2, 0) take H and cells in [0, L/2)
 * take kH; the result is renormalized on the grid. The grid must cover
 * [-L/2, L/2] with at least 16 cells across the support.
 */
inline WaveFunction build_step_state(double H, double k, Grid1D const& grid)
{
    StepState const s{H, k};
    double const L = s.L();
    double const tol = 1e-9 * L;
    detail::require(grid.x_min() <= -0.5 * L + tol && grid.x_max() >= 0.5 * L - tol,
                    "grid does not span the step-state support");
    detail::require(L / grid.h() >= step_min_cells,
                    "grid too coarse for the step state");
    double const eps = 1e-9 * grid.h();
    std::vector<complex_t> amp(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        double const x = grid.x(j);
        if (x >= -0.5 * L - eps && x < -eps) {
            amp[j] = s.left_value();
        } else if (x >= -eps && x < 0.5 * L - eps) {
            amp[j] = s.right_value();
        }
    }
    return WaveFunction::normalized(ComplexField{grid, std::move(amp)});
}

/*!
 * Analytic deviation on [-L/2, 0] for the step state,
 *   m4 * kappa H^2 k^2 (1 - k^2) / (1 + k^2)^2.
 * Negative for k > 1, zero at k = 1, positive for k < 1.
 */
inline double delta_step_analytic(double H,
                                  double k,
                                  double kappa,
                                  ModulusModel model = ModulusModel::phase_only)
{
    detail::require(H > 0.0 && k > 0.0 && kappa > 0.0,
                    "step deviation needs H, k, kappa > 0");
    double const k2 = k * k;
    return fourth_moment_factor(model) * kappa * H * H * k2 * (1.0 - k2)
           / ((1.0 + k2) * (1.0 + k2));
}

//! c4 = E int |phi|^4 dx under the unit-dispersion ensemble.
inline double c4_constant(EnsembleSpec const& ens)
{
    return quartic_moment(ens, Region::full(ens.grid()));
}

/*!
 * Classical variable f(phi) = <A phi, phi> + c * int g(x) |phi(x)|^4 dx.
 *
 * A is an operator matrix on grid values (Hermitian); g defaults to 1.
 */
class PolynomialVariable
{
  public:
    PolynomialVariable(Eigen::MatrixXcd quadratic_kernel,
                       double quartic_weight = 0.0,
                       std::vector<double> quartic_profile = {})
        : a_{std::move(quadratic_kernel)},
          c_{quartic_weight},
          g_{std::move(quartic_profile)}
    {
        detail::require(a_.rows() == a_.cols(), "quadratic kernel must be square");
        detail::require((a_ - a_.adjoint()).cwiseAbs().maxCoeff()
                            <= hermitian_tolerance,
                        "quadratic kernel must be Hermitian");
        detail::require(g_.empty() || g_.size() == static_cast<std::size_t>(a_.rows()),
                        "quartic profile size does not match kernel");
    }

    Eigen::MatrixXcd const& quadratic_kernel() const noexcept { return a_; }
    double quartic_weight() const noexcept { return c_; }
    double profile(std::size_t j) const noexcept { return g_.empty() ? 1.0 : g_[j]; }

    double operator()(ComplexField const& phi) const
    {
        detail::require(static_cast<Eigen::Index>(phi.size()) == a_.rows(),
                        "variable and field sizes differ");
        Eigen::VectorXcd const v = as_vector(phi);
        double const h = phi.grid().h();
        double quad = h * v.dot(a_ * v).real();
        double quart = 0.0;
        for (std::size_t j = 0; j < phi.size(); ++j) {
            double const a2 = std::norm(phi[j]);
            quart += profile(j) * a2 * a2;
        }
        return quad + c_ * h * quart;
    }

  private:
    Eigen::MatrixXcd a_;
    double c_;
    std::vector<double> g_;
};

//! pi_{2,4} itself as a polynomial variable.
inline PolynomialVariable power24_variable(Grid1D const& grid)
{
    auto const n = static_cast<Eigen::Index>(grid.size());
    return PolynomialVariable{Eigen::MatrixXcd::Identity(n, n), 1.0};
}

//! f_g(phi) = int g(x) (|phi|^2 + |phi|^4) dx.
inline PolynomialVariable weighted_power24_variable(Grid1D const& grid,
                                                    std::vector<double> g)
{
    detail::require(g.size() == grid.size(), "profile size does not match grid");
    Eigen::VectorXcd diag(static_cast<Eigen::Index>(g.size()));
    for (std::size_t j = 0; j < g.size(); ++j) {
        diag(static_cast<Eigen::Index>(j)) = g[j];
    }
    return PolynomialVariable{Eigen::MatrixXcd(diag.asDiagonal()), 1.0, std::move(g)};
}

/*!
 * Closed-form classical average E_mu f, evaluated from the covariance
 * kernel component by component (not through the density matrix):
 *   sum_i kappa p_i <A psi_i, psi_i> + c kappa^2 int g q(x) dx.
 */
inline double classical_average(EnsembleSpec const& ens, PolynomialVariable const& f)
{
    Grid1D const& g = ens.grid();
    detail::require(f.quadratic_kernel().rows() == static_cast<Eigen::Index>(g.size()),
                    "variable and grid sizes differ");
    double const kappa = ens.kappa();
    double quad = 0.0;
    for (auto const& c : ens.components()) {
        Eigen::VectorXcd const v = as_vector(c.state);
        quad += c.weight * g.h() * v.dot(f.quadratic_kernel() * v).real();
    }
    auto const q = quartic_density(ens);
    double quart = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
        quart += f.profile(j) * q[j];
    }
    return kappa * quad + f.quartic_weight() * kappa * kappa * g.h() * quart;
}

//! von Neumann average Tr(rho A).
inline double quantum_average(DensityMatrix const& rho, Eigen::MatrixXcd const& a)
{
    detail::require(a.rows() == rho.matrix().rows() && a.cols() == rho.matrix().cols(),
                    "observable shape does not match density matrix");
    detail::require((a - a.adjoint()).cwiseAbs().maxCoeff() <= hermitian_tolerance,
                    "observable must be Hermitian");
    return rho.matrix().cwiseProduct(a.transpose()).sum().real();
}

struct AsymptoticPoint
{
    double kappa;
    double classical;
    double quantum;   //!< kappa * Tr(rho A)
    double remainder; //!< classical - quantum
};

struct AsymptoticFit
{
    std::vector<AsymptoticPoint> points;
    bool exact_match = false;     //!< every |remainder| below exact_remainder_floor
    std::optional<double> slope;  //!< log-log slope of |remainder| vs kappa
    double max_abs_remainder = 0.0;
};

inline constexpr double exact_remainder_floor = 1e-14;

/*!
 * Compare the classical average of f with its quantum counterpart
 * kappa Tr(rho A) over a kappa sweep and fit the order of the remainder.
 * Requires at least two decades of kappa, all below 0.5.
 */
inline AsymptoticFit asymptotic_check(EnsembleSpec const& ens,
                                      std::vector<double> const& kappas,
                                      PolynomialVariable const& f)
{
    detail::require(kappas.size() >= 2, "asymptotic check needs two kappa values");
    double lo = kappas.front();
    double hi = kappas.front();
    for (double k : kappas) {
        detail::require(k > 0.0 && k < 0.5, "asymptotic check needs 0 < kappa < 0.5");
        lo = std::min(lo, k);
        hi = std::max(hi, k);
    }
    detail::require(hi / lo >= 100.0 * (1.0 - 1e-9),
                    "kappa list must span at least two decades");

    DensityMatrix const rho = quantum_state_of(ens);
    double const trace_term = quantum_average(rho, f.quadratic_kernel());

    AsymptoticFit fit;
    std::vector<std::pair<double, double>> logs;
    for (double k : kappas) {
        AsymptoticPoint p;
        p.kappa = k;
        p.classical = classical_average(ens.with_kappa(k), f);
        p.quantum = k * trace_term;
        p.remainder = p.classical - p.quantum;
        fit.max_abs_remainder = std::max(fit.max_abs_remainder, std::abs(p.remainder));
        if (std::abs(p.remainder) >= exact_remainder_floor) {
            logs.emplace_back(std::log(k), std::log(std::abs(p.remainder)));
        }
        fit.points.push_back(p);
    }
    fit.exact_match = logs.empty();
    if (logs.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (auto const& [x, y] : logs) {
            mx += x;
            my += y;
        }
        mx /= static_cast<double>(logs.size());
        my /= static_cast<double>(logs.size());
        double sxy = 0.0, sxx = 0.0;
        for (auto const& [x, y] : logs) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
        }
        fit.slope = sxy / sxx;
    }
    return fit;
}

struct NormalizedAverage
{
    double classical_ratio; //!< <f_g>_mu / <pi_{2,4}>_mu
    double detected_mean;   //!< int g dp_mu under "2+4" detection
};

/*!
 * Normalized classical average of f_g = int g (|phi|^2 + |phi|^4) against
 * the mean of g under the "2+4" detection distribution.
 */
inline NormalizedAverage
normalized_average_check(EnsembleSpec const& ens, std::vector<double> const& g)
{
    Grid1D const& grid = ens.grid();
    double const num = classical_average(ens, weighted_power24_variable(grid, g));
    double const den = classical_average(ens, power24_variable(grid));
    auto const mass = outcome_masses(ens, DetectorSpec{PowerLaw::two_plus_four});
    double mean = 0.0;
    for (std::size_t j = 0; j < mass.size(); ++j) {
        mean += g[j] * mass[j];
    }
    return {num / den, mean};
}

} // namespace pfsdt
