// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "rng.hpp"

namespace pfsdt {

/*!
 * Law of the random field coefficients.
 *
 * gaussian: circularly-symmetric complex normal coefficients.
 * phase_only: one component drawn by weight, deterministic modulus sqrt(kappa)
 * and a uniform global phase.
 *
 * Both laws are zero-mean and phase-rotation invariant and share the same
 * covariance; they differ in fourth moments.
 */
enum class ModulusModel
{
    gaussian,
    phase_only,
};

inline std::string_view to_string(ModulusModel m) noexcept
{
    return m == ModulusModel::gaussian ? "gaussian" : "phase_only";
}

inline ModulusModel modulus_model_from_string(std::string_view s)
{
    if (s == "gaussian") {
        return ModulusModel::gaussian;
    }
    if (s == "phase_only") {
        return ModulusModel::phase_only;
    }
    detail::invalid("unknown modulus model '" + std::string(s) + "'");
}

//! Normalized fourth moment E|z|^4 / (E|z|^2)^2 of a single coefficient.
inline double fourth_moment_factor(ModulusModel m) noexcept
{
    return m == ModulusModel::gaussian ? 2.0 : 1.0;
}

struct EnsembleComponent
{
    double weight;
    WaveFunction state;
};

inline constexpr double weight_sum_tolerance = 1e-10;
inline constexpr double orthonormality_tolerance = 1e-10;

/*!
 * Prequantum random field: a finite mixture of orthonormal modes with
 * dispersion kappa = E||phi||^2.
 *
 * The covariance operator is kappa * sum_i p_i psi_i (x) psi_i.
 */
class EnsembleSpec
{
  public:
    EnsembleSpec(std::vector<EnsembleComponent> components,
                 double kappa,
                 ModulusModel model)
        : components_{std::move(components)}, kappa_{kappa}, model_{model}
    {
        detail::require(!components_.empty(), "ensemble requires a component");
        detail::require(std::isfinite(kappa) && kappa > 0.0,
                        "ensemble dispersion kappa must be positive");
        double wsum = 0.0;
        for (auto const& c : components_) {
            detail::require(c.weight > 0.0, "component weights must be positive");
            detail::require(c.state.grid() == grid(),
                            "ensemble components must share one grid");
            wsum += c.weight;
        }
        detail::require(std::abs(wsum - 1.0) <= weight_sum_tolerance,
                        "component weights must sum to 1");
        for (std::size_t i = 0; i < components_.size(); ++i) {
            for (std::size_t k = i + 1; k < components_.size(); ++k) {
                detail::require(std::abs(inner(components_[i].state,
                                               components_[k].state))
                                    <= orthonormality_tolerance,
                                "ensemble component states must be orthonormal");
            }
        }
    }

    std::vector<EnsembleComponent> const& components() const noexcept
    {
        return components_;
    }
    double kappa() const noexcept { return kappa_; }
    ModulusModel modulus_model() const noexcept { return model_; }
    Grid1D const& grid() const noexcept
    {
        return components_.front().state.grid();
    }
    bool is_pure() const noexcept { return components_.size() == 1; }

    EnsembleSpec with_kappa(double kappa) const
    {
        return EnsembleSpec{components_, kappa, model_};
    }

    EnsembleSpec with_model(ModulusModel model) const
    {
        return EnsembleSpec{components_, kappa_, model};
    }

  private:
    std::vector<EnsembleComponent> components_;
    double kappa_;
    ModulusModel model_;
};

inline EnsembleSpec
pure_ensemble(WaveFunction psi, double kappa, ModulusModel model)
{
    return EnsembleSpec{{{1.0, std::move(psi)}}, kappa, model};
}

inline EnsembleSpec mixed_ensemble(std::vector<EnsembleComponent> components,
                                   double kappa,
                                   ModulusModel model)
{
    return EnsembleSpec{std::move(components), kappa, model};
}

//! Field scaling phi -> phi / sqrt(kappa): the unit-dispersion ensemble.
inline EnsembleSpec normalize_ensemble(EnsembleSpec const& ens)
{
    return ens.with_kappa(1.0);
}

namespace detail {

//! Plain complex product; skips the Annex G inf/nan recovery of operator*.
inline complex_t mul(complex_t a, complex_t b) noexcept
{
    return {a.real() * b.real() - a.imag() * b.imag(),
            a.real() * b.imag() + a.imag() * b.real()};
}

} // namespace detail

//! Draw one field realization.
inline ComplexField sample_field(EnsembleSpec const& ens, CounterRng& rng)
{
    auto const& comps = ens.components();
    std::size_t const n = ens.grid().size();
    std::vector<complex_t> amp(n);
    if (ens.modulus_model() == ModulusModel::gaussian) {
        for (auto const& c : comps) {
            complex_t const z = rng.complex_normal(ens.kappa() * c.weight);
            for (std::size_t j = 0; j < n; ++j) {
                amp[j] += detail::mul(z, c.state[j]);
            }
        }
    } else {
        double const u = rng.uniform();
        std::size_t pick = comps.size() - 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < comps.size(); ++i) {
            acc += comps[i].weight;
            if (u < acc) {
                pick = i;
                break;
            }
        }
        complex_t const z = std::polar(std::sqrt(ens.kappa()), rng.phase());
        for (std::size_t j = 0; j < n; ++j) {
            amp[j] = detail::mul(z, comps[pick].state[j]);
        }
    }
    return ComplexField{ens.grid(), std::move(amp)};
}

//! Pointwise density rho(x_j, x_j) = sum_i p_i |psi_i(x_j)|^2.
inline std::vector<double> diagonal_density(EnsembleSpec const& ens)
{
    std::vector<double> d(ens.grid().size(), 0.0);
    for (auto const& c : ens.components()) {
        for (std::size_t j = 0; j < d.size(); ++j) {
            d[j] += c.weight * std::norm(c.state[j]);
        }
    }
    return d;
}

/*!
 * Pointwise normalized quartic moment E|phi(x_j)|^4 / kappa^2.
 *
 * phase_only: sum_i p_i |psi_i|^4. gaussian: phi(x_j) is complex normal with
 * variance kappa * rho(x_j, x_j), so the moment is 2 rho(x_j, x_j)^2.
 */
inline std::vector<double> quartic_density(EnsembleSpec const& ens)
{
    std::size_t const n = ens.grid().size();
    std::vector<double> q(n, 0.0);
    if (ens.modulus_model() == ModulusModel::gaussian) {
        auto const d = diagonal_density(ens);
        for (std::size_t j = 0; j < n; ++j) {
            q[j] = 2.0 * d[j] * d[j];
        }
    } else {
        for (auto const& c : ens.components()) {
            for (std::size_t j = 0; j < n; ++j) {
                double const a2 = std::norm(c.state[j]);
                q[j] += c.weight * a2 * a2;
            }
        }
    }
    return q;
}

//! E int_I |phi|^4 dx under the unit-dispersion ensemble.
inline double quartic_moment(EnsembleSpec const& ens, Region const& region)
{
    detail::require(ens.grid() == region.grid(), "region grid mismatch");
    return region.integrate(quartic_density(ens));
}

inline constexpr double hermitian_tolerance = 1e-12;
inline constexpr double trace_tolerance = 1e-10;
inline constexpr double psd_tolerance = 1e-10;

/*!
 * Density operator on the grid-value space.
 *
 * Entries are the kernel rho(x_j, x_k) times h, so the matrix acts on
 * vectors of grid values and Tr is the discrete integral of the diagonal.
 */
class DensityMatrix
{
  public:
    //! Validates Hermiticity, trace and positivity.
    DensityMatrix(Grid1D grid, Eigen::MatrixXcd entries)
        : grid_{grid}, m_{std::move(entries)}
    {
        auto const n = static_cast<Eigen::Index>(grid_.size());
        detail::require(m_.rows() == n && m_.cols() == n,
                        "density matrix shape does not match grid");
        detail::require((m_ - m_.adjoint()).cwiseAbs().maxCoeff()
                            <= hermitian_tolerance,
                        "density matrix must be Hermitian");
        detail::require(std::abs(m_.trace().real() - 1.0) <= trace_tolerance,
                        "density matrix must have unit trace");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
            m_, Eigen::EigenvaluesOnly);
        detail::require(es.eigenvalues().minCoeff() >= -psd_tolerance,
                        "density matrix must be positive semidefinite");
    }

    Grid1D const& grid() const noexcept { return grid_; }
    Eigen::MatrixXcd const& matrix() const noexcept { return m_; }
    std::size_t size() const noexcept { return grid_.size(); }

    double trace() const { return m_.trace().real(); }

    Eigen::VectorXd eigenvalues() const
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
            m_, Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }

  private:
    struct trusted_t
    {
    };

    DensityMatrix(trusted_t, Grid1D grid, Eigen::MatrixXcd entries)
        : grid_{grid}, m_{std::move(entries)}
    {
    }

    friend DensityMatrix quantum_state_of(EnsembleSpec const&);

    Grid1D grid_;
    Eigen::MatrixXcd m_;
};

//! Grid values of a state as an Eigen column vector.
inline Eigen::VectorXcd as_vector(ComplexField const& f)
{
    Eigen::VectorXcd v(static_cast<Eigen::Index>(f.size()));
    for (std::size_t j = 0; j < f.size(); ++j) {
        v(static_cast<Eigen::Index>(j)) = f[j];
    }
    return v;
}

inline Eigen::VectorXcd as_vector(WaveFunction const& psi)
{
    return as_vector(psi.field());
}

/*!
 * Quantum image rho = C_mu / kappa = sum_i p_i psi_i (x) psi_i.
 *
 * Constructed from orthonormal components, so the result is Hermitian,
 * positive and of unit trace by construction and skips re-validation.
 */
inline DensityMatrix quantum_state_of(EnsembleSpec const& ens)
{
    auto const n = static_cast<Eigen::Index>(ens.grid().size());
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    for (auto const& c : ens.components()) {
        Eigen::VectorXcd const v = as_vector(c.state);
        m.noalias() += (c.weight * ens.grid().h()) * (v * v.adjoint());
    }
    return DensityMatrix{DensityMatrix::trusted_t{}, ens.grid(), std::move(m)};
}

} // namespace pfsdt
