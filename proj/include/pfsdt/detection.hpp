// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ensemble.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "grid.hpp"

namespace pfsdt {

enum class PowerLaw
{
    quadratic,
    two_plus_four,
};

inline std::string_view to_string(PowerLaw p) noexcept
{
    return p == PowerLaw::quadratic ? "quadratic" : "two_plus_four";
}

inline PowerLaw power_law_from_string(std::string_view s)
{
    if (s == "quadratic") {
        return PowerLaw::quadratic;
    }
    if (s == "two_plus_four") {
        return PowerLaw::two_plus_four;
    }
    detail::invalid("unknown power law '" + std::string(s) + "'");
}

/*!
 * Detector response model. Without a locality domain the detector sees the
 * whole grid; with one it selects and measures only inside O.
 */
class DetectorSpec
{
  public:
    explicit DetectorSpec(PowerLaw law, std::optional<Region> locality = {})
        : law_{law}, locality_{std::move(locality)}
    {
        detail::require(!locality_ || !locality_->is_empty(),
                        "detector locality domain must be non-empty");
    }

    PowerLaw power_law() const noexcept { return law_; }
    std::optional<Region> const& locality() const noexcept { return locality_; }

    //! Domain the detector integrates over on the given grid.
    Region domain(Grid1D const& grid) const
    {
        if (locality_) {
            detail::require(locality_->grid() == grid,
                            "detector locality grid mismatch");
            return *locality_;
        }
        return Region::full(grid);
    }

  private:
    PowerLaw law_;
    std::optional<Region> locality_;
};

//! Power of phi on a region under the given law.
inline double region_power(ComplexField const& phi, Region const& region, PowerLaw law)
{
    return law == PowerLaw::quadratic ? power2(phi, region) : power24(phi, region);
}

//! Selection weight of a field (total, or local, power).
inline double select_weight(ComplexField const& phi, DetectorSpec const& det)
{
    return region_power(phi, det.domain(phi.grid()), det.power_law());
}

/*!
 * Outcome density P(X = x_j | phi) per unit length, so that h times the sum
 * over the detector domain is one. Zero outside a locality domain.
 */
inline double conditional_outcome_density(ComplexField const& phi,
                                          std::size_t j,
                                          DetectorSpec const& det)
{
    detail::require(j < phi.size(), "outcome point outside the grid");
    double const w = select_weight(phi, det);
    if (!(w > 0.0)) {
        throw DegenerateError("field carries zero detection weight");
    }
    if (det.locality() && !det.locality()->contains(j)) {
        return 0.0;
    }
    double const a2 = std::norm(phi[j]);
    double const local = det.power_law() == PowerLaw::quadratic ? a2 : a2 + a2 * a2;
    return local / w;
}

//! Born probability sum_i p_i int_I |psi_i|^2, closed form of the Bayes integral.
inline double detect_quadratic_region(EnsembleSpec const& ens, Region const& region)
{
    detail::require(ens.grid() == region.grid(), "region grid mismatch");
    double s = 0.0;
    for (auto const& c : ens.components()) {
        s += c.weight * power2(c.state.field(), region);
    }
    return s;
}

//! Tr(rho I) with I the diagonal indicator of the region.
inline double trace_probability(DensityMatrix const& rho, Region const& region)
{
    detail::require(rho.grid() == region.grid(), "region grid mismatch");
    auto const& m = rho.matrix();
    double s = 0.0;
    for (auto const& r : region.ranges()) {
        for (std::size_t j = r.begin; j < r.end; ++j) {
            auto const k = static_cast<Eigen::Index>(j);
            s += m(k, k).real();
        }
    }
    return s;
}

/*!
 * Exact "2+4" detection probability
 *   (B(I) + kappa Q(I)) / (1 + kappa Q),
 * with B the Born probability and Q the unit-dispersion quartic moment.
 */
inline double detect_power24_region(EnsembleSpec const& ens, Region const& region)
{
    double const born = detect_quadratic_region(ens, region);
    double const q_region = quartic_moment(ens, region);
    double const q_total = quartic_moment(ens, Region::full(ens.grid()));
    double const kappa = ens.kappa();
    return (born + kappa * q_region) / (1.0 + kappa * q_total);
}

//! Conditional-on-O probability of I for a quadratic detector located in O.
inline double
detect_local(EnsembleSpec const& ens, Region const& domain, Region const& region)
{
    detail::require(region.is_subset_of(domain),
                    "local detection requires I inside O");
    double const kappa_o = detect_quadratic_region(ens, domain);
    if (!(kappa_o > 0.0)) {
        throw DegenerateError("ensemble carries no power in the detector domain");
    }
    return detect_quadratic_region(ens, region) / kappa_o;
}

/*!
 * Closed-form detection probability for any supported detector. The
 * local "2+4" case uses the same ratio restricted to O.
 */
inline double
detect(EnsembleSpec const& ens, DetectorSpec const& det, Region const& region)
{
    Region const domain = det.domain(ens.grid());
    detail::require(region.is_subset_of(domain),
                    "detection region must lie inside the detector domain");
    if (det.power_law() == PowerLaw::quadratic) {
        return det.locality() ? detect_local(ens, domain, region)
                              : detect_quadratic_region(ens, region);
    }
    if (!det.locality()) {
        return detect_power24_region(ens, region);
    }
    double const kappa = ens.kappa();
    double const den = detect_quadratic_region(ens, domain)
                       + kappa * quartic_moment(ens, domain);
    if (!(den > 0.0)) {
        throw DegenerateError("ensemble carries no power in the detector domain");
    }
    return (detect_quadratic_region(ens, region) + kappa * quartic_moment(ens, region))
           / den;
}

//! Per-point outcome probabilities (masses, summing to one over the domain).
inline std::vector<double> outcome_masses(EnsembleSpec const& ens, DetectorSpec const& det)
{
    Grid1D const& grid = ens.grid();
    Region const domain = det.domain(grid);
    auto const d = diagonal_density(ens);
    std::vector<double> q(grid.size(), 0.0);
    if (det.power_law() == PowerLaw::two_plus_four) {
        q = quartic_density(ens);
    }
    double const kappa = ens.kappa();
    std::vector<double> mass(grid.size(), 0.0);
    double total = 0.0;
    for (auto const& r : domain.ranges()) {
        for (std::size_t j = r.begin; j < r.end; ++j) {
            mass[j] = grid.h() * (d[j] + kappa * q[j]);
            total += mass[j];
        }
    }
    if (!(total > 0.0)) {
        throw DegenerateError("ensemble carries no power in the detector domain");
    }
    for (auto& m : mass) {
        m /= total;
    }
    return mass;
}

/*!
 * Observable with a non-degenerate discrete spectrum, given by its
 * eigenvalues and an orthonormal family of eigenvectors.
 */
class DiscreteObservable
{
  public:
    DiscreteObservable(std::vector<double> eigenvalues,
                       std::vector<WaveFunction> eigenvectors)
        : values_{std::move(eigenvalues)}, vectors_{std::move(eigenvectors)}
    {
        detail::require(!values_.empty() && values_.size() == vectors_.size(),
                        "observable needs one eigenvector per eigenvalue");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            detail::require(vectors_[i].grid() == vectors_[0].grid(),
                            "observable eigenvectors must share one grid");
            for (std::size_t k = i + 1; k < values_.size(); ++k) {
                detail::require(values_[i] != values_[k],
                                "observable eigenvalues must be distinct");
                detail::require(std::abs(inner(vectors_[i], vectors_[k]))
                                    <= orthonormality_tolerance,
                                "observable eigenvectors must be orthonormal");
            }
        }
    }

    std::vector<double> const& eigenvalues() const noexcept { return values_; }
    std::vector<WaveFunction> const& eigenvectors() const noexcept
    {
        return vectors_;
    }
    Grid1D const& grid() const noexcept { return vectors_.front().grid(); }

    //! Operator matrix sum_a a e_a (x) e_a on grid values.
    Eigen::MatrixXcd matrix() const
    {
        auto const n = static_cast<Eigen::Index>(grid().size());
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
        for (std::size_t i = 0; i < values_.size(); ++i) {
            m.noalias() += (values_[i] * grid().h()) * projector_vector(i);
        }
        return m;
    }

    //! Spectral projector onto e_a as an operator matrix.
    Eigen::MatrixXcd projector(std::size_t i) const
    {
        return grid().h() * projector_vector(i);
    }

  private:
    Eigen::MatrixXcd projector_vector(std::size_t i) const
    {
        Eigen::VectorXcd const v = as_vector(vectors_[i]);
        return v * v.adjoint();
    }

    std::vector<double> values_;
    std::vector<WaveFunction> vectors_;
};

inline constexpr double completeness_tolerance = 1e-8;

/*!
 * A-detection probabilities p(a) = sum_i p_i |<psi_i, e_a>|^2, returned as
 * (eigenvalue, probability) pairs in the observable's order.
 */
inline std::vector<std::pair<double, double>>
detect_discrete(EnsembleSpec const& ens, DiscreteObservable const& obs)
{
    detail::require(ens.grid() == obs.grid(), "observable grid mismatch");
    std::vector<std::pair<double, double>> out;
    out.reserve(obs.eigenvalues().size());
    double total = 0.0;
    for (std::size_t a = 0; a < obs.eigenvalues().size(); ++a) {
        double p = 0.0;
        for (auto const& c : ens.components()) {
            p += c.weight * std::norm(inner(c.state, obs.eigenvectors()[a]));
        }
        out.emplace_back(obs.eigenvalues()[a], p);
        total += p;
    }
    detail::require(std::abs(total - 1.0) <= completeness_tolerance,
                    "observable eigenbasis does not span the ensemble");
    return out;
}

//! Mean detected position sum_j x_j h rho(x_j, x_j) under quadratic detection.
inline double mean_position(EnsembleSpec const& ens)
{
    auto const d = diagonal_density(ens);
    Grid1D const& g = ens.grid();
    double s = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        s += g.x(j) * d[j];
    }
    return g.h() * s;
}

//! Position operator x-hat as a diagonal matrix on grid values.
inline Eigen::MatrixXcd position_operator(Grid1D const& grid)
{
    auto const n = static_cast<Eigen::Index>(grid.size());
    Eigen::VectorXcd diag(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        diag(j) = grid.x(static_cast<std::size_t>(j));
    }
    return diag.asDiagonal();
}

//! Diagonal indicator projector of a region.
inline Eigen::MatrixXcd indicator_operator(Region const& region)
{
    auto const n = static_cast<Eigen::Index>(region.grid().size());
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    for (auto const& r : region.ranges()) {
        for (std::size_t j = r.begin; j < r.end; ++j) {
            auto const k = static_cast<Eigen::Index>(j);
            m(k, k) = 1.0;
        }
    }
    return m;
}

} // namespace pfsdt
