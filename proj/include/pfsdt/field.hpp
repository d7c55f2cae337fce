// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "rng.hpp"

namespace pfsdt {

using complex_t = std::complex<double>;

//! Field realization phi(x_j) on a grid.
class ComplexField
{
  public:
    ComplexField(Grid1D grid, std::vector<complex_t> amp)
        : grid_{grid}, amp_{std::move(amp)}
    {
        detail::require(amp_.size() == grid_.size(),
                        "field amplitude count does not match grid");
        for (auto const& a : amp_) {
            detail::require(std::isfinite(a.real()) && std::isfinite(a.imag()),
                            "field amplitudes must be finite");
        }
    }

    static ComplexField zero(Grid1D const& grid)
    {
        return ComplexField{grid, std::vector<complex_t>(grid.size())};
    }

    Grid1D const& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return amp_.size(); }
    std::span<complex_t const> amplitudes() const noexcept { return amp_; }
    complex_t operator[](std::size_t j) const noexcept { return amp_[j]; }

    //! Discrete L2 norm squared, h * sum |phi_j|^2.
    double norm2() const noexcept
    {
        double s = 0.0;
        for (auto const& a : amp_) {
            s += std::norm(a);
        }
        return grid_.h() * s;
    }

    ComplexField scaled(complex_t factor) const
    {
        std::vector<complex_t> out(amp_);
        for (auto& a : out) {
            a *= factor;
        }
        return ComplexField{grid_, std::move(out)};
    }

  private:
    Grid1D grid_;
    std::vector<complex_t> amp_;
};

//! <u, v> = h * sum u_j conj(v_j); linear in the first argument.
inline complex_t inner(ComplexField const& u, ComplexField const& v)
{
    detail::require(u.grid() == v.grid(), "inner product across grids");
    complex_t s{0.0, 0.0};
    for (std::size_t j = 0; j < u.size(); ++j) {
        s += u[j] * std::conj(v[j]);
    }
    return u.grid().h() * s;
}

inline constexpr double norm_tolerance = 1e-12;

/*!
 * Normalized pure state.
 *
 * The constructor validates the unit norm; use normalized() to rescale an
 * arbitrary non-zero field.
 */
class WaveFunction
{
  public:
    explicit WaveFunction(ComplexField field) : field_{std::move(field)}
    {
        detail::require(std::abs(field_.norm2() - 1.0) <= norm_tolerance,
                        "wave function must have unit norm");
    }

    static WaveFunction normalized(ComplexField const& field)
    {
        double const n2 = field.norm2();
        detail::require(n2 > 0.0, "cannot normalize a zero field");
        return WaveFunction{field.scaled(1.0 / std::sqrt(n2))};
    }

    ComplexField const& field() const noexcept { return field_; }
    Grid1D const& grid() const noexcept { return field_.grid(); }
    complex_t operator[](std::size_t j) const noexcept { return field_[j]; }
    std::size_t size() const noexcept { return field_.size(); }

  private:
    ComplexField field_;
};

inline complex_t inner(WaveFunction const& u, WaveFunction const& v)
{
    return inner(u.field(), v.field());
}

//! pi_2(I, phi) = h * sum_{j in I} |phi_j|^2.
inline double power2(ComplexField const& phi, Region const& region)
{
    detail::require(phi.grid() == region.grid(), "region grid mismatch");
    double s = 0.0;
    for (auto const& r : region.ranges()) {
        for (std::size_t j = r.begin; j < r.end; ++j) {
            s += std::norm(phi[j]);
        }
    }
    return phi.grid().h() * s;
}

//! h * sum_{j in I} |phi_j|^4.
inline double power4(ComplexField const& phi, Region const& region)
{
    detail::require(phi.grid() == region.grid(), "region grid mismatch");
    double s = 0.0;
    for (auto const& r : region.ranges()) {
        for (std::size_t j = r.begin; j < r.end; ++j) {
            double const a2 = std::norm(phi[j]);
            s += a2 * a2;
        }
    }
    return phi.grid().h() * s;
}

//! pi_{2,4}(I, phi) = h * sum_{j in I} (|phi_j|^2 + |phi_j|^4).
inline double power24(ComplexField const& phi, Region const& region)
{
    detail::require(phi.grid() == region.grid(), "region grid mismatch");
    double s = 0.0;
    for (auto const& r : region.ranges()) {
        for (std::size_t j = r.begin; j < r.end; ++j) {
            double const a2 = std::norm(phi[j]);
            s += a2 + a2 * a2;
        }
    }
    return phi.grid().h() * s;
}

//! Indicator of the cells x_j in [a, b), normalized.
inline WaveFunction box_state(Grid1D const& grid, double a, double b)
{
    detail::require(a < b, "box requires a < b");
    double const eps = 1e-9 * grid.h();
    std::vector<complex_t> amp(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        double const x = grid.x(j);
        if (x >= a - eps && x < b - eps) {
            amp[j] = 1.0;
        }
    }
    ComplexField f{grid, std::move(amp)};
    detail::require(f.norm2() > 0.0, "box contains no grid cell");
    return WaveFunction::normalized(f);
}

//! Normalized Gaussian wave packet exp(-(x-c)^2/(4 w^2) + i p x).
inline WaveFunction gaussian_packet(Grid1D const& grid,
                                    double center,
                                    double width,
                                    double momentum = 0.0)
{
    detail::require(width > 0.0, "packet width must be positive");
    std::vector<complex_t> amp(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        double const d = grid.x(j) - center;
        amp[j] = std::polar(std::exp(-d * d / (4.0 * width * width)),
                            momentum * grid.x(j));
    }
    return WaveFunction::normalized(ComplexField{grid, std::move(amp)});
}

//! Random state with i.i.d. complex normal amplitudes.
inline WaveFunction random_state(Grid1D const& grid, CounterRng& rng)
{
    std::vector<complex_t> amp(grid.size());
    for (auto& a : amp) {
        a = rng.complex_normal(1.0);
    }
    return WaveFunction::normalized(ComplexField{grid, std::move(amp)});
}

/*!
 * Random orthonormal family of `count` states (modified Gram-Schmidt on
 * complex normal vectors). Requires count <= grid size.
 */
inline std::vector<WaveFunction>
random_orthonormal_states(Grid1D const& grid, std::size_t count, CounterRng& rng)
{
    detail::require(count <= grid.size(),
                    "more orthonormal states requested than grid points");
    std::vector<WaveFunction> out;
    out.reserve(count);
    while (out.size() < count) {
        std::vector<complex_t> amp(grid.size());
        for (auto& a : amp) {
            a = rng.complex_normal(1.0);
        }
        ComplexField v{grid, amp};
        // two passes keep the residual overlap at round-off level
        for (int pass = 0; pass < 2; ++pass) {
            for (auto const& e : out) {
                complex_t const c = inner(v, e.field());
                for (std::size_t j = 0; j < amp.size(); ++j) {
                    amp[j] -= c * e[j];
                }
                v = ComplexField{grid, amp};
            }
        }
        if (v.norm2() > 1e-6) {
            out.push_back(WaveFunction::normalized(v));
        }
    }
    return out;
}

} // namespace pfsdt
