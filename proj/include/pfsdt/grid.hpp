// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"

namespace pfsdt {

/*!
 * Uniform one-dimensional grid x_j = x_min + j*h, j = 0..n-1.
 *
 * Grid point x_j carries the left-closed cell [x_j, x_j + h); all
 * integrals are Riemann sums h * sum_j f(x_j).
 */
class Grid1D
{
  public:
    Grid1D(double x_min, double x_max, std::size_t n)
        : x_min_{x_min}, x_max_{x_max}, n_{n}
    {
        detail::require(std::isfinite(x_min) && std::isfinite(x_max),
                        "grid bounds must be finite");
        detail::require(x_max > x_min, "grid requires x_max > x_min");
        detail::require(n >= 2, "grid requires at least two points");
        h_ = (x_max - x_min) / static_cast<double>(n - 1);
    }

    double x_min() const noexcept { return x_min_; }
    double x_max() const noexcept { return x_max_; }
    std::size_t size() const noexcept { return n_; }
    double h() const noexcept { return h_; }

    double x(std::size_t j) const noexcept
    {
        return x_min_ + static_cast<double>(j) * h_;
    }

    //! Nearest grid index to a coordinate (unclamped, may be negative).
    long nearest_index(double x) const noexcept
    {
        return std::lround((x - x_min_) / h_);
    }

    friend bool operator==(Grid1D const& a, Grid1D const& b) noexcept
    {
        return a.x_min_ == b.x_min_ && a.x_max_ == b.x_max_ && a.n_ == b.n_;
    }

  private:
    double x_min_;
    double x_max_;
    std::size_t n_;
    double h_;
};

//! Uniform grid on [x_min, x_max] with n points.
inline Grid1D build_grid(double x_min, double x_max, std::size_t n)
{
    return Grid1D{x_min, x_max, n};
}

//! Half-open range [begin, end) of grid indices.
struct IndexRange
{
    std::size_t begin;
    std::size_t end;

    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(IndexRange const&, IndexRange const&) = default;
};

struct Interval
{
    double a;
    double b;
};

/*!
 * Union of disjoint intervals snapped to grid points.
 *
 * An interval [a, b] covers the grid points j with snap(a) <= j < snap(b),
 * i.e. the cells lying inside it. An interval whose right end snaps to the
 * last grid point also covers that point, so [x_min, x_max] is the whole
 * grid and complements are exact.
 */
class Region
{
  public:
    Region(Grid1D const& grid, std::vector<Interval> const& intervals)
        : grid_{grid}
    {
        double const slack = 0.5 * grid.h() * (1.0 + 1e-9);
        for (auto const& iv : intervals) {
            detail::require(iv.a < iv.b, "region interval requires a < b");
            detail::require(iv.a >= grid.x_min() - slack
                                && iv.b <= grid.x_max() + slack,
                            "region interval lies outside the grid");
            auto const last = static_cast<long>(grid.size()) - 1;
            long const ia = std::clamp(grid.nearest_index(iv.a), 0L, last);
            long ib = std::clamp(grid.nearest_index(iv.b), 0L, last);
            detail::require(ia < ib,
                            "region interval is narrower than one grid cell");
            if (ib == last) {
                ib = last + 1;
            }
            ranges_.push_back({static_cast<std::size_t>(ia),
                               static_cast<std::size_t>(ib)});
        }
        std::sort(ranges_.begin(), ranges_.end(),
                  [](auto const& l, auto const& r) { return l.begin < r.begin; });
        for (std::size_t i = 1; i < ranges_.size(); ++i) {
            detail::require(ranges_[i - 1].end <= ranges_[i].begin,
                            "region intervals overlap");
        }
    }

    static Region full(Grid1D const& grid)
    {
        return Region{grid, {{grid.x_min(), grid.x_max()}}};
    }

    static Region empty(Grid1D const& grid)
    {
        return Region{grid, std::vector<Interval>{}};
    }

    //! Build directly from sorted, disjoint index ranges.
    static Region from_ranges(Grid1D const& grid, std::vector<IndexRange> ranges)
    {
        Region r = empty(grid);
        for (std::size_t i = 0; i < ranges.size(); ++i) {
            detail::require(ranges[i].begin < ranges[i].end
                                && ranges[i].end <= grid.size(),
                            "index range invalid for grid");
            detail::require(i == 0 || ranges[i - 1].end <= ranges[i].begin,
                            "index ranges must be sorted and disjoint");
        }
        r.ranges_ = std::move(ranges);
        return r;
    }

    Grid1D const& grid() const noexcept { return grid_; }
    std::vector<IndexRange> const& ranges() const noexcept { return ranges_; }
    bool is_empty() const noexcept { return ranges_.empty(); }

    std::size_t point_count() const noexcept
    {
        std::size_t c = 0;
        for (auto const& r : ranges_) {
            c += r.size();
        }
        return c;
    }

    bool contains(std::size_t j) const noexcept
    {
        return std::any_of(ranges_.begin(), ranges_.end(), [j](auto const& r) {
            return j >= r.begin && j < r.end;
        });
    }

    bool is_subset_of(Region const& other) const noexcept
    {
        return std::all_of(ranges_.begin(), ranges_.end(), [&](auto const& r) {
            return std::any_of(other.ranges_.begin(), other.ranges_.end(),
                               [&](auto const& o) {
                                   return o.begin <= r.begin && r.end <= o.end;
                               });
        });
    }

    Region complement() const
    {
        std::vector<IndexRange> out;
        std::size_t cursor = 0;
        for (auto const& r : ranges_) {
            if (r.begin > cursor) {
                out.push_back({cursor, r.begin});
            }
            cursor = r.end;
        }
        if (cursor < grid_.size()) {
            out.push_back({cursor, grid_.size()});
        }
        return from_ranges(grid_, std::move(out));
    }

    //! Intervals in coordinates; reconstructs this region when re-snapped.
    std::vector<Interval> intervals() const
    {
        std::vector<Interval> out;
        out.reserve(ranges_.size());
        for (auto const& r : ranges_) {
            std::size_t const last = std::min(r.end, grid_.size() - 1);
            out.push_back({grid_.x(r.begin), grid_.x(last)});
        }
        return out;
    }

    //! h * sum over covered points of values[j].
    template<class Range>
    double integrate(Range const& values) const
    {
        double s = 0.0;
        for (auto const& r : ranges_) {
            for (std::size_t j = r.begin; j < r.end; ++j) {
                s += values[j];
            }
        }
        return grid_.h() * s;
    }

  private:
    Grid1D grid_;
    std::vector<IndexRange> ranges_;
};

} // namespace pfsdt
