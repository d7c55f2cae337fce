// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>

namespace pfsdt {

namespace detail {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

} // namespace detail

/*!
 * Counter-based random bit generator.
 *
 * Every draw is a pure function of (seed, stream, index, attempt, draw
 * counter), so sample k of stream s can be regenerated without replaying
 * the samples before it. Satisfies UniformRandomBitGenerator.
 */
class CounterRng
{
  public:
    using result_type = std::uint64_t;

    constexpr CounterRng(std::uint64_t seed,
                         std::uint64_t stream,
                         std::uint64_t index = 0,
                         std::uint64_t attempt = 0) noexcept
        : key_{derive_key(seed, stream, index, attempt)}
    {
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept
    {
        return std::numeric_limits<result_type>::max();
    }

    constexpr result_type operator()() noexcept
    {
        return detail::mix64(key_ + (++counter_) * detail::golden_gamma);
    }

    //! Uniform double in (0, 1].
    double uniform_open0() noexcept
    {
        return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53;
    }

    //! Uniform double in [0, 1).
    double uniform() noexcept
    {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    //! Uniform phase in [0, 2pi).
    double phase() noexcept { return 2.0 * std::numbers::pi * uniform(); }

    //! Circularly-symmetric complex normal with E|z|^2 = variance.
    std::complex<double> complex_normal(double variance) noexcept
    {
        double const radius = std::sqrt(-variance * std::log(uniform_open0()));
        return std::polar(radius, phase());
    }

    //! Real standard normal (Box-Muller, one branch).
    double normal() noexcept
    {
        double const r = std::sqrt(-2.0 * std::log(uniform_open0()));
        return r * std::cos(phase());
    }

  private:
    static constexpr std::uint64_t derive_key(std::uint64_t seed,
                                              std::uint64_t stream,
                                              std::uint64_t index,
                                              std::uint64_t attempt) noexcept
    {
        using detail::mix64;
        std::uint64_t k = mix64(seed + detail::golden_gamma);
        k = mix64(k ^ mix64(stream + 0x632be59bd9b4e019ULL));
        k = mix64(k ^ mix64(index + 0x8cb92ba72f3d8dd7ULL));
        k = mix64(k ^ mix64(attempt + 0xd1b54a32d192ed03ULL));
        return k;
    }

    std::uint64_t key_;
    std::uint64_t counter_{0};
};

} // namespace pfsdt
