// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

#include "errors.hpp"
#include "rng.hpp"

namespace pfsdt {

using complex_t = std::complex<double>;

//! Two-level state (c_plus, c_minus) in a reference basis.
class Qubit
{
  public:
    Qubit(complex_t plus, complex_t minus) : c_{plus, minus}
    {
        detail::require(std::abs(std::norm(plus) + std::norm(minus) - 1.0) <= 1e-12,
                        "qubit must be normalized");
    }

    complex_t operator[](std::size_t i) const noexcept { return c_[i]; }

    static Qubit normalized(complex_t plus, complex_t minus)
    {
        double const n = std::sqrt(std::norm(plus) + std::norm(minus));
        detail::require(n > 0.0, "cannot normalize a zero qubit");
        return Qubit{plus / n, minus / n};
    }

  private:
    std::array<complex_t, 2> c_;
};

//! <u, v> = sum u_i conj(v_i).
inline complex_t inner(Qubit const& u, Qubit const& v) noexcept
{
    return u[0] * std::conj(v[0]) + u[1] * std::conj(v[1]);
}

//! Eigenbasis (e_plus, e_minus) of a two-valued observable.
struct QubitBasis
{
    Qubit plus;
    Qubit minus;

    QubitBasis(Qubit p, Qubit m) : plus{p}, minus{m}
    {
        detail::require(std::abs(inner(plus, minus)) <= 1e-12,
                        "observable basis must be orthonormal");
    }

    //! Eigenvector for outcome +1 (index 0) or -1 (index 1).
    Qubit const& operator[](std::size_t i) const noexcept
    {
        return i == 0 ? plus : minus;
    }
};

struct ObservablePair
{
    QubitBasis a;
    QubitBasis b;
};

//! Outcome index for a +/-1 value.
inline std::size_t outcome_index(int value)
{
    detail::require(value == 1 || value == -1, "outcome must be +1 or -1");
    return value == 1 ? 0 : 1;
}

/*!
 * Transition probabilities p(beta | alpha) with entry (beta, alpha);
 * indices 0 and 1 stand for +1 and -1. Columns sum to one.
 */
class TransitionMatrix
{
  public:
    explicit TransitionMatrix(std::array<std::array<double, 2>, 2> entries)
        : p_{entries}
    {
        for (auto const& row : p_) {
            for (double v : row) {
                detail::require(v >= 0.0 && v <= 1.0,
                                "transition probabilities must lie in [0, 1]");
            }
        }
        for (std::size_t alpha = 0; alpha < 2; ++alpha) {
            detail::require(std::abs(p_[0][alpha] + p_[1][alpha] - 1.0) <= 1e-12,
                            "transition matrix must be left stochastic");
        }
    }

    double operator()(std::size_t beta, std::size_t alpha) const noexcept
    {
        return p_[beta][alpha];
    }

    std::array<std::array<double, 2>, 2> const& entries() const noexcept
    {
        return p_;
    }

  private:
    std::array<std::array<double, 2>, 2> p_;
};

//! p(beta | alpha) = |<e_beta^b, e_alpha^a>|^2.
inline TransitionMatrix transition_matrix(ObservablePair const& pair)
{
    std::array<std::array<double, 2>, 2> m{};
    for (std::size_t beta = 0; beta < 2; ++beta) {
        for (std::size_t alpha = 0; alpha < 2; ++alpha) {
            m[beta][alpha] = std::min(1.0, std::norm(inner(pair.b[beta], pair.a[alpha])));
        }
    }
    // Renormalize columns so round-off never breaks the left-stochastic check.
    for (std::size_t alpha = 0; alpha < 2; ++alpha) {
        double const s = m[0][alpha] + m[1][alpha];
        m[0][alpha] /= s;
        m[1][alpha] /= s;
    }
    return TransitionMatrix{m};
}

//! Largest deviation of a row sum from one; zero for doubly stochastic input.
inline double double_stochasticity_residual(TransitionMatrix const& m) noexcept
{
    double r = 0.0;
    for (std::size_t beta = 0; beta < 2; ++beta) {
        r = std::max(r, std::abs(m(beta, 0) + m(beta, 1) - 1.0));
    }
    return r;
}

inline constexpr double degenerate_probability = 1e-12;

struct InterferenceReconstruction
{
    double probability; //!< right-hand side of the interference formula
    double theta;       //!< phase in (-pi, pi]
    double born;        //!< |<psi, e_beta^b>|^2 computed directly
    double total_probability_term;
    double interference_term;
};

/*!
 * Reconstruct P(b = beta) as the total-probability term plus the
 * 2 cos(theta) cross term. With c_alpha = <psi, e_alpha^a><e_alpha^a, e_beta^b>,
 * theta = arg(c_plus conj(c_minus)).
 */
inline InterferenceReconstruction
interference_reconstruct(Qubit const& psi, ObservablePair const& pair, int beta)
{
    std::size_t const b = outcome_index(beta);
    std::array<complex_t, 2> c{};
    std::array<double, 2> q{};
    std::array<double, 2> t{};
    for (std::size_t alpha = 0; alpha < 2; ++alpha) {
        complex_t const overlap_state = inner(psi, pair.a[alpha]);
        complex_t const overlap_basis = inner(pair.a[alpha], pair.b[b]);
        q[alpha] = std::norm(overlap_state);
        t[alpha] = std::norm(overlap_basis);
        if (q[alpha] <= degenerate_probability || t[alpha] <= degenerate_probability) {
            throw DegenerateError("interference term vanishes");
        }
        c[alpha] = overlap_state * overlap_basis;
    }
    InterferenceReconstruction r{};
    r.theta = std::arg(c[0] * std::conj(c[1]));
    r.total_probability_term = q[0] * t[0] + q[1] * t[1];
    r.interference_term
        = 2.0 * std::cos(r.theta) * std::sqrt(q[0] * t[0] * q[1] * t[1]);
    r.probability = r.total_probability_term + r.interference_term;
    r.born = std::norm(inner(psi, pair.b[b]));
    return r;
}

/*!
 * Interference magnitude
 *   |p_b - sum_alpha q_alpha p(beta|alpha)| / (2 sqrt(q_+ p(beta|+) q_- p(beta|-))),
 * bounded by one whenever the inputs follow Born's rule.
 */
inline double interference_ratio(double p_b,
                                 std::array<double, 2> const& q,
                                 TransitionMatrix const& m,
                                 int beta)
{
    std::size_t const b = outcome_index(beta);
    double const prod = q[0] * m(b, 0) * q[1] * m(b, 1);
    if (!(prod > 0.0)) {
        throw DegenerateError("interference ratio denominator vanishes");
    }
    double const classical = q[0] * m(b, 0) + q[1] * m(b, 1);
    return std::abs(p_b - classical) / (2.0 * std::sqrt(prod));
}

/*!
 * Violation flag for the equal-transition case (all p(beta|alpha) = 1/2):
 * true iff |p_+ - 1/2| > sqrt(q_+ (1 - q_+)).
 */
inline bool simplified_criterion(double p_plus, double q_plus)
{
    detail::require(p_plus > 0.0 && p_plus < 1.0 && q_plus > 0.0 && q_plus < 1.0,
                    "criterion inputs must lie in (0, 1)");
    return std::abs(p_plus - 0.5) > std::sqrt(q_plus * (1.0 - q_plus));
}

//! Haar-random qubit basis.
inline QubitBasis random_basis(CounterRng& rng)
{
    // Columns of a Haar unitary: a random unit vector and its orthogonal.
    complex_t const u0 = rng.complex_normal(1.0);
    complex_t const u1 = rng.complex_normal(1.0);
    Qubit const plus = Qubit::normalized(u0, u1);
    complex_t const phase = std::polar(1.0, rng.phase());
    Qubit const minus{-std::conj(plus[1]) * phase, std::conj(plus[0]) * phase};
    return QubitBasis{plus, minus};
}

inline Qubit random_qubit(CounterRng& rng)
{
    return Qubit::normalized(rng.complex_normal(1.0), rng.complex_normal(1.0));
}

//! True probabilities for one interference experiment with outcome beta.
struct TrueProbabilities
{
    double p_b;       //!< P(b = beta)
    double q_plus;    //!< P(a = +1)
    double t_plus;    //!< P(b = beta | a = +1)
    double t_minus;   //!< P(b = beta | a = -1)
};

struct HarnessConfig
{
    std::uint64_t n_trials = 100000;
    std::uint64_t seed = 1;
    double z_level = 3.0;
    std::size_t repetitions = 200;
};

inline constexpr std::uint64_t harness_min_trials = 100;

struct HarnessResult
{
    double ratio_true;          //!< interference ratio of the true probabilities
    double mean_ratio;          //!< average over repetitions of the estimated ratio
    double mean_stderr;         //!< average delta-method standard error
    double violation_rate;      //!< fraction of repetitions with significant violation
    std::size_t violations;
    std::size_t repetitions;
    std::size_t degenerate;     //!< repetitions with an empirical zero denominator
    bool underpowered;          //!< n_trials below the harness floor; never significant
    bool violation_detected;    //!< violation_rate above one half
};

namespace detail {

inline double ratio_of(double p, double q, double tp, double tm)
{
    double const prod = q * tp * (1.0 - q) * tm;
    if (!(prod > 0.0)) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return std::abs(p - q * tp - (1.0 - q) * tm) / (2.0 * std::sqrt(prod));
}

} // namespace detail

/*!
 * Frequency-level test of the interference bound. Each repetition draws
 * independent binomial counts (n_trials each) for p_b, q_+, and the two
 * transition probabilities, forms the estimated ratio with a delta-method
 * standard error, and flags a violation when ratio - 1 > z * stderr.
 */
inline HarnessResult frequency_harness(TrueProbabilities const& truth,
                                       HarnessConfig const& cfg)
{
    for (double v : {truth.p_b, truth.q_plus, truth.t_plus, truth.t_minus}) {
        detail::require(v >= 0.0 && v <= 1.0, "true probabilities must lie in [0, 1]");
    }
    detail::require(cfg.n_trials >= 1 && cfg.repetitions >= 1,
                    "harness needs at least one trial and repetition");
    HarnessResult res{};
    res.ratio_true = detail::ratio_of(truth.p_b, truth.q_plus, truth.t_plus, truth.t_minus);
    res.repetitions = cfg.repetitions;
    res.underpowered = cfg.n_trials < harness_min_trials;

    auto const n = static_cast<double>(cfg.n_trials);
    double sum_ratio = 0.0;
    double sum_se = 0.0;
    std::size_t valid = 0;
    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
        CounterRng rng{cfg.seed, 0x6861726e657373ULL, rep};
        std::array<double, 4> est{};
        std::array<double, 4> const p{truth.p_b, truth.q_plus, truth.t_plus, truth.t_minus};
        for (std::size_t i = 0; i < 4; ++i) {
            std::binomial_distribution<std::uint64_t> draw(cfg.n_trials, p[i]);
            est[i] = static_cast<double>(draw(rng)) / n;
        }
        double const r = detail::ratio_of(est[0], est[1], est[2], est[3]);
        if (!std::isfinite(r)) {
            ++res.degenerate;
            continue;
        }
        // delta method with central differences on each proportion
        double var = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            double const step = 1e-6;
            auto lo = est;
            auto hi = est;
            lo[i] = std::max(0.0, est[i] - step);
            hi[i] = std::min(1.0, est[i] + step);
            double const rl = detail::ratio_of(lo[0], lo[1], lo[2], lo[3]);
            double const rh = detail::ratio_of(hi[0], hi[1], hi[2], hi[3]);
            double const grad = (std::isfinite(rl) && std::isfinite(rh) && hi[i] > lo[i])
                                    ? (rh - rl) / (hi[i] - lo[i])
                                    : 0.0;
            // floor the binomial variance at one count to keep tiny cells honest
            double const pv = std::max(est[i] * (1.0 - est[i]), 1.0 / n) / n;
            var += grad * grad * pv;
        }
        double const se = std::sqrt(var);
        sum_ratio += r;
        sum_se += se;
        ++valid;
        if (!res.underpowered && r - 1.0 > cfg.z_level * se) {
            ++res.violations;
        }
    }
    res.mean_ratio = valid ? sum_ratio / static_cast<double>(valid)
                           : std::numeric_limits<double>::quiet_NaN();
    res.mean_stderr = valid ? sum_se / static_cast<double>(valid)
                            : std::numeric_limits<double>::quiet_NaN();
    res.violation_rate
        = static_cast<double>(res.violations) / static_cast<double>(cfg.repetitions);
    res.violation_detected = res.violation_rate > 0.5;
    return res;
}

} // namespace pfsdt
