// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "detection.hpp"
#include "deviation.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "rng.hpp"

namespace pfsdt {

/*!
 * Monte Carlo run parameters. (seed, n_streams, n_samples, batch_count)
 * fully determine the result; `workers` only sets the thread count.
 */
struct RunConfig
{
    std::uint64_t n_samples = 100000;
    std::uint64_t seed = 1;
    std::uint64_t n_streams = 8;
    std::uint64_t batch_count = 32;
    unsigned workers = 0; //!< 0 = hardware concurrency

    void validate() const
    {
        detail::require(batch_count >= 2, "batch_count must be at least 2");
        detail::require(n_samples >= batch_count, "n_samples must be >= batch_count");
        detail::require(n_streams >= 1 && n_streams <= n_samples,
                        "n_streams must lie in [1, n_samples]");
    }
};

struct MCEstimate
{
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t n = 0;
    std::uint64_t seed = 0;
    std::uint64_t rejected = 0; //!< zero-weight draws that were resampled
    double bias = 0.0;          //!< jackknife bias estimate over batches
};

inline constexpr std::uint64_t max_resample_attempts = 10000;

namespace detail {

struct BatchSums
{
    std::vector<double> num;
    double den = 0.0;
    std::uint64_t rejected = 0;
};

//! Stream owning global sample index k.
inline std::uint64_t stream_of(std::uint64_t k, RunConfig const& cfg) noexcept
{
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(k) * cfg.n_streams) / cfg.n_samples);
}

inline std::uint64_t batch_begin(std::uint64_t b, RunConfig const& cfg) noexcept
{
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(b) * cfg.n_samples) / cfg.batch_count);
}

template<class Body>
void for_each_batch(RunConfig const& cfg, Body&& body)
{
    unsigned workers = cfg.workers;
    if (workers == 0) {
        workers = std::max(1u, std::thread::hardware_concurrency());
    }
    workers = static_cast<unsigned>(
        std::min<std::uint64_t>(workers, cfg.batch_count));
    if (workers <= 1) {
        for (std::uint64_t b = 0; b < cfg.batch_count; ++b) {
            body(b);
        }
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::uint64_t b = next++; b < cfg.batch_count && !failed; b = next++) {
                try {
                    body(b);
                } catch (...) {
                    if (!failed.exchange(true)) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

/*!
 * Ratio estimator engine. For every sample, `eval(phi, num)` fills the
 * numerators and returns the denominator; zero-denominator fields are
 * redrawn. Returns one estimate of sum(num_i) / sum(den) per numerator.
 */
template<class Eval>
std::vector<MCEstimate> ratio_estimate(EnsembleSpec const& ens,
                                       RunConfig const& cfg,
                                       std::size_t n_num,
                                       Eval&& eval)
{
    cfg.validate();
    std::vector<BatchSums> batches(cfg.batch_count);
    for_each_batch(cfg, [&](std::uint64_t b) {
        BatchSums& acc = batches[b];
        acc.num.assign(n_num, 0.0);
        std::vector<double> num(n_num);
        for (std::uint64_t k = batch_begin(b, cfg); k < batch_begin(b + 1, cfg); ++k) {
            std::uint64_t const stream = stream_of(k, cfg);
            for (std::uint64_t attempt = 0;; ++attempt) {
                if (attempt == max_resample_attempts) {
                    throw DegenerateError(
                        "ensemble produced only zero-weight fields");
                }
                CounterRng rng{cfg.seed, stream, k, attempt};
                ComplexField const phi = sample_field(ens, rng);
                double const den = eval(phi, std::span<double>(num));
                if (den > 0.0) {
                    for (std::size_t i = 0; i < n_num; ++i) {
                        acc.num[i] += num[i];
                    }
                    acc.den += den;
                    break;
                }
                ++acc.rejected;
            }
        }
    });

    auto const nb = static_cast<double>(cfg.batch_count);
    double den_total = 0.0;
    std::uint64_t rejected = 0;
    for (auto const& bs : batches) {
        den_total += bs.den;
        rejected += bs.rejected;
    }
    std::vector<MCEstimate> out(n_num);
    for (std::size_t i = 0; i < n_num; ++i) {
        double num_total = 0.0;
        for (auto const& bs : batches) {
            num_total += bs.num[i];
        }
        double const ratio = num_total / den_total;
        double const den_mean = den_total / nb;
        double ss = 0.0;
        double jack = 0.0;
        for (auto const& bs : batches) {
            double const e = bs.num[i] - ratio * bs.den;
            ss += e * e;
            jack += (num_total - bs.num[i]) / (den_total - bs.den);
        }
        MCEstimate& est = out[i];
        est.mean = ratio;
        est.std_error = std::sqrt(ss / (nb * (nb - 1.0))) / den_mean;
        est.n = cfg.n_samples;
        est.seed = cfg.seed;
        est.rejected = rejected;
        est.bias = (nb - 1.0) * (jack / nb - ratio);
    }
    return out;
}

//! Prefix sums of |phi|^2 and |phi|^4 for O(1) region powers.
class PowerProfile
{
  public:
    PowerProfile(ComplexField const& phi, PowerLaw law)
        : h_{phi.grid().h()}, p2_(phi.size() + 1, 0.0)
    {
        bool const quartic = law == PowerLaw::two_plus_four;
        if (quartic) {
            p4_.assign(phi.size() + 1, 0.0);
        }
        for (std::size_t j = 0; j < phi.size(); ++j) {
            double const a2 = std::norm(phi[j]);
            p2_[j + 1] = p2_[j] + a2;
            if (quartic) {
                p4_[j + 1] = p4_[j] + a2 * a2;
            }
        }
    }

    double power(Region const& region, PowerLaw law) const noexcept
    {
        double s = 0.0;
        for (auto const& r : region.ranges()) {
            s += p2_[r.end] - p2_[r.begin];
            if (law == PowerLaw::two_plus_four && !p4_.empty()) {
                s += p4_[r.end] - p4_[r.begin];
            }
        }
        return h_ * s;
    }

  private:
    double h_;
    std::vector<double> p2_;
    std::vector<double> p4_;
};

} // namespace detail

/*!
 * Ratio estimator E[pi(I, phi)] / E[pi(O, phi)] of the detection
 * probability for each region; the selection step enters as the importance
 * weight pi(O, phi). Every region must lie inside the detector domain.
 */
inline std::vector<MCEstimate> estimate_detection(EnsembleSpec const& ens,
                                                  DetectorSpec const& det,
                                                  std::span<Region const> regions,
                                                  RunConfig const& cfg)
{
    Region const domain = det.domain(ens.grid());
    for (auto const& r : regions) {
        detail::require(r.grid() == ens.grid(), "region grid mismatch");
        detail::require(r.is_subset_of(domain),
                        "detection region must lie inside the detector domain");
    }
    PowerLaw const law = det.power_law();
    return detail::ratio_estimate(
        ens, cfg, regions.size(), [&](ComplexField const& phi, std::span<double> num) {
            detail::PowerProfile const prof{phi, law};
            for (std::size_t i = 0; i < regions.size(); ++i) {
                num[i] = prof.power(regions[i], law);
            }
            return prof.power(domain, law);
        });
}

inline MCEstimate estimate_detection(EnsembleSpec const& ens,
                                     DetectorSpec const& det,
                                     Region const& region,
                                     RunConfig const& cfg)
{
    return estimate_detection(ens, det, std::span<Region const>(&region, 1), cfg).front();
}

//! E||phi||^4 / E||phi||^2: mean total power of the selected field.
inline MCEstimate estimate_selected_power(EnsembleSpec const& ens, RunConfig const& cfg)
{
    return detail::ratio_estimate(ens, cfg, 1,
                                  [](ComplexField const& phi, std::span<double> num) {
                                      double const p = phi.norm2();
                                      num[0] = p * p;
                                      return p;
                                  })
        .front();
}

//! Plain Monte Carlo mean of a classical variable.
inline MCEstimate estimate_average(EnsembleSpec const& ens,
                                   PolynomialVariable const& f,
                                   RunConfig const& cfg)
{
    return detail::ratio_estimate(ens, cfg, 1,
                                  [&](ComplexField const& phi, std::span<double> num) {
                                      num[0] = f(phi);
                                      return 1.0;
                                  })
        .front();
}

//! Monte Carlo mean of E int |phi|^4 / kappa^2, the sampled counterpart of c4.
inline MCEstimate estimate_c4(EnsembleSpec const& ens, RunConfig const& cfg)
{
    Region const full = Region::full(ens.grid());
    double const k2 = ens.kappa() * ens.kappa();
    return detail::ratio_estimate(ens, cfg, 1,
                                  [&](ComplexField const& phi, std::span<double> num) {
                                      num[0] = power4(phi, full) / k2;
                                      return 1.0;
                                  })
        .front();
}

struct TwoStepEstimate
{
    MCEstimate estimate;
    std::uint64_t draws = 0;               //!< fields drawn, accepted or not
    std::uint64_t envelope_violations = 0; //!< weights above the envelope
    double envelope = 0.0;
};

inline constexpr std::uint64_t envelope_pilot_samples = 2048;
inline constexpr double envelope_inflation = 1.5;

/*!
 * Literal two-step pipeline: select a field by rejection sampling against
 * an envelope of the selection weight, then draw an outcome point with
 * probability proportional to its local power. Estimates P(outcome in I).
 *
 * The envelope is 1.5 x the largest weight of a pilot run on a reserved
 * stream; weights above it are accepted and counted as violations.
 */
inline TwoStepEstimate simulate_two_step(EnsembleSpec const& ens,
                                         DetectorSpec const& det,
                                         Region const& region,
                                         RunConfig const& cfg)
{
    cfg.validate();
    Grid1D const& grid = ens.grid();
    Region const domain = det.domain(grid);
    detail::require(region.is_subset_of(domain),
                    "detection region must lie inside the detector domain");
    PowerLaw const law = det.power_law();
    std::uint64_t const pilot_stream = cfg.n_streams;

    double envelope = 0.0;
    for (std::uint64_t k = 0; k < envelope_pilot_samples; ++k) {
        CounterRng rng{cfg.seed, pilot_stream, k};
        envelope = std::max(envelope, region_power(sample_field(ens, rng), domain, law));
    }
    if (!(envelope > 0.0)) {
        throw DegenerateError("ensemble produced only zero-weight fields");
    }
    envelope *= envelope_inflation;

    struct Batch
    {
        double hits = 0.0;
        std::uint64_t draws = 0;
        std::uint64_t rejected = 0;
        std::uint64_t violations = 0;
    };
    std::vector<Batch> batches(cfg.batch_count);
    std::uint64_t const max_draws = 1000000;
    detail::for_each_batch(cfg, [&](std::uint64_t b) {
        Batch& acc = batches[b];
        for (std::uint64_t k = detail::batch_begin(b, cfg);
             k < detail::batch_begin(b + 1, cfg); ++k) {
            std::uint64_t const stream = detail::stream_of(k, cfg);
            for (std::uint64_t attempt = 0;; ++attempt) {
                if (attempt == max_draws) {
                    throw DegenerateError("two-step selection never accepted a field");
                }
                CounterRng rng{cfg.seed, stream, k, attempt};
                ComplexField const phi = sample_field(ens, rng);
                ++acc.draws;
                double const w = region_power(phi, domain, law);
                if (!(w > 0.0)) {
                    ++acc.rejected;
                    continue;
                }
                if (w > envelope) {
                    ++acc.violations;
                } else if (rng.uniform() * envelope >= w) {
                    continue;
                }
                // outcome step: inverse-CDF over the domain's point powers
                double target = rng.uniform() * w / grid.h();
                std::size_t outcome = domain.ranges().back().end - 1;
                bool found = false;
                for (auto const& r : domain.ranges()) {
                    for (std::size_t j = r.begin; j < r.end && !found; ++j) {
                        double const a2 = std::norm(phi[j]);
                        double const local
                            = law == PowerLaw::quadratic ? a2 : a2 + a2 * a2;
                        if (target < local) {
                            outcome = j;
                            found = true;
                        }
                        target -= local;
                    }
                    if (found) {
                        break;
                    }
                }
                acc.hits += region.contains(outcome) ? 1.0 : 0.0;
                break;
            }
        }
    });

    TwoStepEstimate out;
    out.envelope = envelope;
    double hits = 0.0;
    auto const nb = static_cast<double>(cfg.batch_count);
    for (auto const& bs : batches) {
        hits += bs.hits;
        out.draws += bs.draws;
        out.estimate.rejected += bs.rejected;
        out.envelope_violations += bs.violations;
    }
    auto const n = static_cast<double>(cfg.n_samples);
    double const mean = hits / n;
    double ss = 0.0;
    for (std::uint64_t b = 0; b < cfg.batch_count; ++b) {
        auto const size = static_cast<double>(detail::batch_begin(b + 1, cfg)
                                              - detail::batch_begin(b, cfg));
        double const e = batches[b].hits - mean * size;
        ss += e * e;
    }
    double const mean_size = n / nb;
    out.estimate.mean = mean;
    out.estimate.std_error = std::sqrt(ss / (nb * (nb - 1.0))) / mean_size;
    out.estimate.n = cfg.n_samples;
    out.estimate.seed = cfg.seed;
    return out;
}

struct SweepRow
{
    double kappa;
    MCEstimate estimate;
    double closed_form; //!< exact detection probability
    double born;        //!< quadratic detection probability
    double delta;       //!< estimate - born
    double delta_first_order; //!< first-order deviation; NaN for mixtures
};

/*!
 * Repeat a detection estimate over a list of dispersions. The delta column
 * is compared against the first-order deviation (zero for quadratic
 * detectors, the closed form for pure "2+4" ensembles).
 */
inline std::vector<SweepRow> kappa_sweep(EnsembleSpec const& templ,
                                         DetectorSpec const& det,
                                         Region const& region,
                                         std::vector<double> const& kappas,
                                         RunConfig const& cfg)
{
    for (double k : kappas) {
        detail::require(k > 0.0, "kappa values must be positive");
    }
    std::vector<SweepRow> rows;
    rows.reserve(kappas.size());
    for (double k : kappas) {
        EnsembleSpec const ens = templ.with_kappa(k);
        SweepRow row{};
        row.kappa = k;
        row.estimate = estimate_detection(ens, det, region, cfg);
        row.closed_form = detect(ens, det, region);
        row.born = det.locality() ? detect_local(ens, *det.locality(), region)
                                  : detect_quadratic_region(ens, region);
        row.delta = row.estimate.mean - row.born;
        if (det.power_law() == PowerLaw::quadratic) {
            row.delta_first_order = 0.0;
        } else if (ens.is_pure() && !det.locality()) {
            row.delta_first_order = delta_closed_form(
                ens.components().front().state, region, k, ens.modulus_model());
        } else {
            row.delta_first_order = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace pfsdt
