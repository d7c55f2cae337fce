// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch.hpp>

#include "test_helpers.hpp"

using namespace pfsdt;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("delta_step_analytic", "[deviation]")
{
    CHECK(delta_step_analytic(1.0, 1.0, 0.01) == 0.0);
    CHECK(delta_step_analytic(3.0, 1.0, 0.5) == 0.0);
    // k = 2: 4 (1 - 4) / 25 = -12/25
    for (double kappa : {1e-1, 1e-2, 1e-3}) {
        CHECK_THAT(delta_step_analytic(1.0, 2.0, kappa), WithinAbs(-0.48 * kappa, 1e-12));
    }
    CHECK_THAT(delta_step_analytic(1.0, 2.0, 0.01, ModulusModel::gaussian),
               WithinAbs(-0.96 * 0.01, 1e-12));
    // linear in kappa, quadratic in H
    CHECK_THAT(delta_step_analytic(2.0, 3.0, 0.02), WithinRel(8.0 * delta_step_analytic(1.0, 3.0, 0.01), 1e-14));
    CHECK_THROWS_AS(delta_step_analytic(1.0, 2.0, 0.0), std::invalid_argument);
}

TEST_CASE("build_step_state", "[deviation]")
{
    StepState const s{1.0, 2.0};
    CHECK_THAT(s.L(), WithinAbs(0.4, 1e-15));
    CHECK(s.left_value() == 1.0);
    CHECK(s.right_value() == 2.0);

    Grid1D const g = step_state_grid(s, 513);
    WaveFunction const psi = build_step_state(1.0, 2.0, g);
    CHECK_THAT(psi.field().norm2(), WithinAbs(1.0, 1e-12));
    // aligned grid: renormalization leaves the analytic values
    CHECK_THAT(std::abs(psi[0]), WithinAbs(1.0, 1e-12));
    CHECK_THAT(std::abs(psi[300]), WithinAbs(2.0, 1e-12));
    CHECK(std::abs(psi[512]) == 0.0);
    Region const left = step_left_region(s, g);
    CHECK_THAT(power2(psi.field(), left), WithinAbs(1.0 / 5.0, 1e-12));
    CHECK_THAT(power4(psi.field(), Region::full(g)), WithinAbs(17.0 / 5.0, 1e-11));
    CHECK_THAT(power4(psi.field(), left), WithinAbs(1.0 / 5.0, 1e-12));

    // k = 1 is the symmetric box
    StepState const sym{1.0, 1.0};
    Grid1D const gs = step_state_grid(sym, 101);
    WaveFunction const box = build_step_state(1.0, 1.0, gs);
    WaveFunction const ref = box_state(gs, -0.5 * sym.L(), 0.5 * sym.L());
    for (std::size_t j = 0; j < gs.size(); ++j) {
        REQUIRE(std::abs(box[j] - ref[j]) < 1e-14);
    }

    CHECK_THROWS_AS(build_step_state(1.0, 2.0, step_state_grid(s, 9)), std::invalid_argument);
    CHECK_THROWS_AS(build_step_state(1.0, 2.0, Grid1D{-0.1, 0.2, 513}), std::invalid_argument);
    // wider grid is accepted
    CHECK_NOTHROW(build_step_state(1.0, 2.0, Grid1D{-0.4, 0.4, 1025}));
}

TEST_CASE("delta_closed_form worked cases", "[deviation]")
{
    auto const g = build_grid(-1.0, 1.0, 401);
    WaveFunction const box = box_state(g, -0.5, 0.5);

    // support inside I
    CHECK_THAT(delta_closed_form(box, Region{g, {{-0.6, 0.7}}}, 0.1), WithinAbs(0.0, 1e-12));
    // symmetric box, I = right half
    CHECK_THAT(delta_closed_form(box, Region{g, {{0.0, 0.5}}}, 0.1), WithinAbs(0.0, 1e-12));

    StepState const s{1.0, 2.0};
    Grid1D const gs = step_state_grid(s, 513);
    WaveFunction const psi = build_step_state(1.0, 2.0, gs);
    Region const left = step_left_region(s, gs);
    for (double kappa : {1e-1, 1e-2, 1e-3}) {
        CHECK_THAT(delta_closed_form(psi, left, kappa),
                   WithinAbs(delta_step_analytic(1.0, 2.0, kappa), 1e-9));
        CHECK_THAT(delta_closed_form(psi, left, kappa, ModulusModel::gaussian),
                   WithinAbs(delta_step_analytic(1.0, 2.0, kappa, ModulusModel::gaussian), 1e-9));
    }

    WaveFunction const flat = build_step_state(1.0, 1.0, step_state_grid(StepState{1.0, 1.0}, 257));
    CHECK_THAT(delta_closed_form(flat, step_left_region(StepState{1.0, 1.0}, flat.grid()), 0.3),
               WithinAbs(0.0, 1e-12));
}

TEST_CASE("deviation sum rule and sign law", "[deviation][property]")
{
    auto const g = build_grid(-1.0, 1.0, 301);
    for (std::uint64_t t = 0; t < 50; ++t) {
        CounterRng rng{17, 0, t};
        WaveFunction const psi = random_state(g, rng);
        Region const r = testing::random_region(g, rng);
        double const kappa = 0.01 + rng.uniform();
        double const d = delta_closed_form(psi, r, kappa);
        CHECK_THAT(d + delta_closed_form(psi, r.complement(), kappa), WithinAbs(0.0, 1e-12));
    }
    for (double k : {0.25, 0.5, 0.9, 1.1, 1.5, 2.0, 4.0}) {
        StepState const s{1.3, k};
        Grid1D const gs = step_state_grid(s, 257);
        double const d = delta_closed_form(build_step_state(1.3, k, gs), step_left_region(s, gs), 0.01);
        CHECK((k > 1.0 ? d < 0.0 : d > 0.0));
        CHECK_THAT(d, WithinAbs(delta_step_analytic(1.3, k, 0.01), 1e-9));
    }
}

TEST_CASE("first-order consistency of the exact 2+4 probability", "[deviation]")
{
    StepState const s{1.0, 2.0};
    Grid1D const g = step_state_grid(s, 513);
    WaveFunction const psi = build_step_state(1.0, 2.0, g);
    Region const left = step_left_region(s, g);
    std::vector<double> kappas{1e-1, 1e-2, 1e-3};
    std::vector<double> logk, logr;
    for (double kappa : kappas) {
        auto const ens = pure_ensemble(psi, kappa, ModulusModel::phase_only);
        double const rem = detect_power24_region(ens, left) - detect_quadratic_region(ens, left)
                           - delta_closed_form(psi, left, kappa);
        logk.push_back(std::log(kappa));
        logr.push_back(std::log(std::abs(rem)));
    }
    double const order = (logr.back() - logr.front()) / (logk.back() - logk.front());
    CHECK(order >= 1.8);
}

TEST_CASE("c4_constant", "[deviation]")
{
    auto const g = build_grid(-0.5, 0.5, 201);
    WaveFunction const box = box_state(g, -0.5, 0.5);
    double const h2 = std::norm(box[0]);
    CHECK_THAT(c4_constant(pure_ensemble(box, 0.3, ModulusModel::phase_only)), WithinAbs(h2, 1e-12));
    CHECK_THAT(c4_constant(pure_ensemble(box, 0.3, ModulusModel::gaussian)), WithinAbs(2 * h2, 1e-12));

    StepState const s{1.0, 2.0};
    Grid1D const gs = step_state_grid(s, 513);
    auto const step = pure_ensemble(build_step_state(1.0, 2.0, gs), 0.01, ModulusModel::phase_only);
    CHECK_THAT(c4_constant(step), WithinAbs(17.0 / 5.0, 1e-11));
}

TEST_CASE("classical and quantum averages", "[deviation]")
{
    auto const g = build_grid(-0.5, 0.5, 101);
    auto const n = static_cast<Eigen::Index>(g.size());
    WaveFunction const box = box_state(g, -0.5, 0.5);
    double const h2 = std::norm(box[0]);
    Eigen::MatrixXcd const id = Eigen::MatrixXcd::Identity(n, n);
    double const kappa = 0.07;

    auto const pure = pure_ensemble(box, kappa, ModulusModel::phase_only);
    CHECK_THAT(classical_average(pure, PolynomialVariable{id}), WithinAbs(kappa, 1e-14));
    Eigen::VectorXcd const v = as_vector(box);
    PolynomialVariable const proj{g.h() * (v * v.adjoint())};
    CHECK_THAT(classical_average(pure, proj), WithinAbs(kappa, 1e-14));
    CHECK_THAT(classical_average(pure, PolynomialVariable{id, 1.0}),
               WithinAbs(kappa + kappa * kappa * h2, 1e-14));

    DensityMatrix const rho = quantum_state_of(pure);
    CHECK_THAT(quantum_average(rho, id), WithinAbs(1.0, 1e-12));
    Region const r{g, {{-0.2, 0.3}}};
    CHECK_THAT(quantum_average(rho, indicator_operator(r)), WithinAbs(trace_probability(rho, r), 1e-14));
    CHECK_THAT(quantum_average(rho, position_operator(g)), WithinAbs(mean_position(pure), 1e-12));

    Eigen::MatrixXcd bad = id;
    bad(0, 1) = 1.0;
    CHECK_THROWS_AS(quantum_average(rho, bad), std::invalid_argument);
    CHECK_THROWS_AS(PolynomialVariable{bad}, std::invalid_argument);

    // evaluation of f on a field: the pure quadratic part returns ||phi||^2
    CounterRng rng{3, 0};
    ComplexField const phi = random_state(g, rng).field().scaled(0.4);
    CHECK_THAT(PolynomialVariable{id}(phi), WithinAbs(phi.norm2(), 1e-14));
    CHECK_THAT(power24_variable(g)(phi), WithinAbs(power24(phi, Region::full(g)), 1e-14));
}

TEST_CASE("asymptotic_check", "[deviation]")
{
    auto const g = build_grid(-0.5, 0.5, 101);
    auto const n = static_cast<Eigen::Index>(g.size());
    WaveFunction const box = box_state(g, -0.5, 0.5);
    auto const ens = pure_ensemble(box, 1.0, ModulusModel::phase_only);
    std::vector<double> const kappas{1e-1, 1e-2, 1e-3};

    auto const quad = asymptotic_check(ens, kappas, PolynomialVariable{position_operator(g)});
    CHECK(quad.exact_match);
    CHECK_FALSE(quad.slope);
    CHECK(quad.max_abs_remainder <= 1e-13);

    auto const quart = asymptotic_check(ens, kappas, PolynomialVariable{Eigen::MatrixXcd::Identity(n, n), 1.0});
    REQUIRE(quart.slope);
    CHECK_THAT(*quart.slope, WithinAbs(2.0, 0.2));

    CHECK_THROWS_AS(asymptotic_check(ens, {1e-1, 1e-2}, PolynomialVariable{position_operator(g)}),
                    std::invalid_argument);
    CHECK_THROWS_AS(asymptotic_check(ens, {0.6, 1e-3}, PolynomialVariable{position_operator(g)}),
                    std::invalid_argument);
}

TEST_CASE("normalized average matches the detected mean", "[deviation]")
{
    auto const g = build_grid(-1.0, 1.0, 201);
    std::vector<double> xs(g.size());
    for (std::size_t j = 0; j < xs.size(); ++j) {
        xs[j] = g.x(j);
    }
    for (std::uint64_t t = 0; t < 10; ++t) {
        CounterRng rng{44, 0, t};
        auto const ens = testing::random_mixture(g, 3, 0.05 + 0.1 * static_cast<double>(t),
                                                 t % 2 ? ModulusModel::gaussian : ModulusModel::phase_only, rng);
        auto const pw = normalized_average_check(ens, xs);
        CHECK_THAT(pw.classical_ratio, WithinAbs(pw.detected_mean, 1e-10));
    }
}
