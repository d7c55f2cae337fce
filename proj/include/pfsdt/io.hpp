// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "born_tests.hpp"
#include "detection.hpp"
#include "deviation.hpp"
#include "ensemble.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "montecarlo.hpp"

namespace pfsdt {

using json = nlohmann::json;

//! %.17g formatting used for every numeric value in text output.
inline std::string format_number(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace io {

namespace detail {

template<class T>
T get_field(json const& j, char const* key)
{
    if (!j.is_object() || !j.contains(key)) {
        throw ConfigError(std::string("missing key '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (json::exception const& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

template<class T>
T get_or(json const& j, char const* key, T fallback)
{
    if (!j.is_object() || !j.contains(key)) {
        return fallback;
    }
    return get_field<T>(j, key);
}

} // namespace detail

//// GRID ////

inline json grid_to_json(Grid1D const& g)
{
    return {{"x_min", g.x_min()}, {"x_max", g.x_max()}, {"n", g.size()}};
}

inline Grid1D grid_from_json(json const& j)
{
    return Grid1D{detail::get_field<double>(j, "x_min"),
                  detail::get_field<double>(j, "x_max"),
                  detail::get_field<std::size_t>(j, "n")};
}

//// FIELDS ////

inline json field_to_json(ComplexField const& f)
{
    json amp = json::array();
    for (auto const& a : f.amplitudes()) {
        amp.push_back({a.real(), a.imag()});
    }
    return {{"grid", grid_to_json(f.grid())}, {"amplitudes", std::move(amp)}};
}

inline ComplexField field_from_json(json const& j)
{
    Grid1D const g = grid_from_json(detail::get_field<json>(j, "grid"));
    auto const raw = detail::get_field<std::vector<std::array<double, 2>>>(j, "amplitudes");
    std::vector<complex_t> amp;
    amp.reserve(raw.size());
    for (auto const& p : raw) {
        amp.emplace_back(p[0], p[1]);
    }
    return ComplexField{g, std::move(amp)};
}

/*!
 * Named state definition on a grid. Supported kinds:
 *   {"kind": "box", "a", "b"}
 *   {"kind": "step", "H", "k"}            (grid must span the support)
 *   {"kind": "gaussian", "center", "width", "momentum"?}
 *   {"kind": "amplitudes", "amplitudes": [[re, im], ...], "normalize"?}
 */
inline WaveFunction state_from_json(json const& j, Grid1D const& grid)
{
    auto const kind = detail::get_field<std::string>(j, "kind");
    if (kind == "box") {
        return box_state(grid, detail::get_field<double>(j, "a"),
                         detail::get_field<double>(j, "b"));
    }
    if (kind == "step") {
        return build_step_state(detail::get_field<double>(j, "H"),
                                detail::get_field<double>(j, "k"), grid);
    }
    if (kind == "gaussian") {
        return gaussian_packet(grid, detail::get_field<double>(j, "center"),
                               detail::get_field<double>(j, "width"),
                               detail::get_or<double>(j, "momentum", 0.0));
    }
    if (kind == "amplitudes") {
        json f = {{"grid", grid_to_json(grid)}, {"amplitudes", j.at("amplitudes")}};
        ComplexField field = field_from_json(f);
        if (detail::get_or<bool>(j, "normalize", false)) {
            return WaveFunction::normalized(field);
        }
        return WaveFunction{std::move(field)};
    }
    throw ConfigError("unknown state kind '" + kind + "'");
}

//// ENSEMBLES ////

/*!
 * {"kappa", "modulus_model", "components": [{"weight", "state_ref"}],
 *  "states": {ref: field}}; states are written as explicit amplitudes.
 */
inline json ensemble_to_json(EnsembleSpec const& ens)
{
    json comps = json::array();
    json states = json::object();
    for (std::size_t i = 0; i < ens.components().size(); ++i) {
        std::string const ref = "psi" + std::to_string(i);
        comps.push_back({{"weight", ens.components()[i].weight}, {"state_ref", ref}});
        json amp = field_to_json(ens.components()[i].state.field())["amplitudes"];
        states[ref] = {{"kind", "amplitudes"}, {"amplitudes", std::move(amp)}};
    }
    return {{"kappa", ens.kappa()},
            {"modulus_model", std::string(to_string(ens.modulus_model()))},
            {"components", std::move(comps)},
            {"grid", grid_to_json(ens.grid())},
            {"states", std::move(states)}};
}

//! Resolve an ensemble whose components reference named states.
inline EnsembleSpec ensemble_from_json(json const& j,
                                       std::map<std::string, WaveFunction> const& states)
{
    std::vector<EnsembleComponent> comps;
    json const defs = detail::get_field<json>(j, "components");
    for (auto const& c : defs) {
        auto const ref = detail::get_field<std::string>(c, "state_ref");
        auto const it = states.find(ref);
        if (it == states.end()) {
            throw ConfigError("unknown state_ref '" + ref + "'");
        }
        comps.push_back({detail::get_field<double>(c, "weight"), it->second});
    }
    return EnsembleSpec{std::move(comps), detail::get_field<double>(j, "kappa"),
                        modulus_model_from_string(
                            detail::get_or<std::string>(j, "modulus_model", "gaussian"))};
}

//! Self-contained form written by ensemble_to_json.
inline EnsembleSpec ensemble_from_json(json const& j)
{
    Grid1D const grid = grid_from_json(detail::get_field<json>(j, "grid"));
    std::map<std::string, WaveFunction> states;
    json const defs = detail::get_field<json>(j, "states");
    for (auto const& [ref, def] : defs.items()) {
        states.emplace(ref, state_from_json(def, grid));
    }
    return ensemble_from_json(j, states);
}

//// REGIONS AND DETECTORS ////

//! A region is a list of [a, b] pairs.
inline json region_to_json(Region const& r)
{
    json out = json::array();
    for (auto const& iv : r.intervals()) {
        out.push_back({iv.a, iv.b});
    }
    return out;
}

inline Region region_from_json(json const& j, Grid1D const& grid)
{
    std::vector<Interval> ivs;
    try {
        for (auto const& p : j.get<std::vector<std::array<double, 2>>>()) {
            ivs.push_back({p[0], p[1]});
        }
    } catch (json::exception const& e) {
        throw ConfigError(std::string("region must be a list of [a, b] pairs: ") + e.what());
    }
    return Region{grid, ivs};
}

inline json detector_to_json(DetectorSpec const& d)
{
    json out = {{"power_law", std::string(to_string(d.power_law()))}};
    if (d.locality()) {
        out["locality"] = region_to_json(*d.locality());
    }
    return out;
}

inline DetectorSpec detector_from_json(json const& j, Grid1D const& grid)
{
    PowerLaw const law = power_law_from_string(
        detail::get_or<std::string>(j, "power_law", "quadratic"));
    if (j.contains("locality") && !j.at("locality").is_null()) {
        return DetectorSpec{law, region_from_json(j.at("locality"), grid)};
    }
    return DetectorSpec{law};
}

//// MONTE CARLO ////

inline json run_config_to_json(RunConfig const& c)
{
    return {{"n_samples", c.n_samples},
            {"seed", c.seed},
            {"n_streams", c.n_streams},
            {"batch_count", c.batch_count}};
}

inline RunConfig run_config_from_json(json const& j)
{
    RunConfig c;
    c.n_samples = detail::get_or<std::uint64_t>(j, "n_samples", c.n_samples);
    c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);
    c.n_streams = detail::get_or<std::uint64_t>(j, "n_streams", c.n_streams);
    c.batch_count = detail::get_or<std::uint64_t>(j, "batch_count", c.batch_count);
    c.workers = detail::get_or<unsigned>(j, "workers", 0u);
    c.validate();
    return c;
}

inline json estimate_to_json(MCEstimate const& e)
{
    return {{"mean", e.mean},
            {"stderr", e.std_error},
            {"n", e.n},
            {"seed", e.seed},
            {"rejected", e.rejected},
            {"bias", e.bias}};
}

inline MCEstimate estimate_from_json(json const& j)
{
    MCEstimate e;
    e.mean = detail::get_field<double>(j, "mean");
    e.std_error = detail::get_field<double>(j, "stderr");
    e.n = detail::get_field<std::uint64_t>(j, "n");
    e.seed = detail::get_field<std::uint64_t>(j, "seed");
    e.rejected = detail::get_or<std::uint64_t>(j, "rejected", 0);
    e.bias = detail::get_or<double>(j, "bias", 0.0);
    return e;
}

//! One JSON-lines record: the estimate plus the run configuration.
inline std::string estimate_json_line(MCEstimate const& e,
                                      RunConfig const& cfg,
                                      json const& label = json::object())
{
    json rec = label;
    rec["estimate"] = estimate_to_json(e);
    rec["run_config"] = run_config_to_json(cfg);
    return rec.dump();
}

//// BORN TESTS ////

inline json qubit_to_json(Qubit const& q)
{
    return json::array({{q[0].real(), q[0].imag()}, {q[1].real(), q[1].imag()}});
}

inline json pair_to_json(ObservablePair const& p)
{
    return {{"a", {qubit_to_json(p.a.plus), qubit_to_json(p.a.minus)}},
            {"b", {qubit_to_json(p.b.plus), qubit_to_json(p.b.minus)}}};
}

inline json matrix_to_json(TransitionMatrix const& m)
{
    return json::array({{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}});
}

} // namespace io
} // namespace pfsdt
