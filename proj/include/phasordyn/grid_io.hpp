#pragma once

#include <memory>
#include <string>
#include <vector>

#include "phasordyn/power_grid.hpp"
#include "phasordyn/scenarios.hpp"
#include "phasordyn/state.hpp"

namespace phasordyn {

// Grid file schema (JSON, UTF-8):
//   { "version": "1",
//     "omega_nominal_hz": 50.0,
//     "nodes": [ { "name": ..., "type": ..., "params": { ... } }, ... ],
//     "lines": [ { "name": ..., "type": ..., "from": ..., "to": ...,
//                  "params": { ... } }, ... ] }
// Complex parameters are split as NAME_re / NAME_im; type and parameter
// names are the canonical model identifiers. File order defines layout
// order. FourthOrderEq "Ω" and RLLine "ω_N" may be omitted and default to
// 2π · omega_nominal_hz.

/// Parses a grid document. Throws SchemaError with the offending path.
PowerGrid read_powergrid(const std::string& text);
PowerGrid read_powergrid_file(const std::string& path);

/// Serializes a grid; write∘read and read∘write are identities on valid
/// inputs and repeated writes are byte-identical.
std::string write_powergrid(const PowerGrid& grid);
void write_powergrid_file(const PowerGrid& grid, const std::string& path);

// State files use the layout naming with a flat values map:
//   { "version": "1", "values": { "OWNER:VAR": number, ... } }
State read_state(const std::string& text, std::shared_ptr<const StateLayout> layout);
std::string write_state(const State& state);

/// Samples the solution at t0, t0+step, ..., t1 (a final row at t1 is added
/// when the step does not divide the span). Columns: "t", every layout
/// variable as "OWNER:VAR" in layout order, then "OWNER:v", "OWNER:p",
/// "OWNER:q" per node. Values print with 17 significant digits.
std::string write_solution_csv(const PowerGridSolution& solution, double sample_step);

/// Self-contained SVG with one panel per selection. A bare variable name
/// ("v", "p", "ω", ...) plots every owner that resolves it; "OWNER:VAR"
/// plots a single series. Deterministic for fixed input; throws LookupError
/// for unresolvable selections.
std::string render_plot_svg(const PowerGridSolution& solution,
                            const std::vector<std::string>& selections);

}  // namespace phasordyn
