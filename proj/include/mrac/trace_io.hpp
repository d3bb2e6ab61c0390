#pragma once

#include "mrac/diagnostics.hpp"

#include <json.hpp>

#include <ostream>
#include <string>
#include <vector>

namespace mrac {

/// Fixed column order: t, x_1..x_n, xm_1..xm_n, e_1..e_n, u_1..u_M,
/// eps_1..eps_n, m, V, dV, proj_fired. Values use %.17g; V and dV read "nan"
/// when the truth is unknown. proj_fired is the per-channel bitmask.
std::vector<std::string> trace_columns(Index states, Index inputs);
void write_trace_csv(std::ostream& out, const SimulationTrace& trace);

/// Parameter history: t, theta_<row>_<col> (column-major), rho_j.
void write_params_csv(std::ostream& out, const SimulationTrace& trace);

/// gnuplot data: "# t e_1 .. e_n" then whitespace separated rows.
void write_plot_dat(std::ostream& out, const SimulationTrace& trace);

nlohmann::json summary_json(const SimulationTrace& trace);

std::string format_double(double v);

}  // namespace mrac
