#include "mrac/trace_io.hpp"

#include <cmath>
#include <cstdio>

namespace mrac {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> trace_columns(Index n, Index M) {
  std::vector<std::string> cols{"t"};
  for (const char* p : {"x_", "xm_", "e_"})
    for (Index i = 1; i <= n; ++i) cols.push_back(p + std::to_string(i));
  for (Index j = 1; j <= M; ++j) cols.push_back("u_" + std::to_string(j));
  for (Index i = 1; i <= n; ++i) cols.push_back("eps_" + std::to_string(i));
  for (const char* c : {"m", "V", "dV", "proj_fired"}) cols.push_back(c);
  return cols;
}

namespace {

void join(std::ostream& out, const std::vector<std::string>& cells, char sep) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << sep;
    out << cells[i];
  }
  out << '\n';
}

void append(std::vector<std::string>& row, const Vector& v, Index expect) {
  for (Index i = 0; i < expect; ++i) row.push_back(i < v.size() ? format_double(v(i)) : "nan");
}

}  // namespace

void write_trace_csv(std::ostream& out, const SimulationTrace& trace) {
  const Index n = trace.states, M = trace.inputs;
  join(out, trace_columns(n, M), ',');
  std::vector<std::string> row;
  for (const auto& r : trace.records) {
    row.clear();
    row.push_back(format_double(r.time));
    append(row, r.x, n);
    append(row, r.xm, n);
    append(row, r.e, n);
    append(row, r.u, M);
    append(row, r.eps, n);
    row.push_back(format_double(r.m));
    row.push_back(format_double(r.V));
    row.push_back(format_double(r.dV));
    row.push_back(std::to_string(r.proj_fired));
    join(out, row, ',');
  }
}

void write_params_csv(std::ostream& out, const SimulationTrace& trace) {
  if (trace.records.empty()) return;
  const auto& first = trace.records.front();
  std::vector<std::string> head{"t"};
  for (Index c = 0; c < first.theta.cols(); ++c)
    for (Index r = 0; r < first.theta.rows(); ++r)
      head.push_back("theta_" + std::to_string(r + 1) + "_" + std::to_string(c + 1));
  for (Index j = 0; j < first.rho.size(); ++j) head.push_back("rho_" + std::to_string(j + 1));
  join(out, head, ',');
  std::vector<std::string> row;
  for (const auto& rec : trace.records) {
    row.clear();
    row.push_back(format_double(rec.time));
    for (Index c = 0; c < rec.theta.cols(); ++c)
      for (Index r = 0; r < rec.theta.rows(); ++r) row.push_back(format_double(rec.theta(r, c)));
    for (Index j = 0; j < rec.rho.size(); ++j) row.push_back(format_double(rec.rho(j)));
    join(out, row, ',');
  }
}

void write_plot_dat(std::ostream& out, const SimulationTrace& trace) {
  out << "# t";
  for (Index i = 1; i <= trace.states; ++i) out << " e_" << i;
  out << '\n';
  std::vector<std::string> row;
  for (const auto& r : trace.records) {
    row.clear();
    row.push_back(format_double(r.time));
    append(row, r.e, trace.states);
    join(out, row, ' ');
  }
}

nlohmann::json summary_json(const SimulationTrace& trace) {
  const TraceSummary& s = trace.summary;
  // json has no NaN/inf; emit null there
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json j;
  j["scheme"] = to_string(trace.scheme);
  j["time_domain"] = to_string(trace.domain);
  j["states"] = trace.states;
  j["inputs"] = trace.inputs;
  j["step_size"] = trace.step_size;
  j["horizon"] = trace.horizon;
  j["records"] = s.records;
  j["diverged"] = s.diverged;
  if (!trace.failure.empty()) j["failure"] = trace.failure;
  j["has_V"] = trace.has_V;
  j["gamma0"] = num(trace.gamma0);
  j["sup_e"] = num(s.sup_e);
  j["sup_theta"] = num(s.sup_theta);
  j["last_window_max_e"] = num(s.last_window_max_e);
  j["sum_eps_sq_over_m_sq"] = num(s.sum_eps_sq_over_m_sq);
  j["sum_dtheta_sq"] = num(s.sum_dtheta_sq);
  j["sum_drho_sq"] = num(s.sum_drho_sq);
  j["tail_fraction_eps"] = num(s.tail_fraction_eps);
  j["tail_fraction_dtheta"] = num(s.tail_fraction_dtheta);
  j["tail_fraction_drho"] = num(s.tail_fraction_drho);
  j["projection_events"] = s.projection_events;
  return j;
}

}  // namespace mrac
