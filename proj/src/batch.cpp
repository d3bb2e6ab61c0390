#include "mrac/batch.hpp"

#include "mrac/trace_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <omp.h>

namespace mrac {

namespace {

Json load_doc(const Json& entry, const std::string& base_dir, std::string& label) {
  if (!entry.is_string()) {
    label = entry.is_object() ? entry.value("name", std::string("inline")) : "inline";
    return entry;
  }
  std::filesystem::path p = entry.get<std::string>();
  if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
  label = p.filename().string();
  std::ifstream in(p);
  if (!in) throw ConfigError({p.string() + ": cannot open file"});
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& err) {
    throw ConfigError({p.string() + ": " + err.what()});
  }
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace

void set_dotted(Json& doc, const std::string& path, const Json& value) {
  Json* node = &doc;
  std::stringstream ss(path);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(ss, key, '.')) keys.push_back(key);
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->contains(keys[i]) || !(*node)[keys[i]].is_object()) (*node)[keys[i]] = Json::object();
    node = &(*node)[keys[i]];
  }
  (*node)[keys.back()] = value;
}

std::vector<BatchItem> expand_batch(const Json& spec, const std::string& base_dir) {
  if (!spec.is_object()) throw ConfigError({"batch: expected a JSON object"});
  std::vector<BatchItem> items;
  if (spec.contains("configs")) {
    if (!spec["configs"].is_array()) throw ConfigError({"configs: expected an array"});
    for (const auto& entry : spec["configs"]) {
      BatchItem it;
      try {
        it.doc = load_doc(entry, base_dir, it.label);
      } catch (const ConfigError& err) {
        // keep the slot so the failure shows up as a row
        it.label = entry.is_string() ? entry.get<std::string>() : "inline";
        it.doc = Json{{"__load_error", err.what()}};
      }
      items.push_back(std::move(it));
    }
  }
  if (spec.contains("sweep")) {
    if (!spec.contains("base")) throw ConfigError({"base: required when sweep is given"});
    const Json& sweep = spec["sweep"];
    if (!sweep.is_object()) throw ConfigError({"sweep: expected an object of arrays"});
    std::string base_label;
    const Json base = load_doc(spec["base"], base_dir, base_label);
    std::vector<std::pair<std::string, Json>> axes;
    for (const auto& [k, v] : sweep.items()) {
      if (!v.is_array()) throw ConfigError({"sweep." + k + ": expected an array"});
      axes.emplace_back(k, v);
    }
    bool empty = axes.empty();
    for (const auto& a : axes) empty = empty || a.second.empty();
    if (!empty) {
      std::vector<std::size_t> idx(axes.size(), 0);
      while (true) {
        BatchItem it;
        it.doc = base;
        it.label = base_label;
        for (std::size_t a = 0; a < axes.size(); ++a) {
          const Json& v = axes[a].second[idx[a]];
          set_dotted(it.doc, axes[a].first, v);
          it.label += " " + axes[a].first + "=" + v.dump();
        }
        items.push_back(std::move(it));
        std::size_t a = axes.size();
        while (a > 0) {
          --a;
          if (++idx[a] < axes[a].second.size()) break;
          idx[a] = 0;
          if (a == 0) return items;
        }
      }
    }
  }
  return items;
}

BatchRow run_batch_item(const BatchItem& item, std::size_t index) {
  BatchRow row;
  row.index = index;
  row.label = item.label;
  try {
    if (item.doc.contains("__load_error"))
      throw ConfigError({item.doc["__load_error"].get<std::string>()});
    if (item.doc.contains("gains")) row.gains = item.doc["gains"].dump();
    if (item.doc.contains("scheme") && item.doc["scheme"].is_string())
      row.scheme = item.doc["scheme"].get<std::string>();
    const ScenarioConfig cfg = load_config_json(item.doc);
    const RunOutcome out = run(cfg);
    row.completed = true;
    row.diverged = out.trace.diverged;
    row.summary = out.trace.summary;
    row.invariants_pass = !out.trace.diverged && out.invariants.pass();
    if (out.trace.diverged) row.error = out.trace.failure;
    else if (!out.invariants.pass() && !out.invariants.violations.empty())
      row.error = out.invariants.violations.front();
  } catch (const ValidationError& err) {
    std::string msg;
    for (const auto& s : err.issues()) msg += (msg.empty() ? "" : "; ") + s;
    row.error = msg.empty() ? err.what() : msg;
  } catch (const std::exception& err) {
    row.error = err.what();
  }
  return row;
}

std::vector<BatchRow> run_batch_serial(const std::vector<BatchItem>& items) {
  std::vector<BatchRow> rows;
  rows.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) rows.push_back(run_batch_item(items[i], i));
  return rows;
}

std::vector<BatchRow> run_batch_parallel(const std::vector<BatchItem>& items, int jobs) {
  std::vector<BatchRow> rows(items.size());
  const long count = static_cast<long>(items.size());
  if (jobs < 1) jobs = omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (long i = 0; i < count; ++i)
    rows[static_cast<std::size_t>(i)] =
        run_batch_item(items[static_cast<std::size_t>(i)], static_cast<std::size_t>(i));
  return rows;
}

void write_batch_csv(std::ostream& out, const std::vector<BatchRow>& rows) {
  out << "index,label,status,scheme,gains,records,diverged,invariants,sup_e,last_window_max_e,"
         "sum_eps_sq_over_m_sq,tail_fraction_dtheta,error\n";
  for (const auto& r : rows) {
    const TraceSummary& s = r.summary;
    out << r.index << ',' << csv_cell(r.label) << ',' << (r.completed ? "completed" : "failed") << ','
        << csv_cell(r.scheme) << ',' << csv_cell(r.gains) << ',';
    if (r.completed) {
      out << s.records << ',' << (r.diverged ? "true" : "false") << ','
          << (r.invariants_pass ? "pass" : "fail") << ',' << format_double(s.sup_e) << ','
          << format_double(s.last_window_max_e) << ',' << format_double(s.sum_eps_sq_over_m_sq)
          << ',' << format_double(s.tail_fraction_dtheta);
    } else {
      out << ",,,,,,";
    }
    out << ',' << csv_cell(r.error) << '\n';
  }
}

}  // namespace mrac
