#pragma once

#include "mrac/scenario.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace mrac {

/// One member run of a batch: the config document plus a label saying where
/// it came from.
struct BatchItem {
  std::string label;
  Json doc;
};

/// Batch document:
///   {"configs": [doc or "path", ...],
///    "base": doc or "path", "sweep": {"gains.gamma": [0.5, 1.0], ...}}
/// Sweep axes are dotted paths into the base document; their cartesian
/// product is appended after the explicit configs. A sweep with no axes, or
/// any axis with no values, contributes no runs. Relative paths resolve
/// against base_dir.
std::vector<BatchItem> expand_batch(const Json& spec, const std::string& base_dir = ".");

void set_dotted(Json& doc, const std::string& path, const Json& value);

struct BatchRow {
  std::size_t index = 0;
  std::string label;
  bool completed = false;  // false: validation or runtime error before a trace existed
  std::string error;
  std::string scheme;
  std::string gains;  // compact gains section
  bool diverged = false;
  bool invariants_pass = false;
  TraceSummary summary;
};

BatchRow run_batch_item(const BatchItem& item, std::size_t index);

std::vector<BatchRow> run_batch_serial(const std::vector<BatchItem>& items);
/// Same rows as the serial runner; runs fan out over up to `jobs` threads.
std::vector<BatchRow> run_batch_parallel(const std::vector<BatchItem>& items, int jobs);

void write_batch_csv(std::ostream& out, const std::vector<BatchRow>& rows);

}  // namespace mrac
