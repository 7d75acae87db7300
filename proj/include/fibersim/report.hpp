#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fibersim/components.hpp"

namespace fibersim {

inline constexpr const char* kReportSchema = "fibersim-report/1";

// Machine-readable report; keys are sorted, so equal reports serialize to
// equal bytes. `run` is stored verbatim under "run".
nlohmann::json ReportJson(const ModelReport& report, const nlohmann::json& run = nlohmann::json::object());

// Aligned-column text rendering of the same data.
std::string ReportTable(const ModelReport& report);

struct DiffRow {
  std::string key;  // e.g. "dram.T.write_bytes", "einsum.Z.bottleneck"
  std::string a, b;
  bool numeric = false;
  double delta = 0;  // b - a for numbers, 0 for equal text, 1 otherwise
};

// Side-by-side comparison of two report JSONs. Throws Error("report") when
// either document does not carry the report schema.
std::vector<DiffRow> DiffReports(const nlohmann::json& a, const nlohmann::json& b);
std::string DiffTable(const std::vector<DiffRow>& rows);

}  // namespace fibersim
