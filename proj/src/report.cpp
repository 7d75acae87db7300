#include "fibersim/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "fibersim/error.hpp"

namespace fibersim {

using nlohmann::json;

namespace {

json Traffic(const std::map<std::string, TensorTraffic>& dram) {
  json out = json::object();
  for (const auto& [tensor, t] : dram)
    out[tensor] = {{"read_bytes", t.read_bytes}, {"write_bytes", t.write_bytes}};
  return out;
}

std::string Num(double v) {
  std::ostringstream os;
  if (v == static_cast<double>(static_cast<long long>(v)) && std::abs(v) < 1e15)
    os << static_cast<long long>(v);
  else
    os << std::setprecision(6) << v;
  return os.str();
}

class Table {
 public:
  explicit Table(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::string str() const {
    std::vector<std::size_t> width;
    for (const auto& r : rows_)
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (width.size() <= i) width.push_back(0);
        width[i] = std::max(width[i], r[i].size());
      }
    // Columns whose cells all parse as numbers are right-aligned.
    std::vector<bool> numeric(width.size(), true);
    for (std::size_t k = 1; k < rows_.size(); ++k)
      for (std::size_t i = 0; i < rows_[k].size(); ++i) {
        const std::string& c = rows_[k][i];
        char* end = nullptr;
        std::strtod(c.c_str(), &end);
        if (c.empty() || end != c.c_str() + c.size()) numeric[i] = false;
      }
    std::ostringstream os;
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      const auto& r = rows_[k];
      std::string line;
      for (std::size_t i = 0; i < r.size(); ++i) {
        const std::string& cell = r[i];
        std::string pad(width[i] - cell.size(), ' ');
        line += numeric[i] ? pad + cell : cell + pad;
        if (i + 1 < r.size()) line += "  ";
      }
      while (!line.empty() && line.back() == ' ') line.pop_back();
      os << line << '\n';
      if (k == 0) {
        std::size_t total = 0;
        for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i + 1 < width.size() ? 2 : 0);
        os << std::string(total, '-') << '\n';
      }
    }
    return os.str();
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

void Flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) Flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else {
    out[prefix] = j;
  }
}

// Reports are compared by name rather than position: einsums by output,
// components by name, blocks by index.
std::map<std::string, json> Comparable(const json& r) {
  std::map<std::string, json> out;
  Flatten(r.value("totals", json::object()), "totals", out);
  Flatten(r.value("dram", json::object()), "dram", out);
  for (const auto& e : r.value("einsums", json::array())) {
    const std::string base = "einsum." + e.value("output", std::string("?"));
    out[base + ".cycles"] = e.value("cycles", 0.0);
    out[base + ".bottleneck"] = e.value("bottleneck", std::string());
    out[base + ".energy_pj"] = e.value("energy_pj", 0.0);
    for (const auto& c : e.value("components", json::array())) {
      const std::string cb = base + "." + c.value("name", std::string("?"));
      out[cb + ".cycles"] = c.value("cycles", 0.0);
      Flatten(c.value("actions", json::object()), cb, out);
    }
    Flatten(e.value("dram", json::object()), base + ".dram", out);
  }
  const auto& blocks = r.value("blocks", json::array());
  for (std::size_t i = 0; i < blocks.size(); ++i) out["block." + std::to_string(i) + ".cycles"] = blocks[i].value("cycles", 0.0);
  out["diagnostics"] = static_cast<double>(r.value("diagnostics", json::array()).size());
  return out;
}

std::string Text(const json& v) {
  if (v.is_null()) return "-";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return Num(v.get<double>());
  return v.dump();
}

}  // namespace

json ReportJson(const ModelReport& report, const json& run) {
  json j;
  j["schema"] = kReportSchema;
  j["run"] = run;
  j["totals"] = {{"cycles", report.cycles},
                 {"seconds", report.seconds},
                 {"energy_pj", report.energy_pj},
                 {"dram_bytes", report.dram_bytes()}};
  j["dram"] = Traffic(report.dram);
  j["blocks"] = json::array();
  for (const auto& b : report.blocks)
    j["blocks"].push_back({{"einsums", b.einsums}, {"cycles", b.cycles}, {"seconds", b.seconds}});
  j["einsums"] = json::array();
  for (const auto& e : report.einsums) {
    json je;
    je["output"] = e.output;
    je["block"] = e.block;
    je["topology"] = e.topology;
    je["clock"] = e.clock;
    je["cycles"] = e.cycles;
    je["bottleneck"] = e.bottleneck;
    je["dram"] = Traffic(e.dram);
    double energy = 0;
    je["components"] = json::array();
    for (const auto& c : e.components) {
      json actions = json::object();
      for (const auto& [a, v] : c.actions) actions[a] = v;
      je["components"].push_back({{"name", c.name},
                                  {"class", ToString(c.cls)},
                                  {"kind", c.kind},
                                  {"instances", c.instances},
                                  {"cycles", c.cycles},
                                  {"energy_pj", c.energy_pj},
                                  {"actions", actions}});
      energy += c.energy_pj;
    }
    je["energy_pj"] = energy;
    j["einsums"].push_back(je);
  }
  j["diagnostics"] = report.diagnostics;
  return j;
}

std::string ReportTable(const ModelReport& report) {
  std::ostringstream os;
  Table totals({"total", "cycles", "seconds", "energy_pj", "dram_bytes"});
  totals.add({"cascade", Num(report.cycles), Num(report.seconds), Num(report.energy_pj), Num(report.dram_bytes())});
  os << totals.str() << '\n';

  Table blocks({"block", "einsums", "cycles"});
  for (std::size_t i = 0; i < report.blocks.size(); ++i) {
    std::string names;
    for (const auto& n : report.blocks[i].einsums) names += (names.empty() ? "" : ",") + n;
    blocks.add({std::to_string(i), names, Num(report.blocks[i].cycles)});
  }
  os << blocks.str() << '\n';

  Table dram({"tensor", "read_bytes", "write_bytes", "total"});
  for (const auto& [t, tr] : report.dram) dram.add({t, Num(tr.read_bytes), Num(tr.write_bytes), Num(tr.total())});
  os << dram.str() << '\n';

  Table comps({"einsum", "component", "kind", "cycles", "energy_pj", "actions"});
  for (const auto& e : report.einsums) {
    for (const auto& c : e.components) {
      std::string actions;
      for (const auto& [a, v] : c.actions) actions += (actions.empty() ? "" : " ") + a + "=" + Num(v);
      comps.add({e.output, c.name + (c.name == e.bottleneck ? "*" : ""), c.kind, Num(c.cycles), Num(c.energy_pj), actions});
    }
  }
  os << comps.str();
  os << "(* bottleneck)\n";
  if (!report.diagnostics.empty()) {
    os << "\ndiagnostics:\n";
    for (const auto& d : report.diagnostics) os << "  " << d << '\n';
  }
  return os.str();
}

std::vector<DiffRow> DiffReports(const json& a, const json& b) {
  for (const json* r : {&a, &b})
    if (!r->is_object() || !r->contains("schema") || (*r)["schema"] != kReportSchema)
      throw Error("report", std::string("not a ") + kReportSchema + " document");
  std::map<std::string, json> ca, cb;
  try {
    ca = Comparable(a);
    cb = Comparable(b);
  } catch (const json::exception& e) {
    throw Error("report", std::string("malformed report: ") + e.what());
  }
  std::set<std::string> keys;
  for (const auto& [k, v] : ca) keys.insert(k);
  for (const auto& [k, v] : cb) keys.insert(k);
  std::vector<DiffRow> rows;
  for (const auto& k : keys) {
    DiffRow row;
    row.key = k;
    json va = ca.count(k) ? ca[k] : json(), vb = cb.count(k) ? cb[k] : json();
    row.a = Text(va);
    row.b = Text(vb);
    row.numeric = (va.is_number() || va.is_null()) && (vb.is_number() || vb.is_null()) && !(va.is_null() && vb.is_null());
    if (row.numeric)
      row.delta = (vb.is_null() ? 0.0 : vb.get<double>()) - (va.is_null() ? 0.0 : va.get<double>());
    else
      row.delta = va == vb ? 0 : 1;
    rows.push_back(row);
  }
  return rows;
}

std::string DiffTable(const std::vector<DiffRow>& rows) {
  Table t({"key", "a", "b", "delta"});
  for (const auto& r : rows) {
    t.add({r.key, r.a, r.b, r.numeric ? Num(r.delta) : (r.delta == 0 ? "same" : "changed")});
  }
  return t.str();
}

}  // namespace fibersim
