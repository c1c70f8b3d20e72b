#include "arrowip/report.hpp"

#include <cstdio>

#include <json.hpp>

namespace arrowip {

std::string format_log_row(const LogRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%4d %+.10e %.4e %.4e %.4e %.4e %.4e %.4e %d", row.iter,
                row.objective, row.inf_pr, row.inf_du, row.mu, row.alpha, row.delta_w, row.sigma,
                row.sections);
  return buf;
}

void write_log(std::ostream& os, const ConvergenceReport& r) {
  os << "iter objective inf_pr inf_du mu alpha delta_w sigma sections\n";
  for (const auto& row : r.log) os << format_log_row(row) << '\n';
}

void write_timings(std::ostream& os, const PhaseTimes& t) {
  const std::pair<const char*, double> rows[] = {
      {"init", t.init},           {"kkt_assembly", t.kkt_assembly},
      {"sc_assembly", t.sc_assembly}, {"sc_rhs", t.sc_rhs},
      {"sc_solve", t.sc_solve},   {"local_solve", t.local_solve},
      {"function_eval", t.function_eval}};
  char buf[64];
  for (const auto& [name, value] : rows) {
    std::snprintf(buf, sizeof buf, "%-14s %10.3f\n", name, value);
    os << buf;
  }
}

namespace {

nlohmann::json array(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace

std::string solution_json(const grid::GridSolution& s, const grid::GridCase& c,
                          const ConvergenceReport& r) {
  nlohmann::json j;
  j["status"] = to_string(r.status);
  j["objective"] = s.objective;
  j["iterations"] = r.iterations;
  std::vector<int> ids;
  for (const auto& b : c.buses) ids.push_back(b.id);
  j["bus_ids"] = ids;
  nlohmann::json instances = nlohmann::json::array();
  for (const auto& in : s.instances) {
    nlohmann::json e;
    e["v"] = array(in.v);
    e["theta"] = array(in.theta);
    e["p"] = array(in.p);
    e["q"] = array(in.q);
    if (in.p_storage.size()) {
      e["p_storage"] = array(in.p_storage);
      e["q_storage"] = array(in.q_storage);
    }
    instances.push_back(std::move(e));
  }
  j["instances"] = std::move(instances);
  if (s.energy.size()) {
    nlohmann::json energy = nlohmann::json::array();
    for (Eigen::Index k = 0; k < s.energy.rows(); ++k) {
      energy.push_back(array(s.energy.row(k).transpose()));
    }
    j["storage_energy"] = std::move(energy);
  }
  return j.dump(2);
}

}  // namespace arrowip
