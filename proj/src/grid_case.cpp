#include "arrowip/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace arrowip::grid {

int GridCase::bus_index(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

int GridCase::reference_bus() const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].type == BusType::ref) return static_cast<int>(i);
  }
  return -1;
}

void GridCase::demand(int n, Eigen::VectorXd& pd, Eigen::VectorXd& qd) const {
  const int nb = static_cast<int>(buses.size());
  pd.resize(nb);
  qd.resize(nb);
  for (int i = 0; i < nb; ++i) {
    pd[i] = buses[i].pd;
    qd[i] = buses[i].qd;
  }
  int profile = 0;
  for (const auto& d : demand_profile) profile = std::max(profile, d.period);
  if (profile == 0) return;
  const int period = n % profile + 1;
  for (const auto& d : demand_profile) {
    if (d.period != period || d.bus != 0) continue;
    pd *= d.factor;
    qd *= d.factor;
  }
  for (const auto& d : demand_profile) {
    if (d.period != period || d.bus == 0) continue;
    const int i = bus_index(d.bus);
    pd[i] = d.pd;
    qd[i] = d.qd;
  }
}

namespace {

enum class Section { none, bus, branch, gen, storage, demand, contingency, ramp };

struct Line {
  int number;
  std::vector<std::string> tokens;
};

double number(const Line& l, std::size_t k) {
  const std::string& t = l.tokens[k];
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != t.size() || !std::isfinite(v)) {
    throw CaseError(l.number, "expected a number, got '" + t + "'");
  }
  return v;
}

int integer(const Line& l, std::size_t k) {
  const double v = number(l, k);
  if (v != std::floor(v)) throw CaseError(l.number, "expected an integer, got '" + l.tokens[k] + "'");
  return static_cast<int>(v);
}

void expect_columns(const Line& l, std::size_t lo, std::size_t hi, const char* what) {
  const std::size_t n = l.tokens.size();
  if (n < lo || n > hi) {
    std::ostringstream os;
    os << what << " row needs ";
    if (lo == hi) {
      os << lo;
    } else {
      os << lo << " to " << hi;
    }
    os << " columns, got " << n;
    throw CaseError(l.number, os.str());
  }
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::toupper(ch); });
  return s;
}

BusType bus_type(const Line& l, std::size_t k) {
  const std::string t = upper(l.tokens[k]);
  if (t == "REF" || t == "3") return BusType::ref;
  if (t == "PV" || t == "2") return BusType::pv;
  if (t == "PQ" || t == "1") return BusType::pq;
  throw CaseError(l.number, "unknown bus type '" + l.tokens[k] + "'");
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void join(int a, int b) { parent[find(a)] = find(b); }
};

bool connected(const GridCase& c, int skip_branch) {
  const int nb = static_cast<int>(c.buses.size());
  UnionFind uf(nb);
  for (std::size_t k = 0; k < c.branches.size(); ++k) {
    if (static_cast<int>(k) == skip_branch) continue;
    uf.join(c.bus_index(c.branches[k].from), c.bus_index(c.branches[k].to));
  }
  for (int i = 1; i < nb; ++i) {
    if (uf.find(i) != uf.find(0)) return false;
  }
  return true;
}

void check_semantics(const GridCase& c) {
  if (c.buses.empty()) throw CaseError(0, "case has no buses");
  if (!(c.base_mva > 0)) throw CaseError(0, "BASEMVA must be positive");
  if (!(c.period_hours > 0)) throw CaseError(0, "PERIOD_HOURS must be positive");
  if (c.periods < 1) throw CaseError(0, "PERIODS must be at least 1");
  int refs = 0;
  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    const Bus& b = c.buses[i];
    refs += b.type == BusType::ref;
    if (c.bus_index(b.id) != static_cast<int>(i)) {
      throw CaseError(0, "duplicate bus id " + std::to_string(b.id));
    }
    if (!(b.v_min < b.v_max) || b.v_min <= 0) {
      throw CaseError(0, "bus " + std::to_string(b.id) + ": voltage bounds not ordered");
    }
  }
  if (refs != 1) {
    throw CaseError(0, "case needs exactly one reference bus, found " + std::to_string(refs));
  }
  for (std::size_t k = 0; k < c.branches.size(); ++k) {
    const Branch& br = c.branches[k];
    const std::string name = "branch " + std::to_string(k + 1);
    if (c.bus_index(br.from) < 0 || c.bus_index(br.to) < 0) {
      throw CaseError(0, name + ": unknown endpoint bus");
    }
    if (br.from == br.to) throw CaseError(0, name + ": both ends on one bus");
    if (br.r == 0.0 && br.x == 0.0) throw CaseError(0, name + ": zero impedance");
    if (br.rate < 0 || !(br.tap > 0)) throw CaseError(0, name + ": invalid rating or tap");
  }
  for (std::size_t k = 0; k < c.generators.size(); ++k) {
    const Generator& g = c.generators[k];
    const std::string name = "generator " + std::to_string(k + 1);
    if (c.bus_index(g.bus) < 0) throw CaseError(0, name + ": unknown bus");
    if (!(g.p_min < g.p_max) || !(g.q_min < g.q_max)) {
      throw CaseError(0, name + ": bounds not ordered");
    }
    if (g.cost.empty() || g.cost.size() > 4) {
      throw CaseError(0, name + ": cost needs 1 to 4 coefficients");
    }
    if (g.ramp < 0) throw CaseError(0, name + ": negative ramp limit");
  }
  for (std::size_t k = 0; k < c.storage.size(); ++k) {
    const Storage& s = c.storage[k];
    const std::string name = "storage " + std::to_string(k + 1);
    if (c.bus_index(s.bus) < 0) throw CaseError(0, name + ": unknown bus");
    if (!(s.e_min < s.e_max) || !(s.p_dis_max > 0) || !(s.p_ch_max > 0) || !(s.q_min < s.q_max)) {
      throw CaseError(0, name + ": bounds not ordered");
    }
    if (!(s.eta_c > 0 && s.eta_c <= 1) || !(s.eta_d > 0 && s.eta_d <= 1)) {
      throw CaseError(0, name + ": efficiencies must lie in (0, 1]");
    }
    if (s.e0 < s.e_min || s.e0 > s.e_max) throw CaseError(0, name + ": initial level out of bounds");
  }
  for (const auto& d : c.demand_profile) {
    if (d.period < 1) throw CaseError(0, "demand period must be at least 1");
    if (d.bus != 0 && c.bus_index(d.bus) < 0) {
      throw CaseError(0, "demand row for unknown bus " + std::to_string(d.bus));
    }
  }
  if (!connected(c, -1)) throw ConnectivityError("network is not connected");
  for (const auto& k : c.contingencies) {
    const std::size_t limit =
        k.kind == Contingency::Kind::branch ? c.branches.size() : c.generators.size();
    if (k.index < 0 || static_cast<std::size_t>(k.index) >= limit) {
      throw CaseError(0, "contingency references a missing element");
    }
    if (k.kind == Contingency::Kind::branch && !connected(c, k.index)) {
      throw ConnectivityError("outage of branch " + std::to_string(k.index + 1) +
                              " disconnects the network");
    }
  }
}

}  // namespace

GridCase parse_case(const std::string& text) {
  GridCase c;
  Section section = Section::none;
  std::istringstream in(text);
  std::string raw;
  int number_of_line = 0;
  while (std::getline(in, raw)) {
    ++number_of_line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    Line l{number_of_line, {}};
    std::istringstream words(raw);
    for (std::string w; words >> w;) l.tokens.push_back(w);
    if (l.tokens.empty()) continue;

    const std::string& head = l.tokens[0];
    if (head == "BASEMVA" || head == "PERIOD_HOURS" || head == "PERIODS") {
      expect_columns(l, 2, 2, head.c_str());
      if (head == "BASEMVA") c.base_mva = number(l, 1);
      if (head == "PERIOD_HOURS") c.period_hours = number(l, 1);
      if (head == "PERIODS") c.periods = integer(l, 1);
      section = Section::none;
      continue;
    }
    static const std::pair<const char*, Section> headers[] = {
        {"BUS", Section::bus},         {"BRANCH", Section::branch},
        {"GEN", Section::gen},         {"STORAGE", Section::storage},
        {"DEMAND", Section::demand},   {"CONTINGENCY", Section::contingency},
        {"RAMP", Section::ramp}};
    bool is_header = false;
    for (const auto& [name, s] : headers) {
      if (head == name) {
        if (l.tokens.size() != 1) throw CaseError(l.number, "section header takes no values");
        section = s;
        is_header = true;
      }
    }
    if (is_header) continue;

    switch (section) {
      case Section::none:
        throw CaseError(l.number, "unknown keyword '" + l.tokens[0] + "'");
      case Section::bus: {
        expect_columns(l, 8, 8, "BUS");
        Bus b;
        b.id = integer(l, 0);
        b.type = bus_type(l, 1);
        b.pd = number(l, 2);
        b.qd = number(l, 3);
        b.gs = number(l, 4);
        b.bs = number(l, 5);
        b.v_min = number(l, 6);
        b.v_max = number(l, 7);
        c.buses.push_back(b);
        break;
      }
      case Section::branch: {
        expect_columns(l, 6, 8, "BRANCH");
        Branch br;
        br.from = integer(l, 0);
        br.to = integer(l, 1);
        br.r = number(l, 2);
        br.x = number(l, 3);
        br.b = number(l, 4);
        br.rate = number(l, 5);
        if (l.tokens.size() > 6 && number(l, 6) != 0.0) br.tap = number(l, 6);
        if (l.tokens.size() > 7) br.shift = number(l, 7);
        c.branches.push_back(br);
        break;
      }
      case Section::gen: {
        expect_columns(l, 6, 9, "GEN");
        Generator g;
        g.bus = integer(l, 0);
        g.p_min = number(l, 1);
        g.p_max = number(l, 2);
        g.q_min = number(l, 3);
        g.q_max = number(l, 4);
        for (std::size_t k = 5; k < l.tokens.size(); ++k) g.cost.push_back(number(l, k));
        c.generators.push_back(g);
        break;
      }
      case Section::storage: {
        expect_columns(l, 10, 10, "STORAGE");
        Storage s;
        s.bus = integer(l, 0);
        s.e_min = number(l, 1);
        s.e_max = number(l, 2);
        s.p_dis_max = number(l, 3);
        s.p_ch_max = number(l, 4);
        s.q_min = number(l, 5);
        s.q_max = number(l, 6);
        s.eta_c = number(l, 7);
        s.eta_d = number(l, 8);
        s.e0 = number(l, 9);
        c.storage.push_back(s);
        break;
      }
      case Section::demand: {
        DemandEntry d;
        if (l.tokens.size() == 2) {
          d.period = integer(l, 0);
          d.factor = number(l, 1);
        } else {
          expect_columns(l, 4, 4, "DEMAND");
          d.period = integer(l, 0);
          d.bus = integer(l, 1);
          d.pd = number(l, 2);
          d.qd = number(l, 3);
          if (d.bus == 0) throw CaseError(l.number, "DEMAND bus id 0 is reserved");
        }
        c.demand_profile.push_back(d);
        break;
      }
      case Section::contingency: {
        expect_columns(l, 2, 2, "CONTINGENCY");
        Contingency k;
        const std::string kind = upper(l.tokens[0]);
        if (kind == "BRANCH") {
          k.kind = Contingency::Kind::branch;
        } else if (kind == "GEN") {
          k.kind = Contingency::Kind::generator;
        } else {
          throw CaseError(l.number, "contingency kind must be 'branch' or 'gen'");
        }
        k.index = integer(l, 1) - 1;
        c.contingencies.push_back(k);
        break;
      }
      case Section::ramp: {
        expect_columns(l, 2, 2, "RAMP");
        const int g = integer(l, 0) - 1;
        if (g < 0 || g >= static_cast<int>(c.generators.size())) {
          throw CaseError(l.number, "RAMP references a missing generator");
        }
        c.generators[g].ramp = number(l, 1);
        break;
      }
    }
  }
  check_semantics(c);
  return c;
}

GridCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open case file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_case(os.str());
}

AdmittanceMatrix admittance(const GridCase& c, const std::optional<Contingency>& outage) {
  const int skip =
      outage && outage->kind == Contingency::Kind::branch ? outage->index : -1;
  if (!connected(c, skip)) throw ConnectivityError("outage disconnects the network");
  const int nb = static_cast<int>(c.buses.size());
  AdmittanceMatrix y;
  y.shunt.resize(nb);
  for (int i = 0; i < nb; ++i) {
    y.shunt[i] = std::complex<double>(c.buses[i].gs, c.buses[i].bs) / c.base_mva;
  }
  std::vector<Eigen::Triplet<std::complex<double>>> t;
  for (int i = 0; i < nb; ++i) t.emplace_back(i, i, y.shunt[i]);
  for (std::size_t k = 0; k < c.branches.size(); ++k) {
    if (static_cast<int>(k) == skip) continue;
    const Branch& br = c.branches[k];
    const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> tap =
        std::polar(br.tap, br.shift * std::numbers::pi / 180.0);
    BranchAdmittance a;
    a.branch = static_cast<int>(k);
    a.from = c.bus_index(br.from);
    a.to = c.bus_index(br.to);
    a.ytt = ys + std::complex<double>(0.0, br.b / 2.0);
    a.yff = a.ytt / std::norm(tap);
    a.yft = -ys / std::conj(tap);
    a.ytf = -ys / tap;
    t.emplace_back(a.from, a.from, a.yff);
    t.emplace_back(a.from, a.to, a.yft);
    t.emplace_back(a.to, a.from, a.ytf);
    t.emplace_back(a.to, a.to, a.ytt);
    y.branches.push_back(a);
  }
  y.ybus.resize(nb, nb);
  y.ybus.setFromTriplets(t.begin(), t.end());
  return y;
}

}  // namespace arrowip::grid
