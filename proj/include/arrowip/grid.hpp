#pragma once

// Grid cases and the optimal power flow models built from them.
//
// Units: powers in the case file are MW / MVAr / MVA, energies in MWh,
// impedances and voltages per unit. Model variables are per unit on the
// case base; voltage angles are in radians.

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "arrowip/nlp.hpp"

namespace arrowip::grid {

enum class BusType { pq, pv, ref };

struct Bus {
  int id = 0;
  BusType type = BusType::pq;
  double pd = 0.0, qd = 0.0;  // base demand
  double gs = 0.0, bs = 0.0;  // shunt at v = 1
  double v_min = 0.9, v_max = 1.1;
};

struct Branch {
  int from = 0, to = 0;  // bus ids
  double r = 0.0, x = 0.0, b = 0.0;
  double rate = 0.0;  // MVA, 0 = unlimited
  double tap = 1.0;
  double shift = 0.0;  // degrees
};

struct Generator {
  int bus = 0;
  double p_min = 0.0, p_max = 0.0, q_min = 0.0, q_max = 0.0;
  /// Polynomial in MW, highest degree first (at most degree 3).
  std::vector<double> cost;
  double ramp = 0.0;  // MW per period, 0 = unlimited
};

struct Storage {
  int bus = 0;
  double e_min = 0.0, e_max = 0.0;  // MWh
  double p_dis_max = 0.0, p_ch_max = 0.0;
  double q_min = 0.0, q_max = 0.0;
  double eta_c = 1.0, eta_d = 1.0;
  double e0 = 0.0;
};

/// One DEMAND row: a uniform factor (bus == 0) or a bus override in MW.
struct DemandEntry {
  int period = 1;
  int bus = 0;
  double factor = 1.0;
  double pd = 0.0, qd = 0.0;
};

struct Contingency {
  enum class Kind { branch, generator };
  Kind kind = Kind::branch;
  int index = 0;  // 0-based into branches / generators
};

struct GridCase {
  double base_mva = 100.0;
  double period_hours = 1.0;
  int periods = 1;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<Storage> storage;
  std::vector<DemandEntry> demand_profile;
  std::vector<Contingency> contingencies;

  /// Index of the bus with the given id, or -1.
  int bus_index(int id) const;
  int reference_bus() const;
  /// Demand in MW / MVAr for 0-based period n; the profile repeats.
  void demand(int n, Eigen::VectorXd& pd, Eigen::VectorXd& qd) const;
};

/// Syntax or semantic problem in a case; line is 0 when not tied to one.
class CaseError : public std::runtime_error {
 public:
  CaseError(int line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class ConnectivityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

GridCase parse_case(const std::string& text);
GridCase load_case(const std::string& path);

/// Pi-model admittances of one in-service branch.
struct BranchAdmittance {
  int branch = 0;
  int from = 0, to = 0;  // bus indices
  std::complex<double> yff, yft, ytf, ytt;
};

struct AdmittanceMatrix {
  Eigen::SparseMatrix<std::complex<double>> ybus;
  std::vector<BranchAdmittance> branches;
  Eigen::VectorXcd shunt;  // per unit
};

/// Throws ConnectivityError when the outage splits the network.
AdmittanceMatrix admittance(const GridCase& c,
                            const std::optional<Contingency>& outage = std::nullopt);

/// Where one scenario's or period's quantities live in x (-1 = absent).
struct InstanceIndex {
  std::vector<int> theta, v, p, q;
  std::vector<int> p_dis, p_ch, q_s;
};

struct GridModel {
  NlpProblem problem;
  std::vector<InstanceIndex> instances;
  /// Energy-row Jacobian against one period's variables (N_S x period width).
  /// Rows of later periods see the same block, so C_0 == C_1 here; in the KKT
  /// system the own-period block additionally couples to the kept slack.
  Eigen::MatrixXd c0, c1;
  /// Row of the first energy constraint in c_I (-1 without storage).
  int energy_row = -1;
};

GridModel build_opf(const GridCase& c);
/// Zero contingencies returns build_opf(c).
GridModel build_scopf(const GridCase& c, const std::vector<Contingency>& contingencies);

struct MpopfOptions {
  bool ramp_limits = false;
};

GridModel build_mpopf(const GridCase& c, int periods, const MpopfOptions& options = {});

struct InstanceSolution {
  Eigen::VectorXd v, theta;  // per bus
  Eigen::VectorXd p, q;      // per generator, MW / MVAr
  Eigen::VectorXd p_storage, q_storage;  // net injection per unit, MW / MVAr
};

struct GridSolution {
  std::vector<InstanceSolution> instances;
  /// Stored energy per unit after each period, MWh (rows: units).
  Eigen::MatrixXd energy;
  double objective = 0.0;
};

GridSolution extract_solution(const GridModel& m, const GridCase& c, const Eigen::VectorXd& x,
                              double objective);

}  // namespace arrowip::grid
