#include "arrowip/grid.hpp"

#include <array>
#include <cmath>
#include <map>
#include <utility>

namespace arrowip::grid {
namespace {

/// Value, gradient and Hessian of a function of (v_a, v_b, theta_a, theta_b).
struct Local {
  double val = 0.0;
  std::array<double, 4> g{};
  std::array<std::array<double, 4>, 4> h{};
};

/// Power flowing out of bus a into the branch toward b, given the self
/// admittance y_aa = gaa + j baa and the transfer admittance y_ab = g + j b.
void side_flow(double va, double vb, double ta, double tb, double gaa, double baa, double g,
               double b, Local& p, Local& q) {
  const double d = ta - tb, cs = std::cos(d), sn = std::sin(d);
  const double c = g * cs + b * sn;
  const double s = g * sn - b * cs;
  const double vv = va * vb;

  p.val = va * va * gaa + vv * c;
  p.g = {2 * va * gaa + vb * c, va * c, -vv * s, vv * s};
  p.h = {{{2 * gaa, c, -vb * s, vb * s},
          {c, 0.0, -va * s, va * s},
          {-vb * s, -va * s, -vv * c, vv * c},
          {vb * s, va * s, vv * c, -vv * c}}};

  q.val = -va * va * baa + vv * s;
  q.g = {-2 * va * baa + vb * s, va * s, vv * c, -vv * c};
  q.h = {{{-2 * baa, s, vb * c, -vb * c},
          {s, 0.0, va * c, -va * c},
          {vb * c, va * c, -vv * s, vv * s},
          {-vb * c, -va * c, vv * s, -vv * s}}};
}

constexpr int pair_index(int i, int j) { return i * (i + 1) / 2 + j; }

struct SideTerm {
  std::array<int, 4> var{};  // v_a, v_b, theta_a, theta_b
  double gaa = 0, baa = 0, g = 0, b = 0;
  int p_row = -1, q_row = -1, flow_row = -1;
  std::array<int, 4> jp{}, jq{}, jf{};
  std::array<int, 10> h{};
};

struct ShuntTerm {
  int var = -1;
  double gs = 0, bs = 0;
  int p_row = -1, q_row = -1;
  int jp = -1, jq = -1, h = -1;
};

struct LinearTerm {
  int row = -1, var = -1;
  double coef = 0.0;
  int slot = -1;
};

struct CostTerm {
  int var = -1;
  std::array<double, 4> a{};  // per-unit coefficients of p^0 .. p^3
  int h = -1;
};

class GridEvaluator final : public Evaluator {
 public:
  int n_x = 0;
  Eigen::VectorXd eq_constant;
  int n_i = 0;
  std::vector<SideTerm> sides;
  std::vector<ShuntTerm> shunts;
  std::vector<LinearTerm> lin_eq, lin_ineq;
  std::vector<CostTerm> costs;
  SparsityPattern jeq, jin, hess;

  const SparsityPattern& jacobian_eq_pattern() const override { return jeq; }
  const SparsityPattern& jacobian_ineq_pattern() const override { return jin; }
  const SparsityPattern& hessian_pattern() const override { return hess; }

  bool objective(const Eigen::VectorXd& x, double& f) const override {
    f = 0.0;
    for (const auto& c : costs) {
      const double p = x[c.var];
      f += c.a[0] + p * (c.a[1] + p * (c.a[2] + p * c.a[3]));
    }
    return true;
  }

  bool gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const override {
    g.setZero(n_x);
    for (const auto& c : costs) {
      const double p = x[c.var];
      g[c.var] += c.a[1] + p * (2 * c.a[2] + 3 * p * c.a[3]);
    }
    return true;
  }

  bool constraints(const Eigen::VectorXd& x, Eigen::VectorXd& ce,
                   Eigen::VectorXd& ci) const override {
    ce = eq_constant;
    ci.setZero(n_i);
    Local p, q;
    for (const auto& t : sides) {
      flows(x, t, p, q);
      ce[t.p_row] += p.val;
      ce[t.q_row] += q.val;
      if (t.flow_row >= 0) ci[t.flow_row] += p.val * p.val + q.val * q.val;
    }
    for (const auto& s : shunts) {
      const double v2 = x[s.var] * x[s.var];
      ce[s.p_row] += v2 * s.gs;
      ce[s.q_row] -= v2 * s.bs;
    }
    for (const auto& l : lin_eq) ce[l.row] += l.coef * x[l.var];
    for (const auto& l : lin_ineq) ci[l.row] += l.coef * x[l.var];
    return true;
  }

  bool jacobian(const Eigen::VectorXd& x, Eigen::VectorXd& je,
                Eigen::VectorXd& ji) const override {
    je.setZero(static_cast<Eigen::Index>(jeq.size()));
    ji.setZero(static_cast<Eigen::Index>(jin.size()));
    Local p, q;
    for (const auto& t : sides) {
      flows(x, t, p, q);
      for (int k = 0; k < 4; ++k) {
        if (t.var[k] < 0) continue;
        je[t.jp[k]] += p.g[k];
        je[t.jq[k]] += q.g[k];
        if (t.flow_row >= 0) ji[t.jf[k]] += 2 * (p.val * p.g[k] + q.val * q.g[k]);
      }
    }
    for (const auto& s : shunts) {
      const double v = x[s.var];
      je[s.jp] += 2 * v * s.gs;
      je[s.jq] -= 2 * v * s.bs;
    }
    for (const auto& l : lin_eq) je[l.slot] += l.coef;
    for (const auto& l : lin_ineq) ji[l.slot] += l.coef;
    return true;
  }

  bool hessian(const Eigen::VectorXd& x, double obj_factor, const Eigen::VectorXd& lam_eq,
               const Eigen::VectorXd& lam_ineq, Eigen::VectorXd& h) const override {
    h.setZero(static_cast<Eigen::Index>(hess.size()));
    for (const auto& c : costs) {
      const double p = x[c.var];
      h[c.h] += obj_factor * (2 * c.a[2] + 6 * p * c.a[3]);
    }
    Local p, q;
    for (const auto& t : sides) {
      flows(x, t, p, q);
      const double lp = lam_eq[t.p_row], lq = lam_eq[t.q_row];
      const double lf = t.flow_row >= 0 ? lam_ineq[t.flow_row] : 0.0;
      for (int i = 0; i < 4; ++i) {
        if (t.var[i] < 0) continue;
        for (int j = 0; j <= i; ++j) {
          if (t.var[j] < 0) continue;
          double v = lp * p.h[i][j] + lq * q.h[i][j];
          if (lf != 0.0) {
            v += 2 * lf *
                 (p.g[i] * p.g[j] + p.val * p.h[i][j] + q.g[i] * q.g[j] + q.val * q.h[i][j]);
          }
          h[t.h[pair_index(i, j)]] += v;
        }
      }
    }
    for (const auto& s : shunts) {
      h[s.h] += 2 * (lam_eq[s.p_row] * s.gs - lam_eq[s.q_row] * s.bs);
    }
    return true;
  }

 private:
  static void flows(const Eigen::VectorXd& x, const SideTerm& t, Local& p, Local& q) {
    auto at = [&](int k) { return t.var[k] >= 0 ? x[t.var[k]] : 0.0; };
    side_flow(at(0), at(1), at(2), at(3), t.gaa, t.baa, t.g, t.b, p, q);
  }
};

class Slots {
 public:
  int at(int r, int c) {
    const auto [it, inserted] = map_.try_emplace({r, c}, static_cast<int>(pattern.size()));
    if (inserted) pattern.add(r, c);
    return it->second;
  }
  int lower(int r, int c) { return r >= c ? at(r, c) : at(c, r); }
  SparsityPattern pattern;

 private:
  std::map<std::pair<int, int>, int> map_;
};

class Builder {
 public:
  explicit Builder(const GridCase& c) : case_(c), ev_(std::make_shared<GridEvaluator>()) {}

  int variable(double lo, double hi, double start, int label) {
    lower_.push_back(lo);
    upper_.push_back(hi);
    start_.push_back(start);
    map_.variable.push_back(label);
    return static_cast<int>(lower_.size()) - 1;
  }

  int num_variables() const { return static_cast<int>(lower_.size()); }

  int eq_row(int label, double constant) {
    eq_constant_.push_back(constant);
    map_.equality.push_back(label);
    return static_cast<int>(eq_constant_.size()) - 1;
  }

  int ineq_row(double lo, double hi, int label, int slack_label) {
    c_lower_.push_back(lo);
    c_upper_.push_back(hi);
    map_.inequality.push_back(label);
    map_.slack.push_back(slack_label);
    return static_cast<int>(c_lower_.size()) - 1;
  }

  void linear_ineq(int row, int var, double coef) {
    ev_->lin_ineq.push_back({row, var, coef, jin_.at(row, var)});
  }

  /// Standard bus and branch variables of one scenario or period.
  InstanceIndex network_variables(int label, const std::vector<int>& shared_v,
                                  const std::vector<int>& shared_p,
                                  const std::vector<char>& gen_in_service) {
    const double base = case_.base_mva;
    const int nb = static_cast<int>(case_.buses.size());
    const int ng = static_cast<int>(case_.generators.size());
    const int ref = case_.reference_bus();
    InstanceIndex idx;
    idx.theta.assign(nb, -1);
    idx.v.assign(nb, -1);
    idx.p.assign(ng, -1);
    idx.q.assign(ng, -1);
    for (int i = 0; i < nb; ++i) {
      if (i != ref) idx.theta[i] = variable(-kInf, kInf, 0.0, label);
    }
    for (int i = 0; i < nb; ++i) {
      const Bus& b = case_.buses[i];
      idx.v[i] = shared_v.empty() || shared_v[i] < 0
                     ? variable(b.v_min, b.v_max, std::clamp(1.0, b.v_min, b.v_max), label)
                     : shared_v[i];
    }
    for (int k = 0; k < ng; ++k) {
      if (!gen_in_service.empty() && !gen_in_service[k]) continue;
      const Generator& g = case_.generators[k];
      idx.p[k] = shared_p.empty() || shared_p[k] < 0
                     ? variable(g.p_min / base, g.p_max / base, 0.5 * (g.p_min + g.p_max) / base,
                                label)
                     : shared_p[k];
    }
    for (int k = 0; k < ng; ++k) {
      if (!gen_in_service.empty() && !gen_in_service[k]) continue;
      const Generator& g = case_.generators[k];
      idx.q[k] = variable(g.q_min / base, g.q_max / base, 0.5 * (g.q_min + g.q_max) / base, label);
    }
    return idx;
  }

  void storage_variables(InstanceIndex& idx, int label) {
    const double base = case_.base_mva;
    for (const Storage& s : case_.storage) {
      idx.p_dis.push_back(variable(0.0, s.p_dis_max / base, 0.0, label));
    }
    for (const Storage& s : case_.storage) {
      idx.p_ch.push_back(variable(-s.p_ch_max / base, 0.0, 0.0, label));
    }
    for (const Storage& s : case_.storage) {
      idx.q_s.push_back(variable(s.q_min / base, s.q_max / base,
                                 std::clamp(0.0, s.q_min / base, s.q_max / base), label));
    }
  }

  /// Balance rows and branch flow limits of one instance.
  void network_rows(const AdmittanceMatrix& y, const Eigen::VectorXd& pd,
                    const Eigen::VectorXd& qd, const InstanceIndex& idx, int label) {
    const double base = case_.base_mva;
    const int nb = static_cast<int>(case_.buses.size());
    std::vector<int> p_row(nb), q_row(nb);
    for (int i = 0; i < nb; ++i) p_row[i] = eq_row(label, pd[i] / base);
    for (int i = 0; i < nb; ++i) q_row[i] = eq_row(label, qd[i] / base);

    for (const auto& a : y.branches) {
      const Branch& br = case_.branches[a.branch];
      const double limit = br.rate > 0 ? std::pow(br.rate / base, 2) : 0.0;
      for (int side = 0; side < 2; ++side) {
        const int ia = side == 0 ? a.from : a.to;
        const int ib = side == 0 ? a.to : a.from;
        const std::complex<double> yaa = side == 0 ? a.yff : a.ytt;
        const std::complex<double> yab = side == 0 ? a.yft : a.ytf;
        SideTerm t;
        t.var = {idx.v[ia], idx.v[ib], idx.theta[ia], idx.theta[ib]};
        t.gaa = yaa.real();
        t.baa = yaa.imag();
        t.g = yab.real();
        t.b = yab.imag();
        t.p_row = p_row[ia];
        t.q_row = q_row[ia];
        if (limit > 0) t.flow_row = ineq_row(-kInf, limit, label, label);
        for (int k = 0; k < 4; ++k) {
          if (t.var[k] < 0) continue;
          t.jp[k] = jeq_.at(t.p_row, t.var[k]);
          t.jq[k] = jeq_.at(t.q_row, t.var[k]);
          if (t.flow_row >= 0) t.jf[k] = jin_.at(t.flow_row, t.var[k]);
        }
        for (int i = 0; i < 4; ++i) {
          for (int j = 0; j <= i; ++j) {
            if (t.var[i] >= 0 && t.var[j] >= 0) {
              t.h[pair_index(i, j)] = hess_.lower(t.var[i], t.var[j]);
            }
          }
        }
        ev_->sides.push_back(t);
      }
    }
    for (int i = 0; i < nb; ++i) {
      if (y.shunt[i] == 0.0) continue;
      ShuntTerm s;
      s.var = idx.v[i];
      s.gs = y.shunt[i].real();
      s.bs = y.shunt[i].imag();
      s.p_row = p_row[i];
      s.q_row = q_row[i];
      s.jp = jeq_.at(s.p_row, s.var);
      s.jq = jeq_.at(s.q_row, s.var);
      s.h = hess_.lower(s.var, s.var);
      ev_->shunts.push_back(s);
    }
    auto inject = [&](int row, int var) {
      if (var >= 0) ev_->lin_eq.push_back({row, var, -1.0, jeq_.at(row, var)});
    };
    for (std::size_t k = 0; k < case_.generators.size(); ++k) {
      const int bus = case_.bus_index(case_.generators[k].bus);
      inject(p_row[bus], idx.p[k]);
      inject(q_row[bus], idx.q[k]);
    }
    for (std::size_t k = 0; k < idx.p_dis.size(); ++k) {
      const int bus = case_.bus_index(case_.storage[k].bus);
      inject(p_row[bus], idx.p_dis[k]);
      inject(p_row[bus], idx.p_ch[k]);
      inject(q_row[bus], idx.q_s[k]);
    }
  }

  void costs(const InstanceIndex& idx) {
    const double base = case_.base_mva;
    for (std::size_t k = 0; k < case_.generators.size(); ++k) {
      if (idx.p[k] < 0) continue;
      const auto& c = case_.generators[k].cost;
      CostTerm t;
      t.var = idx.p[k];
      const int degree = static_cast<int>(c.size()) - 1;
      for (int d = 0; d <= degree; ++d) t.a[d] = c[degree - d] * std::pow(base, d);
      t.h = hess_.lower(t.var, t.var);
      ev_->costs.push_back(t);
    }
  }

  GridModel finish(int num_blocks, bool with_structure) {
    GridEvaluator& ev = *ev_;
    ev.n_x = static_cast<int>(lower_.size());
    ev.n_i = static_cast<int>(c_lower_.size());
    ev.eq_constant = Eigen::Map<const Eigen::VectorXd>(eq_constant_.data(),
                                                       static_cast<Eigen::Index>(eq_constant_.size()));
    ev.jeq = jeq_.pattern;
    ev.jin = jin_.pattern;
    ev.hess = hess_.pattern;

    GridModel m;
    NlpProblem& p = m.problem;
    p.n_x = ev.n_x;
    p.n_e = static_cast<int>(eq_constant_.size());
    p.n_i = ev.n_i;
    auto vec = [](const std::vector<double>& v) {
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(),
                                                               static_cast<Eigen::Index>(v.size())));
    };
    p.x_lower = vec(lower_);
    p.x_upper = vec(upper_);
    p.c_lower = vec(c_lower_);
    p.c_upper = vec(c_upper_);
    p.x_start = vec(start_);
    p.evaluator = ev_;
    if (with_structure) {
      map_.num_blocks = num_blocks;
      p.structure = map_;
    }
    return m;
  }

 private:
  const GridCase& case_;
  std::shared_ptr<GridEvaluator> ev_;
  std::vector<double> lower_, upper_, start_;
  std::vector<double> eq_constant_;
  std::vector<double> c_lower_, c_upper_;
  BlockMap map_;
  Slots jeq_, jin_, hess_;
};

}  // namespace

GridModel build_opf(const GridCase& c) {
  Builder b(c);
  InstanceIndex idx = b.network_variables(0, {}, {}, {});
  Eigen::VectorXd pd, qd;
  c.demand(0, pd, qd);
  b.network_rows(admittance(c), pd, qd, idx, 0);
  b.costs(idx);
  GridModel m = b.finish(1, false);
  m.instances.push_back(std::move(idx));
  return m;
}

GridModel build_scopf(const GridCase& c, const std::vector<Contingency>& contingencies) {
  if (contingencies.empty()) return build_opf(c);
  const int nb = static_cast<int>(c.buses.size());
  const int ng = static_cast<int>(c.generators.size());
  const double base = c.base_mva;
  Builder b(c);

  std::vector<int> shared_v(nb, -1), shared_p(ng, -1);
  for (int i = 0; i < nb; ++i) {
    const Bus& bus = c.buses[i];
    if (bus.type == BusType::pv) {
      shared_v[i] = b.variable(bus.v_min, bus.v_max, std::clamp(1.0, bus.v_min, bus.v_max),
                               kCoupling);
    }
  }
  for (int k = 0; k < ng; ++k) {
    const Generator& g = c.generators[k];
    if (c.buses[c.bus_index(g.bus)].type == BusType::pv) {
      shared_p[k] = b.variable(g.p_min / base, g.p_max / base, 0.5 * (g.p_min + g.p_max) / base,
                               kCoupling);
    }
  }

  Eigen::VectorXd pd, qd;
  c.demand(0, pd, qd);
  const int scenarios = static_cast<int>(contingencies.size()) + 1;
  std::vector<InstanceIndex> instances;
  for (int s = 0; s < scenarios; ++s) {
    std::optional<Contingency> outage;
    if (s > 0) outage = contingencies[s - 1];
    std::vector<char> in_service(ng, 1);
    if (outage && outage->kind == Contingency::Kind::generator) in_service[outage->index] = 0;
    InstanceIndex idx = b.network_variables(s, shared_v, shared_p, in_service);
    b.network_rows(admittance(c, outage), pd, qd, idx, s);
    if (s == 0) b.costs(idx);
    instances.push_back(std::move(idx));
  }
  GridModel m = b.finish(scenarios, true);
  m.instances = std::move(instances);
  return m;
}

GridModel build_mpopf(const GridCase& c, int periods, const MpopfOptions& options) {
  if (periods < 1) throw std::invalid_argument("multiperiod model needs at least one period");
  const int ns = static_cast<int>(c.storage.size());
  const int ng = static_cast<int>(c.generators.size());
  const double base = c.base_mva, dt = c.period_hours;
  Builder b(c);
  const AdmittanceMatrix y = admittance(c);

  std::vector<InstanceIndex> instances;
  int width = 0;
  for (int n = 0; n < periods; ++n) {
    const int first = b.num_variables();
    InstanceIndex idx = b.network_variables(n, {}, {}, {});
    b.storage_variables(idx, n);
    width = b.num_variables() - first;
    Eigen::VectorXd pd, qd;
    c.demand(n, pd, qd);
    b.network_rows(y, pd, qd, idx, n);
    b.costs(idx);
    instances.push_back(std::move(idx));
  }

  GridModel partial;
  partial.c0 = Eigen::MatrixXd::Zero(ns, width);
  int energy_row = -1;
  for (int k = 0; k < periods; ++k) {
    for (int i = 0; i < ns; ++i) {
      const Storage& s = c.storage[i];
      const double b_dis = -dt / s.eta_d, b_ch = -dt * s.eta_c;
      const int row =
          b.ineq_row((s.e_min - s.e0) / base, (s.e_max - s.e0) / base, kCoupling, k);
      if (energy_row < 0) energy_row = row;
      for (int m = 0; m <= k; ++m) {
        b.linear_ineq(row, instances[m].p_dis[i], b_dis);
        b.linear_ineq(row, instances[m].p_ch[i], b_ch);
      }
      if (k == 0) {
        partial.c0(i, instances[0].p_dis[i]) = b_dis;
        partial.c0(i, instances[0].p_ch[i]) = b_ch;
      }
    }
  }
  if (options.ramp_limits) {
    for (int n = 1; n < periods; ++n) {
      for (int g = 0; g < ng; ++g) {
        const double r = c.generators[g].ramp;
        if (r <= 0) continue;
        const int row = b.ineq_row(-r / base, r / base, kCoupling, kCoupling);
        b.linear_ineq(row, instances[n].p[g], 1.0);
        b.linear_ineq(row, instances[n - 1].p[g], -1.0);
      }
    }
  }

  GridModel m = b.finish(periods, true);
  m.instances = std::move(instances);
  m.c0 = partial.c0;
  m.c1 = partial.c0;
  m.energy_row = energy_row;
  return m;
}

GridSolution extract_solution(const GridModel& m, const GridCase& c, const Eigen::VectorXd& x,
                              double objective) {
  const double base = c.base_mva;
  GridSolution sol;
  sol.objective = objective;
  const int ns = static_cast<int>(c.storage.size());
  for (const auto& idx : m.instances) {
    InstanceSolution s;
    const int nb = static_cast<int>(idx.v.size());
    const int ng = static_cast<int>(idx.p.size());
    auto get = [&](int k) { return k >= 0 ? x[k] : 0.0; };
    s.v.resize(nb);
    s.theta.resize(nb);
    for (int i = 0; i < nb; ++i) {
      s.v[i] = get(idx.v[i]);
      s.theta[i] = get(idx.theta[i]);
    }
    s.p.resize(ng);
    s.q.resize(ng);
    for (int k = 0; k < ng; ++k) {
      s.p[k] = get(idx.p[k]) * base;
      s.q[k] = get(idx.q[k]) * base;
    }
    const int units = static_cast<int>(idx.p_dis.size());
    s.p_storage.resize(units);
    s.q_storage.resize(units);
    for (int k = 0; k < units; ++k) {
      s.p_storage[k] = (get(idx.p_dis[k]) + get(idx.p_ch[k])) * base;
      s.q_storage[k] = get(idx.q_s[k]) * base;
    }
    sol.instances.push_back(std::move(s));
  }
  if (ns > 0 && !m.instances.empty() && !m.instances[0].p_dis.empty()) {
    const int periods = static_cast<int>(m.instances.size());
    sol.energy.resize(ns, periods);
    for (int k = 0; k < ns; ++k) {
      const Storage& st = c.storage[k];
      double e = st.e0;
      for (int n = 0; n < periods; ++n) {
        const auto& idx = m.instances[n];
        e += c.period_hours * base *
             (-x[idx.p_dis[k]] / st.eta_d - st.eta_c * x[idx.p_ch[k]]);
        sol.energy(k, n) = e;
      }
    }
  }
  return sol;
}

}  // namespace arrowip::grid
