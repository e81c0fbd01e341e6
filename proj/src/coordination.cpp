#include "gridtrack/coordination.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <map>

#include <Eigen/Dense>

namespace gridtrack {

namespace {

void put_u8(Bytes& b, std::uint8_t v) { b.push_back(v); }
void put_u32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(Bytes& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f64(Bytes& b, double v) { put_u64(b, std::bit_cast<std::uint64_t>(v)); }

class ByteReader {
 public:
  explicit ByteReader(const Bytes& b) : b_(b) {}
  std::uint8_t u8() { return b_.at(need(1)); }
  std::uint32_t u32() {
    std::size_t o = need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[o + i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::size_t o = need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[o + i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool exhausted() const { return pos_ == b_.size(); }

 private:
  std::size_t need(std::size_t k) {
    if (pos_ + k > b_.size()) throw ProtocolError("message truncated");
    std::size_t o = pos_;
    pos_ += k;
    return o;
  }
  const Bytes& b_;
  std::size_t pos_ = 0;
};

void write_header(Bytes& b, std::uint8_t tag, int ds_id, std::uint64_t sample_index,
                  int n_b) {
  put_u8(b, kCodecVersion);
  put_u8(b, tag);
  put_u32(b, static_cast<std::uint32_t>(ds_id));
  put_u64(b, sample_index);
  put_u32(b, static_cast<std::uint32_t>(n_b));
}

struct Header {
  int ds_id;
  std::uint64_t sample_index;
  int n_b;
};

Header read_header(ByteReader& r, std::uint8_t expected_tag) {
  if (r.u8() != kCodecVersion) throw ProtocolError("unsupported codec version");
  std::uint8_t tag = r.u8();
  if (tag != expected_tag)
    throw ProtocolError("unexpected message tag " + std::to_string(tag));
  Header h;
  h.ds_id = static_cast<int>(r.u32());
  h.sample_index = r.u64();
  h.n_b = static_cast<int>(r.u32());
  if (h.n_b < 0 || h.n_b > 1024) throw ProtocolError("implausible boundary size");
  return h;
}

}  // namespace

Bytes encode(const SurrogateUp& msg) {
  const int nb = static_cast<int>(msg.surrogate.j1.size());
  if (msg.surrogate.j2.rows() != nb || msg.surrogate.j2.cols() != nb)
    throw DimensionError("surrogate j2/j1 dimensions disagree");
  Bytes b;
  write_header(b, kTagSurrogateUp, msg.ds_id, msg.sample_index, nb);
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j <= i; ++j) put_f64(b, msg.surrogate.j2(i, j));
  for (int i = 0; i < nb; ++i) put_f64(b, msg.surrogate.j1(i));
  put_f64(b, msg.surrogate.j0);
  return b;
}

Bytes encode(const IncrementDown& msg) {
  Bytes b;
  const int nb = static_cast<int>(msg.dxb.size());
  write_header(b, kTagIncrementDown, msg.ds_id, msg.sample_index, nb);
  for (int i = 0; i < nb; ++i) put_f64(b, msg.dxb(i));
  return b;
}

std::uint8_t message_tag(const Bytes& buf) {
  if (buf.size() < 2) throw ProtocolError("message truncated");
  if (buf[0] != kCodecVersion) throw ProtocolError("unsupported codec version");
  return buf[1];
}

SurrogateUp decode_surrogate_up(const Bytes& buf) {
  ByteReader r(buf);
  Header h = read_header(r, kTagSurrogateUp);
  SurrogateUp msg;
  msg.ds_id = h.ds_id;
  msg.sample_index = h.sample_index;
  msg.surrogate.ds_id = h.ds_id;
  msg.surrogate.j2.setZero(h.n_b, h.n_b);
  for (int i = 0; i < h.n_b; ++i)
    for (int j = 0; j <= i; ++j) {
      double v = r.f64();
      msg.surrogate.j2(i, j) = v;
      msg.surrogate.j2(j, i) = v;
    }
  msg.surrogate.j1.resize(h.n_b);
  for (int i = 0; i < h.n_b; ++i) msg.surrogate.j1(i) = r.f64();
  msg.surrogate.j0 = r.f64();
  if (!r.exhausted()) throw ProtocolError("trailing bytes in surrogate message");
  return msg;
}

IncrementDown decode_increment_down(const Bytes& buf) {
  ByteReader r(buf);
  Header h = read_header(r, kTagIncrementDown);
  IncrementDown msg;
  msg.ds_id = h.ds_id;
  msg.sample_index = h.sample_index;
  msg.dxb.resize(h.n_b);
  for (int i = 0; i < h.n_b; ++i) msg.dxb(i) = r.f64();
  if (!r.exhausted()) throw ProtocolError("trailing bytes in increment message");
  return msg;
}

namespace {

SpMat remap(const SpMat& a, const std::vector<int>& row_map,
            const std::vector<int>& col_map, int rows, int cols) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(a.nonZeros());
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it)
      trip.emplace_back(row_map[it.row()], col_map[it.col()], it.value());
  SpMat out(rows, cols);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

std::vector<int> offset_map(int count, int offset) {
  std::vector<int> m(count);
  for (int i = 0; i < count; ++i) m[i] = offset + i;
  return m;
}

int local_index_of(const Subsystem& sub, int bus_id) {
  for (size_t i = 0; i < sub.buses.size(); ++i)
    if (sub.buses[i].id == bus_id) return static_cast<int>(i);
  throw ValidationError("bus " + std::to_string(bus_id) + " not found");
}

}  // namespace

CompositeNlp::CompositeNlp(const Network& net, std::shared_ptr<const Scenario> sc) {
  AgentMap ts;
  ts.ds_id = -1;
  ts.problem = std::make_shared<OpfProblem>(make_ts_model(net), sc);
  const int n_ts = ts.problem->num_vars();
  ts.var_map = offset_map(n_ts, 0);
  ts.eq_offset = 0;
  ts.ineq_offset = 0;
  n_ = n_ts;
  m_eq_ = ts.problem->num_eq();
  m_ineq_ = ts.problem->num_ineq();
  agents_.push_back(std::move(ts));

  for (size_t d = 0; d < net.ds.size(); ++d) {
    const DistSystem& dist = net.ds[d];
    int tie_idx = -1;
    for (size_t k = 0; k < net.ties.size(); ++k)
      if (net.ties[k].ds_id == dist.id) tie_idx = static_cast<int>(k);
    if (tie_idx < 0)
      throw ValidationError("distribution system " + std::to_string(dist.id) +
                            " has no tie line");

    AgentMap ag;
    ag.ds_id = dist.id;
    ag.problem = std::make_shared<OpfProblem>(make_ds_model(net, dist.id), sc);
    const OpfProblem& tsp = *agents_[0].problem;
    int ts_bus = local_index_of(net.ts, net.ties[tie_idx].ts_bus);
    int root = local_index_of(dist, dist.root_bus);
    std::array<int, 4> ts_local = {tsp.var_e(ts_bus), tsp.var_f(ts_bus),
                                   tsp.var_tie_p(tie_idx), tsp.var_tie_q(tie_idx)};
    std::array<int, 4> ds_local = {ag.problem->var_e(root), ag.problem->var_f(root),
                                   ag.problem->var_tie_p(0), ag.problem->var_tie_q(0)};
    ag.var_map.assign(ag.problem->num_vars(), -1);
    for (int j = 0; j < 4; ++j) ag.var_map[ds_local[j]] = ts_local[j];
    for (int i = 0; i < ag.problem->num_vars(); ++i)
      if (ag.var_map[i] < 0) ag.var_map[i] = n_++;
    ag.eq_offset = m_eq_;
    ag.ineq_offset = m_ineq_;
    m_eq_ += ag.problem->num_eq();
    m_ineq_ += ag.problem->num_ineq();
    boundary_.push_back(ts_local);  // TS map is the identity
    ts_boundary_.push_back(ts_local);
    agents_.push_back(std::move(ag));
  }

  lb_.resize(m_ineq_);
  ub_.resize(m_ineq_);
  for (const auto& ag : agents_) {
    lb_.segment(ag.ineq_offset, ag.problem->num_ineq()) = ag.problem->ineq_lower();
    ub_.segment(ag.ineq_offset, ag.problem->num_ineq()) = ag.problem->ineq_upper();
  }
}

VecX CompositeNlp::gather(const VecX& x, int a) const {
  const auto& map = agents_[a].var_map;
  VecX loc(map.size());
  for (size_t i = 0; i < map.size(); ++i) loc(i) = x(map[i]);
  return loc;
}

PrimalDualState CompositeNlp::agent_state(const PrimalDualState& global, int a) const {
  const AgentMap& ag = agents_[a];
  PrimalDualState s;
  s.x = gather(global.x, a);
  s.y = global.y.segment(ag.eq_offset, ag.problem->num_eq());
  int r = ag.problem->num_ineq();
  s.w = global.w.segment(ag.ineq_offset, r);
  s.z = global.z.segment(ag.ineq_offset, r);
  s.u = global.u.segment(ag.ineq_offset, r);
  s.l = global.l.segment(ag.ineq_offset, r);
  s.mu = global.mu;
  return s;
}

Increment CompositeNlp::merge_increments(const std::vector<Increment>& per_agent) const {
  if (per_agent.size() != agents_.size())
    throw DimensionError("one increment per agent expected");
  Increment g;
  g.dx = VecX::Zero(n_);
  g.dy = VecX::Zero(m_eq_);
  g.dw = VecX::Zero(m_ineq_);
  g.dz = VecX::Zero(m_ineq_);
  g.du = VecX::Zero(m_ineq_);
  g.dl = VecX::Zero(m_ineq_);
  for (size_t a = 0; a < agents_.size(); ++a) {
    const AgentMap& ag = agents_[a];
    const Increment& inc = per_agent[a];
    for (size_t i = 0; i < ag.var_map.size(); ++i) {
      // the TS agent owns the boundary variables; DS copies are skipped
      if (a > 0 && ag.var_map[i] < agents_[0].problem->num_vars()) continue;
      g.dx(ag.var_map[i]) = inc.dx(i);
    }
    g.dy.segment(ag.eq_offset, ag.problem->num_eq()) = inc.dy;
    int r = ag.problem->num_ineq();
    g.dw.segment(ag.ineq_offset, r) = inc.dw;
    g.dz.segment(ag.ineq_offset, r) = inc.dz;
    g.du.segment(ag.ineq_offset, r) = inc.du;
    g.dl.segment(ag.ineq_offset, r) = inc.dl;
  }
  return g;
}

double CompositeNlp::objective(const VecX& x, double t) const {
  double v = 0.0;
  for (size_t a = 0; a < agents_.size(); ++a)
    v += agents_[a].problem->objective(gather(x, a), t);
  return v;
}

VecX CompositeNlp::grad_objective(const VecX& x, double t) const {
  VecX g = VecX::Zero(n_);
  for (size_t a = 0; a < agents_.size(); ++a) {
    VecX loc = agents_[a].problem->grad_objective(gather(x, a), t);
    for (size_t i = 0; i < agents_[a].var_map.size(); ++i)
      g(agents_[a].var_map[i]) += loc(i);
  }
  return g;
}

SpMat CompositeNlp::hess_objective(const VecX& x, double t) const {
  SpMat h(n_, n_);
  for (size_t a = 0; a < agents_.size(); ++a) {
    const auto& m = agents_[a].var_map;
    h += remap(agents_[a].problem->hess_objective(gather(x, a), t), m, m, n_, n_);
  }
  return h;
}

VecX CompositeNlp::eq_constraints(const VecX& x, double t) const {
  VecX g(m_eq_);
  for (size_t a = 0; a < agents_.size(); ++a)
    g.segment(agents_[a].eq_offset, agents_[a].problem->num_eq()) =
        agents_[a].problem->eq_constraints(gather(x, a), t);
  return g;
}

SpMat CompositeNlp::eq_jacobian(const VecX& x, double t) const {
  SpMat j(m_eq_, n_);
  for (size_t a = 0; a < agents_.size(); ++a) {
    const AgentMap& ag = agents_[a];
    j += remap(ag.problem->eq_jacobian(gather(x, a), t),
               offset_map(ag.problem->num_eq(), ag.eq_offset), ag.var_map, m_eq_, n_);
  }
  return j;
}

SpMat CompositeNlp::eq_hessian_sum(const VecX& x, double t, const VecX& y) const {
  SpMat h(n_, n_);
  for (size_t a = 0; a < agents_.size(); ++a) {
    const AgentMap& ag = agents_[a];
    VecX ya = y.segment(ag.eq_offset, ag.problem->num_eq());
    h += remap(ag.problem->eq_hessian_sum(gather(x, a), t, ya), ag.var_map,
               ag.var_map, n_, n_);
  }
  return h;
}

VecX CompositeNlp::ineq_constraints(const VecX& x, double t) const {
  VecX h(m_ineq_);
  for (size_t a = 0; a < agents_.size(); ++a)
    h.segment(agents_[a].ineq_offset, agents_[a].problem->num_ineq()) =
        agents_[a].problem->ineq_constraints(gather(x, a), t);
  return h;
}

SpMat CompositeNlp::ineq_jacobian(const VecX& x, double t) const {
  SpMat j(m_ineq_, n_);
  for (size_t a = 0; a < agents_.size(); ++a) {
    const AgentMap& ag = agents_[a];
    j += remap(ag.problem->ineq_jacobian(gather(x, a), t),
               offset_map(ag.problem->num_ineq(), ag.ineq_offset), ag.var_map,
               m_ineq_, n_);
  }
  return j;
}

SpMat CompositeNlp::ineq_hessian_sum(const VecX& x, double t, const VecX& s) const {
  SpMat h(n_, n_);
  for (size_t a = 0; a < agents_.size(); ++a) {
    const AgentMap& ag = agents_[a];
    VecX sa = s.segment(ag.ineq_offset, ag.problem->num_ineq());
    h += remap(ag.problem->ineq_hessian_sum(gather(x, a), t, sa), ag.var_map,
               ag.var_map, n_, n_);
  }
  return h;
}

VecX CompositeNlp::eq_time_derivative(const VecX& x, double t) const {
  VecX g(m_eq_);
  for (size_t a = 0; a < agents_.size(); ++a)
    g.segment(agents_[a].eq_offset, agents_[a].problem->num_eq()) =
        agents_[a].problem->eq_time_derivative(gather(x, a), t);
  return g;
}

VecX CompositeNlp::ineq_time_derivative(const VecX& x, double t) const {
  VecX h(m_ineq_);
  for (size_t a = 0; a < agents_.size(); ++a)
    h.segment(agents_[a].ineq_offset, agents_[a].problem->num_ineq()) =
        agents_[a].problem->ineq_time_derivative(gather(x, a), t);
  return h;
}

VecX CompositeNlp::grad_objective_time_derivative(const VecX& x, double t) const {
  VecX g = VecX::Zero(n_);
  for (size_t a = 0; a < agents_.size(); ++a) {
    VecX loc = agents_[a].problem->grad_objective_time_derivative(gather(x, a), t);
    for (size_t i = 0; i < agents_[a].var_map.size(); ++i)
      g(agents_[a].var_map[i]) += loc(i);
  }
  return g;
}

VecX CompositeNlp::initial_primal(double t) const {
  VecX x = VecX::Zero(n_);
  for (size_t a = 0; a < agents_.size(); ++a) {
    VecX loc = agents_[a].problem->initial_primal(t);
    for (size_t i = 0; i < agents_[a].var_map.size(); ++i)
      x(agents_[a].var_map[i]) = loc(i);
  }
  return x;
}

std::shared_ptr<CompositeNlp> partition_network(const Network& net,
                                                std::shared_ptr<const Scenario> sc) {
  return std::make_shared<CompositeNlp>(net, std::move(sc));
}

DsAgent::DsAgent(int ds_id, std::shared_ptr<OpfProblem> problem,
                 std::array<int, 4> boundary_vars)
    : ds_id_(ds_id), problem_(std::move(problem)), boundary_(boundary_vars) {
  const int n = problem_->num_vars();
  std::vector<bool> is_b(n, false);
  for (int b : boundary_) {
    if (b < 0 || b >= n) throw DimensionError("boundary variable out of range");
    is_b[b] = true;
  }
  for (int i = 0; i < n; ++i)
    if (!is_b[i]) interior_.push_back(i);
}

Bytes DsAgent::condense(double t, double alpha, bool prediction,
                        std::uint64_t sample_index) {
  if (cached_ && sample_index <= cache_sample_)
    throw ProtocolError("ds " + std::to_string(ds_id_) +
                        ": sample index must be strictly increasing");
  cond_ = condense_system(*problem_, state_, t, alpha, prediction);

  const int n = problem_->num_vars();
  const int ni = static_cast<int>(interior_.size());
  const int m = problem_->num_eq();
  std::vector<int> ipos(n, -1), bpos(n, -1);
  for (int i = 0; i < ni; ++i) ipos[interior_[i]] = i;
  for (int j = 0; j < 4; ++j) bpos[boundary_[j]] = j;

  std::vector<Eigen::Triplet<double>> hii, gi;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(ni + m, 4);
  Eigen::MatrixXd hbb = Eigen::MatrixXd::Zero(4, 4);
  const SpMat& h = cond_.sys.hess;
  for (int k = 0; k < h.outerSize(); ++k)
    for (SpMat::InnerIterator it(h, k); it; ++it) {
      int r = static_cast<int>(it.row()), col = static_cast<int>(it.col());
      if (ipos[r] >= 0 && ipos[col] >= 0)
        hii.emplace_back(ipos[r], ipos[col], it.value());
      else if (ipos[r] >= 0 && bpos[col] >= 0)
        c(ipos[r], bpos[col]) += it.value();
      else if (bpos[r] >= 0 && bpos[col] >= 0)
        hbb(bpos[r], bpos[col]) += it.value();
      // the H_BI block is the transpose of H_IB and is not stored
    }
  const SpMat& g = cond_.sys.jac_eq;
  for (int k = 0; k < g.outerSize(); ++k)
    for (SpMat::InnerIterator it(g, k); it; ++it) {
      int r = static_cast<int>(it.row()), col = static_cast<int>(it.col());
      if (ipos[col] >= 0)
        gi.emplace_back(r, ipos[col], it.value());
      else
        c(ni + r, bpos[col]) += it.value();
    }
  SpMat h_ii(ni, ni), g_i(m, ni);
  h_ii.setFromTriplets(hii.begin(), hii.end());
  g_i.setFromTriplets(gi.begin(), gi.end());

  VecX rx_i(ni), rx_b(4);
  for (int i = 0; i < ni; ++i) rx_i(i) = cond_.sys.rx(interior_[i]);
  for (int j = 0; j < 4; ++j) rx_b(j) = cond_.sys.rx(boundary_[j]);

  ksolver_.factorize(h_ii, g_i);
  auto [s0x, s0y] = ksolver_.solve(rx_i, cond_.sys.ry);
  s0_.resize(ni + m);
  s0_ << s0x, s0y;
  big_s_.resize(ni + m, 4);
  for (int j = 0; j < 4; ++j) {
    auto [sx, sy] = ksolver_.solve(c.col(j).head(ni), c.col(j).tail(m));
    big_s_.col(j).head(ni) = sx;
    big_s_.col(j).tail(m) = sy;
  }

  SurrogateUp msg;
  msg.ds_id = ds_id_;
  msg.sample_index = sample_index;
  msg.surrogate.ds_id = ds_id_;
  Eigen::MatrixXd j2 = hbb - c.transpose() * big_s_;
  msg.surrogate.j2 = 0.5 * (j2 + j2.transpose());
  msg.surrogate.j1 = c.transpose() * s0_ - rx_b;
  VecX r0(ni + m);
  r0 << rx_i, cond_.sys.ry;
  msg.surrogate.j0 = -0.5 * s0_.dot(r0);

  cached_ = true;
  consumed_ = false;
  cache_sample_ = sample_index;
  return encode(msg);
}

Increment DsAgent::recover(const Bytes& down_msg) {
  IncrementDown msg = decode_increment_down(down_msg);
  if (msg.ds_id != ds_id_)
    throw ProtocolError("increment routed to wrong ds " + std::to_string(msg.ds_id));
  if (!cached_) throw ProtocolError("recover called before condense");
  if (msg.sample_index != cache_sample_)
    throw ProtocolError("increment sample index does not match condensation");
  if (consumed_)
    throw ProtocolError("duplicate increment for sample " +
                        std::to_string(msg.sample_index));
  if (msg.dxb.size() != 4)
    throw ProtocolError("boundary increment must have 4 entries");

  VecX sol = s0_ - big_s_ * msg.dxb;
  const int ni = static_cast<int>(interior_.size());
  VecX dx = VecX::Zero(problem_->num_vars());
  for (int i = 0; i < ni; ++i) dx(interior_[i]) = sol(i);
  for (int j = 0; j < 4; ++j) dx(boundary_[j]) = msg.dxb(j);
  consumed_ = true;
  return recover_blocks(cond_, state_, std::move(dx), sol.tail(problem_->num_eq()));
}

TsAgent::TsAgent(std::shared_ptr<OpfProblem> problem,
                 std::vector<std::array<int, 4>> boundaries, std::vector<int> ds_ids)
    : problem_(std::move(problem)),
      boundaries_(std::move(boundaries)),
      ds_ids_(std::move(ds_ids)) {
  if (boundaries_.size() != ds_ids_.size())
    throw DimensionError("one boundary set per ds expected");
}

std::pair<Increment, std::vector<Bytes>> TsAgent::accumulate_solve(
    const std::vector<Bytes>& up_msgs, double t, double alpha, bool prediction,
    std::uint64_t sample_index) {
  // decode and validate: exactly one surrogate per DS, same sample
  std::map<int, QuadraticSurrogate> surrogates;
  for (const Bytes& b : up_msgs) {
    SurrogateUp up = decode_surrogate_up(b);
    if (up.sample_index != sample_index)
      throw ProtocolError("surrogate sample index mismatch");
    if (up.surrogate.j1.size() != 4)
      throw ProtocolError("surrogate must cover 4 boundary variables");
    if (!surrogates.emplace(up.ds_id, std::move(up.surrogate)).second)
      throw ProtocolError("duplicate surrogate from ds " + std::to_string(up.ds_id));
  }
  for (int id : ds_ids_)
    if (!surrogates.count(id))
      throw ProtocolError("missing surrogate from ds " + std::to_string(id));
  if (surrogates.size() != ds_ids_.size())
    throw ProtocolError("surrogate from unknown ds received");

  CondensedSystem cond = condense_system(*problem_, state_, t, alpha, prediction);
  SpMat hess = cond.sys.hess;
  VecX rx = cond.sys.rx;
  std::vector<Eigen::Triplet<double>> extra;
  for (const auto& [id, sur] : surrogates) {  // std::map iterates ascending ds_id
    const auto& b =
        boundaries_[std::find(ds_ids_.begin(), ds_ids_.end(), id) - ds_ids_.begin()];
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) extra.emplace_back(b[i], b[j], sur.j2(i, j));
      rx(b[i]) -= sur.j1(i);
    }
  }
  SpMat add(problem_->num_vars(), problem_->num_vars());
  add.setFromTriplets(extra.begin(), extra.end());
  hess += add;

  solver_.factorize(hess, cond.sys.jac_eq);
  auto [dx, dy] = solver_.solve(rx, cond.sys.ry);

  std::vector<Bytes> downs;
  for (size_t k = 0; k < ds_ids_.size(); ++k) {
    IncrementDown down;
    down.ds_id = ds_ids_[k];
    down.sample_index = sample_index;
    down.dxb.resize(4);
    for (int j = 0; j < 4; ++j) down.dxb(j) = dx(boundaries_[k][j]);
    downs.push_back(encode(down));
  }
  return {recover_blocks(cond, state_, std::move(dx), std::move(dy)),
          std::move(downs)};
}

namespace {

std::array<int, 4> ds_local_boundary(const CompositeNlp& comp, int k) {
  const AgentMap& ag = comp.agents()[k + 1];
  const auto& glob = comp.boundary(k);
  std::array<int, 4> loc{};
  for (int j = 0; j < 4; ++j) {
    auto it = std::find(ag.var_map.begin(), ag.var_map.end(), glob[j]);
    if (it == ag.var_map.end())
      throw DimensionError("boundary variable missing from ds agent");
    loc[j] = static_cast<int>(it - ag.var_map.begin());
  }
  return loc;
}

std::vector<int> composite_ds_ids(const CompositeNlp& comp) {
  std::vector<int> ids;
  for (int k = 0; k < comp.num_ds(); ++k) ids.push_back(comp.agents()[k + 1].ds_id);
  return ids;
}

std::vector<std::array<int, 4>> composite_ts_boundaries(const CompositeNlp& comp) {
  std::vector<std::array<int, 4>> b;
  for (int k = 0; k < comp.num_ds(); ++k) b.push_back(comp.ts_boundary(k));
  return b;
}

}  // namespace

RoundResult decentralized_increments(const CompositeNlp& comp,
                                     const PrimalDualState& global, double t,
                                     double alpha, bool prediction,
                                     std::uint64_t sample_index) {
  TsAgent ts(comp.agents()[0].problem, composite_ts_boundaries(comp),
             composite_ds_ids(comp));
  ts.state() = comp.agent_state(global, 0);
  std::vector<DsAgent> ds;
  for (int k = 0; k < comp.num_ds(); ++k) {
    ds.emplace_back(comp.agents()[k + 1].ds_id, comp.agents()[k + 1].problem,
                    ds_local_boundary(comp, k));
    ds.back().state() = comp.agent_state(global, k + 1);
  }

  RoundResult out;
  std::vector<Bytes> ups;
  for (auto& agent : ds) {
    ups.push_back(agent.condense(t, alpha, prediction, sample_index));
    ++out.msgs;
  }
  auto [ts_inc, downs] = ts.accumulate_solve(ups, t, alpha, prediction, sample_index);
  out.per_agent.push_back(std::move(ts_inc));
  for (size_t k = 0; k < ds.size(); ++k) {
    out.per_agent.push_back(ds[k].recover(downs[k]));
    ++out.msgs;
  }
  out.merged = comp.merge_increments(out.per_agent);
  return out;
}

DecentralizedTracker::DecentralizedTracker(const Network& net,
                                           std::shared_ptr<const Scenario> sc,
                                           TrackerConfig cfg, StepMode mode)
    : comp_(partition_network(net, std::move(sc))),
      cfg_(cfg),
      mode_(mode),
      ts_(comp_->agents()[0].problem, composite_ts_boundaries(*comp_),
          composite_ds_ids(*comp_)) {
  for (int k = 0; k < comp_->num_ds(); ++k)
    ds_.emplace_back(comp_->agents()[k + 1].ds_id, comp_->agents()[k + 1].problem,
                     ds_local_boundary(*comp_, k));
}

void DecentralizedTracker::burn_in(double t) {
  SolveResult res = solve_converged(*comp_, t, cfg_.burn_in);
  if (!res.converged)
    throw SolverError("decentralized burn-in did not converge at t=" +
                      std::to_string(t));
  auto seed_agent = [&](PrimalDualState& s, int a) {
    s = comp_->agent_state(res.state, a);
    s.mu = std::max(barrier_update(s, cfg_.sigma), cfg_.mu_floor);
  };
  seed_agent(ts_.state(), 0);
  for (size_t k = 0; k < ds_.size(); ++k) seed_agent(ds_[k].state(), k + 1);
}

DecentralizedTracker::RoundStats DecentralizedTracker::step(double t) {
  const double alpha = cfg_.effective_alpha();
  RoundStats stats;

  std::vector<Bytes> ups;
  for (auto& agent : ds_) {
    ups.push_back(agent.condense(t, alpha, cfg_.prediction, sample_index_));
    ++stats.msgs;
  }
  auto [ts_inc, downs] =
      ts_.accumulate_solve(ups, t, alpha, cfg_.prediction, sample_index_);
  std::vector<Increment> incs;
  incs.push_back(std::move(ts_inc));
  for (size_t k = 0; k < ds_.size(); ++k) {
    incs.push_back(ds_[k].recover(downs[k]));
    ++stats.msgs;
  }

  std::vector<StepLengths> sls;
  sls.push_back(step_lengths(ts_.state(), incs[0], cfg_.gamma));
  for (size_t k = 0; k < ds_.size(); ++k)
    sls.push_back(step_lengths(ds_[k].state(), incs[k + 1], cfg_.gamma));
  stats.alpha_p = sls[0].alpha_p;
  stats.alpha_d = sls[0].alpha_d;

  if (mode_ == StepMode::kGlobalMin) {
    StepLengths gmin;
    for (const auto& sl : sls) {
      gmin.alpha_p = std::min(gmin.alpha_p, sl.alpha_p);
      gmin.alpha_d = std::min(gmin.alpha_d, sl.alpha_d);
    }
    for (auto& sl : sls) sl = gmin;
    stats.alpha_p = gmin.alpha_p;
    stats.alpha_d = gmin.alpha_d;
    // scalar step-length reduction: one up and one down exchange per DS
    stats.msgs += 2 * static_cast<long>(ds_.size());
  }

  const double scale = std::min(cfg_.tau, 1.0);
  auto apply = [&](PrimalDualState& s, const Increment& inc, const StepLengths& sl) {
    apply_step(s, inc, StepLengths{scale * sl.alpha_p, scale * sl.alpha_d});
    s.mu = std::max(barrier_update(s, cfg_.sigma), cfg_.mu_floor);
  };
  apply(ts_.state(), incs[0], sls[0]);
  for (size_t k = 0; k < ds_.size(); ++k) apply(ds_[k].state(), incs[k + 1], sls[k + 1]);

  ++sample_index_;
  ++rounds_;
  total_msgs_ += stats.msgs;
  return stats;
}

double DecentralizedTracker::objective(double t) const {
  double v = ts_.problem().objective(ts_.state().x, t);
  for (const auto& d : ds_) v += d.problem().objective(d.state().x, t);
  return v;
}

double DecentralizedTracker::kkt_error(double t) const {
  double e = gridtrack::kkt_error(ts_.problem(), ts_.state(), t);
  for (const auto& d : ds_)
    e = std::max(e, gridtrack::kkt_error(d.problem(), d.state(), t));
  return e;
}

bool DecentralizedTracker::interior() const {
  if (!ts_.state().strictly_interior()) return false;
  for (const auto& d : ds_)
    if (!d.state().strictly_interior()) return false;
  return true;
}

PrimalDualState DecentralizedTracker::global_state() const {
  PrimalDualState g;
  g.x = VecX::Zero(comp_->num_vars());
  g.y = VecX::Zero(comp_->num_eq());
  g.w = VecX::Zero(comp_->num_ineq());
  g.z = VecX::Zero(comp_->num_ineq());
  g.u = VecX::Zero(comp_->num_ineq());
  g.l = VecX::Zero(comp_->num_ineq());
  g.mu = ts_.state().mu;
  auto scatter = [&](const PrimalDualState& s, int a) {
    const AgentMap& ag = comp_->agents()[a];
    int n_ts = comp_->agents()[0].problem->num_vars();
    for (size_t i = 0; i < ag.var_map.size(); ++i)
      if (a == 0 || ag.var_map[i] >= n_ts) g.x(ag.var_map[i]) = s.x(i);
    g.y.segment(ag.eq_offset, ag.problem->num_eq()) = s.y;
    int r = ag.problem->num_ineq();
    g.w.segment(ag.ineq_offset, r) = s.w;
    g.z.segment(ag.ineq_offset, r) = s.z;
    g.u.segment(ag.ineq_offset, r) = s.u;
    g.l.segment(ag.ineq_offset, r) = s.l;
  };
  scatter(ts_.state(), 0);
  for (size_t k = 0; k < ds_.size(); ++k) scatter(ds_[k].state(), k + 1);
  return g;
}

Trajectory run_decentralized(const Network& net, std::shared_ptr<const Scenario> sc,
                             double t_start, double t_end, const TrackerConfig& cfg,
                             StepMode mode) {
  if (!(cfg.tau > 0.0)) throw ValidationError("tracker: tau must be > 0");
  DecentralizedTracker tracker(net, std::move(sc), cfg, mode);
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };

  Trajectory traj;
  auto start = clock::now();
  tracker.burn_in(t_start);
  SampleRecord rec;
  rec.t = t_start;
  rec.objective = tracker.objective(t_start);
  rec.kkt_error = tracker.kkt_error(t_start);
  rec.x = tracker.global_state().x;
  rec.wall_ms = ms_since(start);
  const double tol = 1e-9 * std::max(1.0, std::abs(t_end));
  for (double t = t_start; t <= t_end + tol; t += cfg.tau) {
    if (t + cfg.tau > t_end + tol) {
      rec.alpha_p = rec.alpha_d = 0.0;
      traj.samples.push_back(std::move(rec));
      break;
    }
    auto ts0 = clock::now();
    DecentralizedTracker::RoundStats stats = tracker.step(t);
    rec.alpha_p = stats.alpha_p;
    rec.alpha_d = stats.alpha_d;
    rec.msgs = stats.msgs;
    traj.samples.push_back(std::move(rec));
    rec = SampleRecord{};
    rec.t = t + cfg.tau;
    rec.objective = tracker.objective(rec.t);
    rec.kkt_error = tracker.kkt_error(rec.t);
    rec.x = tracker.global_state().x;
    rec.wall_ms = ms_since(ts0);
  }
  return traj;
}

Increment dense_full_increment(const NlpProblem& p, const PrimalDualState& s,
                               double t, double alpha, bool prediction) {
  check_dimensions(p, s);
  const int n = p.num_vars(), m = p.num_eq(), r = p.num_ineq();
  ResidualBundle res = kkt_residual(p, s, t);
  VecX rx = alpha * res.lx, ry = alpha * res.ly, rw = alpha * res.lw,
       rz = alpha * res.lz, ru = alpha * res.lu, rl = alpha * res.ll;
  if (prediction) {
    kkt_time_derivative(p, s, t, res);
    rx += res.lx_t;
    ry += res.ly_t;
    rw += res.lw_t;
    rz += res.lz_t;
  }

  Eigen::MatrixXd hxx =
      Eigen::MatrixXd(p.hess_objective(s.x, t)) +
      Eigen::MatrixXd(p.eq_hessian_sum(s.x, t, s.y)) -
      Eigen::MatrixXd(p.ineq_hessian_sum(s.x, t, VecX(s.w + s.z)));
  Eigen::MatrixXd jg = Eigen::MatrixXd(p.eq_jacobian(s.x, t));
  Eigen::MatrixXd jh = Eigen::MatrixXd(p.ineq_jacobian(s.x, t));

  const int dim = n + m + 4 * r;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  VecX rhs(dim);
  const int ow = n + m, oz = ow + r, ou = oz + r, ol = ou + r;
  a.block(0, 0, n, n) = hxx;
  a.block(0, n, n, m) = jg.transpose();
  a.block(0, ow, n, r) = -jh.transpose();
  a.block(0, oz, n, r) = -jh.transpose();
  a.block(n, 0, m, n) = jg;
  a.block(ow, 0, r, n) = jh;
  a.block(ow, ou, r, r) = Eigen::MatrixXd::Identity(r, r);
  a.block(oz, 0, r, n) = jh;
  a.block(oz, ol, r, r) = -Eigen::MatrixXd::Identity(r, r);
  a.block(ou, ow, r, r) = Eigen::MatrixXd(s.u.asDiagonal());
  a.block(ou, ou, r, r) = Eigen::MatrixXd(s.w.asDiagonal());
  a.block(ol, oz, r, r) = Eigen::MatrixXd(s.l.asDiagonal());
  a.block(ol, ol, r, r) = Eigen::MatrixXd(s.z.asDiagonal());
  rhs << -rx, -ry, -rw, -rz, -ru, -rl;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible())
    throw SolverError("dense reference system is singular");
  VecX sol = lu.solve(rhs);
  Increment inc;
  inc.dx = sol.segment(0, n);
  inc.dy = sol.segment(n, m);
  inc.dw = sol.segment(ow, r);
  inc.dz = sol.segment(oz, r);
  inc.du = sol.segment(ou, r);
  inc.dl = sol.segment(ol, r);
  return inc;
}

PrimalDualState random_interior_state(const NlpProblem& p, double t,
                                      std::uint64_t seed) {
  SplitMix64 rng(seed);
  PrimalDualState s;
  s.x = p.initial_primal(t);
  for (int i = 0; i < s.x.size(); ++i) s.x(i) += 0.05 * rng.symmetric();
  s.y.resize(p.num_eq());
  for (int i = 0; i < s.y.size(); ++i) s.y(i) = 0.1 * rng.symmetric();
  const int r = p.num_ineq();
  s.u.resize(r);
  s.l.resize(r);
  s.w.resize(r);
  s.z.resize(r);
  for (int i = 0; i < r; ++i) {
    s.u(i) = 0.2 + rng.uniform();
    s.l(i) = 0.2 + rng.uniform();
    s.w(i) = -(0.2 + rng.uniform());
    s.z(i) = 0.2 + rng.uniform();
  }
  s.mu = 0.05 + 0.2 * rng.uniform();
  return s;
}

EquivalenceReport verify_equivalence(const Network& net,
                                     std::shared_ptr<const Scenario> sc, double t,
                                     std::uint64_t seed) {
  auto comp = partition_network(net, std::move(sc));
  EquivalenceReport rep;
  rep.num_vars = comp->num_vars();
  if (rep.num_vars > 200)
    throw ValidationError("equivalence check needs a small case (<= 200 variables)");

  PrimalDualState s = random_interior_state(*comp, t, seed);
  Increment oracle = dense_full_increment(*comp, s, t, 1.0, true);
  RoundResult round = decentralized_increments(*comp, s, t, 1.0, true, 0);

  auto dev = [](const VecX& a, const VecX& b) {
    if (a.size() == 0) return 0.0;
    return (a - b).cwiseAbs().maxCoeff() / (1.0 + b.cwiseAbs().maxCoeff());
  };
  rep.block_dev = {dev(round.merged.dx, oracle.dx), dev(round.merged.dy, oracle.dy),
                   dev(round.merged.dw, oracle.dw), dev(round.merged.dz, oracle.dz),
                   dev(round.merged.du, oracle.du), dev(round.merged.dl, oracle.dl)};
  rep.max_rel_dev = *std::max_element(rep.block_dev.begin(), rep.block_dev.end());
  rep.pass = rep.max_rel_dev <= 1e-8;
  return rep;
}

}  // namespace gridtrack
