#include "dnh/hierarchy.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace dnh {

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::add: return "add";
    case EventKind::prune: return "prune";
    case EventKind::freq_change: return "freq_change";
  }
  return "?";
}

Hierarchy::Hierarchy(int dim, int l0, int l_max_, const std::vector<double>& freqs, double f_min_,
                     double f_max_) {
  require(dim >= 1, ErrorKind::invalid_argument, "hierarchy: dim must be >= 1");
  require(l0 >= 1 && l0 <= l_max_, ErrorKind::invalid_argument,
          "hierarchy: need 1 <= l0 <= l_max");
  require(static_cast<int>(freqs.size()) == l0, ErrorKind::invalid_argument,
          "hierarchy: need one initial frequency per level");
  require(f_min_ >= 0.0 && f_min_ < f_max_, ErrorKind::invalid_argument,
          "hierarchy: need 0 <= f_min < f_max");
  l_max = l_max_;
  f_min = f_min_;
  f_max = f_max_;
  for (int l = 1; l <= l0; ++l) {
    double f = freqs[l - 1];
    require(f >= f_min && f <= f_max, ErrorKind::invalid_argument,
            "hierarchy: initial frequency out of bounds");
    modules.emplace_back(next_id++, l, dim, f);
    if (l > 1) edges.emplace_back(l - 1, l);
  }
}

MemoryModule& Hierarchy::module(int level) {
  require(level >= 1 && level <= size(), ErrorKind::range, "hierarchy: no such level");
  return modules[level - 1];
}

const MemoryModule& Hierarchy::module(int level) const {
  require(level >= 1 && level <= size(), ErrorKind::range, "hierarchy: no such level");
  return modules[level - 1];
}

Vector Hierarchy::forward(const Vector& x) {
  require(!modules.empty(), ErrorKind::invalid_state, "forward: hierarchy is empty");
  require(static_cast<int>(x.size()) == dim(), ErrorKind::shape, "forward: input dim mismatch");
  Vector cur = x;
  for (int i = size() - 1; i >= 0; --i) {
    modules[i].context = cur;
    cur = matvec(modules[i].theta, cur);
  }
  require(all_finite(cur), ErrorKind::numeric, "forward: non-finite output");
  return cur;
}

std::vector<int> Hierarchy::due_modules() {
  require(!modules.empty(), ErrorKind::invalid_state, "due_modules: hierarchy is empty");
  double fmax_cur = 0.0;
  for (const auto& m : modules) fmax_cur = std::max(fmax_cur, m.freq);
  require(fmax_cur > 0.0, ErrorKind::invalid_state, "due_modules: all frequencies are zero");
  std::vector<int> due;
  for (auto& m : modules) {
    m.phase += m.freq / fmax_cur;
    if (m.phase >= 1.0) {
      m.phase -= 1.0;
      due.push_back(m.level);
    }
  }
  return due;
}

StructuralEvent Hierarchy::add_level(double alpha) {
  require(!modules.empty(), ErrorKind::invalid_state, "add_level: hierarchy is empty");
  require(size() < l_max, ErrorKind::capacity, "add_level: level cap reached");
  require(std::isfinite(alpha), ErrorKind::invalid_argument, "add_level: alpha must be finite");
  const MemoryModule& inner = modules.back();
  double fsum = 0.0;
  for (const auto& m : modules) fsum += m.freq;
  double f = std::clamp(fsum / size(), f_min, f_max);
  MemoryModule fresh(next_id++, size() + 1, dim(), f);
  fresh.theta = inner.theta;
  add_scaled(fresh.theta, alpha, outer(inner.context, inner.context));
  require(all_finite(fresh.theta), ErrorKind::numeric, "add_level: non-finite init");
  modules.push_back(std::move(fresh));
  edges.emplace_back(size() - 1, size());
  StructuralEvent ev{t, EventKind::add, size(), f, false};
  ledger.push_back(ev);
  return ev;
}

StructuralEvent Hierarchy::add_meta_level(const Matrix& meta_grad, const Matrix& m_prev,
                                          double eta) {
  require(!modules.empty(), ErrorKind::invalid_state, "add_meta_level: hierarchy is empty");
  require(size() < l_max, ErrorKind::capacity, "add_meta_level: level cap reached");
  require(m_prev.rows == dim() && m_prev.cols == dim(), ErrorKind::shape,
          "add_meta_level: m_prev shape mismatch");
  require(meta_grad.rows == dim() && meta_grad.cols == dim(), ErrorKind::shape,
          "add_meta_level: meta_grad shape mismatch");
  require(std::isfinite(eta), ErrorKind::invalid_argument, "add_meta_level: eta must be finite");
  double f = std::clamp(modules.back().freq / 2.0, f_min, f_max);
  MemoryModule fresh(next_id++, size() + 1, dim(), f);
  fresh.theta = m_prev;
  add_scaled(fresh.theta, eta, meta_grad);
  require(all_finite(fresh.theta), ErrorKind::numeric, "add_meta_level: non-finite init");
  modules.push_back(std::move(fresh));
  edges.emplace_back(size() - 1, size());
  StructuralEvent ev{t, EventKind::add, size(), f, false};
  ledger.push_back(ev);
  return ev;
}

StructuralEvent Hierarchy::prune_level(int level, double detail_norm) {
  require(level != 1, ErrorKind::invalid_argument, "prune_level: level 1 is not prunable");
  require(size() >= 2, ErrorKind::capacity, "prune_level: cannot prune the last level");
  require(level >= 2 && level <= size(), ErrorKind::range, "prune_level: no such level");
  bool interior = level < size();
  modules.erase(modules.begin() + (level - 1));
  for (int i = 0; i < size(); ++i) modules[i].level = i + 1;
  edges.clear();
  for (int l = 1; l < size(); ++l) edges.emplace_back(l, l + 1);
  StructuralEvent ev{t, EventKind::prune, level, detail_norm, interior};
  ledger.push_back(ev);
  return ev;
}

ValidationReport Hierarchy::validate(int max_degree) const {
  ValidationReport rep;
  auto flag = [&rep](const std::string& msg) {
    rep.ok = false;
    rep.violations.push_back(msg);
  };

  if (modules.empty()) {
    flag("hierarchy has no levels");
    return rep;
  }
  if (size() > l_max) flag("level count exceeds l_max");
  int d = modules.front().dim();
  for (int i = 0; i < size(); ++i) {
    const MemoryModule& m = modules[i];
    if (m.level != i + 1) flag("levels are not contiguous at position " + std::to_string(i));
    if (m.theta.rows != m.theta.cols || m.theta.rows != d)
      flag("level " + std::to_string(i + 1) + " theta is not square of the shared dim");
    if (m.momentum.rows != d || m.momentum.cols != d)
      flag("level " + std::to_string(i + 1) + " momentum shape mismatch");
    if (static_cast<int>(m.context.size()) != d)
      flag("level " + std::to_string(i + 1) + " context dim mismatch");
    if (!(m.freq >= f_min && m.freq <= f_max))
      flag("level " + std::to_string(i + 1) + " frequency outside [f_min, f_max]");
    if (!(m.phase >= 0.0 && m.phase < 1.0))
      flag("level " + std::to_string(i + 1) + " phase outside [0, 1)");
    if (!all_finite(m.theta) || !all_finite(m.momentum) || !all_finite(m.context) ||
        !std::isfinite(m.freq) || !std::isfinite(m.last_lss))
      flag("level " + std::to_string(i + 1) + " has non-finite state");
  }

  std::vector<int> indeg(size() + 1, 0), outdeg(size() + 1, 0);
  std::vector<std::vector<int>> adj(size() + 1);
  bool endpoints_ok = true;
  for (const auto& [from, to] : edges) {
    if (from < 1 || from > size() || to < 1 || to > size()) {
      flag("edge endpoint out of range");
      endpoints_ok = false;
      continue;
    }
    adj[from].push_back(to);
    ++outdeg[from];
    ++indeg[to];
  }
  for (int l = 1; l <= size(); ++l) {
    if (indeg[l] > max_degree || outdeg[l] > max_degree)
      flag("level " + std::to_string(l) + " exceeds max degree");
  }
  if (endpoints_ok) {
    // Kahn's algorithm; leftover nodes mean a cycle.
    std::vector<int> deg = indeg;
    std::vector<int> queue;
    for (int l = 1; l <= size(); ++l)
      if (deg[l] == 0) queue.push_back(l);
    int seen = 0;
    while (!queue.empty()) {
      int u = queue.back();
      queue.pop_back();
      ++seen;
      for (int v : adj[u])
        if (--deg[v] == 0) queue.push_back(v);
    }
    if (seen != size()) flag("edge set contains a cycle");
  }
  return rep;
}

namespace {

void put_g17(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

void put_values(std::ostream& os, const std::vector<double>& vs) {
  for (size_t i = 0; i < vs.size(); ++i) {
    if (i) os << ' ';
    put_g17(os, vs[i]);
  }
  os << '\n';
}

std::vector<double> read_values(std::istream& is, size_t n, const char* what) {
  std::vector<double> vs(n);
  for (size_t i = 0; i < n; ++i)
    require(static_cast<bool>(is >> vs[i]), ErrorKind::invalid_argument,
            std::string("snapshot: truncated ") + what);
  return vs;
}

void expect_token(std::istream& is, const std::string& want) {
  std::string tok;
  require(static_cast<bool>(is >> tok) && tok == want, ErrorKind::invalid_argument,
          "snapshot: expected token '" + want + "'");
}

}  // namespace

void Hierarchy::save_text(std::ostream& os) const {
  os << "dnh-hierarchy-v1\n";
  os << "t " << t << " l_max " << l_max << " next_id " << next_id << " f_min ";
  put_g17(os, f_min);
  os << " f_max ";
  put_g17(os, f_max);
  os << "\nlevels " << size() << " dim " << dim() << "\n";
  for (const auto& m : modules) {
    os << "module " << m.level << " id " << m.id << " freq ";
    put_g17(os, m.freq);
    os << " phase ";
    put_g17(os, m.phase);
    os << " last_lss ";
    put_g17(os, m.last_lss);
    os << "\ntheta ";
    put_values(os, m.theta.data);
    os << "momentum ";
    put_values(os, m.momentum.data);
    os << "context ";
    put_values(os, m.context);
  }
  os << "edges " << edges.size() << "\n";
  for (const auto& [from, to] : edges) os << from << ' ' << to << '\n';
}

Hierarchy Hierarchy::load_text(std::istream& is) {
  std::string magic;
  require(static_cast<bool>(is >> magic) && magic == "dnh-hierarchy-v1",
          ErrorKind::invalid_argument, "snapshot: bad magic");
  Hierarchy h;
  expect_token(is, "t");
  is >> h.t;
  expect_token(is, "l_max");
  is >> h.l_max;
  expect_token(is, "next_id");
  is >> h.next_id;
  expect_token(is, "f_min");
  is >> h.f_min;
  expect_token(is, "f_max");
  is >> h.f_max;
  int levels = 0, d = 0;
  expect_token(is, "levels");
  is >> levels;
  expect_token(is, "dim");
  is >> d;
  require(is.good() && levels >= 0 && d >= 0, ErrorKind::invalid_argument,
          "snapshot: bad header counts");
  for (int i = 0; i < levels; ++i) {
    MemoryModule m;
    expect_token(is, "module");
    is >> m.level;
    expect_token(is, "id");
    is >> m.id;
    expect_token(is, "freq");
    is >> m.freq;
    expect_token(is, "phase");
    is >> m.phase;
    expect_token(is, "last_lss");
    is >> m.last_lss;
    expect_token(is, "theta");
    m.theta = Matrix(d, d);
    m.theta.data = read_values(is, static_cast<size_t>(d) * d, "theta");
    expect_token(is, "momentum");
    m.momentum = Matrix(d, d);
    m.momentum.data = read_values(is, static_cast<size_t>(d) * d, "momentum");
    expect_token(is, "context");
    m.context = read_values(is, static_cast<size_t>(d), "context");
    h.modules.push_back(std::move(m));
  }
  size_t nedges = 0;
  expect_token(is, "edges");
  is >> nedges;
  for (size_t i = 0; i < nedges; ++i) {
    int from = 0, to = 0;
    require(static_cast<bool>(is >> from >> to), ErrorKind::invalid_argument,
            "snapshot: truncated edges");
    h.edges.emplace_back(from, to);
  }
  return h;
}

std::string Hierarchy::to_text() const {
  std::ostringstream os;
  save_text(os);
  return os.str();
}

Hierarchy Hierarchy::from_text(const std::string& s) {
  std::istringstream is(s);
  return load_text(is);
}

}  // namespace dnh
