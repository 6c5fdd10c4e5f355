#pragma once

// The level stack. Levels are numbered 1..L with level 1 outermost; an input
// flows innermost-first, so the composed map is
//   y = theta(1) * theta(2) * ... * theta(L) * x,
// and each level records the vector it received as its context. The stack is
// a DAG in general (validate() checks acyclicity on the stored edge set), but
// every structural operation here maintains the chain (l, l+1).

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dnh/memory.hpp"

namespace dnh {

enum class EventKind { add, prune, freq_change };

const char* event_kind_name(EventKind k);

struct StructuralEvent {
  long step = 0;
  EventKind kind = EventKind::add;
  int level = 0;
  double detail = 0.0;  // add/freq_change: new frequency; prune: removed gradient norm
  bool interior = false;  // prune only: level was not innermost
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
};

class Hierarchy {
 public:
  Hierarchy() = default;
  // Builds levels 1..l0, identity maps, with the given frequencies.
  Hierarchy(int dim, int l0, int l_max, const std::vector<double>& freqs, double f_min,
            double f_max);

  long t = 0;  // step counter, advanced by the training loop
  int l_max = 5;
  double f_min = 0.0;
  double f_max = 1e9;

  std::vector<MemoryModule> modules;          // index i holds level i+1
  std::vector<std::pair<int, int>> edges;     // (from_level, to_level)
  std::vector<StructuralEvent> ledger;        // structural history
  int next_id = 1;

  int size() const { return static_cast<int>(modules.size()); }
  int dim() const { return modules.empty() ? 0 : modules.front().dim(); }
  MemoryModule& module(int level);
  const MemoryModule& module(int level) const;

  // Applies level L first and level 1 last, recording each level's input as
  // its context. Errors on an empty stack.
  Vector forward(const Vector& x);

  // One scheduler tick. Each level accumulates phase += freq / max_freq
  // (max over current levels) and is due when its phase reaches 1, paying 1
  // back out of the accumulator. The fastest level is due every step.
  // Returns the due level indices in ascending order.
  std::vector<int> due_modules();

  // Appends level L+1 (innermost) with theta = theta(L) + alpha * c c^T built
  // from level L's context, frequency = mean of existing frequencies (clamped
  // to [f_min, f_max]), fresh momentum/phase. Capacity error at l_max.
  StructuralEvent add_level(double alpha);

  // Appends level L+1 with theta = m_prev + eta * meta_grad and frequency =
  // half the innermost frequency (clamped).
  StructuralEvent add_meta_level(const Matrix& meta_grad, const Matrix& m_prev, double eta);

  // Removes the given level (never level 1, never the last level), re-indexes
  // the remainder contiguously and rebuilds the chain edges. detail_norm is
  // stored in the event (the gradient norm that justified the prune).
  StructuralEvent prune_level(int level, double detail_norm);

  // Structural health check: non-empty, contiguous levels, square matching
  // dims, acyclic edge set over valid endpoints, frequencies within bounds,
  // phases in [0,1), finite parameters, in/out degree <= max_degree.
  // Collects violations instead of throwing.
  ValidationReport validate(int max_degree = 8) const;

  // Plain-text snapshot, full double precision; load(save(h)) reproduces the
  // stack exactly.
  void save_text(std::ostream& os) const;
  static Hierarchy load_text(std::istream& is);
  std::string to_text() const;
  static Hierarchy from_text(const std::string& s);
};

}  // namespace dnh
