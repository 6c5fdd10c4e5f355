#pragma once

// Run logging and the derived metrics: cumulative regret against a hindsight
// comparator, the gradient-norm trend, average accuracy / backward transfer
// from a task matrix, and cross-replica frequency variance.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dnh/hierarchy.hpp"

namespace dnh {

inline constexpr int kMetricsSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "0.1.0";

// performance[i][j]: performance on segment j's distribution after training
// through segment i. Entries here are mean held-out losses.
struct TaskMatrix {
  int n = 0;
  std::vector<std::vector<double>> value;

  explicit TaskMatrix(int n_ = 0) : n(n_), value(n_, std::vector<double>(n_, 0.0)) {}
};

struct MetricsRecord {
  long t = 0;
  double task_loss = 0.0;
  double meta_loss = 0.0;
  int levels = 0;
  std::vector<double> freqs;  // one per live level
  double grad_norm_sq = 0.0;
  double shift_estimate = 0.0;
  std::string event;  // ';'-joined events, empty most steps
};

struct MetricsLog {
  int schema = kMetricsSchemaVersion;
  uint64_t config_hash = 0;
  uint64_t replica_key = 0;
  uint64_t seed = 0;
  int l_max = 0;
  long total_steps = 0;
  std::string config_echo;  // canonical config text

  // Cadence records: every log_every steps plus every structural-event step.
  std::vector<MetricsRecord> records;
  // Dense per-step series backing the regret and trend computations.
  std::vector<double> step_task_loss;
  std::vector<double> step_grad_norm_sq;
  std::vector<StructuralEvent> events;
  TaskMatrix task_matrix;  // filled at segment ends
};

// Fixed column order, '#' header lines carrying schema/hash/seed/version,
// freq columns padded to l_max with empty cells. Stable byte-for-byte for a
// given log.
void write_metrics_csv(std::ostream& os, const MetricsLog& log);

// Structured summary: final state, event list, task matrix, config echo.
void write_summary_text(std::ostream& os, const MetricsLog& log);

std::string format_event(const StructuralEvent& e);

// Prefix sums of (step_task_loss[t] - oracle[t]). Lengths must match.
std::vector<double> cumulative_regret(const MetricsLog& log, const std::vector<double>& oracle);

// Least-squares fit of log(running mean of grad_norm_sq) against log(t),
// t >= 1. Zero-valued running means are skipped; fewer than 10 usable points
// is an insufficient-data error. Returns (slope, intercept).
std::pair<double, double> grad_norm_trend(const MetricsLog& log);

// Average accuracy and backward transfer. loss_valued flips the BWT sign so
// that more negative still means more forgetting when entries are losses.
// Needs n >= 2.
std::pair<double, double> aa_bwt(const TaskMatrix& tm, bool loss_valued);

// Sample variance of level's frequency across >= 3 replica logs (same
// replica_key, per-step records intersected on t; times where any replica
// lacks the level are skipped). Returns (t, variance) pairs.
std::vector<std::pair<long, double>> freq_variance_across_replicas(
    const std::vector<const MetricsLog*>& logs, int level);

}  // namespace dnh
