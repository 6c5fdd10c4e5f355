#include "dnh/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "dnh/config.hpp"
#include "dnh/errors.hpp"
#include "dnh/numerics.hpp"

namespace dnh {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string format_event(const StructuralEvent& e) {
  std::string s = event_kind_name(e.kind);
  s += ":" + std::to_string(e.level) + ":" + g17(e.detail);
  if (e.kind == EventKind::prune) s += e.interior ? ":interior" : ":innermost";
  return s;
}

void write_metrics_csv(std::ostream& os, const MetricsLog& log) {
  os << "# schema=" << log.schema << '\n';
  os << "# code_version=" << kCodeVersion << '\n';
  os << "# config_hash=" << hash_hex(log.config_hash) << '\n';
  os << "# replica_key=" << hash_hex(log.replica_key) << '\n';
  os << "# seed=" << log.seed << '\n';
  os << "t,task_loss,meta_loss,L_t";
  for (int l = 1; l <= log.l_max; ++l) os << ",freq_" << l;
  os << ",grad_norm_sq,shift_estimate,event\n";
  for (const auto& r : log.records) {
    os << r.t << ',' << g17(r.task_loss) << ',' << g17(r.meta_loss) << ',' << r.levels;
    for (int l = 0; l < log.l_max; ++l) {
      os << ',';
      if (l < static_cast<int>(r.freqs.size())) os << g17(r.freqs[l]);
    }
    os << ',' << g17(r.grad_norm_sq) << ',' << g17(r.shift_estimate) << ',' << r.event << '\n';
  }
}

void write_summary_text(std::ostream& os, const MetricsLog& log) {
  os << "{\n";
  os << "  \"schema\": " << log.schema << ",\n";
  os << "  \"code_version\": \"" << kCodeVersion << "\",\n";
  os << "  \"config_hash\": \"" << hash_hex(log.config_hash) << "\",\n";
  os << "  \"replica_key\": \"" << hash_hex(log.replica_key) << "\",\n";
  os << "  \"seed\": " << log.seed << ",\n";
  os << "  \"total_steps\": " << log.total_steps << ",\n";
  double cum = 0.0;
  for (double v : log.step_task_loss) cum += v;
  os << "  \"cumulative_task_loss\": " << g17(cum) << ",\n";
  if (!log.records.empty()) {
    const MetricsRecord& last = log.records.back();
    os << "  \"final_levels\": " << last.levels << ",\n";
    os << "  \"final_freqs\": [";
    for (size_t i = 0; i < last.freqs.size(); ++i)
      os << (i ? ", " : "") << g17(last.freqs[i]);
    os << "],\n";
    os << "  \"final_task_loss\": " << g17(last.task_loss) << ",\n";
  }
  os << "  \"events\": [";
  for (size_t i = 0; i < log.events.size(); ++i) {
    const StructuralEvent& e = log.events[i];
    os << (i ? ", " : "") << "{\"t\": " << e.step << ", \"what\": \"" << format_event(e)
       << "\"}";
  }
  os << "],\n";
  os << "  \"task_matrix\": [";
  for (int i = 0; i < log.task_matrix.n; ++i) {
    os << (i ? ", " : "") << "[";
    for (int j = 0; j < log.task_matrix.n; ++j)
      os << (j ? ", " : "") << g17(log.task_matrix.value[i][j]);
    os << "]";
  }
  os << "],\n";
  os << "  \"config\": " << log.config_echo << "}\n";
}

std::vector<double> cumulative_regret(const MetricsLog& log, const std::vector<double>& oracle) {
  require(log.step_task_loss.size() == oracle.size(), ErrorKind::shape,
          "cumulative_regret: per-step series length mismatch");
  std::vector<double> out(oracle.size());
  double acc = 0.0;
  for (size_t i = 0; i < oracle.size(); ++i) {
    acc += log.step_task_loss[i] - oracle[i];
    out[i] = acc;
  }
  return out;
}

std::pair<double, double> grad_norm_trend(const MetricsLog& log) {
  require(!log.step_grad_norm_sq.empty(), ErrorKind::insufficient_data,
          "grad_norm_trend: empty log");
  std::vector<double> xs, ys;
  double running = 0.0;
  for (size_t i = 0; i < log.step_grad_norm_sq.size(); ++i) {
    running += log.step_grad_norm_sq[i];
    double t = static_cast<double>(i + 1);
    double mean = running / t;
    if (mean > 0.0) {
      xs.push_back(std::log(t));
      ys.push_back(std::log(mean));
    }
  }
  require(xs.size() >= 10, ErrorKind::insufficient_data,
          "grad_norm_trend: fewer than 10 usable points");
  return linear_fit(xs, ys);
}

std::pair<double, double> aa_bwt(const TaskMatrix& tm, bool loss_valued) {
  require(tm.n >= 2, ErrorKind::insufficient_data, "aa_bwt: need at least 2 tasks");
  require(static_cast<int>(tm.value.size()) == tm.n, ErrorKind::shape,
          "aa_bwt: task matrix not square");
  for (const auto& row : tm.value)
    require(static_cast<int>(row.size()) == tm.n, ErrorKind::shape,
            "aa_bwt: task matrix not square");
  int last = tm.n - 1;
  double aa = 0.0;
  for (int j = 0; j < tm.n; ++j) aa += tm.value[last][j];
  aa /= tm.n;
  double bwt = 0.0;
  for (int j = 0; j < last; ++j) {
    double moved = tm.value[last][j] - tm.value[j][j];
    bwt += loss_valued ? -moved : moved;
  }
  bwt /= last;
  return {aa, bwt};
}

std::vector<std::pair<long, double>> freq_variance_across_replicas(
    const std::vector<const MetricsLog*>& logs, int level) {
  require(logs.size() >= 3, ErrorKind::config,
          "freq_variance_across_replicas: need at least 3 replicas");
  require(level >= 1, ErrorKind::range, "freq_variance_across_replicas: bad level");
  for (const auto* log : logs)
    require(log->replica_key == logs[0]->replica_key, ErrorKind::config,
            "freq_variance_across_replicas: logs are not replicas of one config");
  // Count record times present in every log; record t values are unique and
  // increasing within one log.
  std::map<long, int> seen;
  for (const auto* log : logs)
    for (const auto& r : log->records) ++seen[r.t];
  std::vector<std::pair<long, double>> out;
  int n = static_cast<int>(logs.size());
  for (const auto& [t, cnt] : seen) {
    if (cnt != n) continue;
    std::vector<double> fs;
    fs.reserve(n);
    for (const auto* log : logs) {
      for (const auto& r : log->records) {
        if (r.t != t) continue;
        if (level <= static_cast<int>(r.freqs.size())) fs.push_back(r.freqs[level - 1]);
        break;
      }
    }
    if (static_cast<int>(fs.size()) != n) continue;  // level missing somewhere
    double mean = 0.0;
    for (double f : fs) mean += f;
    mean /= n;
    double var = 0.0;
    for (double f : fs) var += (f - mean) * (f - mean);
    var /= (n - 1);
    out.emplace_back(t, var);
  }
  return out;
}

}  // namespace dnh
