#include "roar/evaluation/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace roar::evaluation {

namespace {

// Agreeing pairs among `slots` selections, divided by the number of pairs.
double agreement(const std::vector<std::size_t>& counts, std::size_t slots) {
  double agree = 0.0;
  for (std::size_t c : counts) agree += static_cast<double>(c * (c - (c > 0 ? 1 : 0)) / 2);
  return agree / static_cast<double>(slots * (slots - 1) / 2);
}

std::pair<std::size_t, std::size_t> clamp_range(const RoutingTrace& trace, StepRange r) {
  const std::size_t end = std::min(r.end, trace.timesteps);
  if (r.begin >= end) throw std::invalid_argument("empty timestep range");
  return {r.begin, end};
}

}  // namespace

double cross_block_consistency(const RoutingTrace& trace, StepRange range) {
  trace.validate();
  if (trace.blocks < 2) throw std::invalid_argument("cross-block consistency needs L >= 2");
  const auto [t0, t1] = clamp_range(trace, range);
  std::vector<std::size_t> counts(trace.views);
  double total = 0.0;
  for (std::size_t t = t0; t < t1; ++t) {
    for (std::size_t i = 0; i < trace.tokens; ++i) {
      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t l = 0; l < trace.blocks; ++l) ++counts[trace.at(t, l, i)];
      total += agreement(counts, trace.blocks);
    }
  }
  return total / static_cast<double>((t1 - t0) * trace.tokens);
}

double cross_timestep_consistency(const RoutingTrace& trace, StepRange range) {
  trace.validate();
  const auto [t0, t1] = clamp_range(trace, range);
  if (t1 - t0 < 2) throw std::invalid_argument("cross-timestep consistency needs T >= 2");
  std::vector<std::size_t> counts(trace.views);
  double total = 0.0;
  for (std::size_t l = 0; l < trace.blocks; ++l) {
    for (std::size_t i = 0; i < trace.tokens; ++i) {
      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t t = t0; t < t1; ++t) ++counts[trace.at(t, l, i)];
      total += agreement(counts, t1 - t0);
    }
  }
  return total / static_cast<double>(trace.blocks * trace.tokens);
}

double global_consistency(const RoutingTrace& trace, StepRange range) {
  trace.validate();
  const auto [t0, t1] = clamp_range(trace, range);
  const std::size_t slots = (t1 - t0) * trace.blocks;
  if (slots < 2) throw std::invalid_argument("global consistency needs T*L >= 2");
  std::vector<std::size_t> counts(trace.views);
  double total = 0.0;
  for (std::size_t i = 0; i < trace.tokens; ++i) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t t = t0; t < t1; ++t)
      for (std::size_t l = 0; l < trace.blocks; ++l) ++counts[trace.at(t, l, i)];
    total += agreement(counts, slots);
  }
  return total / static_cast<double>(trace.tokens);
}

namespace {

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(var / static_cast<double>(xs.size()));
  return m;
}

ConsistencyRow row_for(const std::vector<RoutingTrace>& traces, auto range_of) {
  std::vector<double> cb, ct, g;
  for (const RoutingTrace& tr : traces) {
    const StepRange r = range_of(tr);
    if (std::min(r.end, tr.timesteps) <= r.begin) continue;
    if (tr.blocks >= 2) cb.push_back(cross_block_consistency(tr, r));
    if (std::min(r.end, tr.timesteps) - r.begin >= 2) ct.push_back(cross_timestep_consistency(tr, r));
    if ((std::min(r.end, tr.timesteps) - r.begin) * tr.blocks >= 2) g.push_back(global_consistency(tr, r));
  }
  return {mean_std(cb), mean_std(ct), mean_std(g)};
}

nlohmann::json ms_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

nlohmann::json row_json(const ConsistencyRow& r) {
  return {{"cross_block", ms_json(r.cross_block)},
          {"cross_timestep", ms_json(r.cross_timestep)},
          {"global", ms_json(r.global)}};
}

}  // namespace

ConsistencyReport consistency_report(const std::vector<RoutingTrace>& traces) {
  if (traces.empty()) throw std::invalid_argument("consistency report needs at least one trace");
  ConsistencyReport rep;
  rep.traces = traces.size();
  rep.all = row_for(traces, [](const RoutingTrace&) { return StepRange{}; });
  auto third = [](std::size_t k) {
    return [k](const RoutingTrace& tr) {
      return StepRange{k * tr.timesteps / 3, (k + 1) * tr.timesteps / 3};
    };
  };
  rep.early = row_for(traces, third(0));
  rep.mid = row_for(traces, third(1));
  rep.late = row_for(traces, third(2));
  return rep;
}

std::string report_json(const ConsistencyReport& report) {
  nlohmann::json j;
  j["traces"] = report.traces;
  j["all"] = row_json(report.all);
  j["early"] = row_json(report.early);
  j["mid"] = row_json(report.mid);
  j["late"] = row_json(report.late);
  return j.dump(2) + "\n";
}

}  // namespace roar::evaluation
