#pragma once

#include <string>
#include <vector>

#include "roar/evaluation/trace.hpp"

// Routing consistency as pairwise agreement rates of a token's hard view
// selections: across blocks, across timesteps, or across both jointly.
namespace roar::evaluation {

// Timestep range [begin, end) of a trace; the full range by default.
struct StepRange {
  std::size_t begin = 0, end = static_cast<std::size_t>(-1);
};

double cross_block_consistency(const RoutingTrace& trace, StepRange range = {});
double cross_timestep_consistency(const RoutingTrace& trace, StepRange range = {});
double global_consistency(const RoutingTrace& trace, StepRange range = {});

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population std over traces
};

struct ConsistencyRow {
  MeanStd cross_block, cross_timestep, global;
};

struct ConsistencyReport {
  std::size_t traces = 0;
  ConsistencyRow all;
  ConsistencyRow early, mid, late;  // thirds of the timestep axis
};

// Metrics computed per trace, then averaged over traces.
ConsistencyReport consistency_report(const std::vector<RoutingTrace>& traces);
std::string report_json(const ConsistencyReport& report);

}  // namespace roar::evaluation
