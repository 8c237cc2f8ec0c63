#pragma once

#include "imm/common.hpp"
#include "imm/schedule.hpp"

#include <limits>

namespace imm {

enum class MappingKind { EtaDecrement, TDecrement, LambdaDecrement, InvEtaIncrement };

// Bootstrap-time mapping r(s,t): a finite decrement from t, clamped at s.
// eta_min/eta_max may be NaN ("auto"), in which case they resolve to
// eta(eps_t) and eta(t_max). t_max = 1 is representable for InvEtaIncrement
// only (1/eta_max := 0 there).
struct MappingFn {
    MappingKind kind = MappingKind::EtaDecrement;
    int k = 12;             // gap exponent; decrement = (range)/2^k
    double eta_min = std::numeric_limits<double>::quiet_NaN();
    double eta_max = std::numeric_limits<double>::quiet_NaN();
    double min_gap = 0.0;   // extra clamp r <= t - min_gap when positive
};

// Fills auto bounds from the schedule and checks the per-kind support
// constraints: EtaDecrement needs t_max < 1; LambdaDecrement needs
// eps_t > 0 and t_max < 1; InvEtaIncrement needs eps_t > 0.
MappingFn resolve_mapping(const MappingFn& map, const FlowSchedule& sched);

// r(s,t). Satisfies s <= r < t whenever the decrement resolves a positive gap,
// and r(s, .) is nondecreasing in t.
double r_map(const MappingFn& map, const FlowSchedule& sched, double s, double t);

}  // namespace imm
