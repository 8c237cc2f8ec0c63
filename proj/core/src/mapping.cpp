#include "imm/mapping.hpp"

#include <algorithm>
#include <cmath>

namespace imm {

MappingFn resolve_mapping(const MappingFn& map, const FlowSchedule& sched) {
    validate(sched);
    require(map.k >= 0, "mapping: k must be nonnegative");
    require(map.min_gap >= 0.0, "mapping: min_gap must be nonnegative");
    switch (map.kind) {
        case MappingKind::EtaDecrement:
            require(sched.t_max < 1.0, "mapping: EtaDecrement needs t_max < 1 (eta diverges at 1)");
            break;
        case MappingKind::TDecrement:
            break;
        case MappingKind::LambdaDecrement:
            require(sched.eps_t > 0.0 && sched.t_max < 1.0,
                    "mapping: LambdaDecrement needs eps_t > 0 and t_max < 1 (log-SNR diverges)");
            break;
        case MappingKind::InvEtaIncrement:
            require(sched.eps_t > 0.0, "mapping: InvEtaIncrement needs eps_t > 0 (1/eta diverges at 0)");
            break;
    }
    MappingFn out = map;
    if (std::isnan(out.eta_min)) out.eta_min = eta(sched, sched.eps_t);
    if (std::isnan(out.eta_max))
        out.eta_max = sched.t_max < 1.0 ? eta(sched, sched.t_max) : std::numeric_limits<double>::infinity();
    require(out.eta_min >= 0.0 && out.eta_max > out.eta_min, "mapping: need 0 <= eta_min < eta_max");
    return out;
}

double r_map(const MappingFn& map, const FlowSchedule& sched, double s, double t) {
    require(s >= 0.0, "r_map: s must be nonnegative");
    require(t <= sched.t_max, "r_map: t above t_max");
    if (t <= s) return s;

    const double pow2k = std::ldexp(1.0, map.k);
    double raw = s;
    switch (map.kind) {
        case MappingKind::EtaDecrement: {
            const double target = eta(sched, t) - (map.eta_max - map.eta_min) / pow2k;
            raw = target > 0.0 ? eta_inv(sched, target) : 0.0;
            break;
        }
        case MappingKind::TDecrement:
            raw = t - (sched.t_max - sched.eps_t) / pow2k;
            break;
        case MappingKind::LambdaDecrement: {
            // lambda decreases in t, so stepping toward s raises lambda.
            const double lam_max = log_snr(sched, sched.eps_t);
            const double lam_min = log_snr(sched, sched.t_max);
            raw = log_snr_inv(sched, log_snr(sched, t) + (lam_max - lam_min) / pow2k);
            break;
        }
        case MappingKind::InvEtaIncrement: {
            // Works in 1/eta, which decreases in t; t = 1 contributes 1/eta = 0.
            const double inv_t = t < 1.0 ? 1.0 / eta(sched, t) : 0.0;
            const double inv_target = inv_t + (1.0 / map.eta_min - 1.0 / map.eta_max) / pow2k;
            raw = eta_inv(sched, 1.0 / inv_target);
            break;
        }
    }
    if (map.min_gap > 0.0) raw = std::min(raw, t - map.min_gap);
    return std::max(s, raw);
}

}  // namespace imm
