#include "dst/battery.hpp"

#include <algorithm>
#include <cmath>

#include "dst/common.hpp"

namespace dst {

void BatteryParams::validate(bool allow_empty_range) const {
    if (allow_empty_range) {
        if (!(capacity >= 0.0 && soc_min >= 0.0 && soc_min <= soc_max && soc_max <= capacity)) {
            throw InvalidInput("battery: need 0 <= soc_min <= soc_max <= capacity");
        }
    } else {
        if (!(capacity > 0.0)) {
            throw InvalidInput("battery: capacity must be positive");
        }
        if (!(soc_min >= 0.0 && soc_min < soc_max && soc_max <= capacity)) {
            throw InvalidInput("battery: need 0 <= soc_min < soc_max <= capacity");
        }
    }
    if (!(p_max > 0.0)) {
        throw InvalidInput("battery: p_max must be positive");
    }
    if (!(eta_c > 0.0 && eta_c <= 1.0 && eta_d > 0.0 && eta_d <= 1.0)) {
        throw InvalidInput("battery: efficiencies must lie in (0, 1]");
    }
    if (!(c_deg >= 0.0)) {
        throw InvalidInput("battery: degradation cost must be non-negative");
    }
    if (!(dt > 0.0)) {
        throw InvalidInput("battery: dt must be positive");
    }
}

double next_soc(double soc, const HourlyAction& act, const BatteryParams& battery) {
    return soc + battery.eta_c * act.p_c * battery.dt - (act.p_d * battery.dt) / battery.eta_d;
}

double step_reward(double price, const HourlyAction& act, const BatteryParams& battery) {
    return price * (act.p_d - act.p_c) * battery.dt - battery.c_deg * (act.p_c + act.p_d) * battery.dt;
}

namespace {

std::optional<PlanViolation> check(double soc, const HourlyAction& act, const BatteryParams& b,
                                   std::size_t hour, double& out_soc) {
    if (act.p_c < -kSocTolerance || act.p_d < -kSocTolerance) {
        return PlanViolation{hour, "negative power", soc};
    }
    if (act.p_c > b.p_max + kSocTolerance || act.p_d > b.p_max + kSocTolerance) {
        return PlanViolation{hour, "p_max", soc};
    }
    const double s = next_soc(soc, act, b);
    if (s < b.soc_min - kSocTolerance) {
        return PlanViolation{hour, "soc_min", s};
    }
    if (s > b.soc_max + kSocTolerance) {
        return PlanViolation{hour, "soc_max", s};
    }
    out_soc = std::clamp(s, b.soc_min, b.soc_max);
    return std::nullopt;
}

}  // namespace

StepResult step(const Observation& obs, const HourlyAction& act, const BatteryParams& battery,
                std::size_t trading_dim) {
    if (trading_dim >= obs.prices.size()) {
        throw InvalidInput("step: trading dimension out of range");
    }
    double soc = obs.soc;
    if (auto v = check(obs.soc, act, battery, obs.time, soc)) {
        throw InfeasibleAction("hour " + std::to_string(v->hour) + ": action violates " + v->bound +
                               " (soc would be " + format_double(v->soc, 12, 'g') + ")");
    }
    return {soc, step_reward(obs.prices[trading_dim], act, battery)};
}

std::optional<PlanViolation> validate_plan(double soc0, const std::vector<HourlyAction>& plan,
                                           const BatteryParams& battery) {
    double soc = soc0;
    for (std::size_t h = 0; h < plan.size(); ++h) {
        if (auto v = check(soc, plan[h], battery, h, soc)) {
            return v;
        }
    }
    return std::nullopt;
}

}  // namespace dst
