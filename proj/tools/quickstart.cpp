// Minimal library use: analytic coverage at the reference scenario next to a short simulation.

#include <cstdio>

#include "uavcov/uavcov.hpp"

int main() {
    uavcov::SystemParams params;  // 100 GBS/km^2, 120 degree beam, 20 m/s
    params.lambda_b = 50e-6;

    const auto analytic = uavcov::coverage_probability(params);
    const auto sim = uavcov::simulate_summary(params, 20000, /*seed=*/7);

    std::printf("coverage  analytic %.4f  mc %.4f [%.4f, %.4f]\n", analytic.total, sim.coverage.mean,
                sim.coverage.ci_low, sim.coverage.ci_high);
    std::printf("handover  analytic %.4f  mc %.4f [%.4f, %.4f]\n", analytic.handover_prob, sim.handover.mean,
                sim.handover.ci_low, sim.handover.ci_high);
    std::printf("void      analytic %.4f  mc %.4f\n", analytic.void_prob, sim.void_prob.mean);
}
