#pragma once

#include <string>
#include <vector>

#include "oracles.hpp"
#include "vgiq/vgiq.hpp"

namespace testutil {

/// n observations in one slice, uniform in a 2x2 degree box.
inline std::vector<vgiq::QualityObservation> random_obs(vgiq::Rng& rng, std::size_t n, double q_min = 0.05,
                                                        vgiq::Slice slice = 0) {
    std::vector<vgiq::QualityObservation> out;
    for (std::size_t i = 0; i < n; ++i) {
        vgiq::QualityObservation o;
        o.observation = {"S" + std::to_string(i), slice, rng.uniform(15.0, 30.0)};
        o.location = {rng.uniform(47.5, 49.5), rng.uniform(7.5, 9.5)};
        o.q = rng.uniform(q_min, 1.0);
        out.push_back(o);
    }
    return out;
}

inline std::vector<oracle::Point> to_points(const std::vector<vgiq::QualityObservation>& obs) {
    std::vector<oracle::Point> out;
    for (const auto& o : obs) out.push_back({o.location.lat, o.location.lon, o.observation.value, o.q});
    return out;
}

inline vgiq::CombinedKernelParams kernel(double ell, double s2, double lambda, double jitter = 0.0) {
    vgiq::CombinedKernelParams p;
    p.matern = {vgiq::Smoothness::ThreeHalves, ell, s2};
    p.quality.lambda = lambda;
    p.jitter = jitter;
    return p;
}

inline oracle::Kernel oracle_kernel(const vgiq::CombinedKernelParams& p) {
    const int twice_nu = p.matern.nu == vgiq::Smoothness::Half ? 1 : p.matern.nu == vgiq::Smoothness::ThreeHalves ? 3 : 5;
    return {twice_nu, p.matern.length_scale, p.matern.variance, p.quality.lambda, p.jitter};
}

/// Small reference + volunteered network with one observation per slice.
inline std::pair<vgiq::Dataset, vgiq::Dataset> small_network(std::uint64_t seed, int n_ref, int n_vgi, int n_slices) {
    vgiq::SyntheticScenarioConfig c;
    c.n_reference = n_ref;
    c.n_volunteered = n_vgi;
    c.n_slices = n_slices;
    c.seed = seed;
    auto sc = vgiq::generate_scenario(c);
    return {sc.reference, sc.volunteered};
}

}  // namespace testutil
