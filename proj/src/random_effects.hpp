#pragma once

#include <span>

#include "rng.hpp"
#include "variance.hpp"

namespace abcf {

// Post-hoc draws of the marginalized random effects, one per retained
// iteration. The chain itself never conditions on these; they are read off
// the residuals r_j = y_j - f(x_j) at the current variance state.

// u_j ~ N( V_j (w_j/sigma_eps^2) r_j, V_j ), V_j = 1/(1/sigma_u^2 + w_j/sigma_eps^2).
// sigma_u = 0 returns zeros and consumes no randomness.
void draw_u(std::span<const double> r, const VarianceState& vs,
            std::span<const double> w, Rng& rng, std::span<double> u_out);

// Joint (u_j, v_j) from the bivariate posterior with precision
// Sigma^-1 + (w_j/sigma_eps^2) a a^T, a = (1, z_j). Drawn as u from its
// marginal (whole vector first) then v from its conditional given u, so the
// all-controls case reduces exactly, stream included, to draw_u followed by
// conditional-prior v draws. sigma_v = 0 makes the v pass free of randomness.
void draw_uv(std::span<const double> r, const VarianceState& vs,
             std::span<const double> w, std::span<const int> z, Rng& rng,
             std::span<double> u_out, std::span<double> v_out);

}  // namespace abcf
