#pragma once

#include <string>

#include "fit.hpp"

namespace abcf {

// Persists a posterior to a directory:
//   scalars.csv   draw, sigma_eps, b0, b1 [, sigma_u][, sigma_v, rho]
//   mu.csv        draw, one column per unit id (natural-unit prognostic fit)
//   tau.csv       draw, one column per unit id (natural-unit effect)
//   u.csv, v.csv  same layout, written only when the model draws them
//   report.json   model, dimensions, standardization, chain diagnostics
// The directory is created if missing; existing files are overwritten.
void write_draws(const PosteriorDraws& draws, const std::string& dir);

// Reads a directory written by write_draws back into memory.
PosteriorDraws load_draws(const std::string& dir);

// The report.json payload as a string (also what write_draws stores).
std::string report_json(const PosteriorDraws& draws);

}  // namespace abcf
