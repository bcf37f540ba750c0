#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fractalsea {

// Solves the discrete Laplace equation on the pixels flagged in `solve_region` (w x h, row-major).
// Each plane in `planes` supplies Dirichlet values at non-region pixels and receives the harmonic
// solution on region pixels. The canvas border is a zero-flux (Neumann) boundary. Every connected
// component of the region must touch at least one non-region pixel.
void laplace_fill(int width, int height, std::span<const std::uint8_t> solve_region, std::span<float *const> planes);

// 4-connected city-block distance from every pixel to the nearest seed pixel (seed = 0).
// Pixels unreachable from any seed get INT32_MAX.
std::vector<std::int32_t> distance_to(int width, int height, std::span<const std::uint8_t> seeds);

} // namespace fractalsea
