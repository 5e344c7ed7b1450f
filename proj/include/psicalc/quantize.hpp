#pragma once

#include "psicalc/compose.hpp"
#include "psicalc/frameop.hpp"

namespace psicalc {

/// Spatial sampling dual to a Grid3 frequency lattice: n^3 points
/// x = (a dy0, b dy, c dy) with centered indices; the periodic box has side
/// n*dy per horizontal axis and n*dy0 vertically.
struct SpatialGrid {
  Grid3 freq;
  double y0(int a) const { return a * freq.dy0(); }
  double y(int b) const { return b * freq.dy(); }
};

/// Centered 3D transforms between spatial samples and the frequency lattice.
/// Forward (sign -1): uhat(k) = (1/n^3) sum_x u(x) exp(-i k.x);
/// backward (sign +1): u(x) = sum_k uhat(k) exp(+i k.x).
void fft3_centered(GridData3& data, int sign);

/// Applies a differential operator using coefficient samples and spectral
/// derivatives (exact on band-limited data away from aliasing).
GridData3 apply_differential(const FrameOp& op, const SpatialGrid& grid,
                             const GridData3& u);

/// Heisenberg quantization of an x-independent symbol on the given frame:
/// Pu(x) = sum_k p(c(x) k) uhat(k) e^{i k.x}, organized per vertical
/// frequency. The frame shear must be affine in x (the model frame is).
GridData3 quantize_heisenberg(const SampledSymbol& p, const HFrame& frame,
                              const SpatialGrid& grid, const GridData3& u,
                              int threads = 0);

/// Model frame with coefficients periodized to the spatial box, so the
/// operator genuinely acts on the discrete torus: x_i is replaced by
/// (L_i/2pi) sin(2pi x_i / L_i) in the frame coefficients.
HFrame periodized_model_frame(const SpatialGrid& grid);

/// Conjugate-gradient solve of op u = f for a self-adjoint nonnegative
/// differential operator on the spatial grid; the mean component is projected
/// out of both sides (kernels of sublaplacian type contain the constants).
GridData3 cg_solve_operator(const FrameOp& op, const SpatialGrid& grid,
                            const GridData3& f, double tol = 1e-9,
                            int max_iter = 500);

/// Band-limited random data concentrated on pseudo-norm shells
/// [k_lo, k_hi] of the frequency lattice.
GridData3 random_band_data(const SpatialGrid& grid, double k_lo, double k_hi,
                           unsigned seed);

double grid_l2(const GridData3& u);

}  // namespace psicalc
