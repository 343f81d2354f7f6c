#pragma once

#include <cstddef>
#include <vector>

#include "cgwp/gaussian.hpp"
#include "cgwp/types.hpp"

namespace cgwp {

enum class Normalization {
  Total,       ///< scale all packets together so that ||chi|| = 1
  Individual,  ///< every packet has unit norm on its own
};

struct LatticeSpec {
  std::size_t n_gwp = 1;
  double spacing = 1.0;
  RVec center;  ///< lattice midpoint; its size fixes the dimension
  CMat A0;      ///< shared width matrix
  Normalization normalization = Normalization::Total;
};

/// Points per axis of the most nearly cubic axis-aligned lattice holding
/// exactly n points, largest extent first (8 -> 4x2, 20 -> 5x4 in 2D).
std::vector<std::size_t> lattice_shape(std::size_t n, std::size_t dim);

/// n_gwp packets with width A0 and zero momenta on an equidistant lattice
/// centred at `center`.
WavePacket grid_packet(const LatticeSpec& spec);

/// Im gamma giving a single packet of width A unit norm.
double unit_norm_gamma_imag(const CMat& A);

}  // namespace cgwp
