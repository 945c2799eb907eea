#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "driftlab/fields.hpp"

namespace driftlab {

/// Uniform axis grid: n nodes at lo, lo + h, ..., lo + (n-1) h.
struct Axis {
  double lo = 0;
  double h = 1;
  int n = 2;
  double hi() const { return lo + h * (n - 1); }
};

/// ncomp-component field sampled on a 3-D lattice.  Storage is
/// component-major, then z, y, x with x fastest.
class SpatialLattice {
 public:
  SpatialLattice() = default;
  SpatialLattice(Axis ax, Axis ay, Axis az, int ncomp);

  int ncomp() const { return ncomp_; }
  const Axis& axis(int a) const { return ax_[a]; }
  std::size_t nodes() const {
    return static_cast<std::size_t>(ax_[0].n) * ax_[1].n * ax_[2].n;
  }

  double& at(int comp, int ix, int iy, int iz) {
    return data_[offset(comp, ix, iy, iz)];
  }
  double at(int comp, int ix, int iy, int iz) const {
    return data_[offset(comp, ix, iy, iz)];
  }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool inside(const Vec& x) const;
  /// Trilinear interpolation of every component; 0 outside the box.
  void interp(const Vec& x, double* out) const;
  double interp_comp(int comp, const Vec& x) const;

  /// max over nodes of the component-vector magnitude.
  double sup_magnitude() const;

  /// Crop to the sub-box [lo_idx, lo_idx + n) per axis.
  SpatialLattice crop(const int lo_idx[3], const int n[3]) const;

 private:
  std::size_t offset(int comp, int ix, int iy, int iz) const {
    return ((static_cast<std::size_t>(comp) * ax_[2].n + iz) * ax_[1].n + iy) *
               ax_[0].n +
           ix;
  }

  Axis ax_[3];  // x, y, z
  int ncomp_ = 0;
  std::vector<double> data_;
};

/// Raw binary block: magic "DLBK", version, rank, ncomp, per-axis
/// (n, origin, spacing), then row-major 64-bit floats per component with the
/// last listed axis fastest.
struct BlockHeader {
  std::uint32_t version = 1;
  std::uint32_t rank = 0;
  std::uint32_t ncomp = 1;
  std::vector<std::uint64_t> dims;  // slowest first
  std::vector<double> origin;
  std::vector<double> spacing;
};

void write_block(std::ostream& os, const BlockHeader& h,
                 const std::vector<double>& payload);
std::pair<BlockHeader, std::vector<double>> read_block(std::istream& is);

void write_spatial_lattice(std::ostream& os, const SpatialLattice& lat);
SpatialLattice read_spatial_lattice(std::istream& is);

}  // namespace driftlab
