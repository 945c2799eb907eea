#include "driftlab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace driftlab {

SpatialLattice::SpatialLattice(Axis ax, Axis ay, Axis az, int ncomp)
    : ncomp_(ncomp) {
  ax_[0] = ax;
  ax_[1] = ay;
  ax_[2] = az;
  data_.assign(nodes() * ncomp, 0.0);
}

bool SpatialLattice::inside(const Vec& x) const {
  for (int a = 0; a < 3; ++a)
    if (x[a] < ax_[a].lo || x[a] > ax_[a].hi()) return false;
  return true;
}

void SpatialLattice::interp(const Vec& x, double* out) const {
  for (int c = 0; c < ncomp_; ++c) out[c] = 0.0;
  int i0[3];
  double w[3];
  for (int a = 0; a < 3; ++a) {
    const double s = (x[a] - ax_[a].lo) / ax_[a].h;
    if (s < 0 || s > ax_[a].n - 1) return;
    double fl = std::floor(s);
    if (fl > ax_[a].n - 2) fl = ax_[a].n - 2;
    i0[a] = static_cast<int>(fl);
    w[a] = s - fl;
  }
  for (int corner = 0; corner < 8; ++corner) {
    const int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
    const double wc = (dx ? w[0] : 1 - w[0]) * (dy ? w[1] : 1 - w[1]) *
                      (dz ? w[2] : 1 - w[2]);
    if (wc == 0.0) continue;
    for (int c = 0; c < ncomp_; ++c)
      out[c] += wc * at(c, i0[0] + dx, i0[1] + dy, i0[2] + dz);
  }
}

double SpatialLattice::interp_comp(int comp, const Vec& x) const {
  double buf[8] = {0};
  interp(x, buf);
  return buf[comp];
}

double SpatialLattice::sup_magnitude() const {
  const std::size_t n = nodes();
  double best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double m2 = 0;
    for (int c = 0; c < ncomp_; ++c) {
      const double v = data_[static_cast<std::size_t>(c) * n + i];
      m2 += v * v;
    }
    best = std::max(best, m2);
  }
  return std::sqrt(best);
}

SpatialLattice SpatialLattice::crop(const int lo_idx[3], const int n[3]) const {
  Axis a[3];
  for (int k = 0; k < 3; ++k)
    a[k] = Axis{ax_[k].lo + lo_idx[k] * ax_[k].h, ax_[k].h, n[k]};
  SpatialLattice out(a[0], a[1], a[2], ncomp_);
  for (int c = 0; c < ncomp_; ++c)
    for (int iz = 0; iz < n[2]; ++iz)
      for (int iy = 0; iy < n[1]; ++iy)
        for (int ix = 0; ix < n[0]; ++ix)
          out.at(c, ix, iy, iz) =
              at(c, ix + lo_idx[0], iy + lo_idx[1], iz + lo_idx[2]);
  return out;
}

namespace {
constexpr char kMagic[4] = {'D', 'L', 'B', 'K'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
}  // namespace

void write_block(std::ostream& os, const BlockHeader& h,
                 const std::vector<double>& payload) {
  os.write(kMagic, 4);
  put<std::uint32_t>(os, h.version);
  put<std::uint32_t>(os, h.rank);
  put<std::uint32_t>(os, h.ncomp);
  put<std::uint32_t>(os, 0);
  for (std::uint32_t a = 0; a < h.rank; ++a) {
    put<std::uint64_t>(os, h.dims[a]);
    put<double>(os, h.origin[a]);
    put<double>(os, h.spacing[a]);
  }
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size() * sizeof(double)));
}

std::pair<BlockHeader, std::vector<double>> read_block(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw ConfigInvalid("bad block magic");
  BlockHeader h;
  h.version = get<std::uint32_t>(is);
  h.rank = get<std::uint32_t>(is);
  h.ncomp = get<std::uint32_t>(is);
  get<std::uint32_t>(is);
  std::uint64_t count = h.ncomp;
  for (std::uint32_t a = 0; a < h.rank; ++a) {
    h.dims.push_back(get<std::uint64_t>(is));
    h.origin.push_back(get<double>(is));
    h.spacing.push_back(get<double>(is));
    count *= h.dims.back();
  }
  std::vector<double> payload(count);
  is.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw ConfigInvalid("truncated block payload");
  return {h, std::move(payload)};
}

void write_spatial_lattice(std::ostream& os, const SpatialLattice& lat) {
  BlockHeader h;
  h.rank = 3;
  h.ncomp = static_cast<std::uint32_t>(lat.ncomp());
  // dims slowest-first: z, y, x
  for (int a : {2, 1, 0}) {
    h.dims.push_back(static_cast<std::uint64_t>(lat.axis(a).n));
    h.origin.push_back(lat.axis(a).lo);
    h.spacing.push_back(lat.axis(a).h);
  }
  write_block(os, h, lat.data());
}

SpatialLattice read_spatial_lattice(std::istream& is) {
  auto [h, payload] = read_block(is);
  if (h.rank != 3) throw ConfigInvalid("expected rank-3 lattice block");
  Axis az{h.origin[0], h.spacing[0], static_cast<int>(h.dims[0])};
  Axis ay{h.origin[1], h.spacing[1], static_cast<int>(h.dims[1])};
  Axis ax{h.origin[2], h.spacing[2], static_cast<int>(h.dims[2])};
  SpatialLattice lat(ax, ay, az, static_cast<int>(h.ncomp));
  lat.data() = std::move(payload);
  return lat;
}

}  // namespace driftlab
