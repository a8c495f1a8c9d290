#include "ratlim/kernels.hpp"
#include "ratlim/matrix_boundary.hpp"
#include "ratlim/series.hpp"
#include "ratlim/walks.hpp"

#include <cmath>

namespace ratlim {

SpectralRadius spectral_radius(const WalkSpec& spec) {
  SpectralRadius out;
  if (spec.is_isotropic()) {
    out.value = spherical_transform(spec.profile(), simple_walk_spectral_radius(spec.q()));
    out.method = "spherical transform at rho(P1)";
    return out;
  }
  const Alphabet& alphabet = spec.alphabet();
  if (alphabet.kind() == Alphabet::Kind::free_group && alphabet.rank() == 1) {
    Real c = lattice_tilt(spec);
    Real s = 0;
    for (const auto& [g, p] : spec.steps().steps) {
      int k = 0;
      for (Letter a : g.letters()) k += a;
      s += to_real(p) * std::exp(c * k);
    }
    out.value = s;
    out.method = "minimum of the moment generating function";
    return out;
  }
  if (spec.nearest_neighbour()) {
    SingularityCertificate cert = singularity_radius(spec);
    out.value = 1 / cert.r;
    out.uncertainty = (cert.hi - cert.lo) / (cert.r * cert.r);
    out.method = "first-passage system critical point";
    return out;
  }
  PassageMachinery m(spec);
  CriticalPoint cp = m.critical_point();
  out.value = 1 / cp.r;
  out.uncertainty = (cp.hi - cp.lo) / (cp.r * cp.r);
  out.method = "cone-system critical point";
  return out;
}

}  // namespace ratlim
