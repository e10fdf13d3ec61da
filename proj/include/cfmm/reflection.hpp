#pragma once

// ---------------------------------------------------------------------------
// Two-sided Skorokhod reflection on [0, band].
//
// Given a driving path psi with psi_0 in [0, band], the reflected pair
// (phi, eta) satisfies phi = psi + eta, phi in [0, band], with eta of
// minimal variation: eta increases only while phi sits at 0 and decreases
// only while phi sits at band (complementarity).
//
// For a path interpolated linearly between grid points the exact solution at
// the grid is the clamp recursion
//     phi_i = clamp(phi_{i-1} + (psi_i - psi_{i-1}), 0, band),
// because a monotone segment can touch at most one boundary and sticks to it.
// We run the algebraically identical recursion on the regulator,
//     eta_i = clamp(eta_{i-1}, -psi_i, band - psi_i),
// which keeps eta bit-constant while phi is interior (no rounding drift) and
// lands phi exactly on 0 or band at contacts.  The closed-form sup/inf
// representation of the same map is used as an independent oracle in the
// tests.
// ---------------------------------------------------------------------------

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "cfmm/errors.hpp"

namespace cfmm {

// One grid point of the reflection picture: the free coordinate, its
// reflected position, and the regulator that ties them together.
struct SkorokhodState {
    double psi = 0.0;         // free path value
    double phi = 0.0;         // reflected position, inside [0, band_width]
    double eta_reg = 0.0;     // regulator; phi = psi + eta_reg
    double band_width = 0.0;  // right endpoint of the reflecting interval
};

struct ReflectedPath {
    std::vector<double> phi;  // reflected path, inside [0, band]
    std::vector<double> eta;  // regulator, eta_0 = 0
};

// psi0 is the path value at time zero and must start inside the band; the
// remaining grid values follow in psi_path.  Outputs cover all grid times,
// so their length is psi_path.size() + 1.
inline ReflectedPath reflect_two_sided(std::span<const double> psi_path, double psi0, double band) {
    if (!(band > 0.0)) throw ConfigError("reflect_two_sided: band must be positive");
    double phi0 = psi0;
    // project pure rounding noise; anything farther out is a caller error
    if (phi0 < 0.0 && phi0 >= -1e-12) phi0 = 0.0;
    if (phi0 > band && phi0 <= band + 1e-12) phi0 = band;
    if (phi0 < 0.0 || phi0 > band)
        throw ConfigError("reflect_two_sided: initial point outside [0, band]");

    ReflectedPath out;
    out.phi.resize(psi_path.size() + 1);
    out.eta.resize(psi_path.size() + 1);
    out.phi[0] = phi0;
    out.eta[0] = phi0 - psi0;  // zero up to the projection above
    for (std::size_t i = 0; i < psi_path.size(); ++i) {
        const double lo = -psi_path[i];          // contact at phi = 0
        const double hi = band - psi_path[i];    // contact at phi = band
        const double prev = out.eta[i];
        if (prev <= lo) {
            out.eta[i + 1] = lo;
            out.phi[i + 1] = 0.0;
        } else if (prev >= hi) {
            out.eta[i + 1] = hi;
            out.phi[i + 1] = band;
        } else {
            out.eta[i + 1] = prev;
            out.phi[i + 1] = psi_path[i] + prev;
        }
    }
    return out;
}

}  // namespace cfmm
