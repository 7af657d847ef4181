#pragma once

#include <cmath>
#include <complex>

namespace phasordyn {

/// Complex dq phasor. The real part is the d component, the imaginary part
/// the q component; all quantities are per-unit.
using Phasor = std::complex<double>;

/// Apparent power injected through (u, i): s = p + jq = u * conj(i).
inline Phasor complex_power(Phasor u, Phasor i) { return u * std::conj(i); }

inline bool is_finite(double x) { return std::isfinite(x); }

inline bool is_finite(Phasor z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}

}  // namespace phasordyn
