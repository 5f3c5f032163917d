#pragma once

namespace fingersim {

// Sanity band for any temperature value flowing through the system [deg C].
// Values outside it indicate corrupted data or a mis-configured scenario, not
// a plausible lab condition.
inline constexpr double kTemperatureSaneLo = -20.0;
inline constexpr double kTemperatureSaneHi = 120.0;

}  // namespace fingersim
