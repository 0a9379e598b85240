#pragma once

namespace riskdrive {

// Lateral shape used for lane-change maneuvers.
//   verbatim   : the printed cubic y(x) = -2 + 2u - 3u^2 + u^3 (u = x / x_r),
//                offset so it starts on the source-lane center. It returns to
//                its start at u = 1, so it never reaches the target lane and is
//                kept only for formula-fidelity checks.
//   smoothstep : y_src + dy * (3u^2 - 2u^3); reaches the target lane center.
enum class LateralProfile { verbatim, smoothstep };

// Cubic lane-change curve evaluated exactly as printed.
// Throws std::domain_error unless x_r > 0 and 0 <= x <= x_r.
double lane_change_y(double x, double x_r);

// Lateral offset from the source-lane center at normalized progress
// u in [0, 1] for a maneuver spanning `delta_y` metres.
double lateral_offset(LateralProfile profile, double u, double delta_y);

// d(offset)/du for the same profile.
double lateral_offset_rate(LateralProfile profile, double u, double delta_y);

}  // namespace riskdrive
