#include "fishtrack/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace fishtrack {

double iou(const BBox& a, const BBox& b) {
    const double ax0 = a.cx - a.w / 2.0, ax1 = a.cx + a.w / 2.0;
    const double ay0 = a.cy - a.h / 2.0, ay1 = a.cy + a.h / 2.0;
    const double bx0 = b.cx - b.w / 2.0, bx1 = b.cx + b.w / 2.0;
    const double by0 = b.cy - b.h / 2.0, by1 = b.cy + b.h / 2.0;

    const double iw = std::min(ax1, bx1) - std::max(ax0, bx0);
    const double ih = std::min(ay1, by1) - std::max(ay0, by0);
    if (iw <= 0.0 || ih <= 0.0)
        return 0.0;

    const double inter = iw * ih;
    const double uni = area(a) + area(b) - inter;
    return inter / uni;
}

double radius(const BBox& b, const ImageGeometry& g) {
    return std::hypot(b.cx - g.center_x, b.cy - g.center_y);
}

BBox interpolate_box(const BBox& start, const BBox& end, double t) {
    if (t < 0.0 || t > 1.0)
        throw std::invalid_argument("interpolate_box: t outside [0,1]");
    return BBox{start.cx + (end.cx - start.cx) * t,
                start.cy + (end.cy - start.cy) * t,
                start.w + (end.w - start.w) * t,
                start.h + (end.h - start.h) * t};
}

BBox extrapolate_box_at(const BBox& a, double fa, const BBox& b, double fb, double target) {
    const double s = (target - fa) / (fb - fa);
    BBox out{a.cx + (b.cx - a.cx) * s,
             a.cy + (b.cy - a.cy) * s,
             a.w + (b.w - a.w) * s,
             a.h + (b.h - a.h) * s};
    out.w = std::max(out.w, kMinBoxSide);
    out.h = std::max(out.h, kMinBoxSide);
    return out;
}

BBox extrapolate_box(const BBox& a, const BBox& b, int steps) {
    if (steps == 0)
        throw std::invalid_argument("extrapolate_box: steps must be nonzero");
    // a sits at time 0 and b at time 1; negative steps count back from a,
    // positive steps count forward from b.
    const double target = steps < 0 ? static_cast<double>(steps) : 1.0 + steps;
    return extrapolate_box_at(a, 0.0, b, 1.0, target);
}

} // namespace fishtrack
