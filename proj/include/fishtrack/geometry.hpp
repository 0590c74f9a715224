#pragma once

#include <cmath>

namespace fishtrack {

// Axis-aligned box in image pixels, center-based. Widths and heights are
// strictly positive; coordinates are real-valued, rounding happens only at
// serialization.
struct BBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
};

inline double area(const BBox& b) { return b.w * b.h; }

inline bool valid(const BBox& b) { return b.w > 0.0 && b.h > 0.0; }

// Image frame dimensions plus the radial origin used by the ring partition.
struct ImageGeometry {
    double width = 1024.0;
    double height = 1024.0;
    double center_x = 512.0;
    double center_y = 512.0;
    double max_radius = 512.0;

    static ImageGeometry square(double side) {
        return ImageGeometry{side, side, side / 2.0, side / 2.0, side / 2.0};
    }
};

/// Intersection over union of two valid boxes, in [0,1]. Symmetric.
double iou(const BBox& a, const BBox& b);

/// Euclidean distance of a box center from the image center.
double radius(const BBox& b, const ImageGeometry& g);

/// Componentwise linear blend of center and size; t in [0,1] required.
/// t=0 returns start, t=1 returns end.
BBox interpolate_box(const BBox& start, const BBox& end, double t);

// Linear continuation of the per-frame delta between two boxes observed in
// consecutive frames. steps < 0 places the result before a, steps > 0 after
// b. Width and height are clamped to kMinBoxSide so the result stays valid.
BBox extrapolate_box(const BBox& a, const BBox& b, int steps);

// General form: boxes observed at arbitrary times fa < fb, evaluated at any
// target time (inside or outside [fa, fb]).
BBox extrapolate_box_at(const BBox& a, double fa, const BBox& b, double fb, double target);

inline constexpr double kMinBoxSide = 1.0;

} // namespace fishtrack
