#pragma once

#include "fishtrack/geometry.hpp"

namespace fishtrack {

// Where a detection came from. Motion-only sources (frame-difference
// analogue) cannot see cars that are standing still.
enum class Modality { full, motion_only };

// One detector output box on one frame. Frames are 1-based. det_id is the
// per-frame ordinal assigned at parse time and is used for deterministic
// tie-breaking.
struct Detection {
    int frame = 0;
    BBox box;
    double confidence = 0.0;
    Modality modality = Modality::full;
    int det_id = 0;
};

struct GroundTruthBox {
    int frame = 0;
    int car_id = 0;
    BBox box;
    // False only for cars that never move during the entire sequence.
    bool moving = true;
};

} // namespace fishtrack
