#pragma once

#include "cascnn/image.hpp"
#include "cascnn/model.hpp"

namespace cascnn {

// Runs the full-resolution head over a luma image of any size: pads to a
// multiple of 8 by edge replication, crops back, clamps to [0,1] and snaps
// to the 8-bit grid.
Image restore_luma(const CasCnnModel& model, const Image& distorted);

}  // namespace cascnn
