#include "cascnn/restore.hpp"

#include <algorithm>

#include "cascnn/autograd.hpp"

namespace cascnn {

Image restore_luma(const CasCnnModel& model, const Image& distorted) {
    int H = distorted.h, W = distorted.w;
    int ph = (H + 7) / 8 * 8, pw = (W + 7) / 8 * 8;
    Tensor in({1, 1, ph, pw});
    for (int y = 0; y < ph; ++y) {
        int sy = std::min(y, H - 1);
        for (int x = 0; x < pw; ++x)
            in.at(0, 0, y, x) = static_cast<float>(distorted.at(sy, std::min(x, W - 1)));
    }
    Tape tape;
    MultiScaleOutput out = model.forward(tape, tape.leaf(std::move(in), false));
    const Tensor& y1 = tape.value(out.y_full);
    Image restored(H, W);
    restored.id = distorted.id;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) restored.at(y, x) = y1.at(0, 0, y, x);
    return snap_to_8bit(std::move(restored));
}

}  // namespace cascnn
