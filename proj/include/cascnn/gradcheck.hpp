#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Central finite-difference gradient checking. The numeric side re-runs
// every operator through the 64-bit serial reference kernels so float
// round-off in the forward pass does not produce false failures.

namespace cascnn::gradcheck {

struct Result {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Per-operator checks (conv2d, transposed_conv2d, avg_pool_2x2,
// upsample_nearest_2x, concat_channels, prelu, mse) at tolerance 1e-3.
std::vector<Result> check_operators(uint64_t seed, double eps = 1e-3);

// Width-1/8 model on an 8x8 input, full multi-scale loss, every parameter
// tensor probed at sampled element positions; tolerance 1e-2.
Result check_model_end_to_end(uint64_t seed, double eps = 1e-3,
                              int samples_per_tensor = 24);

}  // namespace cascnn::gradcheck
