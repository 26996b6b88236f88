#pragma once

#include "permaloc/io.hpp"
#include "permaloc/tensor.hpp"

#include <vector>

namespace permaloc {

struct LossConfig {
    double omega = 25.0;                 // movable-class weight, >= 1
    std::vector<double> lambdas = {1, 1, 1};  // per-resolution weights, coarse to fine
    int classes = 2;

    static LossConfig front() { return {25.0, {1, 1, 1}, 2}; }
    static LossConfig bev() { return {1000.0, {1, 1, 1, 1, 1}, 2}; }
};

// Class-weighted cross entropy, mean over pixels. pred is (h, w, 2) with
// channel 1 = movable probability; gt is (h, w) with 1 = movable.
double wce_loss(const Tensor& pred, const Tensor& gt, double omega);

// d(wce_loss)/d(pred), same shape as pred.
Tensor wce_loss_grad(const Tensor& pred, const Tensor& gt, double omega);

// Sum of lambda_m * wce_loss(pred_m, gt_m, omega) over resolutions.
double multiscale_loss(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts,
                       const LossConfig& cfg);

std::vector<Tensor> multiscale_loss_grads(const std::vector<Tensor>& preds,
                                          const std::vector<Tensor>& gts, const LossConfig& cfg);

// Coarse cell = 1 iff any covered fine cell is 1; fine (y, x) maps to coarse
// (floor(y*th/h), floor(x*tw/w)), matching nearest-neighbor upsampling.
Tensor any_pool(const Tensor& gt, int th, int tw);

// Ground-truth pyramid for a list of prediction shapes (coarse to fine).
std::vector<Tensor> mask_pyramid(const Tensor& gt,
                                 const std::vector<std::pair<int, int>>& shapes);

Tensor tensor_from_raster(const Raster& raster);

} // namespace permaloc
