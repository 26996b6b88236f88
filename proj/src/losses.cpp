#include "permaloc/losses.hpp"

#include <cmath>

namespace permaloc {

namespace {

void check_pair(const Tensor& pred, const Tensor& gt) {
    if (pred.dims.size() != 3 || pred.dims[2] != 2)
        throw std::invalid_argument("prediction must be (h, w, 2)");
    if (gt.dims.size() != 2 || gt.dims[0] != pred.dims[0] || gt.dims[1] != pred.dims[1])
        throw std::invalid_argument("ground-truth mask shape does not match the prediction");
}

} // namespace

double wce_loss(const Tensor& pred, const Tensor& gt, double omega) {
    check_pair(pred, gt);
    const int h = pred.h(), w = pred.w();
    double sum = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const bool movable = gt.at2(y, x) != 0.0;
            const double p = pred.at3(y, x, movable ? 1 : 0);
            sum -= (movable ? omega : 1.0) * std::log(std::max(p, 1e-300));
        }
    }
    return sum / (static_cast<double>(h) * w);
}

Tensor wce_loss_grad(const Tensor& pred, const Tensor& gt, double omega) {
    check_pair(pred, gt);
    const int h = pred.h(), w = pred.w();
    Tensor g(pred.dims);
    const double inv_n = 1.0 / (static_cast<double>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const bool movable = gt.at2(y, x) != 0.0;
            const int ch = movable ? 1 : 0;
            const double p = std::max(pred.at3(y, x, ch), 1e-300);
            g.at3(y, x, ch) = -(movable ? omega : 1.0) * inv_n / p;
        }
    }
    return g;
}

double multiscale_loss(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts,
                       const LossConfig& cfg) {
    if (preds.size() != gts.size() || preds.size() != cfg.lambdas.size())
        throw std::invalid_argument("multiscale loss needs matching prediction/mask/lambda counts");
    double sum = 0;
    for (size_t m = 0; m < preds.size(); ++m) {
        if (cfg.lambdas[m] < 0) throw std::invalid_argument("lambda weights must be non-negative");
        if (cfg.lambdas[m] != 0) sum += cfg.lambdas[m] * wce_loss(preds[m], gts[m], cfg.omega);
    }
    return sum;
}

std::vector<Tensor> multiscale_loss_grads(const std::vector<Tensor>& preds,
                                          const std::vector<Tensor>& gts, const LossConfig& cfg) {
    if (preds.size() != gts.size() || preds.size() != cfg.lambdas.size())
        throw std::invalid_argument("multiscale loss needs matching prediction/mask/lambda counts");
    std::vector<Tensor> grads;
    grads.reserve(preds.size());
    for (size_t m = 0; m < preds.size(); ++m) {
        Tensor g = wce_loss_grad(preds[m], gts[m], cfg.omega);
        for (double& x : g.v) x *= cfg.lambdas[m];
        grads.push_back(std::move(g));
    }
    return grads;
}

Tensor any_pool(const Tensor& gt, int th, int tw) {
    if (gt.dims.size() != 2) throw std::invalid_argument("any_pool expects a rank-2 mask");
    const int h = gt.h(), w = gt.w();
    if (th > h || tw > w) throw std::invalid_argument("any_pool target must not exceed the source");
    Tensor out({th, tw});
    for (int y = 0; y < h; ++y) {
        const int cy = static_cast<int>(static_cast<long long>(y) * th / h);
        for (int x = 0; x < w; ++x) {
            const int cx = static_cast<int>(static_cast<long long>(x) * tw / w);
            if (gt.at2(y, x) != 0.0) out.at2(cy, cx) = 1.0;
        }
    }
    return out;
}

std::vector<Tensor> mask_pyramid(const Tensor& gt,
                                 const std::vector<std::pair<int, int>>& shapes) {
    std::vector<Tensor> out;
    out.reserve(shapes.size());
    for (const auto& [h, w] : shapes) out.push_back(any_pool(gt, h, w));
    return out;
}

Tensor tensor_from_raster(const Raster& raster) {
    Tensor t({static_cast<int>(raster.h), static_cast<int>(raster.w)});
    for (size_t i = 0; i < raster.data.size(); ++i) t.v[i] = raster.data[i];
    return t;
}

} // namespace permaloc
