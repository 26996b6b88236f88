#pragma once

#include "permaloc/projection.hpp"
#include "permaloc/tensor.hpp"

#include <array>
#include <string>
#include <vector>

namespace permaloc {

// Toy-scale dual-view segmentation networks. Both emit per-resolution 2-class
// probability maps, coarse to fine, with the finest matching the input size.
// Forward and backward passes are hand-written in double precision so the
// losses' analytic gradients can be checked against finite differences.

struct ConvParams {
    Tensor w;  // (kh, kw, c_in, c_out)
    Tensor b;  // (c_out)
    int stride_h = 1;
    int stride_w = 1;
    int dilation = 1;
};

// Squeeze to half width, then parallel local (3x3) and context (3x3,
// dilation 2) branches, concatenated back to the input channel count.
struct FireParams {
    ConvParams squeeze;
    ConvParams local;
    ConvParams context;
};

// SAME padding, TF convention: output (ceil(h/sh), ceil(w/sw)).
Tensor conv2d(const Tensor& x, const ConvParams& p);
// Accumulates weight gradients into gp (shapes must match p) and returns
// the input gradient.
Tensor conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& gout, ConvParams& gp);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& y, const Tensor& gy);  // y = relu output

// Nearest neighbor: out(y, x) = in(y*ih/th, x*iw/tw), integer floor.
Tensor upsample_nearest(const Tensor& x, int th, int tw);
Tensor upsample_nearest_backward(int ih, int iw, const Tensor& gout);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& g, int ca, Tensor& ga, Tensor& gb);

// Per-pixel softmax over the two class channels.
Tensor softmax2(const Tensor& logits);
Tensor softmax2_backward(const Tensor& probs, const Tensor& gprobs);

Tensor fire_forward(const Tensor& x, const FireParams& p);
Tensor fire_backward(const Tensor& x, const FireParams& p, const Tensor& gout, FireParams& gp);

// Front network: 7x15 stride (1,2) stem, two stride-2 halvings, then three
// decoder stages with skip concatenation (the last concatenates the raw
// input); a 1x1 2-class head after each decoder stage. Predictions coarse to
// fine; for a 64x448 input the map sizes are 32x112, 64x224, 64x448.
struct FrontNetParams {
    ConvParams enc0, enc1, enc2;
    ConvParams dec1, dec2, dec3;
    ConvParams pred1, pred2, pred3;

    // Canonical tensor order for weight files and gradient checks.
    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
};

// BEV network: 3x3 stem, five stride-2 levels each followed by a fire module,
// five decoder levels of upsample + skip concat + 3x3 conv + fire module +
// 1x1 head. Predictions coarse to fine; for 600x500 the map sizes are 38x32,
// 75x63, 150x125, 300x250, 600x500.
struct BevNetParams {
    ConvParams stem;
    std::array<ConvParams, 5> enc;
    std::array<FireParams, 5> enc_fire;
    std::array<ConvParams, 5> dec;   // decoder order: deepest level first
    std::array<FireParams, 5> dec_fire;
    std::array<ConvParams, 5> pred;

    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
};

// Width schedule: base at full resolution, doubling per level, capped at 64.
FrontNetParams make_front_params(int base_width = 8, uint64_t seed = 1);
BevNetParams make_bev_params(int base_width = 8, uint64_t seed = 2);

struct FrontGrads {
    FrontNetParams g;  // same shapes, zero-initialized
    Tensor input;      // dL/d(input image tensor)
};
struct BevGrads {
    BevNetParams g;
    Tensor input;
};

std::vector<Tensor> front_forward(const Tensor& input, const FrontNetParams& p);
std::vector<Tensor> bev_forward(const Tensor& input, const BevNetParams& p);

// gpreds holds dL/d(probability map) per resolution, coarse to fine.
FrontGrads front_backward(const Tensor& input, const FrontNetParams& p,
                          const std::vector<Tensor>& gpreds);
BevGrads bev_backward(const Tensor& input, const BevNetParams& p,
                      const std::vector<Tensor>& gpreds);

Tensor tensor_from_front(const FrontImage& img);
Tensor tensor_from_bev(const BevImage& img);

// Weight file: "DMWT" magic, u32 version, u32 tensor count, then per tensor
// u8 rank, rank u32 dims, float32 values; little-endian, canonical order.
void write_weights(const std::string& path, const std::vector<const Tensor*>& tensors);
std::vector<Tensor> read_weights(const std::string& path);
void load_weights(const std::string& path, std::vector<Tensor*> into);

} // namespace permaloc
