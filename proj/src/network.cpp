#include "permaloc/network.hpp"

#include "permaloc/rng.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace permaloc {

namespace {

struct PadSpec {
    int oh, ow, top, left;
};

PadSpec same_pad(const Tensor& x, const ConvParams& p) {
    const int kh = p.w.dims[0], kw = p.w.dims[1];
    const int eff_h = (kh - 1) * p.dilation + 1;
    const int eff_w = (kw - 1) * p.dilation + 1;
    PadSpec s;
    s.oh = (x.h() + p.stride_h - 1) / p.stride_h;
    s.ow = (x.w() + p.stride_w - 1) / p.stride_w;
    const int pad_h = std::max((s.oh - 1) * p.stride_h + eff_h - x.h(), 0);
    const int pad_w = std::max((s.ow - 1) * p.stride_w + eff_w - x.w(), 0);
    s.top = pad_h / 2;
    s.left = pad_w / 2;
    return s;
}

void check_conv(const Tensor& x, const ConvParams& p) {
    if (x.dims.size() != 3) throw std::invalid_argument("conv input must be rank 3");
    if (p.w.dims.size() != 4) throw std::invalid_argument("conv kernel must be rank 4");
    if (p.b.dims.size() != 1 || p.b.dims[0] != p.w.dims[3])
        throw std::invalid_argument("conv bias must match the output channel count");
    if (x.dims[2] != p.w.dims[2])
        throw std::invalid_argument("conv input channels do not match the kernel");
}

void add_into(Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("gradient shape mismatch");
    for (size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

ConvParams zero_like(const ConvParams& p) {
    ConvParams g;
    g.w = Tensor(p.w.dims);
    g.b = Tensor(p.b.dims);
    g.stride_h = p.stride_h;
    g.stride_w = p.stride_w;
    g.dilation = p.dilation;
    return g;
}

FireParams zero_like(const FireParams& p) {
    return {zero_like(p.squeeze), zero_like(p.local), zero_like(p.context)};
}

ConvParams make_conv(Rng& rng, int kh, int kw, int cin, int cout, int sh = 1, int sw = 1,
                     int dilation = 1) {
    ConvParams p;
    p.w = Tensor({kh, kw, cin, cout});
    p.b = Tensor({cout});
    p.stride_h = sh;
    p.stride_w = sw;
    p.dilation = dilation;
    const double scale = std::sqrt(2.0 / (kh * kw * cin));
    for (double& v : p.w.v) v = scale * rng.gaussian();
    for (double& v : p.b.v) v = 0.01 * rng.gaussian();
    return p;
}

FireParams make_fire(Rng& rng, int channels) {
    FireParams f;
    const int half = channels / 2;
    f.squeeze = make_conv(rng, 1, 1, channels, half);
    f.local = make_conv(rng, 3, 3, half, half);
    f.context = make_conv(rng, 3, 3, half, half, 1, 1, 2);
    return f;
}

void push(std::vector<Tensor*>& out, ConvParams& p) {
    out.push_back(&p.w);
    out.push_back(&p.b);
}
void push(std::vector<Tensor*>& out, FireParams& p) {
    push(out, p.squeeze);
    push(out, p.local);
    push(out, p.context);
}

} // namespace

Tensor conv2d(const Tensor& x, const ConvParams& p) {
    check_conv(x, p);
    const PadSpec s = same_pad(x, p);
    const int kh = p.w.dims[0], kw = p.w.dims[1], cin = p.w.dims[2], cout = p.w.dims[3];
    Tensor out({s.oh, s.ow, cout});
    for (int oy = 0; oy < s.oh; ++oy) {
        for (int ox = 0; ox < s.ow; ++ox) {
            double* o = &out.at3(oy, ox, 0);
            for (int oc = 0; oc < cout; ++oc) o[oc] = p.b.v[oc];
            for (int ky = 0; ky < kh; ++ky) {
                const int iy = oy * p.stride_h - s.top + ky * p.dilation;
                if (iy < 0 || iy >= x.h()) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    const int ix = ox * p.stride_w - s.left + kx * p.dilation;
                    if (ix < 0 || ix >= x.w()) continue;
                    const double* xi = &x.at3(iy, ix, 0);
                    const double* wk = &p.w.at4(ky, kx, 0, 0);
                    for (int ic = 0; ic < cin; ++ic) {
                        const double xv = xi[ic];
                        if (xv == 0.0) continue;
                        const double* wr = wk + static_cast<size_t>(ic) * cout;
                        for (int oc = 0; oc < cout; ++oc) o[oc] += xv * wr[oc];
                    }
                }
            }
        }
    }
    return out;
}

Tensor conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& gout, ConvParams& gp) {
    check_conv(x, p);
    const PadSpec s = same_pad(x, p);
    const int kh = p.w.dims[0], kw = p.w.dims[1], cin = p.w.dims[2], cout = p.w.dims[3];
    if (gout.dims.size() != 3 || gout.dims[0] != s.oh || gout.dims[1] != s.ow ||
        gout.dims[2] != cout)
        throw std::invalid_argument("conv output gradient shape mismatch");
    Tensor gx(x.dims);
    for (int oy = 0; oy < s.oh; ++oy) {
        for (int ox = 0; ox < s.ow; ++ox) {
            const double* g = &gout.at3(oy, ox, 0);
            for (int oc = 0; oc < cout; ++oc) gp.b.v[oc] += g[oc];
            for (int ky = 0; ky < kh; ++ky) {
                const int iy = oy * p.stride_h - s.top + ky * p.dilation;
                if (iy < 0 || iy >= x.h()) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    const int ix = ox * p.stride_w - s.left + kx * p.dilation;
                    if (ix < 0 || ix >= x.w()) continue;
                    const double* xi = &x.at3(iy, ix, 0);
                    double* gxi = &gx.at3(iy, ix, 0);
                    for (int ic = 0; ic < cin; ++ic) {
                        const double xv = xi[ic];
                        double* gw = &gp.w.at4(ky, kx, ic, 0);
                        const double* wr = &p.w.at4(ky, kx, ic, 0);
                        double acc = 0;
                        for (int oc = 0; oc < cout; ++oc) {
                            gw[oc] += g[oc] * xv;
                            acc += wr[oc] * g[oc];
                        }
                        gxi[ic] += acc;
                    }
                }
            }
        }
    }
    return gx;
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.v) v = std::max(v, 0.0);
    return y;
}

Tensor relu_backward(const Tensor& y, const Tensor& gy) {
    if (!y.same_shape(gy)) throw std::invalid_argument("relu gradient shape mismatch");
    Tensor g = gy;
    for (size_t i = 0; i < g.v.size(); ++i)
        if (y.v[i] <= 0.0) g.v[i] = 0.0;
    return g;
}

Tensor upsample_nearest(const Tensor& x, int th, int tw) {
    const int c = x.c();
    Tensor out({th, tw, c});
    for (int y = 0; y < th; ++y) {
        const int sy = static_cast<int>(static_cast<long long>(y) * x.h() / th);
        for (int xx = 0; xx < tw; ++xx) {
            const int sx = static_cast<int>(static_cast<long long>(xx) * x.w() / tw);
            for (int ch = 0; ch < c; ++ch) out.at3(y, xx, ch) = x.at3(sy, sx, ch);
        }
    }
    return out;
}

Tensor upsample_nearest_backward(int ih, int iw, const Tensor& gout) {
    const int c = gout.c();
    Tensor g({ih, iw, c});
    for (int y = 0; y < gout.h(); ++y) {
        const int sy = static_cast<int>(static_cast<long long>(y) * ih / gout.h());
        for (int xx = 0; xx < gout.w(); ++xx) {
            const int sx = static_cast<int>(static_cast<long long>(xx) * iw / gout.w());
            for (int ch = 0; ch < c; ++ch) g.at3(sy, sx, ch) += gout.at3(y, xx, ch);
        }
    }
    return g;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.h() != b.h() || a.w() != b.w())
        throw std::invalid_argument("concat inputs must share spatial size");
    Tensor out({a.h(), a.w(), a.c() + b.c()});
    for (int y = 0; y < a.h(); ++y) {
        for (int x = 0; x < a.w(); ++x) {
            for (int ch = 0; ch < a.c(); ++ch) out.at3(y, x, ch) = a.at3(y, x, ch);
            for (int ch = 0; ch < b.c(); ++ch) out.at3(y, x, a.c() + ch) = b.at3(y, x, ch);
        }
    }
    return out;
}

void split_channels(const Tensor& g, int ca, Tensor& ga, Tensor& gb) {
    ga = Tensor({g.h(), g.w(), ca});
    gb = Tensor({g.h(), g.w(), g.c() - ca});
    for (int y = 0; y < g.h(); ++y) {
        for (int x = 0; x < g.w(); ++x) {
            for (int ch = 0; ch < ca; ++ch) ga.at3(y, x, ch) = g.at3(y, x, ch);
            for (int ch = ca; ch < g.c(); ++ch) gb.at3(y, x, ch - ca) = g.at3(y, x, ch);
        }
    }
}

Tensor softmax2(const Tensor& logits) {
    if (logits.dims.size() != 3 || logits.dims[2] != 2)
        throw std::invalid_argument("softmax expects two class channels");
    Tensor p = logits;
    for (size_t i = 0; i < p.v.size(); i += 2) {
        const double m = std::max(p.v[i], p.v[i + 1]);
        const double e0 = std::exp(p.v[i] - m);
        const double e1 = std::exp(p.v[i + 1] - m);
        const double inv = 1.0 / (e0 + e1);
        p.v[i] = e0 * inv;
        p.v[i + 1] = e1 * inv;
    }
    return p;
}

Tensor softmax2_backward(const Tensor& probs, const Tensor& gprobs) {
    if (!probs.same_shape(gprobs)) throw std::invalid_argument("softmax gradient shape mismatch");
    Tensor g = gprobs;
    for (size_t i = 0; i < g.v.size(); i += 2) {
        const double p0 = probs.v[i], p1 = probs.v[i + 1];
        const double dot = gprobs.v[i] * p0 + gprobs.v[i + 1] * p1;
        g.v[i] = p0 * (gprobs.v[i] - dot);
        g.v[i + 1] = p1 * (gprobs.v[i + 1] - dot);
    }
    return g;
}

Tensor fire_forward(const Tensor& x, const FireParams& p) {
    const Tensor s = relu(conv2d(x, p.squeeze));
    const Tensor l = relu(conv2d(s, p.local));
    const Tensor ctx = relu(conv2d(s, p.context));
    return concat_channels(l, ctx);
}

Tensor fire_backward(const Tensor& x, const FireParams& p, const Tensor& gout, FireParams& gp) {
    const Tensor s = relu(conv2d(x, p.squeeze));
    const Tensor l = relu(conv2d(s, p.local));
    const Tensor ctx = relu(conv2d(s, p.context));
    Tensor gl, gctx;
    split_channels(gout, l.c(), gl, gctx);
    Tensor gs = conv2d_backward(s, p.local, relu_backward(l, gl), gp.local);
    add_into(gs, conv2d_backward(s, p.context, relu_backward(ctx, gctx), gp.context));
    return conv2d_backward(x, p.squeeze, relu_backward(s, gs), gp.squeeze);
}

std::vector<Tensor*> FrontNetParams::tensors() {
    std::vector<Tensor*> out;
    push(out, enc0);
    push(out, enc1);
    push(out, enc2);
    push(out, dec1);
    push(out, pred1);
    push(out, dec2);
    push(out, pred2);
    push(out, dec3);
    push(out, pred3);
    return out;
}
std::vector<const Tensor*> FrontNetParams::tensors() const {
    auto mut = const_cast<FrontNetParams*>(this)->tensors();
    return {mut.begin(), mut.end()};
}

std::vector<Tensor*> BevNetParams::tensors() {
    std::vector<Tensor*> out;
    push(out, stem);
    for (int l = 0; l < 5; ++l) {
        push(out, enc[l]);
        push(out, enc_fire[l]);
    }
    for (int i = 0; i < 5; ++i) {
        push(out, dec[i]);
        push(out, dec_fire[i]);
        push(out, pred[i]);
    }
    return out;
}
std::vector<const Tensor*> BevNetParams::tensors() const {
    auto mut = const_cast<BevNetParams*>(this)->tensors();
    return {mut.begin(), mut.end()};
}

FrontNetParams make_front_params(int base_width, uint64_t seed) {
    if (base_width < 2 || base_width % 2 != 0)
        throw std::invalid_argument("base width must be a positive even number");
    Rng rng(mix64(seed, 0xf207));
    const int c0 = std::min(base_width, 64);
    const int c1 = std::min(2 * base_width, 64);
    const int c2 = std::min(4 * base_width, 64);
    FrontNetParams p;
    p.enc0 = make_conv(rng, 7, 15, 2, c0, 1, 2);
    p.enc1 = make_conv(rng, 3, 3, c0, c1, 2, 2);
    p.enc2 = make_conv(rng, 3, 3, c1, c2, 2, 2);
    p.dec1 = make_conv(rng, 3, 3, c2 + c1, c1);
    p.pred1 = make_conv(rng, 1, 1, c1, 2);
    p.dec2 = make_conv(rng, 3, 3, c1 + c0, c0);
    p.pred2 = make_conv(rng, 1, 1, c0, 2);
    p.dec3 = make_conv(rng, 3, 3, c0 + 2, c0);
    p.pred3 = make_conv(rng, 1, 1, c0, 2);
    return p;
}

BevNetParams make_bev_params(int base_width, uint64_t seed) {
    if (base_width < 2 || base_width % 2 != 0)
        throw std::invalid_argument("base width must be a positive even number");
    Rng rng(mix64(seed, 0xbe7));
    int w[6];
    for (int l = 0; l < 6; ++l) w[l] = std::min(base_width << l, 64);
    BevNetParams p;
    p.stem = make_conv(rng, 3, 3, 6, w[0]);
    for (int l = 0; l < 5; ++l) {
        p.enc[l] = make_conv(rng, 3, 3, w[l], w[l + 1], 2, 2);
        p.enc_fire[l] = make_fire(rng, w[l + 1]);
    }
    for (int i = 0; i < 5; ++i) {
        const int deep = w[5 - i], skip = w[4 - i];
        p.dec[i] = make_conv(rng, 3, 3, deep + skip, skip);
        p.dec_fire[i] = make_fire(rng, skip);
        p.pred[i] = make_conv(rng, 1, 1, skip, 2);
    }
    return p;
}

std::vector<Tensor> front_forward(const Tensor& input, const FrontNetParams& p) {
    const Tensor x0 = relu(conv2d(input, p.enc0));
    const Tensor x1 = relu(conv2d(x0, p.enc1));
    const Tensor x2 = relu(conv2d(x1, p.enc2));
    const Tensor d1 = relu(conv2d(concat_channels(upsample_nearest(x2, x1.h(), x1.w()), x1), p.dec1));
    const Tensor p1 = softmax2(conv2d(d1, p.pred1));
    const Tensor d2 = relu(conv2d(concat_channels(upsample_nearest(d1, x0.h(), x0.w()), x0), p.dec2));
    const Tensor p2 = softmax2(conv2d(d2, p.pred2));
    const Tensor d3 =
        relu(conv2d(concat_channels(upsample_nearest(d2, input.h(), input.w()), input), p.dec3));
    const Tensor p3 = softmax2(conv2d(d3, p.pred3));
    return {p1, p2, p3};
}

FrontGrads front_backward(const Tensor& input, const FrontNetParams& p,
                          const std::vector<Tensor>& gpreds) {
    if (gpreds.size() != 3) throw std::invalid_argument("front network expects three map gradients");
    const Tensor x0 = relu(conv2d(input, p.enc0));
    const Tensor x1 = relu(conv2d(x0, p.enc1));
    const Tensor x2 = relu(conv2d(x1, p.enc2));
    const Tensor c1 = concat_channels(upsample_nearest(x2, x1.h(), x1.w()), x1);
    const Tensor d1 = relu(conv2d(c1, p.dec1));
    const Tensor p1 = softmax2(conv2d(d1, p.pred1));
    const Tensor c2 = concat_channels(upsample_nearest(d1, x0.h(), x0.w()), x0);
    const Tensor d2 = relu(conv2d(c2, p.dec2));
    const Tensor p2 = softmax2(conv2d(d2, p.pred2));
    const Tensor c3 = concat_channels(upsample_nearest(d2, input.h(), input.w()), input);
    const Tensor d3 = relu(conv2d(c3, p.dec3));
    const Tensor p3 = softmax2(conv2d(d3, p.pred3));

    FrontGrads out;
    out.g.enc0 = zero_like(p.enc0);
    out.g.enc1 = zero_like(p.enc1);
    out.g.enc2 = zero_like(p.enc2);
    out.g.dec1 = zero_like(p.dec1);
    out.g.dec2 = zero_like(p.dec2);
    out.g.dec3 = zero_like(p.dec3);
    out.g.pred1 = zero_like(p.pred1);
    out.g.pred2 = zero_like(p.pred2);
    out.g.pred3 = zero_like(p.pred3);

    // Stage 3 (finest).
    Tensor gd3 = conv2d_backward(d3, p.pred3, softmax2_backward(p3, gpreds[2]), out.g.pred3);
    Tensor gc3 = conv2d_backward(c3, p.dec3, relu_backward(d3, gd3), out.g.dec3);
    Tensor gu3, gin_direct;
    split_channels(gc3, c3.c() - input.c(), gu3, gin_direct);
    Tensor gd2 = upsample_nearest_backward(d2.h(), d2.w(), gu3);

    // Stage 2.
    add_into(gd2, conv2d_backward(d2, p.pred2, softmax2_backward(p2, gpreds[1]), out.g.pred2));
    Tensor gc2 = conv2d_backward(c2, p.dec2, relu_backward(d2, gd2), out.g.dec2);
    Tensor gu2, gx0_skip;
    split_channels(gc2, c2.c() - x0.c(), gu2, gx0_skip);
    Tensor gd1 = upsample_nearest_backward(d1.h(), d1.w(), gu2);

    // Stage 1 (coarsest).
    add_into(gd1, conv2d_backward(d1, p.pred1, softmax2_backward(p1, gpreds[0]), out.g.pred1));
    Tensor gc1 = conv2d_backward(c1, p.dec1, relu_backward(d1, gd1), out.g.dec1);
    Tensor gu1, gx1_skip;
    split_channels(gc1, c1.c() - x1.c(), gu1, gx1_skip);
    Tensor gx2 = upsample_nearest_backward(x2.h(), x2.w(), gu1);

    // Encoder chain.
    Tensor gx1 = conv2d_backward(x1, p.enc2, relu_backward(x2, gx2), out.g.enc2);
    add_into(gx1, gx1_skip);
    Tensor gx0 = conv2d_backward(x0, p.enc1, relu_backward(x1, gx1), out.g.enc1);
    add_into(gx0, gx0_skip);
    Tensor gin = conv2d_backward(input, p.enc0, relu_backward(x0, gx0), out.g.enc0);
    add_into(gin, gin_direct);
    out.input = std::move(gin);
    return out;
}

std::vector<Tensor> bev_forward(const Tensor& input, const BevNetParams& p) {
    std::vector<Tensor> skips;
    skips.push_back(relu(conv2d(input, p.stem)));
    for (int l = 0; l < 5; ++l) {
        const Tensor e = relu(conv2d(skips.back(), p.enc[l]));
        skips.push_back(fire_forward(e, p.enc_fire[l]));
    }
    Tensor cur = skips[5];
    std::vector<Tensor> preds;
    for (int i = 0; i < 5; ++i) {
        const Tensor& skip = skips[4 - i];
        const Tensor cc = concat_channels(upsample_nearest(cur, skip.h(), skip.w()), skip);
        const Tensor d = relu(conv2d(cc, p.dec[i]));
        cur = fire_forward(d, p.dec_fire[i]);
        preds.push_back(softmax2(conv2d(cur, p.pred[i])));
    }
    return preds;
}

BevGrads bev_backward(const Tensor& input, const BevNetParams& p,
                      const std::vector<Tensor>& gpreds) {
    if (gpreds.size() != 5) throw std::invalid_argument("bev network expects five map gradients");
    // Forward pass retaining every activation the reverse sweep needs.
    std::vector<Tensor> skips, enc_pre;  // enc_pre[l] = relu(conv) before the fire module
    skips.push_back(relu(conv2d(input, p.stem)));
    for (int l = 0; l < 5; ++l) {
        enc_pre.push_back(relu(conv2d(skips.back(), p.enc[l])));
        skips.push_back(fire_forward(enc_pre.back(), p.enc_fire[l]));
    }
    std::vector<Tensor> cats, dec_pre, dec_out, probs;
    Tensor cur = skips[5];
    for (int i = 0; i < 5; ++i) {
        const Tensor& skip = skips[4 - i];
        cats.push_back(concat_channels(upsample_nearest(cur, skip.h(), skip.w()), skip));
        dec_pre.push_back(relu(conv2d(cats.back(), p.dec[i])));
        dec_out.push_back(fire_forward(dec_pre.back(), p.dec_fire[i]));
        cur = dec_out.back();
        probs.push_back(softmax2(conv2d(cur, p.pred[i])));
    }

    BevGrads out;
    out.g.stem = zero_like(p.stem);
    for (int l = 0; l < 5; ++l) {
        out.g.enc[l] = zero_like(p.enc[l]);
        out.g.enc_fire[l] = zero_like(p.enc_fire[l]);
        out.g.dec[l] = zero_like(p.dec[l]);
        out.g.dec_fire[l] = zero_like(p.dec_fire[l]);
        out.g.pred[l] = zero_like(p.pred[l]);
    }

    std::vector<Tensor> gskips(6);
    Tensor gcur;  // gradient flowing into dec_out[i]
    for (int i = 4; i >= 0; --i) {
        Tensor g = conv2d_backward(dec_out[i], p.pred[i], softmax2_backward(probs[i], gpreds[i]),
                                   out.g.pred[i]);
        if (i < 4) add_into(g, gcur);
        const Tensor gd = fire_backward(dec_pre[i], p.dec_fire[i], g, out.g.dec_fire[i]);
        const Tensor gcc = conv2d_backward(cats[i], p.dec[i], relu_backward(dec_pre[i], gd),
                                           out.g.dec[i]);
        const Tensor& skip = skips[4 - i];
        Tensor gu, gskip;
        split_channels(gcc, cats[i].c() - skip.c(), gu, gskip);
        const Tensor& src = i == 0 ? skips[5] : dec_out[i - 1];
        Tensor gsrc = upsample_nearest_backward(src.h(), src.w(), gu);
        if (i == 0) {
            gskips[5] = std::move(gsrc);
        } else {
            gcur = std::move(gsrc);
        }
        if (gskips[4 - i].v.empty()) {
            gskips[4 - i] = std::move(gskip);
        } else {
            add_into(gskips[4 - i], gskip);
        }
    }

    for (int l = 4; l >= 0; --l) {
        const Tensor ge = fire_backward(enc_pre[l], p.enc_fire[l], gskips[l + 1], out.g.enc_fire[l]);
        Tensor gprev = conv2d_backward(skips[l], p.enc[l], relu_backward(enc_pre[l], ge),
                                       out.g.enc[l]);
        add_into(gskips[l], gprev);
    }
    out.input = conv2d_backward(input, p.stem, relu_backward(skips[0], gskips[0]), out.g.stem);
    return out;
}

Tensor tensor_from_front(const FrontImage& img) {
    Tensor t({FrontImage::kRows, FrontImage::kCols, 2});
    for (int y = 0; y < FrontImage::kRows; ++y) {
        for (int x = 0; x < FrontImage::kCols; ++x) {
            const int i = FrontImage::index(y, x);
            t.at3(y, x, 0) = img.range[i];
            t.at3(y, x, 1) = img.reflectivity[i];
        }
    }
    return t;
}

Tensor tensor_from_bev(const BevImage& img) {
    Tensor t({BevImage::kRows, BevImage::kCols, 6});
    for (int y = 0; y < BevImage::kRows; ++y) {
        for (int x = 0; x < BevImage::kCols; ++x) {
            const int i = BevImage::index(y, x);
            t.at3(y, x, 0) = img.binary[i];
            t.at3(y, x, 1) = img.count[i];
            t.at3(y, x, 2) = img.mean_reflectivity[i];
            t.at3(y, x, 3) = img.mean_height[i];
            t.at3(y, x, 4) = img.min_height[i];
            t.at3(y, x, 5) = img.max_height[i];
        }
    }
    return t;
}

void write_weights(const std::string& path, const std::vector<const Tensor*>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file: " + path);
    out.write("DMWT", 4);
    const uint32_t version = 1;
    const uint32_t count = static_cast<uint32_t>(tensors.size());
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&count), 4);
    for (const Tensor* t : tensors) {
        const uint8_t rank = static_cast<uint8_t>(t->dims.size());
        out.write(reinterpret_cast<const char*>(&rank), 1);
        for (int d : t->dims) {
            const uint32_t u = static_cast<uint32_t>(d);
            out.write(reinterpret_cast<const char*>(&u), 4);
        }
        for (double v : t->v) {
            const float f = static_cast<float>(v);
            out.write(reinterpret_cast<const char*>(&f), 4);
        }
    }
    if (!out) throw std::runtime_error("malformed file " + path + ": short write");
}

std::vector<Tensor> read_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DMWT", 4) != 0)
        throw std::runtime_error("malformed file " + path + ": bad magic");
    uint32_t version = 0, count = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&count), 4);
    if (!in || version != 1)
        throw std::runtime_error("malformed file " + path + ": unsupported version");
    std::vector<Tensor> tensors;
    for (uint32_t i = 0; i < count; ++i) {
        uint8_t rank = 0;
        in.read(reinterpret_cast<char*>(&rank), 1);
        if (!in || rank == 0 || rank > 4)
            throw std::runtime_error("malformed file " + path + ": bad tensor rank");
        std::vector<int> dims(rank);
        for (int d = 0; d < rank; ++d) {
            uint32_t u = 0;
            in.read(reinterpret_cast<char*>(&u), 4);
            if (!in || u == 0 || u > (1u << 24))
                throw std::runtime_error("malformed file " + path + ": bad tensor dims");
            dims[d] = static_cast<int>(u);
        }
        Tensor t(dims);
        for (double& v : t.v) {
            float f = 0;
            in.read(reinterpret_cast<char*>(&f), 4);
            v = f;
        }
        if (!in) throw std::runtime_error("malformed file " + path + ": truncated payload");
        tensors.push_back(std::move(t));
    }
    return tensors;
}

void load_weights(const std::string& path, std::vector<Tensor*> into) {
    const std::vector<Tensor> loaded = read_weights(path);
    if (loaded.size() != into.size())
        throw std::runtime_error("malformed file " + path + ": tensor count does not match the architecture");
    for (size_t i = 0; i < loaded.size(); ++i) {
        if (loaded[i].dims != into[i]->dims)
            throw std::runtime_error("malformed file " + path + ": tensor " + std::to_string(i) +
                                     " shape does not match the architecture");
        into[i]->v = loaded[i].v;
    }
}

} // namespace permaloc
