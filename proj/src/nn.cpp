#include "irbseg/nn.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "irbseg/errors.hpp"

namespace irbseg::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// col has (in_c*k*k) rows of (H*W) output positions.
void im2col(const Tensor& x, int k, int pad, std::vector<float>& col) {
    const int h = x.height, w = x.width, c = x.channels;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    col.resize(static_cast<std::size_t>(c) * k * k * hw);
    std::size_t row = 0;
    for (int ci = 0; ci < c; ++ci) {
        const float* src_plane = x.plane(ci);
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++row) {
                float* dst = col.data() + row * hw;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - pad;
                    float* dst_row = dst + static_cast<std::size_t>(y) * w;
                    if (sy < 0 || sy >= h) {
                        std::memset(dst_row, 0, sizeof(float) * w);
                        continue;
                    }
                    const float* src_row = src_plane + static_cast<std::size_t>(sy) * w;
                    const int shift = kx - pad;  // dst_row[x] = src_row[x + shift]
                    const int x_lo = std::max(0, -shift);
                    const int x_hi = std::min(w, w - shift);
                    if (x_lo > 0) std::memset(dst_row, 0, sizeof(float) * x_lo);
                    if (x_hi > x_lo) std::memcpy(dst_row + x_lo, src_row + x_lo + shift, sizeof(float) * (x_hi - x_lo));
                    if (x_hi < w) std::memset(dst_row + x_hi, 0, sizeof(float) * (w - x_hi));
                }
            }
        }
    }
}

void col2im_accumulate(const std::vector<float>& gcol, int c, int h, int w, int k, int pad, Tensor& gx) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    std::size_t row = 0;
    for (int ci = 0; ci < c; ++ci) {
        float* dst_plane = gx.plane(ci);
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++row) {
                const float* src = gcol.data() + row * hw;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - pad;
                    if (sy < 0 || sy >= h) continue;
                    const float* src_row = src + static_cast<std::size_t>(y) * w;
                    float* dst_row = dst_plane + static_cast<std::size_t>(sy) * w;
                    const int shift = kx - pad;
                    const int x_lo = std::max(0, -shift);
                    const int x_hi = std::min(w, w - shift);
                    for (int x = x_lo; x < x_hi; ++x) dst_row[x + shift] += src_row[x];
                }
            }
        }
    }
}

}  // namespace

void Conv2d::build(int in_channels, int out_channels, int kernel, Rng& rng) {
    in_c = in_channels;
    out_c = out_channels;
    k = kernel;
    pad = kernel / 2;
    const std::size_t fan_in = static_cast<std::size_t>(in_c) * k * k;
    w.resize(static_cast<std::size_t>(out_c) * fan_in);
    b.assign(static_cast<std::size_t>(out_c), 0.0f);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& value : w) value = static_cast<float>(rng.uniform(-bound, bound));
}

void Conv2d::forward(const Tensor& x, Tensor& y, std::vector<float>& col) const {
    const int h = x.height, wd = x.width;
    const std::size_t hw = static_cast<std::size_t>(h) * wd;
    y.reshape(out_c, h, wd);
    if (k == 1) {
        ConstMapMat wm(w.data(), out_c, in_c);
        ConstMapMat xm(x.v.data(), in_c, static_cast<Eigen::Index>(hw));
        MapMat ym(y.v.data(), out_c, static_cast<Eigen::Index>(hw));
        ym.noalias() = wm * xm;
    } else {
        im2col(x, k, pad, col);
        ConstMapMat wm(w.data(), out_c, static_cast<Eigen::Index>(static_cast<std::size_t>(in_c) * k * k));
        ConstMapMat cm(col.data(), static_cast<Eigen::Index>(static_cast<std::size_t>(in_c) * k * k),
                       static_cast<Eigen::Index>(hw));
        MapMat ym(y.v.data(), out_c, static_cast<Eigen::Index>(hw));
        ym.noalias() = wm * cm;
    }
    for (int oc = 0; oc < out_c; ++oc) {
        float* plane = y.plane(oc);
        const float bias = b[static_cast<std::size_t>(oc)];
        for (std::size_t i = 0; i < hw; ++i) plane[i] += bias;
    }
}

void Conv2d::backward(const Tensor& x, const Tensor& gy, Tensor& gx, std::vector<float>& col,
                      std::vector<float>& gcol, float* gw, float* gb, bool want_gx) const {
    const int h = x.height, wd = x.width;
    const std::size_t hw = static_cast<std::size_t>(h) * wd;
    const std::size_t rows = static_cast<std::size_t>(in_c) * k * k;

    ConstMapMat gym(gy.v.data(), out_c, static_cast<Eigen::Index>(hw));
    for (int oc = 0; oc < out_c; ++oc) {
        const float* plane = gy.plane(oc);
        double sum = 0.0;
        for (std::size_t i = 0; i < hw; ++i) sum += plane[i];
        gb[static_cast<std::size_t>(oc)] += static_cast<float>(sum);
    }

    if (k == 1) {
        ConstMapMat xm(x.v.data(), in_c, static_cast<Eigen::Index>(hw));
        Eigen::Map<RowMat> gwm(gw, out_c, in_c);
        gwm.noalias() += gym * xm.transpose();
        if (want_gx) {
            gx.reshape(in_c, h, wd);
            ConstMapMat wm(w.data(), out_c, in_c);
            MapMat gxm(gx.v.data(), in_c, static_cast<Eigen::Index>(hw));
            gxm.noalias() = wm.transpose() * gym;
        }
        return;
    }

    im2col(x, k, pad, col);
    ConstMapMat cm(col.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(hw));
    Eigen::Map<RowMat> gwm(gw, out_c, static_cast<Eigen::Index>(rows));
    gwm.noalias() += gym * cm.transpose();

    if (want_gx) {
        gcol.resize(rows * hw);
        MapMat gcm(gcol.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(hw));
        ConstMapMat wm(w.data(), out_c, static_cast<Eigen::Index>(rows));
        gcm.noalias() = wm.transpose() * gym;
        gx.reshape(in_c, h, wd);
        col2im_accumulate(gcol, in_c, h, wd, k, pad, gx);
    }
}

void relu_inplace(Tensor& t) {
    for (auto& value : t.v)
        if (value < 0.0f) value = 0.0f;
}

void relu_backward_inplace(const Tensor& y, Tensor& gy) {
    for (std::size_t i = 0; i < y.v.size(); ++i)
        if (y.v[i] <= 0.0f) gy.v[i] = 0.0f;
}

void maxpool2_forward(const Tensor& x, Tensor& y, std::vector<std::uint8_t>& idx) {
    if (x.height % 2 != 0 || x.width % 2 != 0) throw ArgumentError("maxpool2: input dimensions must be even");
    const int oh = x.height / 2, ow = x.width / 2;
    y.reshape(x.channels, oh, ow);
    idx.assign(y.size(), 0);
    std::size_t out_i = 0;
    for (int c = 0; c < x.channels; ++c) {
        const float* plane = x.plane(c);
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox, ++out_i) {
                const int sy = oy * 2, sx = ox * 2;
                float best = plane[static_cast<std::size_t>(sy) * x.width + sx];
                std::uint8_t best_k = 0;
                for (std::uint8_t kk = 1; kk < 4; ++kk) {
                    const int dy = kk >> 1, dx = kk & 1;
                    const float val = plane[static_cast<std::size_t>(sy + dy) * x.width + sx + dx];
                    if (val > best) {
                        best = val;
                        best_k = kk;
                    }
                }
                y.v[out_i] = best;
                idx[out_i] = best_k;
            }
        }
    }
}

void maxpool2_backward(const Tensor& gy, const std::vector<std::uint8_t>& idx, Tensor& gx) {
    const int ih = gy.height * 2, iw = gy.width * 2;
    gx.reshape(gy.channels, ih, iw);
    std::size_t out_i = 0;
    for (int c = 0; c < gy.channels; ++c) {
        float* plane = gx.plane(c);
        for (int oy = 0; oy < gy.height; ++oy) {
            for (int ox = 0; ox < gy.width; ++ox, ++out_i) {
                const int dy = idx[out_i] >> 1, dx = idx[out_i] & 1;
                plane[static_cast<std::size_t>(oy * 2 + dy) * iw + ox * 2 + dx] = gy.v[out_i];
            }
        }
    }
}

void upsample2_forward(const Tensor& x, Tensor& y) {
    const int oh = x.height * 2, ow = x.width * 2;
    y.reshape(x.channels, oh, ow);
    for (int c = 0; c < x.channels; ++c) {
        const float* src = x.plane(c);
        float* dst = y.plane(c);
        for (int sy = 0; sy < x.height; ++sy) {
            for (int sx = 0; sx < x.width; ++sx) {
                const float val = src[static_cast<std::size_t>(sy) * x.width + sx];
                const std::size_t base = static_cast<std::size_t>(sy * 2) * ow + sx * 2;
                dst[base] = val;
                dst[base + 1] = val;
                dst[base + ow] = val;
                dst[base + ow + 1] = val;
            }
        }
    }
}

void upsample2_backward(const Tensor& gy, Tensor& gx) {
    const int ih = gy.height / 2, iw = gy.width / 2;
    if (gx.channels != gy.channels || gx.height != ih || gx.width != iw) gx.reshape(gy.channels, ih, iw);
    for (int c = 0; c < gy.channels; ++c) {
        const float* src = gy.plane(c);
        float* dst = gx.plane(c);
        for (int sy = 0; sy < ih; ++sy) {
            for (int sx = 0; sx < iw; ++sx) {
                const std::size_t base = static_cast<std::size_t>(sy * 2) * gy.width + sx * 2;
                dst[static_cast<std::size_t>(sy) * iw + sx] +=
                    src[base] + src[base + 1] + src[base + gy.width] + src[base + gy.width + 1];
            }
        }
    }
}

double softmax_ce_loss(const Tensor& logits, const std::uint8_t* target, Tensor& glogits) {
    const int k = logits.channels;
    const std::size_t hw = static_cast<std::size_t>(logits.height) * logits.width;
    glogits.reshape(k, logits.height, logits.width);
    const double inv_hw = 1.0 / static_cast<double>(hw);
    double loss = 0.0;
    for (std::size_t p = 0; p < hw; ++p) {
        float max_logit = logits.v[p];
        for (int c = 1; c < k; ++c) max_logit = std::max(max_logit, logits.v[static_cast<std::size_t>(c) * hw + p]);
        double sum = 0.0;
        for (int c = 0; c < k; ++c) sum += std::exp(static_cast<double>(logits.v[static_cast<std::size_t>(c) * hw + p]) - max_logit);
        const double log_sum = std::log(sum);
        const int t = target[p];
        loss += -(static_cast<double>(logits.v[static_cast<std::size_t>(t) * hw + p]) - max_logit - log_sum);
        for (int c = 0; c < k; ++c) {
            const double soft =
                std::exp(static_cast<double>(logits.v[static_cast<std::size_t>(c) * hw + p]) - max_logit - log_sum);
            glogits.v[static_cast<std::size_t>(c) * hw + p] = static_cast<float>((soft - (c == t ? 1.0 : 0.0)) * inv_hw);
        }
    }
    return loss * inv_hw;
}

void argmax_channels(const Tensor& logits, std::uint8_t* out) {
    const std::size_t hw = static_cast<std::size_t>(logits.height) * logits.width;
    for (std::size_t p = 0; p < hw; ++p) {
        int best = 0;
        float best_val = logits.v[p];
        for (int c = 1; c < logits.channels; ++c) {
            const float val = logits.v[static_cast<std::size_t>(c) * hw + p];
            if (val > best_val) {
                best_val = val;
                best = c;
            }
        }
        out[p] = static_cast<std::uint8_t>(best);
    }
}

Adam::Adam(std::size_t param_count, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(param_count, 0.0f), v_(param_count, 0.0f) {}

void Adam::begin_step() {
    ++t_;
    bias1_ = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    bias2_ = 1.0 - std::pow(beta2_, static_cast<double>(t_));
}

void Adam::update(float* params, const float* grads, std::size_t count, std::size_t offset) {
    if (offset + count > m_.size()) throw ArgumentError("Adam: parameter block out of range");
    float* m = m_.data() + offset;
    float* v = v_.data() + offset;
    for (std::size_t i = 0; i < count; ++i) {
        const double g = grads[i];
        m[i] = static_cast<float>(beta1_ * m[i] + (1.0 - beta1_) * g);
        v[i] = static_cast<float>(beta2_ * v[i] + (1.0 - beta2_) * g * g);
        const double mhat = m[i] / bias1_;
        const double vhat = v[i] / bias2_;
        params[i] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
}

}  // namespace irbseg::nn
