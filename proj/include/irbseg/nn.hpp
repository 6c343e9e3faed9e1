#ifndef IRBSEG_NN_HPP
#define IRBSEG_NN_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "irbseg/rng.hpp"

namespace irbseg::nn {

/// Dense CHW float tensor.
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int c, int h, int w) : channels(c), height(h), width(w), v(static_cast<std::size_t>(c) * h * w, 0.0f) {}

    void reshape(int c, int h, int w) {
        channels = c;
        height = h;
        width = w;
        v.assign(static_cast<std::size_t>(c) * h * w, 0.0f);
    }
    void zero() { std::fill(v.begin(), v.end(), 0.0f); }
    float* plane(int c) { return v.data() + static_cast<std::size_t>(c) * height * width; }
    const float* plane(int c) const { return v.data() + static_cast<std::size_t>(c) * height * width; }
    std::size_t size() const { return v.size(); }
};

/// Stride-1 convolution with square kernel and zero padding that preserves
/// the spatial size. Weights are (out_c) x (in_c*k*k) row-major.
struct Conv2d {
    int in_c = 0;
    int out_c = 0;
    int k = 3;
    int pad = 1;
    std::vector<float> w;
    std::vector<float> b;

    void build(int in_channels, int out_channels, int kernel, Rng& rng);
    std::size_t weight_count() const { return w.size() + b.size(); }

    void forward(const Tensor& x, Tensor& y, std::vector<float>& col) const;
    /// gy is the gradient at the (pre-activation) output. Accumulates weight
    /// gradients into gw/gb and writes the input gradient into gx.
    void backward(const Tensor& x, const Tensor& gy, Tensor& gx, std::vector<float>& col, std::vector<float>& gcol,
                  float* gw, float* gb, bool want_gx) const;
};

void relu_inplace(Tensor& t);
/// gy := gy * (y > 0), where y is the post-relu output.
void relu_backward_inplace(const Tensor& y, Tensor& gy);

/// 2x2 max pooling, stride 2. Records the argmax offset (0..3, first wins on
/// ties) per output element for the backward pass.
void maxpool2_forward(const Tensor& x, Tensor& y, std::vector<std::uint8_t>& idx);
void maxpool2_backward(const Tensor& gy, const std::vector<std::uint8_t>& idx, Tensor& gx);

/// Nearest-neighbour 2x upsampling.
void upsample2_forward(const Tensor& x, Tensor& y);
/// Accumulates into gx (caller zeroes when needed).
void upsample2_backward(const Tensor& gy, Tensor& gx);

/// Mean pixel-wise softmax cross-entropy against a class-id target; fills
/// glogits with d(loss)/d(logits).
double softmax_ce_loss(const Tensor& logits, const std::uint8_t* target, Tensor& glogits);

/// Per-pixel argmax over channels; ties resolve to the smaller class id.
void argmax_channels(const Tensor& logits, std::uint8_t* out);

/// Adam over a logically flat parameter vector; parameters live in per-layer
/// blocks, addressed by their offset into the flat layout.
class Adam {
public:
    Adam(std::size_t param_count, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    /// Advances the shared timestep; call once per optimization step.
    void begin_step();
    void update(float* params, const float* grads, std::size_t count, std::size_t offset);

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    double bias1_ = 1.0, bias2_ = 1.0;
    std::vector<float> m_, v_;
};

}  // namespace irbseg::nn

#endif  // IRBSEG_NN_HPP
