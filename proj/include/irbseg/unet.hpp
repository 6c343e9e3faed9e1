#ifndef IRBSEG_UNET_HPP
#define IRBSEG_UNET_HPP

#include <array>
#include <vector>

#include "irbseg/model.hpp"
#include "irbseg/nn.hpp"

namespace irbseg {

/// Small fully-convolutional encoder-decoder with three 2x downsampling
/// stages and concatenation skip connections. base_channels and
/// convs_per_stage control capacity (16/2 is the ~0.5M-parameter default).
class UnetModel final : public SegmentationModel {
public:
    UnetModel(int base_channels, int convs_per_stage);

    std::string name() const override { return "unet"; }
    int num_classes() const override { return num_classes_; }
    int downsampling_factor() const override { return 8; }
    int base_channels() const { return base_; }
    int convs_per_stage() const { return repeats_; }
    std::size_t parameter_count() const;

    void initialize(int num_classes, std::uint64_t seed) override;
    std::vector<double> fit(const DatasetManifest& trainset, const TrainerConfig& config) override;
    Mask8 predict(const Image8& image) const override;
    void save_weights(const std::filesystem::path& file) const override;
    void load_weights(const std::filesystem::path& file) override;

private:
    struct Workspace;

    void forward(const nn::Tensor& input, Workspace& ws) const;
    /// Runs backward from ws.g_logits; adds parameter gradients into grads
    /// (laid out per flatten_order).
    void backward(Workspace& ws, float* grads) const;
    std::vector<nn::Conv2d*> flatten_order();
    std::vector<const nn::Conv2d*> flatten_order() const;
    void require_initialized() const;

    int base_;
    int repeats_;
    int num_classes_ = 0;
    bool initialized_ = false;
    std::array<std::vector<nn::Conv2d>, 4> enc_;  // stage s outputs base * 2^s channels
    std::array<std::vector<nn::Conv2d>, 3> dec_;  // dec_[0] deepest, dec_[2] full resolution
    nn::Conv2d head_;
};

}  // namespace irbseg

#endif  // IRBSEG_UNET_HPP
