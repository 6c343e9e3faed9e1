#ifndef IRBSEG_MODEL_HPP
#define IRBSEG_MODEL_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "irbseg/dataset.hpp"
#include "irbseg/image.hpp"

namespace irbseg {

enum class DeviceHint { auto_select, cpu_only };

std::string to_string(DeviceHint d);
DeviceHint device_hint_from_string(const std::string& s);

struct TrainerConfig {
    int epochs = 10;
    int batch_size = 16;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    int image_height = 64;
    int image_width = 64;
    std::string model_name = "unet";
    DeviceHint device_hint = DeviceHint::cpu_only;
    // Reference-model shape knobs; the default is the ~0.5M-parameter net.
    int base_channels = 16;
    int convs_per_stage = 2;
};

/// Throws ArgumentError when a field is out of range (non-positive sizes, an
/// image size the model cannot downsample, ...).
void validate_trainer_config(const TrainerConfig& config);

/// Behavioural contract every segmentation backend implements. Training and
/// prediction are deterministic for a fixed seed, data and config.
class SegmentationModel {
public:
    virtual ~SegmentationModel() = default;

    virtual std::string name() const = 0;
    virtual int num_classes() const = 0;
    virtual int downsampling_factor() const = 0;

    virtual void initialize(int num_classes, std::uint64_t seed) = 0;

    /// Trains on the manifest's samples (resized to the config's image size
    /// at load); returns the per-epoch mean pixel-wise cross-entropy loss.
    virtual std::vector<double> fit(const DatasetManifest& trainset, const TrainerConfig& config) = 0;

    /// Label raster with the same height and width as the input. The input
    /// dimensions must be divisible by downsampling_factor().
    virtual Mask8 predict(const Image8& image) const = 0;

    virtual void save_weights(const std::filesystem::path& file) const = 0;
    virtual void load_weights(const std::filesystem::path& file) = 0;
};

/// Factory for the built-in models ("unet"); ArgumentError on unknown names.
std::unique_ptr<SegmentationModel> create_model(const TrainerConfig& config);

}  // namespace irbseg

#endif  // IRBSEG_MODEL_HPP
