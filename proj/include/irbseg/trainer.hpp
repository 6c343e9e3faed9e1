#ifndef IRBSEG_TRAINER_HPP
#define IRBSEG_TRAINER_HPP

#include <filesystem>
#include <memory>
#include <vector>

#include "irbseg/blend.hpp"
#include "irbseg/dataset.hpp"
#include "irbseg/metrics.hpp"
#include "irbseg/model.hpp"

namespace irbseg {

struct TrainResult {
    std::filesystem::path checkpoint_dir;
    std::vector<double> epoch_losses;
};

/// Trains a fresh model on the trainset and writes a checkpoint directory
/// (weights.bin plus a JSON sidecar with class set, config and training log).
TrainResult train_model(const TrainerConfig& config, const DatasetManifest& trainset,
                        const std::filesystem::path& checkpoint_dir);

/// Rebuilds the model stored in a checkpoint directory. When class_set_out is
/// non-null it receives the class set recorded in the sidecar.
std::unique_ptr<SegmentationModel> load_checkpoint(const std::filesystem::path& checkpoint_dir,
                                                   ClassSet* class_set_out = nullptr);

/// Predicts every sample, pools all pixels into one confusion matrix and
/// returns the full report (including the foreground ranking).
IoUReport evaluate_model(const SegmentationModel& model, const DatasetManifest& eval_set);
IoUReport evaluate_checkpoint(const std::filesystem::path& checkpoint_dir, const DatasetManifest& eval_set);

/// Label raster with the input's height and width. Without allow_resize the
/// input must be divisible by the model's downsampling factor; with it, the
/// image is resized for inference and the prediction mapped back.
Mask8 predict_mask(const SegmentationModel& model, const Image8& image, bool allow_resize = false);

/// Adapter used by irb_loop: trains into work_dir/iter_NN/checkpoint and
/// evaluates on the validation set. Every iteration trains from scratch with
/// the same config and seed so iterations stay comparable.
TrainEvalFn make_train_eval(const TrainerConfig& config, const std::filesystem::path& work_dir);

}  // namespace irbseg

#endif  // IRBSEG_TRAINER_HPP
