#ifndef IRBSEG_BLEND_HPP
#define IRBSEG_BLEND_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "irbseg/dataset.hpp"
#include "irbseg/errors.hpp"
#include "irbseg/metrics.hpp"
#include "irbseg/spectral.hpp"

namespace irbseg {

enum class InitialMode { random, uniform, explicit_counts };

std::string to_string(InitialMode m);
InitialMode initial_mode_from_string(const std::string& s);

/// How a fixed budget of real images is distributed over the foreground
/// classes. ratio_weights apply worst -> best (default 5:3:2).
struct BlendPolicy {
    int total_budget = 40;
    std::vector<int> ratio_weights = {5, 3, 2};
    InitialMode initial_mode = InitialMode::random;
    std::map<int, int> explicit_counts;  // used when initial_mode == explicit_counts
    std::uint64_t seed = 0;
};

struct BlendAllocation {
    std::map<int, int> per_class_counts;  // foreground class id -> image count
    std::string label;                    // e.g. "40-253"; "40-r" for the random start
    int total() const;
    bool operator==(const BlendAllocation&) const = default;
};

/// Foreground ids ordered worst -> best by IoU; undefined entries must be
/// mapped to 0 by the caller. Ties rank the smaller id as worse.
std::vector<int> rank_classes(const std::map<int, double>& foreground_iou);

/// Splits the budget proportionally to the ratio weights along the ranking
/// (worst class takes the largest weight). Largest-remainder rounding;
/// leftover units go to worse-ranked classes first. Counts sum to the budget.
BlendAllocation allocate_blend(const BlendPolicy& policy, const std::vector<int>& ranking_worst_to_best,
                               const ClassSet& class_set);

/// Uniform split over the foreground classes (remainders to smaller ids);
/// label "N-u".
BlendAllocation uniform_allocation(const BlendPolicy& policy, const ClassSet& class_set);

/// Draws exactly per_class_counts[k] samples, without replacement and
/// seed-deterministically, from the bucket of pool samples whose dominant
/// foreground class is k. Throws CapacityError naming the class and
/// shortfall when a bucket is too small.
std::vector<SampleRecord> select_blend_images(const DatasetManifest& pool, const BlendAllocation& allocation,
                                              std::uint64_t seed);

/// Inputs batch_stylize needs when build_blended_trainset stylizes sources.
struct StylizeSettings {
    SpectralConfig config;
    const DatasetManifest* target_pool = nullptr;
    std::filesystem::path out_dir;
};

/// New training manifest: all source samples (style-transferred when stylize
/// is set) plus the blended real samples untouched; per-sample domain tags
/// are preserved. Throws BuildError on sample_id collisions.
DatasetManifest build_blended_trainset(const DatasetManifest& source, const std::vector<SampleRecord>& blended,
                                       bool stylize, const StylizeSettings* settings);

struct IrbIteration {
    BlendAllocation allocation;
    IoUReport report;
    std::string checkpoint;  // path or tag of the trained model
};

struct IrbRunState {
    BlendPolicy policy;
    ClassSet class_set;  // the ids the allocations and rankings refer to
    std::vector<IrbIteration> iterations;
    std::vector<std::vector<int>> rankings_seen;  // insertion order
    int best = -1;                                // argmax mIoU, ties to the earlier iteration

    const IrbIteration& best_iteration() const;
};

/// Trainer failure inside the loop; carries the failing iteration index and
/// everything recorded before it.
struct LoopError : Error {
    int iteration;
    IrbRunState partial;
    LoopError(const std::string& msg, int iteration_index, IrbRunState partial_state)
        : Error(msg), iteration(iteration_index), partial(std::move(partial_state)) {}
};

struct IrbOptions {
    int max_iterations = 7;
    bool stylize = false;
    SpectralConfig spectral;
    std::filesystem::path work_dir;  // used for stylized images when stylize is on
};

/// Trains a fresh model on a blended trainset and evaluates it on the given
/// validation set; returns the report and a checkpoint reference.
using TrainEvalFn =
    std::function<std::pair<IoUReport, std::string>(const DatasetManifest& trainset, const DatasetManifest& val,
                                                    int iteration)>;

/// Runs the blend -> train -> rank loop: iteration 0 uses the policy's
/// initial allocation, later iterations allocate by the previous ranking, and
/// the loop stops when a derived ranking was already seen or the iteration
/// cap is reached. target_val must be disjoint from target_pool by sample_id.
IrbRunState irb_loop(const BlendPolicy& policy, const DatasetManifest& source, const DatasetManifest& target_pool,
                     const DatasetManifest& target_val, const TrainEvalFn& train_eval, const IrbOptions& options);

void save_run_state(const IrbRunState& state, const std::filesystem::path& path);
IrbRunState load_run_state(const std::filesystem::path& path);

}  // namespace irbseg

#endif  // IRBSEG_BLEND_HPP
