#ifndef IRBSEG_METRICS_HPP
#define IRBSEG_METRICS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "irbseg/dataset.hpp"
#include "irbseg/image.hpp"

namespace irbseg {

/// K x K pixel counts; rows are ground-truth class ids, columns predictions.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(ClassSet class_set);

    /// Accumulates one gt/pred pair. Throws ArgumentError on shape mismatch
    /// or out-of-range class values.
    void add(const Mask8& gt, const Mask8& pred);

    std::uint64_t at(int gt_class, int pred_class) const;
    std::uint64_t row_sum(int gt_class) const;
    std::uint64_t col_sum(int pred_class) const;
    std::uint64_t total() const;
    const ClassSet& class_set() const { return class_set_; }

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);

private:
    ClassSet class_set_;
    std::vector<std::uint64_t> counts_;  // row-major K x K
};

ConfusionMatrix confusion_matrix(std::span<const Mask8> gt_masks, std::span<const Mask8> pred_masks,
                                 const ClassSet& class_set);

/// Per-class IoU = diag / (row + col - diag); nullopt when the union is empty.
std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm);

/// Per-class accuracy (recall) = diag / row; nullopt when the class is absent
/// from the ground truth.
std::vector<std::optional<double>> acc_per_class(const ConfusionMatrix& cm);

/// Arithmetic mean over defined classes, background included.
/// Throws EvaluationError when every class is undefined.
double mean_iou(const std::vector<std::optional<double>>& per_class);
double mean_acc(const std::vector<std::optional<double>>& per_class);

/// 100 * (new_value - baseline) / baseline; baseline must be positive.
double relative_improvement(double new_value, double baseline);

/// Foreground ids ordered worst -> best by IoU; ties rank the smaller id as
/// worse. Throws ArgumentError on an empty map.
std::vector<int> rank_worst_to_best(const std::map<int, double>& foreground_iou);

/// Everything the evaluation step reports for one model on one dataset.
struct IoUReport {
    std::vector<std::optional<double>> per_class_iou;   // indexed by class id, fractions
    std::vector<std::optional<double>> per_class_acc;   // indexed by class id, fractions
    double miou = 0.0;
    double macc = 0.0;
    std::vector<int> ranking_worst_to_best;             // foreground ids only
    bool operator==(const IoUReport&) const = default;
};

/// Builds the full report; undefined foreground IoU ranks as 0 (worst).
IoUReport build_report(const ConfusionMatrix& cm);

}  // namespace irbseg

#endif  // IRBSEG_METRICS_HPP
