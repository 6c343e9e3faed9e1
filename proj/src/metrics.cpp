#include "irbseg/metrics.hpp"

#include <algorithm>
#include <string>

#include "irbseg/errors.hpp"

namespace irbseg {

ConfusionMatrix::ConfusionMatrix(ClassSet class_set)
    : class_set_(std::move(class_set)),
      counts_(static_cast<std::size_t>(class_set_.size()) * class_set_.size(), 0) {}

void ConfusionMatrix::add(const Mask8& gt, const Mask8& pred) {
    if (gt.height != pred.height || gt.width != pred.width)
        throw ArgumentError("confusion matrix: gt is " + std::to_string(gt.height) + "x" + std::to_string(gt.width) +
                            " but prediction is " + std::to_string(pred.height) + "x" + std::to_string(pred.width));
    const int k = class_set_.size();
    for (std::size_t i = 0; i < gt.data.size(); ++i) {
        const int g = gt.data[i];
        const int p = pred.data[i];
        if (g >= k || p >= k)
            throw ArgumentError("confusion matrix: pixel value " + std::to_string(std::max(g, p)) +
                                " is not a valid class id");
        ++counts_[static_cast<std::size_t>(g) * k + p];
    }
}

std::uint64_t ConfusionMatrix::at(int gt_class, int pred_class) const {
    return counts_[static_cast<std::size_t>(gt_class) * class_set_.size() + pred_class];
}

std::uint64_t ConfusionMatrix::row_sum(int gt_class) const {
    std::uint64_t sum = 0;
    for (int p = 0; p < class_set_.size(); ++p) sum += at(gt_class, p);
    return sum;
}

std::uint64_t ConfusionMatrix::col_sum(int pred_class) const {
    std::uint64_t sum = 0;
    for (int g = 0; g < class_set_.size(); ++g) sum += at(g, pred_class);
    return sum;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t sum = 0;
    for (std::uint64_t c : counts_) sum += c;
    return sum;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (!(class_set_ == other.class_set_)) throw ArgumentError("cannot add confusion matrices over different class sets");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
}

ConfusionMatrix confusion_matrix(std::span<const Mask8> gt_masks, std::span<const Mask8> pred_masks,
                                 const ClassSet& class_set) {
    if (gt_masks.size() != pred_masks.size())
        throw ArgumentError("confusion matrix: " + std::to_string(gt_masks.size()) + " gt masks vs " +
                            std::to_string(pred_masks.size()) + " predictions");
    ConfusionMatrix cm(class_set);
    for (std::size_t i = 0; i < gt_masks.size(); ++i) {
        try {
            cm.add(gt_masks[i], pred_masks[i]);
        } catch (const ArgumentError& e) {
            throw ArgumentError("pair " + std::to_string(i) + ": " + e.what());
        }
    }
    return cm;
}

std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm) {
    const int k = cm.class_set().size();
    std::vector<std::optional<double>> iou(k);
    for (int c = 0; c < k; ++c) {
        const std::uint64_t inter = cm.at(c, c);
        const std::uint64_t uni = cm.row_sum(c) + cm.col_sum(c) - inter;
        if (uni > 0) iou[c] = static_cast<double>(inter) / static_cast<double>(uni);
    }
    return iou;
}

std::vector<std::optional<double>> acc_per_class(const ConfusionMatrix& cm) {
    const int k = cm.class_set().size();
    std::vector<std::optional<double>> acc(k);
    for (int c = 0; c < k; ++c) {
        const std::uint64_t row = cm.row_sum(c);
        if (row > 0) acc[c] = static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
    }
    return acc;
}

namespace {
double mean_defined(const std::vector<std::optional<double>>& per_class, const char* what) {
    double sum = 0.0;
    int count = 0;
    for (const auto& v : per_class) {
        if (v) {
            sum += *v;
            ++count;
        }
    }
    if (count == 0) throw EvaluationError(std::string(what) + ": no class has a defined value");
    return sum / count;
}
}  // namespace

double mean_iou(const std::vector<std::optional<double>>& per_class) { return mean_defined(per_class, "mean_iou"); }
double mean_acc(const std::vector<std::optional<double>>& per_class) { return mean_defined(per_class, "mean_acc"); }

double relative_improvement(double new_value, double baseline) {
    if (baseline <= 0.0) throw ArgumentError("relative_improvement: baseline must be positive");
    return 100.0 * (new_value - baseline) / baseline;
}

std::vector<int> rank_worst_to_best(const std::map<int, double>& foreground_iou) {
    if (foreground_iou.empty()) throw ArgumentError("rank_worst_to_best: empty IoU map");
    std::vector<std::pair<int, double>> items(foreground_iou.begin(), foreground_iou.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
    std::vector<int> ranking;
    ranking.reserve(items.size());
    for (const auto& [id, _] : items) ranking.push_back(id);
    return ranking;
}

IoUReport build_report(const ConfusionMatrix& cm) {
    IoUReport report;
    report.per_class_iou = iou_per_class(cm);
    report.per_class_acc = acc_per_class(cm);
    report.miou = mean_iou(report.per_class_iou);
    report.macc = mean_acc(report.per_class_acc);
    std::map<int, double> fg;
    for (int id : cm.class_set().foreground_ids())
        fg[id] = report.per_class_iou[static_cast<std::size_t>(id)].value_or(0.0);
    report.ranking_worst_to_best = rank_worst_to_best(fg);
    return report;
}

}  // namespace irbseg
