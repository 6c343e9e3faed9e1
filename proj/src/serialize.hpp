#ifndef IRBSEG_SRC_SERIALIZE_HPP
#define IRBSEG_SRC_SERIALIZE_HPP

// Internal JSON helpers shared by the run-state, checkpoint and report
// writers. Not part of the public API.

#include <json.hpp>

#include "irbseg/dataset.hpp"
#include "irbseg/metrics.hpp"

namespace irbseg::detail {

inline nlohmann::json report_to_json(const IoUReport& report) {
    nlohmann::json per_iou = nlohmann::json::array();
    for (const auto& v : report.per_class_iou) per_iou.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    nlohmann::json per_acc = nlohmann::json::array();
    for (const auto& v : report.per_class_acc) per_acc.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    return {{"per_class_iou", per_iou},
            {"per_class_acc", per_acc},
            {"miou", report.miou},
            {"macc", report.macc},
            {"ranking_worst_to_best", report.ranking_worst_to_best}};
}

inline IoUReport report_from_json(const nlohmann::json& j) {
    IoUReport report;
    for (const auto& v : j.at("per_class_iou"))
        report.per_class_iou.push_back(v.is_null() ? std::optional<double>{} : std::optional<double>(v.get<double>()));
    for (const auto& v : j.at("per_class_acc"))
        report.per_class_acc.push_back(v.is_null() ? std::optional<double>{} : std::optional<double>(v.get<double>()));
    report.miou = j.at("miou").get<double>();
    report.macc = j.at("macc").get<double>();
    report.ranking_worst_to_best = j.at("ranking_worst_to_best").get<std::vector<int>>();
    return report;
}

inline nlohmann::json class_set_to_json(const ClassSet& cs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : cs.entries()) arr.push_back({{"id", e.id}, {"name", e.name}, {"is_foreground", e.is_foreground}});
    return arr;
}

inline ClassSet class_set_from_json(const nlohmann::json& arr) {
    std::vector<ClassInfo> entries;
    for (const auto& c : arr)
        entries.push_back({c.at("id").get<int>(), c.at("name").get<std::string>(), c.at("is_foreground").get<bool>()});
    return ClassSet(std::move(entries));
}

template <typename T>
nlohmann::json int_map_to_json(const std::map<int, T>& counts) {
    nlohmann::json obj = nlohmann::json::object();
    for (const auto& [id, value] : counts) obj[std::to_string(id)] = value;
    return obj;
}

template <typename T>
std::map<int, T> int_map_from_json(const nlohmann::json& obj) {
    std::map<int, T> counts;
    for (auto it = obj.begin(); it != obj.end(); ++it) counts[std::stoi(it.key())] = it.value().get<T>();
    return counts;
}

}  // namespace irbseg::detail

#endif  // IRBSEG_SRC_SERIALIZE_HPP
