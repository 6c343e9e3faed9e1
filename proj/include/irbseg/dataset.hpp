#ifndef IRBSEG_DATASET_HPP
#define IRBSEG_DATASET_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "irbseg/image.hpp"

namespace irbseg {

struct ClassInfo {
    int id = 0;
    std::string name;
    bool is_foreground = false;
    bool operator==(const ClassInfo&) const = default;
};

/// Ordered label classes. Ids are consecutive from 0; id 0 is the background
/// and is never a foreground class.
class ClassSet {
public:
    ClassSet() = default;
    explicit ClassSet(std::vector<ClassInfo> entries);  // validates invariants

    /// The default 4-class set: BG, GL, EP, UV.
    static ClassSet oropharyngeal();

    int size() const { return static_cast<int>(entries_.size()); }
    const ClassInfo& at(int id) const;
    const std::vector<ClassInfo>& entries() const { return entries_; }
    std::vector<int> foreground_ids() const;
    bool valid_id(int value) const { return value >= 0 && value < size(); }
    std::optional<int> id_of(const std::string& name) const;
    bool operator==(const ClassSet&) const = default;

private:
    std::vector<ClassInfo> entries_;
};

enum class Domain { source_sim, target_real };
enum class Split { train, val, test };

std::string to_string(Domain d);
std::string to_string(Split s);
Domain domain_from_string(const std::string& s);
Split split_from_string(const std::string& s);

/// One image/mask pair. Paths are absolute once loaded; the histogram maps
/// class id -> pixel count and always sums to height * width.
struct SampleRecord {
    std::string sample_id;
    std::filesystem::path image_path;
    std::filesystem::path mask_path;
    Domain domain = Domain::source_sim;
    std::map<int, std::uint64_t> class_histogram;
};

struct DatasetManifest {
    std::string name;
    Domain domain = Domain::source_sim;
    Split split = Split::train;
    ClassSet class_set;
    std::vector<SampleRecord> samples;
};

/// Reads, fully validates and returns a manifest. Every referenced raster is
/// decoded: image/mask sizes must match, mask values must be valid class ids,
/// and cached histograms must agree with a fresh pixel scan.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes the manifest as JSON with raster paths relative to the output file.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Computes the class histogram of a mask (class id -> pixel count).
std::map<int, std::uint64_t> mask_histogram(const Mask8& mask);

/// Foreground class with the largest pixel count; ties break to the smaller
/// id; nullopt when the sample has no foreground pixels.
std::optional<int> dominant_foreground_class(const SampleRecord& sample, const ClassSet& class_set);

struct SplitFractions {
    double train = 0.0;
    double val = 0.0;
    double test = 0.0;
};

/// Seed-deterministic exact partition; sizes follow largest-remainder
/// rounding of the fractions (remainders tie toward the earlier split).
std::array<DatasetManifest, 3> split_dataset(const DatasetManifest& manifest, const SplitFractions& fractions,
                                             std::uint64_t seed);

}  // namespace irbseg

#endif  // IRBSEG_DATASET_HPP
